//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{
    apply_regularizer, default_filters, residual_norm, verify_filter_constants, FilterKind,
    FilterSpec, VerificationGrid,
};
use crate::measurements::{delta_est, BatchStats, DeltaRule};
use crate::selection::{
    apriori_alpha, discrepancy_principle, AprioriRule, ChoiceResult, DEFAULT_K_MAX, DEFAULT_Q,
};
use crate::spectral::{self, COUNTEREXAMPLE_MAX_LEVELS};
use crate::study::{
    self, binary_option_truth, mean_table, write_study_outputs, CellResult, FilterConfig,
    RuleConfig, ScenarioConfig, StudyConfig, StudyResult,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "avgreg", version, about = "Regularization from averaged repeated measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average measurements, estimate the noise level and regularize.
    Solve {
        /// Row-major matrix CSV without header.
        #[arg(long)]
        matrix: PathBuf,
        /// One measurement per row, without header.
        #[arg(long)]
        measurements: PathBuf,
        /// tikhonov | iterated:P | tsvd | landweber[:A]
        #[arg(long, default_value = "tikhonov")]
        filter: FilterArg,
        /// dp | dp+es | apriori
        #[arg(long, default_value = "dp")]
        rule: RuleArg,
        /// inv_sqrt_n | sample_std | lil:TAU
        #[arg(long, default_value = "sample_std")]
        delta: DeltaArg,
        /// Geometric factor of the discrepancy grid.
        #[arg(long, default_value_t = DEFAULT_Q)]
        q: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a study from a JSON configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Truncated SVD with the discrepancy principle, with and without emergency
    /// stop, on the adversarial operator `σ_l = 10^{−l}`.
    Counterexample {
        #[arg(long)]
        n_max: usize,
        /// Fix every latent normal to 1.
        #[arg(long)]
        forced: bool,
        /// Replications per n when not forced.
        #[arg(long, default_value_t = 50)]
        replications: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heavy-tailed study on the heat-like operator.
    Heat {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/heat")]
        out: PathBuf,
    },
    /// Differentiation of Monte-Carlo binary option prices.
    Binopt {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/binopt")]
        out: PathBuf,
    },
    /// Grid check of the declared filter constants.
    VerifyFilters {
        /// Replaces the declared Tikhonov C_R.
        #[arg(long, hide = true)]
        tikhonov_c_r: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterArg(pub Option<FilterKind>);

impl FromStr for FilterArg {
    type Err = String;

    /// `None` stands for Landweber with the default step.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let number = |p: &str| p.parse::<f64>().map_err(|_| format!("bad filter parameter {p:?}"));
        match (name, param) {
            ("tikhonov", None) => Ok(Self(Some(FilterKind::Tikhonov))),
            ("tsvd", None) => Ok(Self(Some(FilterKind::Tsvd))),
            ("iterated", Some(p)) => p
                .parse::<u32>()
                .map(|order| Self(Some(FilterKind::IteratedTikhonov { order })))
                .map_err(|_| format!("bad iteration order {p:?}")),
            ("landweber", None) => Ok(Self(None)),
            ("landweber", Some(p)) => Ok(Self(Some(FilterKind::Landweber {
                relaxation: number(p)?,
            }))),
            _ => Err(format!(
                "unknown filter {s:?} (expected tikhonov, iterated:P, tsvd, landweber[:A])"
            )),
        }
    }
}

impl FilterArg {
    fn config(&self) -> FilterConfig {
        match self.0 {
            Some(kind) => FilterConfig::from_kind(kind),
            None => FilterConfig::Landweber { relaxation: None },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleArg {
    Dp,
    DpEs,
    Apriori,
}

impl FromStr for RuleArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dp" => Ok(Self::Dp),
            "dp+es" | "dp_es" => Ok(Self::DpEs),
            "apriori" => Ok(Self::Apriori),
            _ => Err(format!("unknown rule {s:?} (expected dp, dp+es, apriori)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaArg(pub DeltaRule);

impl FromStr for DeltaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "inv_sqrt_n" => Ok(Self(DeltaRule::InvSqrtN)),
            None if s == "sample_std" => Ok(Self(DeltaRule::SampleStd)),
            None if s == "lil" => Ok(Self(DeltaRule::Lil { tau: 1.5 })),
            Some(("lil", tau)) => tau
                .parse::<f64>()
                .map(|tau| Self(DeltaRule::Lil { tau }))
                .map_err(|_| format!("bad LIL factor {tau:?}")),
            _ => Err(format!(
                "unknown noise estimate {s:?} (expected inv_sqrt_n, sample_std, lil[:TAU])"
            )),
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateBatch(_) | Error::StudyFailed { .. } => EXIT_DEGENERATE,
        _ => EXIT_IO,
    }
}

/// Parses `args` and runs the command, writing reports to `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Solve {
            matrix,
            measurements,
            filter,
            rule,
            delta,
            q,
            out: dir,
        } => solve(&matrix, &measurements, filter, rule, delta.0, q, &dir, out),
        Command::Simulate { config, seed, out: dir } => {
            let config = StudyConfig::load(&config)?;
            simulate(config, seed, &dir, out, err)
        }
        Command::Heat { config, seed, out: dir } => {
            let config = match config {
                Some(path) => StudyConfig::load(&path)?,
                None => StudyConfig::heat_default(),
            };
            simulate(config, seed, &dir, out, err)
        }
        Command::Binopt { config, seed, out: dir } => {
            let config = match config {
                Some(path) => StudyConfig::load(&path)?,
                None => StudyConfig::binopt_default(),
            };
            if let ScenarioConfig::BinaryOption { grid, params } = &config.scenario {
                let params = match params {
                    Some(p) => p.params(*grid),
                    None => crate::measurements::BinaryOptionParams::reference(*grid),
                };
                let truth = binary_option_truth(&params)?;
                std::fs::create_dir_all(&dir)?;
                let mut csv = String::from("s0,value,derivative\n");
                for ((s, v), d) in params.s0_grid.iter().zip(&truth.value).zip(&truth.derivative) {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        study::fmt_float(*s),
                        study::fmt_float(*v),
                        study::fmt_float(*d)
                    ));
                }
                crate::io::write_atomic(&dir.join("truth.csv"), csv.as_bytes())?;
            }
            simulate(config, seed, &dir, out, err)
        }
        Command::Counterexample {
            n_max,
            forced,
            replications,
            seed,
            out: dir,
        } => counterexample(n_max, forced, replications, seed.unwrap_or(0), dir.as_deref(), out, err),
        Command::VerifyFilters { tikhonov_c_r } => verify_filters(tikhonov_c_r, out),
    }
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    filter: String,
    rule: &'a str,
    delta_rule: String,
    n: usize,
    choice: &'a ChoiceResult,
    coefficients: &'a [f64],
}

#[allow(clippy::too_many_arguments)]
fn solve(
    matrix: &Path,
    measurements: &Path,
    filter: FilterArg,
    rule: RuleArg,
    delta_rule: DeltaRule,
    q: f64,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32> {
    let a = crate::io::read_matrix_csv(matrix)?;
    let rows = crate::io::read_measurements_csv(measurements)?;
    let op = spectral::svd(&a)?;
    if let Some(i) = rows.iter().position(|r| r.len() != op.data_dim()) {
        return Err(Error::Parse(format!(
            "measurements row {}: {} columns, the matrix has {} rows",
            i + 1,
            rows[i].len(),
            op.data_dim()
        )));
    }
    let spec = filter.config().resolve(&op)?;
    let stats = BatchStats::from_rows(&rows)?;
    let delta = delta_est(&stats, delta_rule)?;
    let y_bar = op.project_data(&stats.mean.coefficients)?;
    let (choice, label) = match rule {
        RuleArg::Dp | RuleArg::DpEs => {
            let emergency = (rule == RuleArg::DpEs).then_some(stats.n);
            let choice = discrepancy_principle(&op, &spec, &y_bar, delta, q, emergency, DEFAULT_K_MAX)?;
            (choice, if emergency.is_some() { "dp+es" } else { "dp" })
        }
        RuleArg::Apriori => {
            let alpha = apriori_alpha(&AprioriRule::InvSqrtNAlpha, delta, stats.n)?;
            let choice = ChoiceResult {
                alpha,
                k: 0,
                residual_at_stop: residual_norm(&op, &spec, alpha, &y_bar)?,
                emergency_triggered: false,
                delta_est_used: delta,
                iterations_evaluated: 1,
            };
            (choice, "apriori")
        }
    };
    let solution = apply_regularizer(&op, &spec, choice.alpha, &y_bar)?;
    let x = op.solution_vector(&solution.x)?;

    std::fs::create_dir_all(dir)?;
    let csv: String = x.iter().map(|v| format!("{}\n", study::fmt_float(*v))).collect();
    crate::io::write_atomic(&dir.join("solution.csv"), csv.as_bytes())?;
    let report = SolveReport {
        filter: spec.label(),
        rule: label,
        delta_rule: delta_rule.label(),
        n: stats.n,
        choice: &choice,
        coefficients: &solution.x.coefficients,
    };
    let json = serde_json::to_string_pretty(&report)?;
    crate::io::write_atomic(&dir.join("choice.json"), json.as_bytes())?;
    writeln!(
        out,
        "alpha = {:e}, k = {}, residual = {:e}, delta_est = {:e}, emergency = {}",
        choice.alpha, choice.k, choice.residual_at_stop, choice.delta_est_used, choice.emergency_triggered
    )?;
    Ok(EXIT_OK)
}

fn simulate(
    mut config: StudyConfig,
    seed: Option<u64>,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    let result = run_with_progress(&config, err)?;
    write_study_outputs(&result, dir)?;
    write!(out, "{}", mean_table(&result))?;
    Ok(EXIT_OK)
}

fn run_with_progress(config: &StudyConfig, err: &mut dyn Write) -> Result<StudyResult> {
    let lines = std::sync::Mutex::new(Vec::new());
    let report = |cell: &CellResult| {
        let median = cell.summary.as_ref().map_or(f64::NAN, |s| s.median);
        lines.lock().expect("progress lock").push(format!(
            "done {} n={} median={median:.4e} failed={}",
            cell.rule, cell.n, cell.failed
        ));
    };
    let result = study::run_study(config, Some(&report));
    for line in lines.into_inner().expect("progress lock") {
        writeln!(err, "{line}")?;
    }
    result
}

fn counterexample(
    n_max: usize,
    forced: bool,
    replications: usize,
    seed: u64,
    dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    if n_max < 2 {
        return Err(Error::Input("--n-max must be >= 2".into()));
    }
    // Levels beyond n(n−1) keep the tail of the noise direction below 1/√n.
    let m = n_max * (n_max - 1) + 8;
    if m > COUNTEREXAMPLE_MAX_LEVELS {
        return Err(Error::Input(format!(
            "--n-max {n_max} needs {m} levels, at most {COUNTEREXAMPLE_MAX_LEVELS} are representable"
        )));
    }
    let config = StudyConfig {
        schema_version: study::SCHEMA_VERSION,
        scenario: ScenarioConfig::Counterexample {
            m,
            forced_latent: forced.then_some(1.0),
        },
        filter: FilterConfig::Tsvd,
        rules: vec![RuleConfig::dp(), RuleConfig::dp_es()],
        delta_rule: DeltaRule::InvSqrtN,
        sample_sizes: (2..=n_max).collect(),
        replications: if forced { 1 } else { replications.max(1) },
        base_seed: seed,
    };
    let result = run_with_progress(&config, err)?;
    if let Some(dir) = dir {
        write_study_outputs(&result, dir)?;
    }
    writeln!(
        out,
        "{:>4} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "n", "100^-n", "alpha(dp)", "err(dp)", "alpha(dp+es)", "err(dp+es)"
    )?;
    for n in 2..=n_max {
        let dp = result.cell("dp", n).expect("dp cell");
        let es = result.cell("dp+es", n).expect("dp+es cell");
        let median_alpha = |c: &CellResult| {
            let alphas: Vec<f64> = c.records.iter().filter(|r| !r.is_failed()).map(|r| r.alpha).collect();
            study::summarize(&alphas).map_or(f64::NAN, |s| s.median)
        };
        let median_error = |c: &CellResult| c.summary.as_ref().map_or(f64::NAN, |s| s.median);
        writeln!(
            out,
            "{n:>4} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            100f64.powi(-(n as i32)),
            median_alpha(dp),
            median_error(dp),
            median_alpha(es),
            median_error(es)
        )?;
    }
    Ok(EXIT_OK)
}

/// `(filter, ν)` pairs checked by `verify-filters`.
pub fn verification_cases(tikhonov_c_r: Option<f64>) -> Vec<(FilterSpec, f64)> {
    let mut cases = Vec::new();
    for spec in default_filters(1.0) {
        let spec = match (spec.kind, tikhonov_c_r) {
            (FilterKind::Tikhonov, Some(c_r)) => FilterSpec { c_r, ..spec },
            _ => spec,
        };
        let nus: Vec<f64> = match spec.qualification {
            Some(q) => vec![0.5, 1.0, q],
            None => vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        };
        for nu in nus {
            cases.push((spec, nu));
        }
    }
    cases
}

fn verify_filters(tikhonov_c_r: Option<f64>, out: &mut dyn Write) -> Result<i32> {
    let grid = VerificationGrid::default();
    let mut all_passed = true;
    writeln!(
        out,
        "{:<24} {:>5} {:>12} {:>12} {:>12} {:>8}  result",
        "filter", "nu", "C_R", "C_F", "C_nu", "trend"
    )?;
    for (spec, nu) in verification_cases(tikhonov_c_r) {
        let report = verify_filter_constants(&spec, 1.0, nu, &grid);
        let status = if report.passed() { "pass" } else { "FAIL" };
        all_passed &= report.passed();
        writeln!(
            out,
            "{:<24} {:>5} {:>12.6} {:>12.6} {:>12.6} {:>8.3}  {status}",
            report.filter,
            nu,
            report.c_r_observed,
            report.c_f_observed,
            report.c_nu_observed,
            report.c_nu_trend
        )?;
        for v in &report.violations {
            writeln!(out, "    {v}")?;
        }
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_VERIFICATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsers() {
        assert_eq!("tikhonov".parse::<FilterArg>().unwrap().0, Some(FilterKind::Tikhonov));
        assert_eq!(
            "iterated:3".parse::<FilterArg>().unwrap().0,
            Some(FilterKind::IteratedTikhonov { order: 3 })
        );
        assert_eq!("landweber".parse::<FilterArg>().unwrap().0, None);
        assert!("spline".parse::<FilterArg>().is_err());
        assert_eq!("dp+es".parse::<RuleArg>().unwrap(), RuleArg::DpEs);
        assert_eq!("lil:2".parse::<DeltaArg>().unwrap().0, DeltaRule::Lil { tau: 2.0 });
        assert!("median".parse::<DeltaArg>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::DegenerateBatch("x".into())), EXIT_DEGENERATE);
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_IO);
    }

    #[test]
    fn verify_filters_passes_by_default_and_fails_when_tampered() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["avgreg", "verify-filters"], &mut out, &mut err), EXIT_OK);
        let mut out = Vec::new();
        assert_eq!(
            run(["avgreg", "verify-filters", "--tikhonov-c-r", "0.5"], &mut out, &mut err),
            EXIT_VERIFICATION
        );
    }
}
