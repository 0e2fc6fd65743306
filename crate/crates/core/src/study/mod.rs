//! Monte-Carlo studies: replicated end-to-end solves and their statistics.

pub mod config;
pub mod scenarios;
pub mod stats;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::apply_regularizer;
use crate::measurements::{delta_est, delta_true, draw_stats};
use crate::selection::{apriori_alpha, certify_stop, discrepancy_principle, DEFAULT_K_MAX};

pub use config::{
    BinaryOptionConfig, FilterConfig, NoiseConfig, RuleConfig, ScenarioConfig, SourceConfig,
    SourceShape, StudyConfig, HEAT_DECAY, SCHEMA_VERSION,
};
pub use scenarios::{
    binary_option_truth, heat_like_operator, integration_matrix, integration_operator,
    normal_cdf, power_decay_operator, BinaryOptionTruth, Problem,
};
pub use stats::{quantile_sorted, rate_fit, summarize, RateFit, Summary};

/// Largest tolerated share of failed replications per (rule, n).
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// One replication under one rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    /// `√weight · ‖R_α Ȳ_n − x̂‖`; NaN when failed.
    pub error: f64,
    pub alpha: f64,
    pub k: usize,
    pub emergency: bool,
    pub delta_true: f64,
    pub delta_est: f64,
    /// Stop-index certificate of a discrepancy choice without emergency exit.
    pub certified: Option<bool>,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    fn failed(replication: usize, delta_true: f64, reason: String) -> Self {
        Self {
            replication,
            error: f64::NAN,
            alpha: f64::NAN,
            k: 0,
            emergency: false,
            delta_true,
            delta_est: f64::NAN,
            certified: None,
            failure: Some(reason),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    /// `δ_true / δ_est`.
    pub fn delta_ratio(&self) -> f64 {
        self.delta_true / self.delta_est
    }
}

/// All replications of one (rule, n) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub rule: String,
    pub file_label: String,
    pub n: usize,
    pub records: Vec<ReplicationRecord>,
    /// Summary over the successful replications.
    pub summary: Option<Summary>,
    pub failed: usize,
}

impl CellResult {
    /// Errors of the successful replications, by replication index.
    pub fn errors(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| !r.is_failed())
            .map(|r| r.error)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub rules: Vec<String>,
    pub sample_sizes: Vec<usize>,
    /// Rule-major: all sample sizes of the first rule, then the next rule.
    pub cells: Vec<CellResult>,
}

impl StudyResult {
    pub fn cell(&self, rule: &str, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.rule == rule && c.n == n)
    }
}

fn replicate(
    problem: &Problem,
    config: &StudyConfig,
    n: usize,
    replication: usize,
) -> Result<Vec<ReplicationRecord>> {
    let stats = draw_stats(
        &problem.noise,
        &problem.y_hat_raw,
        n,
        config.base_seed,
        replication as u64,
    )?;
    let d_true = delta_true(&stats, &problem.y_hat_raw)?;
    let d_est = match delta_est(&stats, config.delta_rule) {
        Ok(d) => d,
        Err(e) if e.is_degenerate() => {
            return Ok(config
                .rules
                .iter()
                .map(|_| ReplicationRecord::failed(replication, d_true, e.to_string()))
                .collect())
        }
        Err(e) => return Err(e),
    };
    let y_bar = problem.op.project_data(&stats.mean.coefficients)?;

    let mut records = Vec::with_capacity(config.rules.len());
    for rule in &config.rules {
        let (alpha, k, emergency, certified) = match *rule {
            RuleConfig::Discrepancy { q, emergency } => {
                let choice = match discrepancy_principle(
                    &problem.op,
                    &problem.filter,
                    &y_bar,
                    d_est,
                    q,
                    emergency.then_some(n),
                    DEFAULT_K_MAX,
                ) {
                    Ok(c) => c,
                    Err(e @ Error::NonTermination { .. }) => {
                        records.push(ReplicationRecord::failed(replication, d_true, e.to_string()));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let certified = if choice.emergency_triggered {
                    None
                } else {
                    Some(certify_stop(&problem.op, &problem.filter, &y_bar, q, &choice)?)
                };
                (choice.alpha, choice.k, choice.emergency_triggered, certified)
            }
            RuleConfig::Apriori { rule } => (apriori_alpha(&rule, d_est, n)?, 0, false, None),
        };
        let solution = apply_regularizer(&problem.op, &problem.filter, alpha, &y_bar)?;
        records.push(ReplicationRecord {
            replication,
            error: problem.error(&solution.x)?,
            alpha,
            k,
            emergency,
            delta_true: d_true,
            delta_est: d_est,
            certified,
            failure: None,
        });
    }
    Ok(records)
}

/// Runs every rule at every sample size for all replications. Replication
/// `r` draws its batch from substream `r` of `base_seed`, so all rules see
/// the same data. `progress` is called once per completed (rule, n).
pub fn run_study(
    config: &StudyConfig,
    progress: Option<&(dyn Fn(&CellResult) + Sync)>,
) -> Result<StudyResult> {
    let problem = Problem::from_config(config)?;
    run_study_with(&problem, config, progress)
}

/// [`run_study`] on a prepared problem.
pub fn run_study_with(
    problem: &Problem,
    config: &StudyConfig,
    progress: Option<&(dyn Fn(&CellResult) + Sync)>,
) -> Result<StudyResult> {
    config.validate()?;
    let rules = config.rules.len();
    let mut per_rule: Vec<Vec<CellResult>> = vec![Vec::new(); rules];
    for &n in &config.sample_sizes {
        let rows: Vec<Vec<ReplicationRecord>> = (0..config.replications)
            .into_par_iter()
            .map(|r| replicate(problem, config, n, r))
            .collect::<Result<_>>()?;
        for (i, rule) in config.rules.iter().enumerate() {
            let records: Vec<ReplicationRecord> = rows.iter().map(|row| row[i].clone()).collect();
            let failed = records.iter().filter(|r| r.is_failed()).count();
            let errors: Vec<f64> = records.iter().filter(|r| !r.is_failed()).map(|r| r.error).collect();
            let summary = if errors.is_empty() {
                None
            } else {
                Some(summarize(&errors)?)
            };
            let cell = CellResult {
                rule: rule.label(),
                file_label: rule.file_label(),
                n,
                records,
                summary,
                failed,
            };
            if let Some(report) = progress {
                report(&cell);
            }
            if failed as f64 > MAX_FAILURE_FRACTION * config.replications as f64 {
                return Err(Error::StudyFailed {
                    failed,
                    total: config.replications,
                });
            }
            per_rule[i].push(cell);
        }
    }
    Ok(StudyResult {
        rules: config.rules.iter().map(|r| r.label()).collect(),
        sample_sizes: config.sample_sizes.clone(),
        cells: per_rule.into_iter().flatten().collect(),
    })
}

/// Floats with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV of one (rule, n) cell.
pub fn cell_csv(cell: &CellResult) -> String {
    let mut out = String::from("replication,error,alpha,k,emergency,delta_true,delta_est\n");
    for r in &cell.records {
        let k = if r.is_failed() { String::new() } else { r.k.to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.replication,
            fmt_float(r.error),
            fmt_float(r.alpha),
            k,
            r.emergency,
            fmt_float(r.delta_true),
            fmt_float(r.delta_est)
        );
    }
    out
}

pub fn summary_csv(result: &StudyResult) -> String {
    let mut out = String::from("rule,n,mean,median,q1,q3,outliers,max\n");
    for cell in &result.cells {
        match &cell.summary {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    cell.rule,
                    cell.n,
                    fmt_float(s.mean),
                    fmt_float(s.median),
                    fmt_float(s.q1),
                    fmt_float(s.q3),
                    s.outliers,
                    fmt_float(s.max)
                );
            }
            None => {
                let _ = writeln!(out, "{},{},NaN,NaN,NaN,NaN,0,NaN", cell.rule, cell.n);
            }
        }
    }
    out
}

pub fn cell_file_name(cell: &CellResult) -> String {
    format!("{}_n{}.csv", cell.file_label, cell.n)
}

/// Writes one CSV per cell plus `summary.csv`; returns the paths written.
pub fn write_study_outputs(result: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(result.cells.len() + 1);
    for cell in &result.cells {
        let path = dir.join(cell_file_name(cell));
        crate::io::write_atomic(&path, cell_csv(cell).as_bytes())?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    crate::io::write_atomic(&path, summary_csv(result).as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Mean errors laid out with one row per `n` and one column per rule.
pub fn mean_table(result: &StudyResult) -> String {
    let width = 14;
    let mut out = format!("{:>10}", "n");
    for rule in &result.rules {
        let _ = write!(out, " {rule:>width$}");
    }
    out.push('\n');
    for &n in &result.sample_sizes {
        let _ = write!(out, "{n:>10}");
        for rule in &result.rules {
            let mean = result
                .cell(rule, n)
                .and_then(|c| c.summary.as_ref())
                .map_or(f64::NAN, |s| s.mean);
            let _ = write!(out, " {:>width$}", format!("{mean:.4e}"));
        }
        out.push('\n');
    }
    out
}
