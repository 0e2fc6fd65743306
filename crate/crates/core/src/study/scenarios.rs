//! Operators, exact solutions and noise models of the experiment scenarios.

use serde::Serialize;
use libm::erfc;

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::measurements::{BinaryOptionParams, NoiseModel};
use crate::spectral::{self, CoefficientVector, SourceCondition, SpectralDecomposition};

use super::config::{BinaryOptionConfig, NoiseConfig, ScenarioConfig, SourceConfig, StudyConfig};

/// `σ_l = exp(−decay·l)` with standard bases.
pub fn heat_like_operator(m: usize, decay: f64) -> Result<SpectralDecomposition> {
    if m < 2 {
        return Err(Error::input("heat-like operator needs m >= 2"));
    }
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::input(format!("decay must be positive, got {decay}")));
    }
    SpectralDecomposition::diagonal((1..=m).map(|l| (-decay * l as f64).exp()).collect())
}

/// `σ_l = l^{−decay}` with standard bases.
pub fn power_decay_operator(m: usize, decay: f64) -> Result<SpectralDecomposition> {
    if m < 1 {
        return Err(Error::input("operator needs m >= 1"));
    }
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::input(format!("decay must be positive, got {decay}")));
    }
    SpectralDecomposition::diagonal((1..=m).map(|l| (l as f64).powf(-decay)).collect())
}

/// Trapezoid quadrature of `x ↦ ∫₀ˣ f` on the grid `i/m`, `i = 1..m`.
pub fn integration_matrix(m: usize) -> Result<Vec<Vec<f64>>> {
    if m < 2 {
        return Err(Error::input("integration operator needs m >= 2"));
    }
    let h = 1.0 / m as f64;
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => h,
                    std::cmp::Ordering::Equal => h / 2.0,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect())
}

pub fn integration_operator(m: usize) -> Result<SpectralDecomposition> {
    spectral::svd(&integration_matrix(m)?)
}

/// Price and delta of the binary option on its `S_0` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryOptionTruth {
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `V = e^{−rT} Q Φ(d)` and `dV/dS_0 = e^{−rT} Q φ(d) / (S_0 σ √T)` with
/// `d = (ln(S_0/K) + T(μ − σ²/2)) / (σ√T)`.
pub fn binary_option_truth(params: &BinaryOptionParams) -> Result<BinaryOptionTruth> {
    params.validate()?;
    let scale = params.sigma * params.t.sqrt();
    let drift = params.t * (params.mu - params.sigma * params.sigma / 2.0);
    let disc = params.discount();
    let mut value = Vec::with_capacity(params.s0_grid.len());
    let mut derivative = Vec::with_capacity(params.s0_grid.len());
    for &s0 in &params.s0_grid {
        let d = ((s0 / params.strike).ln() + drift) / scale;
        value.push(disc * normal_cdf(d));
        derivative.push(disc * normal_pdf(d) / (s0 * scale));
    }
    Ok(BinaryOptionTruth { value, derivative })
}

impl BinaryOptionConfig {
    pub fn params(&self, grid: usize) -> BinaryOptionParams {
        BinaryOptionParams {
            r: self.r,
            t: self.t,
            strike: self.strike,
            payoff: self.payoff,
            mu: self.mu,
            sigma: self.sigma,
            s0_grid: crate::measurements::uniform_grid(grid),
        }
    }
}

/// Everything a replication needs: the operator, the exact solution in
/// solution coefficients, the exact data as a raw data-space vector and the
/// noise model that perturbs it.
#[derive(Debug, Clone)]
pub struct Problem {
    pub op: SpectralDecomposition,
    pub filter: FilterSpec,
    /// `K⁺ŷ` (or the exact solution) in right-basis coefficients; its
    /// orthogonal norm records any part outside the span.
    pub x_hat: CoefficientVector,
    /// Exact data in data-space coordinates.
    pub y_hat_raw: CoefficientVector,
    pub noise: NoiseModel,
    /// Errors are reported as `√weight · ‖x_α − x̂‖`.
    pub norm_weight: f64,
}

fn source_problem(
    op: SpectralDecomposition,
    source: &SourceConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(SpectralDecomposition, CoefficientVector, CoefficientVector, NoiseModel)> {
    let sc = SourceCondition::new(source.nu, source.rho, source.weights(op.rank()))?;
    let (x_hat, y_hat) = op.synthesize_source(&sc)?;
    let y_raw = CoefficientVector::new(op.data_vector(&y_hat)?);
    let noise = noise_model(noise, op.data_dim(), seed)?;
    Ok((op, x_hat, y_raw, noise))
}

fn noise_model(noise: &NoiseConfig, dim: usize, seed: u64) -> Result<NoiseModel> {
    Ok(match noise {
        NoiseConfig::CoefficientGaussian { scale } => NoiseModel::CoefficientGaussian { scale: *scale },
        NoiseConfig::DirectionGaussian {
            direction,
            forced_latent,
        } => {
            if direction.len() != dim {
                return Err(Error::Configuration(format!(
                    "noise direction has length {}, data dimension is {dim}",
                    direction.len()
                )));
            }
            NoiseModel::DirectionGaussian {
                direction: direction.clone(),
                forced_latent: *forced_latent,
            }
        }
        NoiseConfig::HeavyTailed { shape, scale, location } => {
            match NoiseModel::heavy_tailed_reference(dim, seed) {
                NoiseModel::HeavyTailed { weights, .. } => NoiseModel::HeavyTailed {
                    shape: *shape,
                    scale: *scale,
                    location: *location,
                    weights,
                },
                _ => unreachable!(),
            }
        }
    })
}

impl Problem {
    /// Builds the scenario of a study configuration. The heavy-tailed weight
    /// permutation is drawn from the auxiliary stream of `base_seed`.
    pub fn from_config(config: &StudyConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.base_seed;
        let (op, x_hat, y_hat_raw, noise, norm_weight) = match &config.scenario {
            ScenarioConfig::DiagonalSynthetic { m, decay, source, noise } => {
                let (op, x, y, n) = source_problem(power_decay_operator(*m, *decay)?, source, noise, seed)?;
                (op, x, y, n, 1.0)
            }
            ScenarioConfig::HeatLike { m, decay, source, noise } => {
                let (op, x, y, n) = source_problem(heat_like_operator(*m, *decay)?, source, noise, seed)?;
                (op, x, y, n, 1.0)
            }
            ScenarioConfig::MatrixFile { path, source, noise } => {
                let matrix = crate::io::read_matrix_csv(path)?;
                let (op, x, y, n) = source_problem(spectral::svd(&matrix)?, source, noise, seed)?;
                (op, x, y, n, 1.0)
            }
            ScenarioConfig::Counterexample { m, forced_latent } => {
                let (op, direction) = spectral::counterexample_operator(*m)?;
                let noise = NoiseModel::DirectionGaussian {
                    direction: direction.coefficients,
                    forced_latent: *forced_latent,
                };
                (op, CoefficientVector::zeros(*m), CoefficientVector::zeros(*m), noise, 1.0)
            }
            ScenarioConfig::BinaryOption { grid, params } => {
                let params = match params {
                    Some(p) => p.params(*grid),
                    None => BinaryOptionParams::reference(*grid),
                };
                let truth = binary_option_truth(&params)?;
                let op = integration_operator(*grid)?;
                let x_hat = op.project_solution(&truth.derivative)?;
                (
                    op,
                    x_hat,
                    CoefficientVector::new(truth.value),
                    NoiseModel::BernoulliPayoff(params),
                    1.0 / *grid as f64,
                )
            }
        };
        let filter = config.filter.resolve(&op)?;
        Ok(Self {
            op,
            filter,
            x_hat,
            y_hat_raw,
            noise,
            norm_weight,
        })
    }

    /// Rescaled reconstruction error `√weight · ‖x − x̂‖`.
    pub fn error(&self, x: &CoefficientVector) -> Result<f64> {
        Ok(self.norm_weight.sqrt() * x.distance(&self.x_hat)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_like_examples() {
        let op = heat_like_operator(2, 10f64.ln()).unwrap();
        assert!((op.singular_values()[0] - 0.1).abs() < 1e-15);
        assert!((op.singular_values()[1] - 0.01).abs() < 1e-15);
        let op = heat_like_operator(100, 0.326).unwrap();
        let s = op.singular_values();
        let ratio = s[99] / s[0];
        assert!((ratio / 9.5e-15 - 1.0).abs() < 0.02, "ratio {ratio}");
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn integration_operator_two_by_two() {
        let op = integration_operator(2).unwrap();
        // [[a,0],[b,a]]: σ² are the eigenvalues of AᵀA, with
        // trace 2a² + b² and determinant a⁴.
        let (a, b) = (0.25f64, 0.5f64);
        let tr = 2.0 * a * a + b * b;
        let det = a.powi(4);
        let disc = (tr * tr - 4.0 * det).sqrt();
        let s1 = ((tr + disc) / 2.0).sqrt();
        let s2 = ((tr - disc) / 2.0).sqrt();
        let s = op.singular_values();
        assert!((s[0] - s1).abs() < 1e-14);
        assert!((s[1] - s2).abs() < 1e-14);
    }

    #[test]
    fn integration_operator_spectrum() {
        let m = 256;
        let op = integration_operator(m).unwrap();
        let s = op.singular_values();
        assert!((s[0] - 2.0 / std::f64::consts::PI).abs() < 1e-3);
        // The discrete spectrum falls 5.1% below the continuous one at
        // l = m/4 exactly, so the band stops one level short.
        for (l, sl) in s.iter().enumerate().take(m / 4 - 1) {
            let analytic = 1.0 / ((l as f64 + 0.5) * std::f64::consts::PI);
            assert!((sl / analytic - 1.0).abs() < 0.05, "l={} {sl} vs {analytic}", l + 1);
        }
    }

    #[test]
    fn integration_of_constant() {
        let m = 64;
        let a = integration_matrix(m).unwrap();
        for (i, row) in a.iter().enumerate() {
            let x = (i + 1) as f64 / m as f64;
            let integral: f64 = row.iter().sum();
            assert!((integral - x).abs() <= 1.0 / m as f64);
        }
    }

    #[test]
    fn binary_option_examples() {
        let mut p = BinaryOptionParams::reference(4);
        p.s0_grid = vec![0.5];
        let truth = binary_option_truth(&p).unwrap();
        let d: f64 = 30.0 * (0.01 - 0.005) / (0.1 * 30f64.sqrt());
        assert!((d - 0.2739).abs() < 1e-4);
        assert!((truth.value[0] - 0.6061).abs() < 1e-4, "{}", truth.value[0]);

        p.mu = p.sigma * p.sigma / 2.0;
        let at_strike = binary_option_truth(&p).unwrap();
        assert!((at_strike.value[0] - p.discount() / 2.0).abs() < 1e-15);

        p.s0_grid = vec![1e6];
        let far = binary_option_truth(&p).unwrap();
        assert!((far.value[0] - p.discount()).abs() < 1e-12);

        p.s0_grid = vec![0.0];
        assert!(binary_option_truth(&p).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = BinaryOptionParams::reference(64);
        let truth = binary_option_truth(&p).unwrap();
        let h = 1e-6;
        for (i, s0) in p.s0_grid.iter().enumerate() {
            let mut q = p.clone();
            q.s0_grid = vec![s0 + h, s0 - h];
            let v = binary_option_truth(&q).unwrap().value;
            let fd = (v[0] - v[1]) / (2.0 * h);
            assert!((fd - truth.derivative[i]).abs() < 1e-6);
        }
    }
}
