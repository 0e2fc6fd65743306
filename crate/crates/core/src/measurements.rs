//! Repeated noisy measurements and noise-level estimators.
//!
//! Samples live in the coordinates of the data space that the exact data
//! `ŷ` is given in. Noise never leaves the span of those coordinates, so the
//! orthogonal part of every sample (and of the mean) equals that of `ŷ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, BoxMuller};
use crate::spectral::CoefficientVector;

/// Black–Scholes binary call parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryOptionParams {
    /// Riskless rate per day.
    pub r: f64,
    /// Days to expiry.
    pub t: f64,
    pub strike: f64,
    pub payoff: f64,
    pub mu: f64,
    pub sigma: f64,
    pub s0_grid: Vec<f64>,
}

impl BinaryOptionParams {
    /// `r = 0.0001, T = 30, K = 0.5, Q = 1, μ = 0.01, σ = 0.1` on the uniform
    /// grid `S_0 = i/m`, `i = 1..=m`.
    pub fn reference(grid_size: usize) -> Self {
        Self {
            r: 1e-4,
            t: 30.0,
            strike: 0.5,
            payoff: 1.0,
            mu: 0.01,
            sigma: 0.1,
            s0_grid: uniform_grid(grid_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.t > 0.0 && self.strike > 0.0) {
            return Err(Error::input("binary option needs sigma, T and strike > 0"));
        }
        if self.s0_grid.is_empty() || self.s0_grid.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::input("S_0 grid must be nonempty and positive"));
        }
        Ok(())
    }

    pub fn discount(&self) -> f64 {
        (-self.r * self.t).exp() * self.payoff
    }

    /// Mean and standard deviation of the log-return rate `s`.
    pub fn rate_distribution(&self) -> (f64, f64) {
        (
            self.mu - self.sigma * self.sigma / 2.0,
            self.sigma / self.t.sqrt(),
        )
    }
}

/// `i/m` for `i = 1..=m`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|i| i as f64 / m as f64).collect()
}

/// How single measurements `Y_i` scatter around `ŷ`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// `Y_i = ŷ + Z_i·direction`, `Z_i` standard normal. `forced_latent`
    /// replaces every `Z_i` by a fixed value.
    DirectionGaussian {
        direction: Vec<f64>,
        forced_latent: Option<f64>,
    },
    /// Independent `N(0, scale²)` noise in every coordinate.
    CoefficientGaussian { scale: f64 },
    /// `Y_i = ŷ + U_i Z_i v`, `U_i ~ U[−1/2, 1/2]`, `Z_i` generalized Pareto.
    HeavyTailed {
        shape: f64,
        scale: f64,
        location: f64,
        weights: Vec<f64>,
    },
    /// `Y_i(S_0) = e^{−rT} Q · 1{S_0 e^{T Z_i} ≥ K}` on the `S_0` grid.
    BernoulliPayoff(BinaryOptionParams),
}

/// Generalized Pareto parameters of the heavy-tailed experiment, in
/// `(shape, scale, location)` order.
pub const HEAVY_TAIL_PARAMS: (f64, f64, f64) = (1.0 / 3.0, 0.5, 1.5);

impl NoiseModel {
    /// Heavy-tailed noise with weights a seeded random permutation of
    /// `1, 2^{-3/4}, …, m^{-3/4}`.
    pub fn heavy_tailed_reference(m: usize, seed: u64) -> Self {
        let mut weights: Vec<f64> = (1..=m).map(|l| (l as f64).powf(-0.75)).collect();
        let mut rng = rng::substream(seed, rng::AUX_STREAM);
        rng::shuffle(&mut weights, &mut rng);
        let (shape, scale, location) = HEAVY_TAIL_PARAMS;
        NoiseModel::HeavyTailed {
            shape,
            scale,
            location,
            weights,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            NoiseModel::DirectionGaussian { .. } => "direction_gaussian",
            NoiseModel::CoefficientGaussian { .. } => "coefficient_gaussian",
            NoiseModel::HeavyTailed { .. } => "heavy_tailed",
            NoiseModel::BernoulliPayoff(_) => "bernoulli_payoff",
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let expect = |len: usize, what: &str| {
            if len != dim {
                Err(Error::input(format!("{what} has length {len}, data has {dim}")))
            } else {
                Ok(())
            }
        };
        match self {
            NoiseModel::DirectionGaussian { direction, .. } => expect(direction.len(), "direction"),
            NoiseModel::CoefficientGaussian { scale } => {
                if !(*scale >= 0.0 && scale.is_finite()) {
                    return Err(Error::input(format!("noise scale must be >= 0, got {scale}")));
                }
                Ok(())
            }
            NoiseModel::HeavyTailed { shape, scale, weights, .. } => {
                if !(*scale > 0.0) || !shape.is_finite() {
                    return Err(Error::input(format!(
                        "generalized Pareto needs scale > 0 and finite shape (got shape {shape}, scale {scale})"
                    )));
                }
                expect(weights.len(), "weight vector")
            }
            NoiseModel::BernoulliPayoff(p) => {
                p.validate()?;
                expect(p.s0_grid.len(), "S_0 grid")
            }
        }
    }

    /// Writes one measurement into `out`.
    fn sample_into<R: Rng + ?Sized>(
        &self,
        y_hat: &[f64],
        rng: &mut R,
        normals: &mut BoxMuller,
        out: &mut [f64],
    ) {
        match self {
            NoiseModel::DirectionGaussian {
                direction,
                forced_latent,
            } => {
                let z = match forced_latent {
                    Some(z) => *z,
                    None => normals.sample(rng),
                };
                for ((o, y), d) in out.iter_mut().zip(y_hat).zip(direction) {
                    *o = y + z * d;
                }
            }
            NoiseModel::CoefficientGaussian { scale } => {
                for (o, y) in out.iter_mut().zip(y_hat) {
                    *o = y + scale * normals.sample(rng);
                }
            }
            NoiseModel::HeavyTailed {
                shape,
                scale,
                location,
                weights,
            } => {
                let u = rng.random::<f64>() - 0.5;
                let z = generalized_pareto(*shape, *scale, *location, rng);
                let c = u * z;
                for ((o, y), w) in out.iter_mut().zip(y_hat).zip(weights) {
                    *o = y + c * w;
                }
            }
            NoiseModel::BernoulliPayoff(p) => {
                let (mean, sd) = p.rate_distribution();
                let z = mean + sd * normals.sample(rng);
                // S_0 e^{T z} ≥ K ⇔ S_0 ≥ K e^{−T z}
                let threshold = p.strike * (-p.t * z).exp();
                let value = p.discount();
                for (o, s0) in out.iter_mut().zip(&p.s0_grid) {
                    *o = if *s0 >= threshold { value } else { 0.0 };
                }
            }
        }
    }
}

/// Generalized Pareto variate by inverse transform,
/// `θ + s((1−U)^{−k} − 1)/k` (exponential tail when `k = 0`).
pub fn generalized_pareto<R: Rng + ?Sized>(shape: f64, scale: f64, location: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let log_tail = (-u).ln_1p();
    if shape == 0.0 {
        location - scale * log_tail
    } else {
        location + scale * (-shape * log_tail).exp_m1() / shape
    }
}

/// Sample mean and spread of a batch; all a parameter choice needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub n: usize,
    pub mean: CoefficientVector,
    /// `s_n = √(Σ ‖Y_i − Ȳ_n‖² / (n−1))`, zero when `n = 1`.
    pub sample_std: f64,
}

impl BatchStats {
    /// Statistics of raw data vectors; identical rows give `s_n = 0` exactly.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::input("no measurements"));
        }
        let dim = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::input(format!(
                "measurement {i} has {} entries, expected {dim}",
                rows[i].len()
            )));
        }
        let mut acc = Welford::new(dim);
        for r in rows {
            acc.push(r);
        }
        Ok(acc.finish(0.0))
    }
}

/// Running mean and summed squared deviation.
struct Welford {
    k: usize,
    mean: Vec<f64>,
    m2: f64,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            k: 0,
            mean: vec![0.0; dim],
            m2: 0.0,
        }
    }

    fn push(&mut self, row: &[f64]) {
        self.k += 1;
        let inv = 1.0 / self.k as f64;
        for (m, x) in self.mean.iter_mut().zip(row) {
            let before = x - *m;
            *m += before * inv;
            self.m2 += before * (x - *m);
        }
    }

    fn finish(self, orthogonal_norm: f64) -> BatchStats {
        let sample_std = if self.k > 1 {
            (self.m2.max(0.0) / (self.k - 1) as f64).sqrt()
        } else {
            0.0
        };
        BatchStats {
            n: self.k,
            mean: CoefficientVector::with_orthogonal(self.mean, orthogonal_norm),
            sample_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub samples: Vec<CoefficientVector>,
    pub n: usize,
    pub mean: CoefficientVector,
    pub sample_std: f64,
    pub seed: u64,
    pub model_tag: String,
}

impl MeasurementBatch {
    pub fn stats(&self) -> BatchStats {
        BatchStats {
            n: self.n,
            mean: self.mean.clone(),
            sample_std: self.sample_std,
        }
    }
}

fn check_draw(model: &NoiseModel, y_hat: &CoefficientVector, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::input(format!("a batch needs n >= 2 samples, got {n}")));
    }
    model.validate(y_hat.len())
}

/// Draws `n` measurements of `ŷ` from stream `seed` and keeps them.
pub fn draw_batch(
    model: &NoiseModel,
    y_hat: &CoefficientVector,
    n: usize,
    seed: u64,
) -> Result<MeasurementBatch> {
    draw_batch_from(model, y_hat, n, seed, 0)
}

/// As [`draw_batch`], reading stream `stream` of key `seed`.
pub fn draw_batch_from(
    model: &NoiseModel,
    y_hat: &CoefficientVector,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<MeasurementBatch> {
    check_draw(model, y_hat, n)?;
    let mut rng = rng::substream(seed, stream);
    let mut normals = BoxMuller::new();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0.0; y_hat.len()];
        model.sample_into(&y_hat.coefficients, &mut rng, &mut normals, &mut row);
        rows.push(row);
    }
    let stats = BatchStats::from_rows(&rows)?;
    let orth = y_hat.orthogonal_norm;
    Ok(MeasurementBatch {
        samples: rows
            .into_iter()
            .map(|r| CoefficientVector::with_orthogonal(r, orth))
            .collect(),
        n,
        mean: CoefficientVector::with_orthogonal(stats.mean.coefficients, orth),
        sample_std: stats.sample_std,
        seed,
        model_tag: model.tag().to_string(),
    })
}

/// Mean and sample standard deviation of `n` fresh measurements without
/// storing them (Welford updates). Reads the same random stream as
/// [`draw_batch_from`], so the underlying samples coincide.
pub fn draw_stats(
    model: &NoiseModel,
    y_hat: &CoefficientVector,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<BatchStats> {
    check_draw(model, y_hat, n)?;
    let mut rng = rng::substream(seed, stream);
    let mut normals = BoxMuller::new();
    let mut row = vec![0.0; y_hat.len()];
    let mut acc = Welford::new(y_hat.len());
    for _ in 0..n {
        model.sample_into(&y_hat.coefficients, &mut rng, &mut normals, &mut row);
        acc.push(&row);
    }
    Ok(acc.finish(y_hat.orthogonal_norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaRule {
    /// `1/√n`.
    InvSqrtN,
    /// `s_n/√n`.
    SampleStd,
    /// `τ s_n √(2 ln ln n / n)`, valid almost surely for `τ > 1`.
    Lil { tau: f64 },
}

/// Smallest batch size accepted by [`DeltaRule::Lil`].
pub const LIL_MIN_N: usize = 16;

impl DeltaRule {
    pub fn label(&self) -> String {
        match self {
            DeltaRule::InvSqrtN => "inv_sqrt_n".into(),
            DeltaRule::SampleStd => "sample_std".into(),
            DeltaRule::Lil { tau } => format!("lil({tau})"),
        }
    }
}

pub fn delta_est(stats: &BatchStats, rule: DeltaRule) -> Result<f64> {
    let n = stats.n as f64;
    match rule {
        DeltaRule::InvSqrtN => {
            if stats.n == 0 {
                return Err(Error::input("empty batch"));
            }
            Ok(1.0 / n.sqrt())
        }
        DeltaRule::SampleStd | DeltaRule::Lil { .. } => {
            if stats.n < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "sample standard deviation needs n >= 2, got {}",
                    stats.n
                )));
            }
            if stats.sample_std <= 0.0 {
                return Err(Error::DegenerateBatch("all samples are identical".into()));
            }
            match rule {
                DeltaRule::Lil { tau } => {
                    if !(tau > 1.0) {
                        return Err(Error::input(format!("LIL factor must exceed 1, got {tau}")));
                    }
                    if stats.n < LIL_MIN_N {
                        return Err(Error::input(format!(
                            "LIL estimate needs n >= {LIL_MIN_N}, got {}",
                            stats.n
                        )));
                    }
                    Ok(tau * stats.sample_std * (2.0 * n.ln().ln() / n).sqrt())
                }
                _ => Ok(stats.sample_std / n.sqrt()),
            }
        }
    }
}

/// `δ_n^true = ‖Ȳ_n − ŷ‖`.
pub fn delta_true(stats: &BatchStats, y_hat: &CoefficientVector) -> Result<f64> {
    if stats.mean.len() != y_hat.len() {
        return Err(Error::input(format!(
            "mean has {} coefficients, ŷ has {}",
            stats.mean.len(),
            y_hat.len()
        )));
    }
    stats.mean.distance(y_hat)
}
