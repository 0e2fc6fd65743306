//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use avgreg::filters::{FilterKind, FilterSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `1 − λF_α(λ)` straight from the filter definitions.
pub fn residual_factor(kind: FilterKind, alpha: f64, lambda: f64) -> f64 {
    match kind {
        FilterKind::Tikhonov => alpha / (alpha + lambda),
        FilterKind::IteratedTikhonov { order } => (alpha / (alpha + lambda)).powi(order as i32),
        FilterKind::Tsvd => {
            if lambda >= alpha {
                0.0
            } else {
                1.0
            }
        }
        FilterKind::Landweber { relaxation } => {
            let x = relaxation * lambda;
            let steps = (1.0 / alpha).ceil();
            if x < 1e-4 {
                // log(1 − x) by its series; 1 − x rounds to 1 for tiny x.
                let log = -x * (1.0 + x * (0.5 + x * (1.0 / 3.0 + x * 0.25)));
                (steps * log).exp()
            } else {
                (1.0 - x).powf(steps)
            }
        }
    }
}

/// `F_α(λ)` from the definitions.
pub fn filter(kind: FilterKind, alpha: f64, lambda: f64) -> f64 {
    (1.0 - residual_factor(kind, alpha, lambda)) / lambda
}

/// `‖(K R_α − Id) y‖` for a diagonal operator.
pub fn residual(kind: FilterKind, sigmas: &[f64], y: &[f64], alpha: f64) -> f64 {
    sigmas
        .iter()
        .zip(y)
        .map(|(s, yl)| {
            let r = residual_factor(kind, alpha, s * s) * yl;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Sorted random singular values in `(floor, 1]`, log-uniform.
pub fn random_sigmas(rng: &mut ChaCha8Rng, m: usize, floor: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..m)
        .map(|_| (floor.ln() * rng.random::<f64>()).exp())
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// One of the four filter families, Landweber scaled for `σ_1 ≤ 1`.
pub fn random_filter(rng: &mut ChaCha8Rng) -> FilterSpec {
    match rng.random_range(0..4) {
        0 => FilterSpec::tikhonov(),
        1 => FilterSpec::iterated_tikhonov(rng.random_range(1..=4)).unwrap(),
        2 => FilterSpec::tsvd(),
        _ => FilterSpec::landweber(rng.random_range(0.2..=1.0)).unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
