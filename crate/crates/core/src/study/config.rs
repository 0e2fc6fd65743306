//! Study configuration file (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterKind, FilterSpec};
use crate::measurements::DeltaRule;
use crate::selection::{AprioriRule, DEFAULT_Q};
use crate::spectral::SpectralDecomposition;

pub const SCHEMA_VERSION: u32 = 1;

/// Default decay of the heat-like surrogate: `σ_100/σ_1 ≈ 1e-14`.
pub const HEAT_DECAY: f64 = 0.326;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    #[serde(default = "default_filter")]
    pub filter: FilterConfig,
    pub rules: Vec<RuleConfig>,
    #[serde(default = "default_delta_rule")]
    pub delta_rule: DeltaRule,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_filter() -> FilterConfig {
    FilterConfig::Tikhonov
}

fn default_delta_rule() -> DeltaRule {
    DeltaRule::SampleStd
}

fn default_q() -> f64 {
    DEFAULT_Q
}

/// Shape of the source element `w` before scaling to norm `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceShape {
    /// `w_l ∝ 1`.
    Flat,
    /// `w_l ∝ (−1)^{l+1} / l`.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub nu: f64,
    pub rho: f64,
    pub shape: SourceShape,
}

impl SourceConfig {
    pub fn weights(&self, m: usize) -> Vec<f64> {
        let raw: Vec<f64> = (1..=m)
            .map(|l| match self.shape {
                SourceShape::Flat => 1.0,
                SourceShape::Alternating => {
                    let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
                    sign / l as f64
                }
            })
            .collect();
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        raw.into_iter().map(|w| self.rho * w / norm).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    CoefficientGaussian {
        scale: f64,
    },
    DirectionGaussian {
        direction: Vec<f64>,
        #[serde(default)]
        forced_latent: Option<f64>,
    },
    /// Uniform × generalized Pareto × seeded weight permutation.
    HeavyTailed {
        #[serde(default = "gpd_shape")]
        shape: f64,
        #[serde(default = "gpd_scale")]
        scale: f64,
        #[serde(default = "gpd_location")]
        location: f64,
    },
}

fn gpd_shape() -> f64 {
    crate::measurements::HEAVY_TAIL_PARAMS.0
}
fn gpd_scale() -> f64 {
    crate::measurements::HEAVY_TAIL_PARAMS.1
}
fn gpd_location() -> f64 {
    crate::measurements::HEAVY_TAIL_PARAMS.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    /// `σ_l = l^{−decay}` on `R^m`.
    DiagonalSynthetic {
        m: usize,
        decay: f64,
        source: SourceConfig,
        noise: NoiseConfig,
    },
    /// `σ_l = 10^{−l}`, exact data zero, noise along the adversarial direction.
    Counterexample {
        m: usize,
        #[serde(default)]
        forced_latent: Option<f64>,
    },
    /// `σ_l = e^{−decay·l}` on `R^m`.
    HeatLike {
        m: usize,
        decay: f64,
        source: SourceConfig,
        noise: NoiseConfig,
    },
    /// Differentiation of Monte-Carlo binary option prices on a uniform
    /// `S_0` grid.
    BinaryOption {
        grid: usize,
        #[serde(default)]
        params: Option<BinaryOptionConfig>,
    },
    /// Dense matrix from a headerless row-major CSV file.
    MatrixFile {
        path: PathBuf,
        source: SourceConfig,
        noise: NoiseConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryOptionConfig {
    pub r: f64,
    pub t: f64,
    pub strike: f64,
    pub payoff: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    Tikhonov,
    IteratedTikhonov {
        order: u32,
    },
    Tsvd,
    /// Step defaults to `0.9/σ_1²`.
    Landweber {
        #[serde(default)]
        relaxation: Option<f64>,
    },
}

impl FilterConfig {
    pub fn resolve(&self, op: &SpectralDecomposition) -> Result<FilterSpec> {
        let spec = match *self {
            FilterConfig::Tikhonov => FilterSpec::tikhonov(),
            FilterConfig::IteratedTikhonov { order } => FilterSpec::iterated_tikhonov(order)?,
            FilterConfig::Tsvd => FilterSpec::tsvd(),
            FilterConfig::Landweber { relaxation: Some(a) } => FilterSpec::landweber(a)?,
            FilterConfig::Landweber { relaxation: None } => FilterSpec::landweber_for(op.sigma_max())?,
        };
        spec.check_operator(op)?;
        Ok(spec)
    }

    pub fn from_kind(kind: FilterKind) -> Self {
        match kind {
            FilterKind::Tikhonov => FilterConfig::Tikhonov,
            FilterKind::IteratedTikhonov { order } => FilterConfig::IteratedTikhonov { order },
            FilterKind::Tsvd => FilterConfig::Tsvd,
            FilterKind::Landweber { relaxation } => FilterConfig::Landweber {
                relaxation: Some(relaxation),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    Discrepancy {
        #[serde(default = "default_q")]
        q: f64,
        #[serde(default)]
        emergency: bool,
    },
    Apriori {
        rule: AprioriRule,
    },
}

impl RuleConfig {
    pub fn dp() -> Self {
        RuleConfig::Discrepancy {
            q: DEFAULT_Q,
            emergency: false,
        }
    }

    pub fn dp_es() -> Self {
        RuleConfig::Discrepancy {
            q: DEFAULT_Q,
            emergency: true,
        }
    }

    pub fn apriori_inv_sqrt_n() -> Self {
        RuleConfig::Apriori {
            rule: AprioriRule::InvSqrtNAlpha,
        }
    }

    /// Display label, e.g. `dp`, `dp+es`, `a priori`.
    pub fn label(&self) -> String {
        match self {
            RuleConfig::Discrepancy { emergency: false, .. } => "dp".into(),
            RuleConfig::Discrepancy { emergency: true, .. } => "dp+es".into(),
            RuleConfig::Apriori {
                rule: AprioriRule::InvSqrtNAlpha,
            } => "a priori".into(),
            RuleConfig::Apriori {
                rule: AprioriRule::ScaledSource { .. },
            } => "a priori (source)".into(),
        }
    }

    /// Label usable in file names.
    pub fn file_label(&self) -> String {
        match self {
            RuleConfig::Discrepancy { emergency: false, .. } => "dp".into(),
            RuleConfig::Discrepancy { emergency: true, .. } => "dp_es".into(),
            RuleConfig::Apriori {
                rule: AprioriRule::InvSqrtNAlpha,
            } => "apriori".into(),
            RuleConfig::Apriori {
                rule: AprioriRule::ScaledSource { .. },
            } => "apriori_source".into(),
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: StudyConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Lists every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        if self.replications < 1 {
            v.push("replications: must be >= 1".into());
        }
        if self.sample_sizes.is_empty() {
            v.push("sample_sizes: must not be empty".into());
        }
        if self.sample_sizes.iter().any(|n| *n < 2) {
            v.push("sample_sizes: every n must be >= 2".into());
        }
        if self.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            v.push("sample_sizes: must be strictly increasing".into());
        }
        if self.rules.is_empty() {
            v.push("rules: must not be empty".into());
        }
        for (i, rule) in self.rules.iter().enumerate() {
            match rule {
                RuleConfig::Discrepancy { q, .. } if !(*q > 0.0 && *q < 1.0) => {
                    v.push(format!("rules[{i}].q: must lie in (0, 1), got {q}"));
                }
                RuleConfig::Apriori { rule } if rule.validate().is_err() => {
                    v.push(format!("rules[{i}].rule: c, nu and rho must be positive"));
                }
                _ => {}
            }
        }
        let mut labels: Vec<String> = self.rules.iter().map(|r| r.file_label()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.rules.len() {
            v.push("rules: duplicate rule kinds".into());
        }
        if let DeltaRule::Lil { tau } = self.delta_rule {
            if !(tau > 1.0) {
                v.push(format!("delta_rule.tau: must exceed 1, got {tau}"));
            }
            if self.sample_sizes.iter().any(|n| *n < crate::measurements::LIL_MIN_N) {
                v.push(format!(
                    "sample_sizes: the lil rule needs n >= {}",
                    crate::measurements::LIL_MIN_N
                ));
            }
        }
        let check_source = |v: &mut Vec<String>, s: &SourceConfig| {
            if !(s.nu >= 0.0) {
                v.push(format!("scenario.source.nu: must be >= 0, got {}", s.nu));
            }
            if !(s.rho > 0.0) {
                v.push(format!("scenario.source.rho: must be > 0, got {}", s.rho));
            }
        };
        let check_noise = |v: &mut Vec<String>, noise: &NoiseConfig, m: Option<usize>| match noise {
            NoiseConfig::CoefficientGaussian { scale } if !(*scale >= 0.0) => {
                v.push(format!("scenario.noise.scale: must be >= 0, got {scale}"));
            }
            NoiseConfig::HeavyTailed { scale, .. } if !(*scale > 0.0) => {
                v.push(format!("scenario.noise.scale: must be > 0, got {scale}"));
            }
            NoiseConfig::DirectionGaussian { direction, .. } => {
                if let Some(m) = m {
                    if direction.len() != m {
                        v.push(format!(
                            "scenario.noise.direction: length {} does not match m = {m}",
                            direction.len()
                        ));
                    }
                }
            }
            _ => {}
        };
        match &self.scenario {
            ScenarioConfig::DiagonalSynthetic { m, decay, source, noise }
            | ScenarioConfig::HeatLike { m, decay, source, noise } => {
                if *m < 2 {
                    v.push("scenario.m: must be >= 2".into());
                }
                if !(*decay > 0.0) {
                    v.push(format!("scenario.decay: must be > 0, got {decay}"));
                }
                check_source(&mut v, source);
                check_noise(&mut v, noise, Some(*m));
            }
            ScenarioConfig::Counterexample { m, .. } => {
                if *m < 2 || *m > crate::spectral::COUNTEREXAMPLE_MAX_LEVELS {
                    v.push(format!(
                        "scenario.m: must lie in 2..={}",
                        crate::spectral::COUNTEREXAMPLE_MAX_LEVELS
                    ));
                }
            }
            ScenarioConfig::BinaryOption { grid, params } => {
                if *grid < 2 {
                    v.push("scenario.grid: must be >= 2".into());
                }
                if let Some(p) = params {
                    if !(p.sigma > 0.0 && p.t > 0.0 && p.strike > 0.0) {
                        v.push("scenario.params: sigma, t and strike must be > 0".into());
                    }
                }
            }
            ScenarioConfig::MatrixFile { source, noise, .. } => {
                check_source(&mut v, source);
                check_noise(&mut v, noise, None);
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Configuration(v.join("; ")))
        }
    }

    /// Heavy-tailed heat-like study: Tikhonov with dp, dp+es and `α = 1/√n`
    /// at `n = 10³, 10⁴, 10⁵`, 200 replications each.
    pub fn heat_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::HeatLike {
                m: 100,
                decay: HEAT_DECAY,
                source: SourceConfig {
                    nu: 1.0,
                    rho: 1.0,
                    shape: SourceShape::Alternating,
                },
                noise: NoiseConfig::HeavyTailed {
                    shape: gpd_shape(),
                    scale: gpd_scale(),
                    location: gpd_location(),
                },
            },
            filter: FilterConfig::Tikhonov,
            rules: vec![RuleConfig::dp(), RuleConfig::dp_es(), RuleConfig::apriori_inv_sqrt_n()],
            delta_rule: DeltaRule::SampleStd,
            sample_sizes: vec![1_000, 10_000, 100_000],
            replications: 200,
            base_seed: 20_190_416,
        }
    }

    /// Binary option differentiation: grid 512, Tikhonov with dp,
    /// `n = 10³, 10⁴`, 100 replications.
    pub fn binopt_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::BinaryOption {
                grid: 512,
                params: None,
            },
            filter: FilterConfig::Tikhonov,
            rules: vec![RuleConfig::dp()],
            delta_rule: DeltaRule::SampleStd,
            sample_sizes: vec![1_000, 10_000],
            replications: 100,
            base_seed: 5_010,
        }
    }

    /// Diagonal `σ_l = 1/l`, `m = 200`, `ν = 1` source, Gaussian noise.
    pub fn diagonal_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::DiagonalSynthetic {
                m: 200,
                decay: 1.0,
                source: SourceConfig {
                    nu: 1.0,
                    rho: 1.0,
                    shape: SourceShape::Flat,
                },
                noise: NoiseConfig::CoefficientGaussian {
                    scale: 1.0 / (200f64).sqrt(),
                },
            },
            filter: FilterConfig::Tikhonov,
            rules: vec![RuleConfig::dp()],
            delta_rule: DeltaRule::SampleStd,
            sample_sizes: vec![100, 1_000, 10_000, 100_000],
            replications: 200,
            base_seed: 1,
        }
    }
}
