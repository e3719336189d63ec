//! Scenario files: one JSON document per experiment.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wbs_core::{
    build_uniform_grid, default_dictionary, AxisBounds, ConvexFunctionSpec, ConvexSetSpec, Exponent, QuadratureGrid,
    RegionMask, ScalarField, SequenceSpec, Verdict, VectorField, VectorSequenceSpec,
};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dimension: usize,
    #[serde(rename = "box")]
    pub domain_box: Vec<AxisBounds>,
    pub resolution: Vec<usize>,
}

/// Deterministic field used for limits and probe dictionaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Zero,
    Constant { value: f64 },
    /// `coefficient · Π_a x_a^powers[a]`
    Monomial { coefficient: f64, powers: Vec<i32> },
    /// Indicator of an axis-aligned box.
    Indicator { bounds: Vec<AxisBounds> },
}

impl FieldConfig {
    pub fn build(&self, grid: &Arc<QuadratureGrid>) -> wbs_core::Result<ScalarField> {
        match self {
            FieldConfig::Zero => Ok(ScalarField::zeros(grid)),
            FieldConfig::Constant { value } => ScalarField::constant(grid, *value),
            FieldConfig::Monomial { coefficient, powers } => ScalarField::from_fn(grid, |x| {
                coefficient * x.iter().zip(powers).map(|(xa, k)| xa.powi(*k)).product::<f64>()
            }),
            FieldConfig::Indicator { bounds } => ScalarField::from_fn(grid, |x| {
                let inside = x.iter().zip(bounds).all(|(xa, b)| b.lo <= *xa && *xa < b.hi);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    Full,
    Ball { center: Vec<f64>, radius: f64 },
    Box { bounds: Vec<AxisBounds> },
}

/// `{kind, params, nonnegative, K: {kind, params, closed}}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegrandConfig {
    #[serde(flatten)]
    pub f: ConvexFunctionSpec,
    #[serde(rename = "K", default = "ConvexSetSpec::whole_space")]
    pub k: ConvexSetSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionMode {
    #[serde(rename = "p>1")]
    Recursive,
    #[serde(rename = "p=1")]
    Levels,
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationMode {
    Liminf,
    WeakStar,
    Mazur,
    None,
}

/// Targets a bundled scenario must meet for the suite to count it as passing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Probe verdict the scenario is built to produce (default: converging).
    pub probe_verdict: Option<Verdict>,
    /// Closed interval for the Cesàro log-log slope over `cesaro_window`.
    pub cesaro_slope: Option<[f64; 2]>,
    /// Upper bound on `cesaro(k_last) / cesaro(1)`.
    pub cesaro_ratio_below: Option<f64>,
    /// Whether the stated `k`-linear growth bound is expected to hold (default: true).
    pub stated_growth_bound: Option<bool>,
    /// Closed interval for the tail infimum of the `α_i` (last truncation for weak*).
    pub tail_infimum: Option<[f64; 2]>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("wbs-out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridConfig,
    pub p: Exponent,
    pub m: usize,
    pub sequence: Vec<SequenceSpec>,
    #[serde(default)]
    pub limit: Option<Vec<FieldConfig>>,
    #[serde(default)]
    pub f: Option<IntegrandConfig>,
    #[serde(default = "default_region")]
    pub region: RegionConfig,
    pub horizon: usize,
    /// Selections requested from the pool (default: the horizon).
    #[serde(default)]
    pub steps: Option<usize>,
    pub extraction: ExtractionMode,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default)]
    pub cesaro_window: Option<[usize; 2]>,
    #[serde(default = "default_verification")]
    pub verification: VerificationMode,
    #[serde(default)]
    pub r_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub dictionary: Option<Vec<FieldConfig>>,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_region() -> RegionConfig {
    RegionConfig::Full
}

fn default_verification() -> VerificationMode {
    VerificationMode::None
}

fn field(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("{path}: {}", msg.into()))
}

impl ScenarioConfig {
    /// Parses and validates; serde errors keep their line and column.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("{origin}: line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()
            .map_err(|e| CliError::Config(format!("{origin}: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(field("name", "must be a non-empty file stem"));
        }
        let g = &self.grid;
        if g.dimension == 0 {
            return Err(field("grid.dimension", "must be positive"));
        }
        if g.domain_box.len() != g.dimension {
            return Err(field("grid.box", format!("{} axes for dimension {}", g.domain_box.len(), g.dimension)));
        }
        if g.resolution.len() != g.dimension {
            return Err(field(
                "grid.resolution",
                format!("{} entries for dimension {}", g.resolution.len(), g.dimension),
            ));
        }
        if let Exponent::Finite(p) = self.p {
            if !(p >= 1.0) {
                return Err(field("p", format!("must be >= 1 or \"inf\", got {p}")));
            }
        }
        if self.m == 0 {
            return Err(field("m", "must be positive"));
        }
        if self.sequence.len() != self.m {
            return Err(field("sequence", format!("{} components for m = {}", self.sequence.len(), self.m)));
        }
        if let Some(limit) = &self.limit {
            if limit.len() != self.m {
                return Err(field("limit", format!("{} components for m = {}", limit.len(), self.m)));
            }
        }
        if self.horizon < 8 {
            return Err(field("horizon", format!("must be at least 8, got {}", self.horizon)));
        }
        if let Some(steps) = self.steps {
            if steps == 0 || steps > self.horizon {
                return Err(field("steps", format!("must lie in 1..={}, got {steps}", self.horizon)));
            }
        }
        match (self.extraction, self.p) {
            (ExtractionMode::Recursive, Exponent::Finite(p)) if p > 1.0 => {}
            (ExtractionMode::Recursive, p) => {
                return Err(field("extraction", format!("mode \"p>1\" needs a finite p > 1, got p = {p}")));
            }
            (ExtractionMode::Levels, Exponent::Finite(p)) if p != 1.0 => {
                return Err(field("extraction", format!("mode \"p=1\" needs p = 1 or \"inf\", got p = {p}")));
            }
            _ => {}
        }
        if self.extraction != ExtractionMode::Levels && (self.levels.is_some() || self.checkpoints.is_some()) {
            return Err(field("levels", "only meaningful with extraction \"p=1\""));
        }
        if let (Some(levels), Some(cps)) = (self.levels, &self.checkpoints) {
            if cps.len() != levels {
                return Err(field("checkpoints", format!("{} entries for {levels} levels", cps.len())));
            }
        }
        if let Some([lo, hi]) = self.cesaro_window {
            if lo == 0 || hi < lo + 7 {
                return Err(field("cesaro_window", "needs 1 <= lo and at least 8 points"));
            }
        }
        if self.verification != VerificationMode::None && self.f.is_none() {
            return Err(field("f", format!("required for verification {:?}", self.verification)));
        }
        if let Some(f) = &self.f {
            f.k.validate(self.m).map_err(|e| field("f.K", e.to_string()))?;
        }
        match (&self.verification, &self.r_schedule) {
            (VerificationMode::WeakStar, None) => {
                return Err(field("r_schedule", "required for verification weak-star"));
            }
            (VerificationMode::WeakStar, Some(r)) => {
                if r.is_empty() || r.iter().any(|x| !(*x > 0.0)) || r.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(field("r_schedule", "must be a non-empty increasing list of positive radii"));
                }
            }
            (_, Some(_)) => return Err(field("r_schedule", "only meaningful with verification weak-star")),
            _ => {}
        }
        if self.verification == VerificationMode::Liminf && matches!(self.p, Exponent::Infinity) {
            return Err(field("verification", "p = inf uses \"weak-star\" or \"mazur\""));
        }
        if let Some(dict) = &self.dictionary {
            if dict.is_empty() {
                return Err(field("dictionary", "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(self.horizon)
    }

    /// Weak* probing applies for `p = ∞` and for the weak* and closed-set verifications.
    pub fn weak_star(&self) -> bool {
        matches!(self.p, Exponent::Infinity)
            || matches!(self.verification, VerificationMode::WeakStar | VerificationMode::Mazur)
    }

    /// Canonical JSON used for the manifest digest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Grid-bound objects built from a validated config.
pub struct Scenario {
    pub grid: Arc<QuadratureGrid>,
    pub seq: VectorSequenceSpec,
    pub limit: VectorField,
    pub region: RegionMask,
    pub dictionary: Vec<ScalarField>,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let grid = build_uniform_grid(&cfg.grid.domain_box, &cfg.grid.resolution)
            .map_err(|e| field("grid", e.to_string()))?;
        let seq = VectorSequenceSpec::new(cfg.sequence.clone()).map_err(|e| field("sequence", e.to_string()))?;
        let limit_cfg = cfg.limit.clone().unwrap_or_else(|| vec![FieldConfig::Zero; cfg.m]);
        let limit = VectorField::new(
            limit_cfg
                .iter()
                .map(|c| c.build(&grid))
                .collect::<wbs_core::Result<_>>()
                .map_err(|e| field("limit", e.to_string()))?,
        )
        .map_err(|e| field("limit", e.to_string()))?;
        let region = match &cfg.region {
            RegionConfig::Full => RegionMask::full(&grid),
            RegionConfig::Ball { center, radius } => {
                if center.len() != cfg.grid.dimension || !(*radius > 0.0) {
                    return Err(field("region", "ball needs a center in R^n and a positive radius"));
                }
                RegionMask::from_predicate(&grid, |x| {
                    x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() < *radius
                })
            }
            RegionConfig::Box { bounds } => {
                if bounds.len() != cfg.grid.dimension {
                    return Err(field("region", "box needs one interval per axis"));
                }
                RegionMask::from_predicate(&grid, |x| x.iter().zip(bounds).all(|(a, b)| b.lo <= *a && *a <= b.hi))
            }
        };
        let dictionary = match &cfg.dictionary {
            Some(d) => d.iter().map(|c| c.build(&grid)).collect::<wbs_core::Result<_>>(),
            None => default_dictionary(&grid),
        }
        .map_err(|e| field("dictionary", e.to_string()))?;
        Ok(Self { grid, seq, limit, region, dictionary })
    }
}

/// Bundled scenarios in suite order.
pub fn bundled() -> BTreeMap<&'static str, &'static str> {
    let mut out = BTreeMap::new();
    for (name, text) in [
        ("01-zero-smoke", include_str!("../scenarios/01-zero-smoke.json")),
        ("02-oscillatory-L2", include_str!("../scenarios/02-oscillatory-L2.json")),
        ("03-oscillatory-L3", include_str!("../scenarios/03-oscillatory-L3.json")),
        ("04-vector-oscillatory-walsh", include_str!("../scenarios/04-vector-oscillatory-walsh.json")),
        ("05-levels-walsh-L1", include_str!("../scenarios/05-levels-walsh-L1.json")),
        ("06-liminf-oscillatory-rademacher", include_str!("../scenarios/06-liminf-oscillatory-rademacher.json")),
        ("07-spike-control", include_str!("../scenarios/07-spike-control.json")),
        ("08-weak-star-rademacher", include_str!("../scenarios/08-weak-star-rademacher.json")),
        ("09-closed-set-rademacher", include_str!("../scenarios/09-closed-set-rademacher.json")),
    ] {
        out.insert(name, text);
    }
    out
}
