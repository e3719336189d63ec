//! Subsequence extraction with convergent Cesàro means.
//!
//! * [`lemma`]: the pointwise inequality and its constants.
//! * [`banach_saks`]: recursive selection for `p > 1` and the growth bound.
//! * [`szlenk`]: nested level selection and diagonal for `p = 1`.
//!
//! All selections run on a finite [`SequencePool`]; indices reported to
//! callers are the original 1-based sequence indices.

pub mod banach_saks;
pub mod lemma;
pub mod szlenk;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gallery::{least_squares_slope, VectorSequenceSpec};
use crate::grid::{same_grid, QuadratureGrid, VectorField};
use crate::norms::{product_lp_norm, Exponent};

pub use banach_saks::{banach_saks_extract, verify_growth_bound, GrowthReport, GrowthRow};
pub use lemma::{
    check_pointwise_inequality, estimate_A, floor_exponent, generalized_binomial, lemma1_remainder,
    pointwise_grid_check, GridCheck, LemmaConstants, ScanRange,
};
pub use szlenk::{szlenk_extract, CheckpointRow, SzlenkLevel, SzlenkSchedule};

/// Finite candidate pool `u_1, ..., u_H`, optionally centred and rescaled.
#[derive(Debug, Clone)]
pub struct SequencePool {
    members: Vec<VectorField>,
    scale: f64,
}

impl SequencePool {
    pub fn from_members(members: Vec<VectorField>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("sequence pool is empty"))?;
        for (i, u) in members.iter().enumerate() {
            if u.dim() != first.dim() || !same_grid(u.grid(), first.grid()) {
                return Err(Error::invalid(format!(
                    "pool member {} does not match the first member's grid or dimension",
                    i + 1
                )));
            }
        }
        Ok(Self { members, scale: 1.0 })
    }

    /// Members `1..=horizon` of `seq`.
    pub fn generate(seq: &VectorSequenceSpec, grid: &Arc<QuadratureGrid>, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be positive"));
        }
        Self::from_members((1..=horizon).map(|i| seq.generate(i, grid)).collect::<Result<_>>()?)
    }

    /// `u_i − u` for every member.
    pub fn centered(&self, limit: &VectorField) -> Result<Self> {
        Ok(Self {
            members: self.members.iter().map(|u| u.sub(limit)).collect::<Result<_>>()?,
            scale: self.scale,
        })
    }

    /// Divides every member by `max(1, max_i ‖u_i‖_p)` so that `‖u_i‖_p <= 1`.
    pub fn normalized(&self, p: Exponent) -> Result<Self> {
        let sup = self
            .members
            .iter()
            .map(|u| product_lp_norm(u, p))
            .fold(0.0f64, f64::max);
        if sup <= 1.0 {
            return Ok(self.clone());
        }
        Ok(Self {
            members: self
                .members
                .iter()
                .map(|u| u.scaled(1.0 / sup))
                .collect::<Result<_>>()?,
            scale: self.scale * sup,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, index: usize) -> &VectorField {
        &self.members[index - 1]
    }

    pub fn members(&self) -> &[VectorField] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        self.members[0].grid()
    }

    /// Factor the original members were divided by.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMethod {
    BanachSaks,
    Szlenk,
}

/// One selection `i_k` with the quantities the proofs track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub k: usize,
    /// Original 1-based sequence index `i_k`.
    pub index: usize,
    /// `t_{k,j} = ∫ |s_{k-1}^(j)|^(p-1) sgn(s_{k-1}^(j)) u_{i_k}^(j)`, zero for `k = 1`.
    pub pairings: Vec<f64>,
    /// `∫ |s_k^(j)|^p` per component.
    pub partial_integrals: Vec<f64>,
    /// Product norm of `s_k / k` in the trace exponent.
    pub cesaro_norm: f64,
}

impl TraceStep {
    pub fn max_pairing(&self) -> f64 {
        self.pairings.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `‖s_k‖_p^p` in the product space.
    pub fn partial_norm_p(&self) -> f64 {
        self.partial_integrals.iter().sum()
    }
}

/// Record of an extraction. Values are in units of the normalized pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionTrace {
    method: ExtractionMethod,
    exponent: f64,
    scale: f64,
    steps: Vec<TraceStep>,
    selected: Vec<VectorField>,
}

impl ExtractionTrace {
    pub(crate) fn new(method: ExtractionMethod, exponent: f64, scale: f64) -> Self {
        Self {
            method,
            exponent,
            scale,
            steps: Vec::new(),
            selected: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, step: TraceStep, member: VectorField) {
        self.steps.push(step);
        self.selected.push(member);
    }

    pub fn method(&self) -> ExtractionMethod {
        self.method
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Normalization divisor applied to the pool before selection.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.index).collect()
    }

    /// Selected members `u_{i_1}, u_{i_2}, ...` as used in the sums.
    pub fn selected(&self) -> &[VectorField] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `(k, ‖s_k / k‖_p)` for every step of the trace, in the product norm.
pub fn cesaro_curve(trace: &ExtractionTrace, p: Exponent) -> Result<Vec<(usize, f64)>> {
    let first = trace
        .selected
        .first()
        .ok_or_else(|| Error::invalid("trace is empty"))?;
    let mut sum = VectorField::zeros(first.grid(), first.dim())?;
    let mut out = Vec::with_capacity(trace.len());
    for (k, u) in trace.selected.iter().enumerate() {
        sum.add_assign_unchecked(u);
        let k = k + 1;
        out.push((k, product_lp_norm(&sum, p) / k as f64));
    }
    Ok(out)
}

/// Least-squares slope of `log value` against `log k` over the second half of `curve`.
pub fn decay_rate_fit(curve: &[(usize, f64)]) -> Result<f64> {
    if curve.len() < 8 {
        return Err(Error::invalid(format!("decay fit needs at least 8 points, got {}", curve.len())));
    }
    fit_points(&curve[curve.len() / 2..])
}

/// Slope over the points with `k_lo <= k <= k_hi`.
pub fn decay_rate_fit_window(curve: &[(usize, f64)], k_lo: usize, k_hi: usize) -> Result<f64> {
    let window: Vec<(usize, f64)> = curve
        .iter()
        .copied()
        .filter(|(k, _)| (k_lo..=k_hi).contains(k))
        .collect();
    if window.len() < 8 {
        return Err(Error::invalid(format!(
            "window [{k_lo}, {k_hi}] holds {} points, need at least 8",
            window.len()
        )));
    }
    fit_points(&window)
}

fn fit_points(points: &[(usize, f64)]) -> Result<f64> {
    if let Some((k, v)) = points.iter().find(|(k, v)| !(*v > 0.0) || *k == 0) {
        return Err(Error::invalid(format!(
            "decay fit needs positive values at positive k, got {v} at k = {k}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    least_squares_slope(&xs, &ys).ok_or_else(|| Error::invalid("decay fit is degenerate"))
}
