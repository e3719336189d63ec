//! Canonical function sequences and finite-dictionary weak / weak* convergence probes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, QuadratureGrid, RegionMask, ScalarField, VectorField};
use crate::norms::{dual_pairing, Exponent};

/// Finest oscillation must be sampled by at least this many nodes per period.
pub const NODES_PER_PERIOD: f64 = 8.0;

/// Family of functions indexed by `i >= 1`, varying along the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SequenceKind {
    /// `sin(2π · i · base · x1)`
    Oscillatory {
        #[serde(default = "one")]
        base: f64,
    },
    /// `sign(sin(2^i · π · x1))`
    Rademacher,
    /// Paley-ordered Walsh function: product of the Rademacher factors `r_j`
    /// for every set bit `j-1` of `i`. Index `2^(j-1)` is exactly `r_j`.
    Walsh,
    /// `i^exponent · 1_[0, 1/i](x1)`, cell-averaged on tensor grids so the
    /// `L^1` mass is exactly `i^(exponent-1)` at every resolution.
    Spike {
        #[serde(default = "one")]
        exponent: f64,
    },
    Constant { value: f64 },
    /// Explicit samples per index.
    Custom { table: BTreeMap<usize, Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

/// One scalar sequence: a kind scaled by `amplitude`.
///
/// Serialized as `{kind, amplitude, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind) -> Self {
        Self { kind, amplitude: 1.0 }
    }

    pub fn oscillatory(base: f64) -> Self {
        Self::new(SequenceKind::Oscillatory { base })
    }

    pub fn rademacher() -> Self {
        Self::new(SequenceKind::Rademacher)
    }

    pub fn walsh() -> Self {
        Self::new(SequenceKind::Walsh)
    }

    pub fn spike(exponent: f64) -> Self {
        Self::new(SequenceKind::Spike { exponent })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(SequenceKind::Constant { value })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Oscillation frequency of member `i` along `x1`, in periods per unit length.
    pub fn frequency(&self, i: usize) -> f64 {
        match &self.kind {
            SequenceKind::Oscillatory { base } => i as f64 * base.abs(),
            SequenceKind::Rademacher => 2f64.powi(i as i32 - 1),
            SequenceKind::Walsh => 2f64.powi(bit_length(i) as i32 - 1),
            SequenceKind::Spike { .. } | SequenceKind::Constant { .. } | SequenceKind::Custom { .. } => 0.0,
        }
    }
}

fn bit_length(i: usize) -> u32 {
    usize::BITS - i.leading_zeros()
}

/// `sign(sin(π y))` evaluated from the integer part of `y`, with `sign(0) = 0`.
fn sin_pi_sign(y: f64) -> f64 {
    if y.fract() == 0.0 {
        0.0
    } else if y.floor().rem_euclid(2.0) == 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `r_j(x) = sign(sin(2^j π x))`. Scaling by a power of two is exact.
fn rademacher_value(j: usize, x: f64) -> f64 {
    sin_pi_sign(x * 2f64.powi(j as i32))
}

/// Member `i` (1-based) of the sequence, sampled at the grid nodes.
pub fn generate(spec: &SequenceSpec, i: usize, grid: &Arc<QuadratureGrid>) -> Result<ScalarField> {
    if i == 0 {
        return Err(Error::invalid("sequence indices start at 1"));
    }
    let freq = spec.frequency(i);
    let density = grid.nodes_per_unit_length(0);
    if !(freq.is_finite() && density >= NODES_PER_PERIOD * freq) {
        return Err(Error::invalid(format!(
            "member {i} oscillates at {freq} periods per unit length; the grid has {density} nodes \
             per unit length but needs at least {}",
            NODES_PER_PERIOD * freq
        )));
    }
    let a = spec.amplitude;
    let samples: Vec<f64> = match &spec.kind {
        SequenceKind::Oscillatory { base } => {
            let w = 2.0 * std::f64::consts::PI * i as f64 * base;
            grid.nodes().map(|x| a * (w * x[0]).sin()).collect()
        }
        SequenceKind::Rademacher => grid.nodes().map(|x| a * rademacher_value(i, x[0])).collect(),
        SequenceKind::Walsh => grid
            .nodes()
            .map(|x| {
                let mut v = a;
                let mut bits = i;
                let mut j = 1;
                while bits != 0 {
                    if bits & 1 == 1 {
                        v *= rademacher_value(j, x[0]);
                    }
                    bits >>= 1;
                    j += 1;
                }
                v
            })
            .collect(),
        SequenceKind::Spike { exponent } => {
            let height = a * (i as f64).powf(*exponent);
            let end = 1.0 / i as f64;
            match grid.spacing() {
                Some(h) => {
                    let half = 0.5 * h[0];
                    grid.nodes()
                        .map(|x| {
                            let (lo, hi) = (x[0] - half, x[0] + half);
                            if lo >= 0.0 && hi <= end {
                                height
                            } else if hi <= 0.0 || lo >= end {
                                0.0
                            } else {
                                height * (hi.min(end) - lo.max(0.0)) / (hi - lo)
                            }
                        })
                        .collect()
                }
                None => grid
                    .nodes()
                    .map(|x| if (0.0..=end).contains(&x[0]) { height } else { 0.0 })
                    .collect(),
            }
        }
        SequenceKind::Constant { value } => vec![a * value; grid.len()],
        SequenceKind::Custom { table } => {
            let row = table
                .get(&i)
                .ok_or_else(|| Error::invalid(format!("custom sequence has no samples for index {i}")))?;
            row.iter().map(|s| a * s).collect()
        }
    };
    ScalarField::new(grid, samples)
}

/// Sequence in the product space: one scalar sequence per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorSequenceSpec {
    pub components: Vec<SequenceSpec>,
}

impl VectorSequenceSpec {
    pub fn new(components: Vec<SequenceSpec>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("vector sequence needs at least one component"));
        }
        Ok(Self { components })
    }

    pub fn scalar(spec: SequenceSpec) -> Self {
        Self { components: vec![spec] }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn generate(&self, i: usize, grid: &Arc<QuadratureGrid>) -> Result<VectorField> {
        VectorField::new(
            self.components
                .iter()
                .map(|c| generate(c, i, grid))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converging,
    NotConverging,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converging => "converging",
            Verdict::NotConverging => "not-converging",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Decision thresholds for turning a residual curve into a verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeThresholds {
    /// Converging needs the final residual below `decay_factor` times the initial one.
    pub decay_factor: f64,
    /// Not-converging when every residual in the last half stays above
    /// `persistence` times the largest residual.
    pub persistence: f64,
    /// Residuals at or below this are treated as exact zeros.
    pub zero_floor: f64,
}

impl Default for ProbeThresholds {
    fn default() -> Self {
        Self {
            decay_factor: 0.05,
            persistence: 0.5,
            zero_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub index: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub verdict: Verdict,
    /// Log-log slope of the residual's upper envelope; `None` when it vanishes identically.
    pub slope: Option<f64>,
}

impl ProbeReport {
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.residual)
    }
}

/// Weak convergence in `(L^p)^m` tested against a finite dictionary in `L^q`.
pub fn weak_probe(
    seq: &VectorSequenceSpec,
    limit: &VectorField,
    p: Exponent,
    dictionary: &[ScalarField],
    horizon: usize,
) -> Result<ProbeReport> {
    if p.is_infinite() {
        return Err(Error::invalid("weak probe needs finite p; use weak_star_probe for p = ∞"));
    }
    probe(seq, limit, dictionary, horizon, ProbeThresholds::default())
}

/// Weak* convergence in `(L^∞)^m` tested against a finite dictionary in `L^1`.
pub fn weak_star_probe(
    seq: &VectorSequenceSpec,
    limit: &VectorField,
    dictionary: &[ScalarField],
    horizon: usize,
) -> Result<ProbeReport> {
    probe(seq, limit, dictionary, horizon, ProbeThresholds::default())
}

/// Shared probe: `residual_i = max_j max_v |∫ (u_i^(j) − u^(j)) v|`.
pub fn probe(
    seq: &VectorSequenceSpec,
    limit: &VectorField,
    dictionary: &[ScalarField],
    horizon: usize,
    thresholds: ProbeThresholds,
) -> Result<ProbeReport> {
    if dictionary.is_empty() {
        return Err(Error::invalid("probe dictionary is empty"));
    }
    if horizon < 8 {
        return Err(Error::invalid(format!("probe horizon must be at least 8, got {horizon}")));
    }
    if seq.dim() != limit.dim() {
        return Err(Error::invalid(format!(
            "sequence has {} components but the limit has {}",
            seq.dim(),
            limit.dim()
        )));
    }
    let grid = limit.grid();
    for v in dictionary {
        ensure_same_grid(grid, v.grid())?;
    }
    let full = RegionMask::full(grid);
    let limit_pairings: Vec<Vec<f64>> = limit
        .components()
        .iter()
        .map(|c| dictionary.iter().map(|v| dual_pairing(c, v, &full)).collect())
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(horizon);
    for i in 1..=horizon {
        let u = seq.generate(i, grid)?;
        let mut residual = 0.0f64;
        for (c, lp) in u.components().iter().zip(&limit_pairings) {
            for (v, l) in dictionary.iter().zip(lp) {
                residual = residual.max((dual_pairing(c, v, &full)? - l).abs());
            }
        }
        rows.push(ProbeRow { index: i, residual });
    }
    let (verdict, slope) = classify(&rows, thresholds);
    Ok(ProbeReport { rows, verdict, slope })
}

/// Verdict from a residual curve, judged on its non-increasing upper envelope.
pub fn classify(rows: &[ProbeRow], t: ProbeThresholds) -> (Verdict, Option<f64>) {
    let n = rows.len();
    if n == 0 {
        return (Verdict::Inconclusive, None);
    }
    let mut envelope = vec![0.0; n];
    let mut running = 0.0f64;
    for k in (0..n).rev() {
        running = running.max(rows[k].residual);
        envelope[k] = running;
    }
    let peak = envelope[0];
    let last = envelope[n - 1];
    if last <= t.zero_floor {
        return (Verdict::Converging, None);
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .zip(&envelope)
        .filter(|(_, &e)| e > t.zero_floor)
        .map(|(r, &e)| ((r.index as f64).ln(), e.ln()))
        .unzip();
    let slope = least_squares_slope(&xs, &ys);

    if slope.is_some_and(|s| s < 0.0) && last < t.decay_factor * peak {
        return (Verdict::Converging, slope);
    }
    let tail_floor = rows[n / 2..]
        .iter()
        .map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);
    if tail_floor >= t.persistence * peak {
        return (Verdict::NotConverging, slope);
    }
    (Verdict::Inconclusive, slope)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
