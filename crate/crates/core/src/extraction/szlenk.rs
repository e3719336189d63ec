//! Level-wise selection for `p = 1`.
//!
//! Level `l` is a subsequence of level `l-1` whose running Cesàro `L^1`
//! norms stay at or below `1/l` from its checkpoint on. The diagonal takes
//! the `r`-th element of level `min(r, L)`.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{ExtractionMethod, ExtractionTrace, SequencePool, TraceStep};
use crate::error::{Error, Result};
use crate::grid::VectorField;
use crate::norms::Exponent;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SzlenkLevel {
    pub level: usize,
    /// `1/l`
    pub target: f64,
    /// First running-mean length at which the target is enforced.
    pub checkpoint: usize,
    /// Original 1-based sequence indices, increasing.
    pub indices: Vec<usize>,
}

/// Diagonal Cesàro norm at a checkpoint against its level target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub level: usize,
    pub k: usize,
    pub cesaro: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SzlenkSchedule {
    /// Level 0 is the whole pool.
    pub levels: Vec<SzlenkLevel>,
    pub diagonal: Vec<usize>,
    /// One row per level checkpoint reached by the diagonal, then one for its last element.
    pub checkpoints: Vec<CheckpointRow>,
    /// `min over l < k` of
    /// `(1/k)‖S_l‖ + (1/(k-l))‖S_k − S_l‖ − (1/k)‖S_k‖` along the diagonal.
    pub splitting_margin: f64,
    /// Every diagonal tail `r >= l` lies inside level `l`.
    pub tails_nested: bool,
}

impl SzlenkSchedule {
    /// Level `l+1` is a subsequence of level `l` for every `l`.
    pub fn nesting_exact(&self) -> bool {
        self.levels.windows(2).all(|w| is_subsequence(&w[1].indices, &w[0].indices))
    }

    pub fn diagonal_increasing(&self) -> bool {
        self.diagonal.windows(2).all(|w| w[0] < w[1])
    }

    pub fn checkpoints_hold(&self, slack: f64) -> bool {
        self.checkpoints.iter().all(|c| c.cesaro <= c.target + slack)
    }
}

fn is_subsequence(sub: &[usize], of: &[usize]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

fn l1_norm(weights: &[f64], sums: &[Vec<f64>]) -> f64 {
    sums.iter()
        .map(|s| weights.iter().zip(s).map(|(w, v)| w * v.abs()).sum::<f64>())
        .sum()
}

/// `Σ_j ∫ |s^(j) + u^(j)|` without materializing the sum.
fn l1_norm_with(weights: &[f64], sums: &[Vec<f64>], u: &VectorField) -> f64 {
    sums.iter()
        .zip(u.components())
        .map(|(s, c)| {
            weights
                .iter()
                .zip(s)
                .zip(c.samples())
                .map(|((w, a), b)| w * (a + b).abs())
                .sum::<f64>()
        })
        .sum()
}

fn accumulate(sums: &mut [Vec<f64>], u: &VectorField) {
    for (s, c) in sums.iter_mut().zip(u.components()) {
        for (a, b) in s.iter_mut().zip(c.samples()) {
            *a += b;
        }
    }
}

/// Default checkpoint `l^2`: an orthonormal family has `(1/k)‖Σ‖_1 <= k^(-1/2)`.
pub fn default_checkpoint(level: usize) -> usize {
    level * level
}

/// Builds `levels` nested levels over the normalized pool, the diagonal, and
/// the `p = 1` trace along the diagonal.
///
/// `checkpoints[l-1]` overrides the checkpoint of level `l` (must be `>= l`).
/// A level that never reaches its checkpoint returns [`Error::LevelStalled`]
/// carrying the completed levels.
pub fn szlenk_extract(
    pool: &SequencePool,
    levels: usize,
    checkpoints: Option<&[usize]>,
) -> Result<(SzlenkSchedule, ExtractionTrace)> {
    if levels == 0 {
        return Err(Error::invalid("need at least one level"));
    }
    let checkpoints: Vec<usize> = match checkpoints {
        Some(c) if c.len() != levels => {
            return Err(Error::invalid(format!("{} checkpoints for {levels} levels", c.len())))
        }
        Some(c) => c.to_vec(),
        None => (1..=levels).map(default_checkpoint).collect(),
    };
    if let Some((l, k)) = checkpoints.iter().enumerate().find(|(l, &k)| k < l + 1) {
        return Err(Error::invalid(format!("checkpoint {k} of level {} is below the level", l + 1)));
    }

    let pool = pool.normalized(Exponent::Finite(1.0))?;
    let grid = pool.grid().clone();
    let weights = grid.weights();
    let n = grid.len();
    let m = pool.dim();

    let mut schedule = SzlenkSchedule {
        levels: vec![SzlenkLevel {
            level: 0,
            target: f64::INFINITY,
            checkpoint: 1,
            indices: (1..=pool.len()).collect(),
        }],
        diagonal: Vec::new(),
        checkpoints: Vec::new(),
        splitting_margin: f64::INFINITY,
        tails_nested: true,
    };

    for (l, &checkpoint) in (1..=levels).zip(&checkpoints) {
        let target = 1.0 / l as f64;
        let parent = &schedule.levels[l - 1].indices;
        let mut sums = vec![vec![0.0f64; n]; m];
        let mut accepted = Vec::new();
        for &i in parent {
            let u = pool.member(i);
            let k = accepted.len() + 1;
            if k < checkpoint || l1_norm_with(weights, &sums, u) / k as f64 <= target {
                accumulate(&mut sums, u);
                accepted.push(i);
            }
        }
        if accepted.len() < checkpoint {
            let reason = format!(
                "kept {} of {} parent indices, checkpoint needs {checkpoint}",
                accepted.len(),
                parent.len()
            );
            return Err(Error::LevelStalled {
                level: l,
                completed: Box::new(schedule),
                reason,
            });
        }
        schedule.levels.push(SzlenkLevel {
            level: l,
            target,
            checkpoint,
            indices: accepted,
        });
    }

    let last = &schedule.levels[levels].indices;
    schedule.diagonal = (1..=last.len())
        .map(|r| schedule.levels[r.min(levels)].indices[r - 1])
        .collect();
    if !schedule.diagonal_increasing() {
        return Err(Error::InternalConsistency("diagonal indices are not increasing".into()));
    }

    // trace along the diagonal
    let mut trace = ExtractionTrace::new(ExtractionMethod::Szlenk, 1.0, pool.scale());
    let mut sums = vec![vec![0.0f64; n]; m];
    let mut norms = Vec::with_capacity(schedule.diagonal.len());
    for (k, &index) in (1..).zip(&schedule.diagonal) {
        let u = pool.member(index);
        let pairings: Vec<f64> = sums
            .iter()
            .zip(u.components())
            .map(|(s, c)| {
                weights
                    .iter()
                    .zip(s)
                    .zip(c.samples())
                    .map(|((w, a), b)| if *a == 0.0 { 0.0 } else { w * a.signum() * b })
                    .sum()
            })
            .collect();
        accumulate(&mut sums, u);
        let partial_integrals: Vec<f64> = sums
            .iter()
            .map(|s| weights.iter().zip(s).map(|(w, v)| w * v.abs()).sum())
            .collect();
        let total: f64 = partial_integrals.iter().sum();
        norms.push(total);
        trace.push(
            TraceStep {
                k,
                index,
                pairings,
                partial_integrals,
                cesaro_norm: total / k as f64,
            },
            u.clone(),
        );
    }

    for (l, &checkpoint) in (1..=levels).zip(&checkpoints) {
        if let Some(step) = trace.steps().get(checkpoint - 1) {
            schedule.checkpoints.push(CheckpointRow {
                level: l,
                k: checkpoint,
                cesaro: step.cesaro_norm,
                target: 1.0 / l as f64,
            });
        }
    }
    if let Some(step) = trace.steps().last() {
        schedule.checkpoints.push(CheckpointRow {
            level: levels,
            k: step.k,
            cesaro: step.cesaro_norm,
            target: 1.0 / levels as f64,
        });
    }

    // (1/k)‖S_k‖ <= (1/k)‖S_l‖ + (1/(k-l))‖S_k − S_l‖
    let len = schedule.diagonal.len();
    for l in 1..=levels.min(len) {
        let mut tail = vec![vec![0.0; n]; m];
        for k in l + 1..=len {
            accumulate(&mut tail, pool.member(schedule.diagonal[k - 1]));
            let kf = k as f64;
            let rhs = norms[l - 1] / kf + l1_norm(weights, &tail) / (kf - l as f64);
            schedule.splitting_margin = schedule.splitting_margin.min(rhs - norms[k - 1] / kf);
        }
        let members: BTreeSet<usize> = schedule.levels[l].indices.iter().copied().collect();
        if !schedule.diagonal[l - 1..].iter().all(|i| members.contains(i)) {
            schedule.tails_nested = false;
        }
    }

    Ok((schedule, trace))
}
