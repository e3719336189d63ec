//! Recursive selection for `p > 1` and the partial-sum growth bound.

use serde::Serialize;

use super::lemma::LemmaConstants;
use super::{ExtractionMethod, ExtractionTrace, SequencePool, TraceStep};
use crate::error::{Error, Result};
use crate::norms::{abs_pow, product_lp_norm, Exponent};

/// Selection threshold on the pairing with `|s_k|^(p-1) sgn(s_k)`.
pub const PAIRING_THRESHOLD: f64 = 1.0;

/// Selects `i_1 = 1` and then, given `s_k`, the smallest unused index `i`
/// with `∫ |s_k^(j)|^(p-1) sgn(s_k^(j)) u_i^(j) <= 1` for every component `j`,
/// until `steps` members are chosen.
///
/// The pool is first divided by `max(1, sup_i ‖u_i‖_p)`. Running out of
/// candidates before `steps` selections returns [`Error::ExtractionStalled`]
/// with the partial trace.
pub fn banach_saks_extract(pool: &SequencePool, p: f64, steps: usize) -> Result<ExtractionTrace> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!(
            "recursive selection needs finite p > 1 (got {p}); p = 1 goes through szlenk_extract"
        )));
    }
    if steps == 0 {
        return Err(Error::invalid("requested zero selections"));
    }
    let pool = pool.normalized(Exponent::Finite(p))?;
    let grid = pool.grid().clone();
    let weights = grid.weights();
    let n = grid.len();
    let m = pool.dim();

    let mut sums = vec![vec![0.0f64; n]; m];
    let mut dual = vec![vec![0.0; n]; m];
    let mut trace = ExtractionTrace::new(ExtractionMethod::BanachSaks, p, pool.scale());
    let mut next = 1usize;

    while trace.len() < steps {
        for (d, s) in dual.iter_mut().zip(&sums) {
            for (dv, &sv) in d.iter_mut().zip(s) {
                *dv = if sv == 0.0 { 0.0 } else { sv.abs().powf(p - 1.0).copysign(sv) };
            }
        }
        let mut chosen = None;
        for i in next..=pool.len() {
            let u = pool.member(i);
            let pairings: Vec<f64> = (0..m)
                .map(|j| {
                    let us = u.component(j).samples();
                    weights
                        .iter()
                        .zip(&dual[j])
                        .zip(us)
                        .map(|((w, d), x)| w * d * x)
                        .sum()
                })
                .collect();
            if pairings.iter().all(|&t| t <= PAIRING_THRESHOLD) {
                chosen = Some((i, pairings));
                break;
            }
        }
        let Some((index, pairings)) = chosen else {
            let reason = if next > pool.len() {
                format!("pool of {} members exhausted", pool.len())
            } else {
                format!("no index in {}..={} meets the pairing threshold", next, pool.len())
            };
            return Err(Error::ExtractionStalled {
                trace: Box::new(trace),
                reason,
            });
        };

        let u = pool.member(index);
        for (s, c) in sums.iter_mut().zip(u.components()) {
            for (sv, cv) in s.iter_mut().zip(c.samples()) {
                *sv += cv;
            }
        }
        let k = trace.len() + 1;
        let partial_integrals: Vec<f64> = sums
            .iter()
            .map(|s| weights.iter().zip(s).map(|(w, v)| w * abs_pow(*v, p)).sum())
            .collect();
        let cesaro_norm = partial_integrals.iter().sum::<f64>().powf(1.0 / p) / k as f64;
        trace.push(
            TraceStep {
                k,
                index,
                pairings,
                partial_integrals,
                cesaro_norm,
            },
            u.clone(),
        );
        next = index + 1;
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub k: usize,
    pub component: usize,
    /// `(A+p)k + B k^(p-2) + 1 − ∫|s_k^(j)|^p`, the bound as stated.
    pub bound_margin: f64,
    /// `(A+p)k + B Σ_{r<=k} r^(p-2) + 1 − ∫|s_k^(j)|^p`, the recursion summed term by term.
    pub summed_margin: f64,
    /// `C(k) + p t_{k,j} + ∫|s_{k-1}^(j)|^p − ∫|s_k^(j)|^p`
    pub recursion_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
}

impl GrowthReport {
    /// Allowed slack at step `k`: `1e-9 (1 + k)`.
    pub fn tolerance(k: usize) -> f64 {
        1e-9 * (1.0 + k as f64)
    }

    /// Recursion and summed bound at every step.
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| {
            let tol = Self::tolerance(r.k);
            r.summed_margin >= -tol && r.recursion_margin >= -tol
        })
    }

    /// The `k`-linear bound as stated. Agrees with [`holds`](Self::holds) for `p <= 2`, where `B = 0`.
    pub fn stated_bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.bound_margin >= -Self::tolerance(r.k))
    }

    /// First step whose stated bound margin is below tolerance.
    pub fn first_stated_violation(&self) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.bound_margin < -Self::tolerance(r.k))
            .map(|r| r.k)
    }

    pub fn worst_bound_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.bound_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_summed_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.summed_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_recursion_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.recursion_margin).fold(f64::INFINITY, f64::min)
    }

    /// Smallest bound margin among the rows of step `k`.
    pub fn bound_margin_at(&self, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.k == k)
            .map(|r| r.bound_margin)
            .reduce(f64::min)
    }
}

/// Checks the linear-in-`k` growth of `∫|s_k|^p` and the one-step recursion
/// behind it, per component.
pub fn verify_growth_bound(trace: &ExtractionTrace, consts: &LemmaConstants) -> Result<GrowthReport> {
    let p = trace.exponent();
    if trace.method() != ExtractionMethod::BanachSaks {
        return Err(Error::invalid("growth bound applies to p > 1 selections only"));
    }
    if (consts.p - p).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "constants were built for p = {} but the trace uses p = {p}",
            consts.p
        )));
    }
    for (step, u) in trace.steps().iter().zip(trace.selected()) {
        let norm_p = product_lp_norm(u, Exponent::Finite(p)).powf(p);
        if norm_p > 1.0 + 1e-12 {
            return Err(Error::precondition(
                "normalization",
                format!("member {} has ‖u‖_p^p = {norm_p} > 1", step.index),
            ));
        }
    }

    let mut rows = Vec::new();
    let mut previous: Option<&TraceStep> = None;
    let mut power_sum = 0.0;
    for step in trace.steps() {
        let k = step.k;
        let kf = k as f64;
        power_sum += kf.powf(p - 2.0);
        let bound = (consts.a + p) * kf + consts.b * kf.powf(p - 2.0) + 1.0;
        let summed = (consts.a + p) * kf + consts.b * power_sum + 1.0;
        for (j, &integral) in step.partial_integrals.iter().enumerate() {
            let before = previous.map_or(0.0, |s| s.partial_integrals[j]);
            rows.push(GrowthRow {
                k,
                component: j,
                bound_margin: bound - integral,
                summed_margin: summed - integral,
                recursion_margin: consts.growth_constant(k) + p * step.pairings[j] + before - integral,
            });
        }
        previous = Some(step);
    }
    Ok(GrowthReport { rows })
}
