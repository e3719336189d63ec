//! Convex integrands, their composites with sampled fields, and the lower
//! semicontinuity checks along weakly convergent sequences.

mod liminf;
mod spec;

pub use liminf::{
    default_dictionary, liminf_verify, mazur_scenario_verify, weak_star_verify, CheckVerdict, LiminfProblem,
    LiminfReport, LiminfRow, ProofReplay, WeakStarReport, LIMINF_RELATIVE_TOLERANCE,
};
pub use spec::{
    AffinePiece, ConvexFunctionSpec, ConvexKind, ConvexSetKind, ConvexSetSpec, CustomConvex, Evaluator, Halfspace,
    MEMBERSHIP_SLACK,
};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, RegionMask, VectorField};

fn describe(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// Writes `f(u(x))` into `out` at included nodes (zero elsewhere) after
/// checking `u(x) ∈ K`.
pub(crate) fn composite_samples(
    f: &ConvexFunctionSpec,
    k: &ConvexSetSpec,
    u: &VectorField,
    region: &RegionMask,
    out: &mut Vec<f64>,
) -> Result<()> {
    ensure_same_grid(u.grid(), region.grid())?;
    let n = u.grid().len();
    out.clear();
    out.resize(n, 0.0);
    let mut w = vec![0.0; u.dim()];
    for node in region.indices() {
        u.value_at(node, &mut w);
        if !k.contains(&w) {
            return Err(Error::DomainViolation {
                node,
                detail: format!("u = {} at x = {}", describe(&w), describe(u.grid().node(node))),
            });
        }
        let v = f.eval(&w);
        if !v.is_finite() {
            return Err(Error::DomainViolation {
                node,
                detail: format!("f is not finite at u = {}", describe(&w)),
            });
        }
        out[node] = v;
    }
    Ok(())
}

/// `∫_Ω f(u(x)) dμ`
pub fn evaluate_composite(
    f: &ConvexFunctionSpec,
    k: &ConvexSetSpec,
    u: &VectorField,
    region: &RegionMask,
) -> Result<f64> {
    k.validate(u.dim())?;
    let mut values = Vec::new();
    composite_samples(f, k, u, region, &mut values)?;
    let weights = u.grid().weights();
    Ok(region.indices().map(|i| weights[i] * values[i]).sum())
}

/// `(1/k) Σ f(w_r) − f((1/k) Σ w_r)`
pub fn jensen_check(f: &ConvexFunctionSpec, k: &ConvexSetSpec, points: &[Vec<f64>]) -> Result<f64> {
    let first = points.first().ok_or_else(|| Error::invalid("jensen_check needs at least one point"))?;
    let m = first.len();
    k.validate(m)?;
    let mut mean = vec![0.0; m];
    let mut mean_f = 0.0;
    for (i, w) in points.iter().enumerate() {
        if w.len() != m {
            return Err(Error::invalid(format!("point {i} has dimension {}, expected {m}", w.len())));
        }
        if !k.contains(w) {
            return Err(Error::DomainViolation {
                node: i,
                detail: format!("point {} is not in K", describe(w)),
            });
        }
        mean_f += f.eval(w);
        for (a, b) in mean.iter_mut().zip(w) {
            *a += b;
        }
    }
    let n = points.len() as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    Ok(mean_f / n - f.eval(&mean))
}
