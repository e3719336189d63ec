//! Pointwise inequality
//! `|a+b|^p <= |a|^p + p|a|^(p-1) sgn(a) b + A|b|^p + B(p,a,b)` for `p > 1`,
//! with a computable constant `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `p(p-1)...(p-i+1) / i!`
pub fn generalized_binomial(p: f64, i: u32) -> f64 {
    (0..i).fold(1.0, |acc, k| acc * (p - k as f64) / (k + 1) as f64)
}

/// Largest natural number strictly less than `p`.
pub fn floor_exponent(p: f64) -> Result<u32> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("floor_exponent needs finite p > 1, got {p}")));
    }
    Ok(p.ceil() as u32 - 1)
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `B(p,a,b) = Σ_{i=2}^{E(p)} binom(p,i) |a|^(p-i) |b|^i`, zero for `p <= 2`.
pub fn lemma1_remainder(p: f64, a: f64, b: f64) -> f64 {
    if p <= 2.0 {
        return 0.0;
    }
    let top = p.ceil() as u32 - 1;
    let (aa, bb) = (a.abs(), b.abs());
    (2..=top)
        .map(|i| generalized_binomial(p, i) * aa.powf(p - i as f64) * bb.powi(i as i32))
        .sum()
}

/// Symmetric scan `t = k·step` for `|k·step| <= half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub half_width: f64,
    pub step: f64,
}

impl Default for ScanRange {
    fn default() -> Self {
        Self {
            half_width: 100.0,
            step: 1e-3,
        }
    }
}

/// Multiplier applied to the scanned supremum.
pub const SAFETY_FACTOR: f64 = 1.01;

/// Residual of the inequality on the `b = 1` slice, excluding the `A` term.
fn unit_slice_residual(p: f64, t: f64) -> f64 {
    (t + 1.0).abs().powf(p) - t.abs().powf(p) - p * t.abs().powf(p - 1.0) * sgn(t) - lemma1_remainder(p, t, 1.0)
}

/// `A(p) = 1.01 · sup_{|t| <= T} (|t+1|^p − |t|^p − p|t|^(p-1) sgn(t) − B(p,t,1))`.
///
/// Every term is jointly `p`-homogeneous in `(a, b)`, so the `b = 1` slice
/// covers all `b != 0` via `t = a/b`; `b = 0` holds with equality.
#[allow(non_snake_case)]
pub fn estimate_A(p: f64, scan: ScanRange) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("estimate_A needs finite p > 1, got {p}")));
    }
    if !(scan.half_width > 0.0 && scan.step > 0.0 && scan.half_width.is_finite()) {
        return Err(Error::invalid("scan range needs positive half width and step"));
    }
    let steps = (scan.half_width / scan.step).round();
    if steps > 1e9 {
        return Err(Error::invalid("scan range has too many points"));
    }
    let steps = steps as i64;
    let sup = (-steps..=steps)
        .map(|k| unit_slice_residual(p, k as f64 * scan.step))
        .fold(f64::NEG_INFINITY, f64::max);
    if !sup.is_finite() {
        return Err(Error::Internal(format!("supremum for p = {p} is not finite")));
    }
    Ok(SAFETY_FACTOR * sup)
}

/// `E(p)`, `A` and `B` for one exponent. Serialized as
/// `{p, E_p, A, B, scan_range, scan_step}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub p: f64,
    #[serde(rename = "E_p")]
    pub e_p: u32,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub scan_range: f64,
    pub scan_step: f64,
}

impl LemmaConstants {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_scan(p, ScanRange::default())
    }

    pub fn with_scan(p: f64, scan: ScanRange) -> Result<Self> {
        let e_p = floor_exponent(p)?;
        let b = if p <= 2.0 {
            0.0
        } else {
            (2..=e_p).map(|i| generalized_binomial(p, i)).sum()
        };
        Ok(Self {
            p,
            e_p,
            a: estimate_A(p, scan)?,
            b,
            scan_range: scan.half_width,
            scan_step: scan.step,
        })
    }

    /// `C(k) = A + B k^(p-2)`
    pub fn growth_constant(&self, k: usize) -> f64 {
        self.a + self.b * (k as f64).powf(self.p - 2.0)
    }
}

/// RHS − LHS of the pointwise inequality at `(a, b)`.
pub fn check_pointwise_inequality(p: f64, a: f64, b: f64, consts: &LemmaConstants) -> f64 {
    a.abs().powf(p) + p * a.abs().powf(p - 1.0) * sgn(a) * b + consts.a * b.abs().powf(p)
        + lemma1_remainder(p, a, b)
        - (a + b).abs().powf(p)
}

/// Worst margin over the square `[-half_width, half_width]^2` sampled at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCheck {
    pub worst_margin: f64,
    pub worst_a: f64,
    pub worst_b: f64,
    pub points: usize,
}

pub fn pointwise_grid_check(consts: &LemmaConstants, half_width: f64, step: f64) -> Result<GridCheck> {
    if !(half_width > 0.0 && step > 0.0) {
        return Err(Error::invalid("grid check needs positive half width and step"));
    }
    let n = (half_width / step).round() as i64;
    let mut out = GridCheck {
        worst_margin: f64::INFINITY,
        worst_a: 0.0,
        worst_b: 0.0,
        points: 0,
    };
    for ka in -n..=n {
        let a = ka as f64 * step;
        for kb in -n..=n {
            let b = kb as f64 * step;
            let m = check_pointwise_inequality(consts.p, a, b, consts);
            out.points += 1;
            if m < out.worst_margin {
                out.worst_margin = m;
                out.worst_a = a;
                out.worst_b = b;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binomials() {
        assert_eq!(generalized_binomial(3.0, 2), 3.0);
        assert_eq!(generalized_binomial(2.5, 2), 1.875);
        assert_eq!(generalized_binomial(5.0, 0), 1.0);
        assert_eq!(generalized_binomial(4.2, 1), 4.2);
        assert_abs_diff_eq!(generalized_binomial(6.0, 3), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn floor_exponents() {
        assert_eq!(floor_exponent(3.0).unwrap(), 2);
        assert_eq!(floor_exponent(2.5).unwrap(), 2);
        assert_eq!(floor_exponent(2.0).unwrap(), 1);
        assert_eq!(floor_exponent(1.1).unwrap(), 1);
        assert!(floor_exponent(1.0).is_err());
        assert!(floor_exponent(0.3).is_err());
    }

    #[test]
    fn remainder_examples() {
        assert_eq!(lemma1_remainder(1.5, 3.0, -7.0), 0.0);
        assert_eq!(lemma1_remainder(2.0, 3.0, -7.0), 0.0);
        assert_eq!(lemma1_remainder(3.0, 2.0, 1.0), 6.0);
        assert_eq!(lemma1_remainder(3.0, 0.0, 5.0), 0.0);
        // p = 3.5: i = 2, 3
        let expected = generalized_binomial(3.5, 2) * 2f64.powf(1.5) + generalized_binomial(3.5, 3) * 2f64.powf(0.5);
        assert_abs_diff_eq!(lemma1_remainder(3.5, -2.0, 1.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn constant_for_p2_is_exact() {
        let c = LemmaConstants::new(2.0).unwrap();
        assert_eq!(c.e_p, 1);
        assert_eq!(c.b, 0.0);
        assert_abs_diff_eq!(c.a, 1.01, epsilon = 1e-9);
    }

    #[test]
    fn constants_at_least_one() {
        for p in [1.1, 1.5, 2.5, 3.0, 3.5, 4.0] {
            let c = LemmaConstants::new(p).unwrap();
            assert!(c.a >= 1.0, "p = {p}: A = {}", c.a);
        }
    }

    #[test]
    fn p3_constant_matches_direct_residual() {
        // |t+1|^3 - |t|^3 - 3t|t| - 3|t|, scanned independently
        let mut sup = f64::NEG_INFINITY;
        for k in -100_000i64..=100_000 {
            let t = k as f64 * 1e-3;
            let r = (t + 1.0).abs().powi(3) - t.abs().powi(3) - 3.0 * t * t.abs() - 3.0 * t.abs();
            sup = sup.max(r);
        }
        let c = LemmaConstants::new(3.0).unwrap();
        assert_abs_diff_eq!(c.a, 1.01 * sup, epsilon = 1e-9);
        assert!(c.a >= 1.0);
        assert_eq!(c.b, 3.0);
    }

    #[test]
    fn pointwise_examples() {
        let c2 = LemmaConstants::new(2.0).unwrap();
        assert_abs_diff_eq!(check_pointwise_inequality(2.0, 1.0, 0.0, &c2), 0.0, epsilon = 1e-12);
        let fixed = LemmaConstants { a: 1.01, ..c2 };
        assert_abs_diff_eq!(check_pointwise_inequality(2.0, 0.0, 2.0, &fixed), 0.04, epsilon = 1e-12);
        let c = LemmaConstants::new(2.5).unwrap();
        assert_abs_diff_eq!(check_pointwise_inequality(2.5, -3.0, 0.0, &c), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bad_scan_rejected() {
        assert!(estimate_A(1.0, ScanRange::default()).is_err());
        assert!(estimate_A(2.0, ScanRange { half_width: 0.0, step: 1e-3 }).is_err());
        assert!(estimate_A(2.0, ScanRange { half_width: 1.0, step: -1.0 }).is_err());
    }

    #[test]
    fn constants_json_shape() {
        let c = LemmaConstants::new(2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(c).unwrap();
        for key in ["p", "E_p", "A", "B", "scan_range", "scan_step"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
