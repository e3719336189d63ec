//! `L^p` / `L^∞` norms, product-space norms, conjugate exponents and dual pairings.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, weighted_sum, RegionMask, ScalarField, VectorField};

/// Integrability exponent: a real `p >= 1` or `∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else {
            Err(Error::invalid(format!("exponent must be >= 1, got {p}")))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Exponent::Finite(p) => s.serialize_f64(p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Exponent::finite(p).map_err(serde::de::Error::custom),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Exponent::Infinity)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number >= 1 or \"inf\", got {t:?}"
            ))),
        }
    }
}

/// `q = p/(p-1)` for `p > 1`, `q = ∞` for `p = 1`.
pub fn conjugate_exponent(p: Exponent) -> Result<Exponent> {
    match p {
        Exponent::Infinity => Err(Error::invalid("the conjugate of p = ∞ is not used")),
        Exponent::Finite(1.0) => Ok(Exponent::Infinity),
        Exponent::Finite(p) => Exponent::finite(p / (p - 1.0)),
    }
}

#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

/// `∫_region |f|^p dmu` for finite `p`.
pub fn lp_integral(f: &ScalarField, p: f64, region: &RegionMask) -> Result<f64> {
    ensure_same_grid(f.grid(), region.grid())?;
    let s = f.samples();
    Ok(weighted_sum(f.grid(), region, |i| abs_pow(s[i], p)))
}

/// `‖f‖_p` over `region`; for `p = ∞` the maximum of `|f|` over included nodes.
pub fn lp_norm(f: &ScalarField, p: Exponent, region: &RegionMask) -> Result<f64> {
    match p {
        Exponent::Finite(p) => Ok(lp_integral(f, p, region)?.powf(1.0 / p)),
        Exponent::Infinity => {
            ensure_same_grid(f.grid(), region.grid())?;
            let s = f.samples();
            Ok(region.indices().map(|i| s[i].abs()).fold(0.0, f64::max))
        }
    }
}

/// Product-space norm over the whole grid:
/// `(Σ_j ‖u^(j)‖_p^p)^(1/p)` for finite `p`, `Σ_j ‖u^(j)‖_∞` for `p = ∞`.
pub fn product_lp_norm(u: &VectorField, p: Exponent) -> f64 {
    let full = RegionMask::full(u.grid());
    product_lp_norm_on(u, p, &full).expect("mask built from the field's own grid")
}

pub fn product_lp_norm_on(u: &VectorField, p: Exponent, region: &RegionMask) -> Result<f64> {
    match p {
        Exponent::Finite(pv) => {
            let mut total = 0.0;
            for c in u.components() {
                total += lp_integral(c, pv, region)?;
            }
            Ok(total.powf(1.0 / pv))
        }
        Exponent::Infinity => {
            let mut total = 0.0;
            for c in u.components() {
                total += lp_norm(c, p, region)?;
            }
            Ok(total)
        }
    }
}

/// `∫_region f g dmu`.
pub fn dual_pairing(f: &ScalarField, g: &ScalarField, region: &RegionMask) -> Result<f64> {
    ensure_same_grid(f.grid(), g.grid())?;
    ensure_same_grid(f.grid(), region.grid())?;
    let (a, b) = (f.samples(), g.samples());
    Ok(weighted_sum(f.grid(), region, |i| a[i] * b[i]))
}

/// Slack of the Hölder and Minkowski inequalities for a pair of fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginPair {
    /// `‖f‖_p ‖g‖_q − |∫ f g|`
    pub holder: f64,
    /// `‖f‖_p + ‖g‖_p − ‖f + g‖_p`
    pub minkowski: f64,
}

impl MarginPair {
    pub fn holds(&self, slack: f64) -> bool {
        self.holder >= -slack && self.minkowski >= -slack
    }
}

pub fn holder_minkowski_check(f: &ScalarField, g: &ScalarField, p: Exponent) -> Result<MarginPair> {
    if p.is_infinite() {
        return Err(Error::invalid("holder/minkowski check needs a finite exponent"));
    }
    ensure_same_grid(f.grid(), g.grid())?;
    let full = RegionMask::full(f.grid());
    let q = conjugate_exponent(p)?;
    let fp = lp_norm(f, p, &full)?;
    let gp = lp_norm(g, p, &full)?;
    let gq = lp_norm(g, q, &full)?;
    let pairing = dual_pairing(f, g, &full)?;
    let sum = f.add(g)?;
    Ok(MarginPair {
        holder: fp * gq - pairing.abs(),
        minkowski: fp + gp - lp_norm(&sum, p, &full)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_uniform_grid, AxisBounds};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit(n: usize) -> Arc<crate::grid::QuadratureGrid> {
        build_uniform_grid(&[AxisBounds::new(0.0, 1.0)], &[n]).unwrap()
    }

    #[test]
    fn conjugates() {
        assert_eq!(conjugate_exponent(Exponent::Finite(2.0)).unwrap(), Exponent::Finite(2.0));
        assert_eq!(conjugate_exponent(Exponent::Finite(1.0)).unwrap(), Exponent::Infinity);
        let q = conjugate_exponent(Exponent::Finite(4.0)).unwrap();
        assert_abs_diff_eq!(q.value(), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(conjugate_exponent(q).unwrap().value(), 4.0, epsilon = 1e-12);
        assert!(conjugate_exponent(Exponent::Infinity).is_err());
    }

    #[test]
    fn exponent_validation_and_serde() {
        assert!(Exponent::finite(0.5).is_err());
        assert!(Exponent::finite(f64::NAN).is_err());
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Exponent::Infinity);
        let e: Exponent = serde_json::from_str("2.5").unwrap();
        assert_eq!(e, Exponent::Finite(2.5));
        assert!(serde_json::from_str::<Exponent>("0.3").is_err());
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
    }

    #[test]
    fn lp_norm_examples() {
        let g = unit(16);
        let full = RegionMask::full(&g);
        let two = ScalarField::constant(&g, 2.0).unwrap();
        assert_abs_diff_eq!(lp_norm(&two, Exponent::Finite(3.0), &full).unwrap(), 2.0, epsilon = 1e-12);
        let m5 = ScalarField::constant(&g, -5.0).unwrap();
        assert_eq!(lp_norm(&m5, Exponent::Infinity, &full).unwrap(), 5.0);

        let g = unit(1000);
        let x = ScalarField::from_fn(&g, |p| p[0]).unwrap();
        let n = lp_norm(&x, Exponent::Finite(2.0), &RegionMask::full(&g)).unwrap();
        assert_abs_diff_eq!(n, 1.0 / 3f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn product_norm_examples() {
        let g = unit(8);
        let one = ScalarField::constant(&g, 1.0).unwrap();
        let two = ScalarField::constant(&g, 2.0).unwrap();
        let u = VectorField::new(vec![one.clone(), one.clone()]).unwrap();
        assert_abs_diff_eq!(product_lp_norm(&u, Exponent::Finite(2.0)), 2f64.sqrt(), epsilon = 1e-12);
        let u = VectorField::new(vec![one, two]).unwrap();
        assert_eq!(product_lp_norm(&u, Exponent::Infinity), 3.0);
    }

    #[test]
    fn pairing_examples() {
        let g = unit(1000);
        let full = RegionMask::full(&g);
        let one = ScalarField::constant(&g, 1.0).unwrap();
        assert_abs_diff_eq!(dual_pairing(&one, &one, &full).unwrap(), 1.0, epsilon = 1e-12);
        let s = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert_abs_diff_eq!(dual_pairing(&s, &one, &full).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn minkowski_equality_cases() {
        let g = unit(64);
        let f = ScalarField::from_fn(&g, |x| (3.0 * x[0]).cos()).unwrap();
        let m = holder_minkowski_check(&f, &f, Exponent::Finite(2.0)).unwrap();
        assert_abs_diff_eq!(m.minkowski, 0.0, epsilon = 1e-12);

        let a = ScalarField::from_fn(&g, |x| if x[0] < 0.5 { 1.0 + x[0] } else { 0.0 }).unwrap();
        let b = ScalarField::from_fn(&g, |x| if x[0] >= 0.5 { -2.0 } else { 0.0 }).unwrap();
        let m = holder_minkowski_check(&a, &b, Exponent::Finite(1.0)).unwrap();
        assert_abs_diff_eq!(m.minkowski, 0.0, epsilon = 1e-12);
        assert!(m.holder >= -1e-12);
    }

    #[test]
    fn infinity_rejected_by_margin_check() {
        let g = unit(4);
        let f = ScalarField::zeros(&g);
        assert!(holder_minkowski_check(&f, &f, Exponent::Infinity).is_err());
    }
}
