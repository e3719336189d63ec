use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AxisBounds;

/// Nodes may sit this far outside `K` (absolute, per constraint) and still count as members.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// User-supplied convex function. Convexity is the caller's responsibility.
#[derive(Clone)]
pub struct CustomConvex {
    pub name: String,
    pub eval: Evaluator,
}

impl fmt::Debug for CustomConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomConvex({})", self.name)
    }
}

/// `w ↦ a·w + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

impl AffinePiece {
    fn eval(&self, w: &[f64]) -> f64 {
        self.a.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ConvexKind {
    /// `|w|^2`
    SquaredNorm,
    /// `|w|^exponent`, `exponent >= 1`
    Power { exponent: f64 },
    /// `max(0, max_i a_i·w + b_i)`
    MaxAffine { pieces: Vec<AffinePiece> },
    /// `a·w + b`, no sign constraint.
    Affine(AffinePiece),
    #[serde(skip)]
    Custom(CustomConvex),
}

/// Convex integrand `f: K → R`. Serialized as `{kind, params, nonnegative}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexFunctionSpec {
    #[serde(flatten)]
    pub kind: ConvexKind,
    /// Caller's claim that `f >= 0` on `K`.
    #[serde(default)]
    pub nonnegative: bool,
}

impl ConvexFunctionSpec {
    pub fn squared_norm() -> Self {
        Self { kind: ConvexKind::SquaredNorm, nonnegative: true }
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::invalid(format!("power needs a finite exponent >= 1, got {exponent}")));
        }
        Ok(Self { kind: ConvexKind::Power { exponent }, nonnegative: true })
    }

    pub fn max_affine(pieces: Vec<AffinePiece>) -> Self {
        Self { kind: ConvexKind::MaxAffine { pieces }, nonnegative: true }
    }

    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        Self { kind: ConvexKind::Affine(AffinePiece { a, b }), nonnegative: false }
    }

    pub fn custom(name: impl Into<String>, nonnegative: bool, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: ConvexKind::Custom(CustomConvex { name: name.into(), eval: Arc::new(eval) }),
            nonnegative,
        }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        match &self.kind {
            ConvexKind::SquaredNorm => w.iter().map(|x| x * x).sum(),
            ConvexKind::Power { exponent } => w.iter().map(|x| x * x).sum::<f64>().sqrt().powf(*exponent),
            ConvexKind::MaxAffine { pieces } => pieces.iter().map(|p| p.eval(w)).fold(0.0, f64::max),
            ConvexKind::Affine(piece) => piece.eval(w),
            ConvexKind::Custom(c) => (c.eval)(w),
        }
    }

    /// Checks the nonnegativity claim on sample points; returns the first offender.
    pub fn spot_check_nonnegative<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
        if !self.nonnegative {
            return None;
        }
        points.into_iter().find(|w| self.eval(w) < -1e-12).map(|w| w.to_vec())
    }
}

/// `{w : a·w <= b}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ConvexSetKind {
    WholeSpace,
    Box { bounds: Vec<AxisBounds> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspaces { constraints: Vec<Halfspace> },
}

/// Convex set `K ⊆ R^m`. Serialized as `{kind, params, closed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSetSpec {
    #[serde(flatten)]
    pub kind: ConvexSetKind,
    #[serde(default = "default_closed")]
    pub closed: bool,
}

fn default_closed() -> bool {
    true
}

impl ConvexSetSpec {
    pub fn whole_space() -> Self {
        Self { kind: ConvexSetKind::WholeSpace, closed: true }
    }

    pub fn closed_box(bounds: Vec<AxisBounds>) -> Self {
        Self { kind: ConvexSetKind::Box { bounds }, closed: true }
    }

    pub fn ball(center: Vec<f64>, radius: f64, closed: bool) -> Self {
        Self { kind: ConvexSetKind::Ball { center, radius }, closed }
    }

    pub fn halfspaces(constraints: Vec<Halfspace>, closed: bool) -> Self {
        Self { kind: ConvexSetKind::Halfspaces { constraints }, closed }
    }

    /// Ambient dimension fixed by the parameters, if any.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            ConvexSetKind::WholeSpace => None,
            ConvexSetKind::Box { bounds } => Some(bounds.len()),
            ConvexSetKind::Ball { center, .. } => Some(center.len()),
            ConvexSetKind::Halfspaces { constraints } => constraints.first().map(|h| h.a.len()),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if let Some(d) = self.dimension() {
            if d != m {
                return Err(Error::invalid(format!("convex set lives in R^{d}, values are in R^{m}")));
            }
        }
        match &self.kind {
            ConvexSetKind::Ball { radius, .. } if !(*radius > 0.0) => {
                Err(Error::invalid("ball radius must be positive"))
            }
            ConvexSetKind::Halfspaces { constraints } if constraints.iter().any(|h| h.a.len() != m) => {
                Err(Error::invalid("halfspace normals must all have the value dimension"))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        let tol = MEMBERSHIP_SLACK;
        let le = |x: f64, y: f64| if self.closed { x <= y + tol } else { x < y + tol };
        match &self.kind {
            ConvexSetKind::WholeSpace => true,
            ConvexSetKind::Box { bounds } => {
                bounds.len() == w.len() && bounds.iter().zip(w).all(|(b, &x)| le(b.lo, x) && le(x, b.hi))
            }
            ConvexSetKind::Ball { center, radius } => {
                center.len() == w.len()
                    && le(center.iter().zip(w).map(|(c, x)| (x - c) * (x - c)).sum::<f64>().sqrt(), *radius)
            }
            ConvexSetKind::Halfspaces { constraints } => constraints.iter().all(|h| {
                h.a.len() == w.len() && le(h.a.iter().zip(w).map(|(a, x)| a * x).sum::<f64>(), h.b)
            }),
        }
    }

    /// Midpoint spot-check: for every pair of member points the midpoint is a member.
    /// Returns the number of pairs checked or the first failing pair.
    pub fn check_midpoint_convexity(&self, points: &[Vec<f64>]) -> std::result::Result<usize, (Vec<f64>, Vec<f64>)> {
        let members: Vec<&Vec<f64>> = points.iter().filter(|w| self.contains(w)).collect();
        let mut checked = 0;
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let mid: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| 0.5 * (x + y)).collect();
                if !self.contains(&mid) {
                    return Err(((*a).clone(), (*b).clone()));
                }
                checked += 1;
            }
        }
        Ok(checked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluations() {
        assert_eq!(ConvexFunctionSpec::squared_norm().eval(&[3.0, 4.0]), 25.0);
        assert_eq!(ConvexFunctionSpec::power(1.0).unwrap().eval(&[3.0, 4.0]), 5.0);
        let f = ConvexFunctionSpec::max_affine(vec![AffinePiece { a: vec![1.0], b: 0.0 }]);
        assert_eq!(f.eval(&[-3.0]), 0.0);
        assert_eq!(f.eval(&[2.0]), 2.0);
        assert_eq!(ConvexFunctionSpec::affine(vec![2.0], -1.0).eval(&[-1.0]), -3.0);
        assert!(ConvexFunctionSpec::power(0.5).is_err());
    }

    #[test]
    fn membership() {
        let b = ConvexSetSpec::closed_box(vec![AxisBounds::new(-1.0, 1.0)]);
        assert!(b.contains(&[1.0]));
        assert!(b.contains(&[-1.0]));
        assert!(!b.contains(&[1.1]));
        let open = ConvexSetSpec::ball(vec![0.0, 0.0], 1.0, false);
        assert!(open.contains(&[0.5, 0.5]));
        assert!(!open.contains(&[1.0, 0.5]));
        let h = ConvexSetSpec::halfspaces(vec![Halfspace { a: vec![1.0, 1.0], b: 1.0 }], true);
        assert!(h.contains(&[0.5, 0.5]));
        assert!(!h.contains(&[0.6, 0.5]));
        assert!(ConvexSetSpec::whole_space().contains(&[1e300]));
    }

    #[test]
    fn validation() {
        assert!(ConvexSetSpec::ball(vec![0.0], 0.0, true).validate(1).is_err());
        assert!(ConvexSetSpec::closed_box(vec![AxisBounds::new(0.0, 1.0)]).validate(2).is_err());
        assert!(ConvexSetSpec::whole_space().validate(5).is_ok());
    }

    #[test]
    fn serde_shapes() {
        let f: ConvexFunctionSpec = serde_json::from_str(
            r#"{"kind":"max_affine","params":{"pieces":[{"a":[1.0],"b":-0.5}]},"nonnegative":true}"#,
        )
        .unwrap();
        assert_eq!(f.eval(&[1.0]), 0.5);
        let f: ConvexFunctionSpec = serde_json::from_str(r#"{"kind":"squared_norm","nonnegative":true}"#).unwrap();
        assert_eq!(f.eval(&[2.0]), 4.0);
        let k: ConvexSetSpec =
            serde_json::from_str(r#"{"kind":"box","params":{"bounds":[[-1,1]]},"closed":true}"#).unwrap();
        assert!(k.contains(&[0.3]));
        let k: ConvexSetSpec = serde_json::from_str(r#"{"kind":"whole_space"}"#).unwrap();
        assert!(k.closed);
    }

    #[test]
    fn nonnegativity_spot_check() {
        let f = ConvexFunctionSpec::custom("shifted", true, |w| w[0] * w[0] - 1.0);
        let pts = [vec![2.0], vec![0.0]];
        assert_eq!(f.spot_check_nonnegative(pts.iter().map(|v| v.as_slice())), Some(vec![0.0]));
    }
}
