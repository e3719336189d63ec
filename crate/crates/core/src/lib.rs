//! Discrete laboratory for Cesàro-convergent subsequences of weakly null
//! sequences in `(L^p)^m` and the lower semicontinuity of convex integrals.
//!
//! Everything lives on a finite [`QuadratureGrid`]; integrals are weighted sums.

pub mod convex;
pub mod error;
pub mod extraction;
pub mod gallery;
pub mod grid;
pub mod norms;

pub use convex::{
    default_dictionary, evaluate_composite, jensen_check, liminf_verify, mazur_scenario_verify, weak_star_verify,
    AffinePiece, CheckVerdict, ConvexFunctionSpec, ConvexSetSpec, Halfspace, LiminfProblem, LiminfReport, LiminfRow,
    ProofReplay, WeakStarReport,
};
pub use error::{Error, Result};
pub use extraction::{
    banach_saks_extract, cesaro_curve, decay_rate_fit, decay_rate_fit_window, szlenk_extract, verify_growth_bound,
    ExtractionMethod, ExtractionTrace, GrowthReport, LemmaConstants, SequencePool, SzlenkSchedule, TraceStep,
};
pub use gallery::{
    weak_probe, weak_star_probe, ProbeReport, ProbeRow, ProbeThresholds, SequenceKind, SequenceSpec, Verdict,
    VectorSequenceSpec,
};
pub use grid::{
    build_uniform_grid, integrate, truncate_region, AxisBounds, QuadratureGrid, RegionMask, ScalarField, VectorField,
};
pub use norms::{
    conjugate_exponent, dual_pairing, holder_minkowski_check, lp_norm, product_lp_norm, product_lp_norm_on, Exponent,
};
