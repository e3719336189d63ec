use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use wbs_core::extraction::{check_pointwise_inequality, LemmaConstants};
use wbs_core::gallery::probe;
use wbs_core::{
    banach_saks_extract, build_uniform_grid, default_dictionary, dual_pairing, evaluate_composite,
    holder_minkowski_check, integrate, jensen_check, liminf_verify, lp_norm, szlenk_extract, AffinePiece,
    AxisBounds, ConvexFunctionSpec, ConvexSetSpec, Exponent, Halfspace, LiminfProblem, ProbeThresholds,
    QuadratureGrid, RegionMask, ScalarField, SequencePool, SequenceSpec, VectorField, VectorSequenceSpec,
};

fn unit(n: usize) -> Arc<QuadratureGrid> {
    build_uniform_grid(&[AxisBounds::new(0.0, 1.0)], &[n]).unwrap()
}

fn square(n: usize) -> Arc<QuadratureGrid> {
    build_uniform_grid(&[AxisBounds::new(-1.0, 1.0), AxisBounds::new(0.0, 2.0)], &[n, n]).unwrap()
}

fn field(grid: &Arc<QuadratureGrid>, samples: Vec<f64>) -> ScalarField {
    ScalarField::new(grid, samples).unwrap()
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

const N: usize = 64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn integral_is_linear(f in samples(N), g in samples(N), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grid = unit(N);
        let (f, g) = (field(&grid, f), field(&grid, g));
        let full = RegionMask::full(&grid);
        let lhs = integrate(&f.linear_combination(a, &g, b).unwrap(), &full).unwrap();
        let rhs = a * integrate(&f, &full).unwrap() + b * integrate(&g, &full).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()) * 10.0);
    }

    #[test]
    fn holder_and_minkowski(f in samples(N), g in samples(N), pi in 0usize..4) {
        let grid = unit(N);
        let (f, g) = (field(&grid, f), field(&grid, g));
        let p = [1.0, 1.5, 2.0, 3.0][pi];
        let m = holder_minkowski_check(&f, &g, Exponent::Finite(p)).unwrap();
        prop_assert!(m.holds(1e-10), "p = {p}: {m:?}");
    }

    #[test]
    fn holder_and_minkowski_at_infinity(f in samples(N), g in samples(N)) {
        let grid = unit(N);
        let (f, g) = (field(&grid, f), field(&grid, g));
        let full = RegionMask::full(&grid);
        let inf = |h: &ScalarField| lp_norm(h, Exponent::Infinity, &full).unwrap();
        let one = lp_norm(&g, Exponent::Finite(1.0), &full).unwrap();
        prop_assert!(inf(&f) * one - dual_pairing(&f, &g, &full).unwrap().abs() >= -1e-10);
        prop_assert!(inf(&f) + inf(&g) - inf(&f.add(&g).unwrap()) >= -1e-12);
    }

    #[test]
    fn region_monotone_and_additive(f in samples(N), a in prop::collection::vec(any::<bool>(), N), b in prop::collection::vec(any::<bool>(), N)) {
        let grid = unit(N);
        let f = field(&grid, f).map(f64::abs).unwrap();
        let a = RegionMask::from_flags(&grid, a).unwrap();
        let b = RegionMask::from_flags(&grid, b).unwrap();
        let ab = a.intersection(&b).unwrap();
        let union = a.union(&b).unwrap();
        let i = |r: &RegionMask| integrate(&f, r).unwrap();
        prop_assert!(ab.is_subset_of(&a).unwrap());
        prop_assert!(i(&ab) <= i(&a) + 1e-12);
        prop_assert!(i(&a) <= i(&union) + 1e-12);
        // inclusion-exclusion
        prop_assert!((i(&union) + i(&ab) - i(&a) - i(&b)).abs() <= 1e-12);
    }

    #[test]
    fn inequality_margin_is_homogeneous(a in -10.0f64..10.0, b in -10.0f64..10.0, lambda in 0.1f64..10.0, pi in 0usize..6) {
        let p = [1.1, 1.5, 2.0, 2.5, 3.0, 3.5][pi];
        let c = LemmaConstants::new(p).unwrap();
        let base = check_pointwise_inequality(p, a, b, &c);
        let scaled = check_pointwise_inequality(p, lambda * a, lambda * b, &c);
        let lp = lambda.powf(p);
        prop_assert!(base >= -1e-9);
        prop_assert!((scaled - lp * base).abs() <= 1e-9 * lp * (a.abs().powf(p) + b.abs().powf(p) + base.abs()));
    }

    #[test]
    fn composite_scales_quadratically(c in -4.0f64..4.0, freq in 1usize..6) {
        let grid = unit(256);
        let u = VectorField::new(vec![ScalarField::from_fn(&grid, |x| (freq as f64 * x[0]).cos()).unwrap()]).unwrap();
        let quad = ConvexFunctionSpec::custom("square", true, |w| w[0] * w[0]);
        let k = ConvexSetSpec::whole_space();
        let full = RegionMask::full(&grid);
        let base = evaluate_composite(&quad, &k, &u, &full).unwrap();
        let scaled = evaluate_composite(&quad, &k, &u.scaled(c).unwrap(), &full).unwrap();
        prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn convex_sets_are_midpoint_convex(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 2..20)) {
        let sets = [
            ConvexSetSpec::whole_space(),
            ConvexSetSpec::closed_box(vec![AxisBounds::new(-1.0, 1.0), AxisBounds::new(0.0, 2.0)]),
            ConvexSetSpec::ball(vec![0.5, 0.0], 1.5, true),
            ConvexSetSpec::ball(vec![0.0, 0.0], 2.0, false),
            ConvexSetSpec::halfspaces(vec![Halfspace { a: vec![1.0, 1.0], b: 1.0 }, Halfspace { a: vec![-1.0, 0.5], b: 0.0 }], true),
        ];
        for s in &sets {
            prop_assert!(s.check_midpoint_convexity(&pts).is_ok(), "{s:?}");
        }
    }
}

#[test]
fn jensen_gap_is_nonnegative() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let k = ConvexSetSpec::whole_space();
    let fs = [
        ConvexFunctionSpec::squared_norm(),
        ConvexFunctionSpec::power(1.0).unwrap(),
        ConvexFunctionSpec::power(3.5).unwrap(),
        ConvexFunctionSpec::max_affine(vec![
            AffinePiece { a: vec![1.0, -2.0], b: 0.5 },
            AffinePiece { a: vec![-0.5, 0.25], b: -1.0 },
        ]),
        ConvexFunctionSpec::affine(vec![2.0, -1.0], 3.0),
    ];
    for f in &fs {
        for _ in 0..1000 {
            let n = rng.gen_range(1..12);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
            let gap = jensen_check(f, &k, &pts).unwrap();
            let scale: f64 = pts.iter().map(|w| f.eval(w).abs()).sum::<f64>() / n as f64;
            assert!(gap >= -1e-12 * (1.0 + scale), "{f:?}: {gap:e}");
        }
    }
}

#[test]
fn extraction_respects_pairing_threshold() {
    let grid = unit(2048);
    for base in [1.0, 2.0, 3.0] {
        for p in [1.5, 2.0, 3.0] {
            let seq = VectorSequenceSpec::scalar(SequenceSpec::oscillatory(base).with_amplitude(2.5));
            let pool = SequencePool::generate(&seq, &grid, 64).unwrap();
            let trace = banach_saks_extract(&pool, p, 24).unwrap();
            assert!(trace.indices().windows(2).all(|w| w[0] < w[1]));
            for s in trace.steps() {
                assert!(s.max_pairing() <= 1.0 + 1e-12, "base {base}, p {p}, k {}: {}", s.k, s.max_pairing());
            }
        }
    }
}

#[test]
fn levels_nest_for_every_depth() {
    let grid = unit(1024);
    for spec in [SequenceSpec::walsh(), SequenceSpec::oscillatory(1.0)] {
        let pool = SequencePool::generate(&VectorSequenceSpec::scalar(spec.clone()), &grid, 64).unwrap();
        for levels in 1..=3 {
            let (s, _) = szlenk_extract(&pool, levels, None).unwrap();
            assert!(s.nesting_exact(), "{spec:?}, {levels} levels");
            assert!(s.tails_nested && s.diagonal_increasing());
        }
    }
}

#[test]
fn zero_dictionary_entry_leaves_residuals_unchanged() {
    let grid = unit(2048);
    let seq = VectorSequenceSpec::new(vec![SequenceSpec::oscillatory(1.0), SequenceSpec::rademacher()]).unwrap();
    let limit = VectorField::zeros(&grid, 2).unwrap();
    let mut dict = default_dictionary(&grid).unwrap();
    let before = probe(&seq, &limit, &dict, 8, ProbeThresholds::default()).unwrap();
    dict.push(ScalarField::zeros(&grid));
    let after = probe(&seq, &limit, &dict, 8, ProbeThresholds::default()).unwrap();
    assert_eq!(before.rows, after.rows);
    assert_eq!(before.verdict, after.verdict);
}

#[test]
fn constant_sequence_has_zero_liminf_margin() {
    let grid = square(32);
    let seq = VectorSequenceSpec::scalar(SequenceSpec::constant(0.75));
    let limit = VectorField::new(vec![ScalarField::constant(&grid, 0.75).unwrap()]).unwrap();
    let f = ConvexFunctionSpec::power(3.0).unwrap();
    let k = ConvexSetSpec::whole_space();
    let region = RegionMask::from_predicate(&grid, |x| x[0] * x[0] + (x[1] - 1.0).powi(2) <= 0.81);
    let dict = default_dictionary(&grid).unwrap();
    let problem = LiminfProblem { seq: &seq, limit: &limit, f: &f, k: &k, region: &region, horizon: 12, dictionary: &dict };
    let r = liminf_verify(&problem, Exponent::Finite(3.0)).unwrap();
    assert!(r.margin.abs() <= 1e-12, "{}", r.margin);
    assert!(r.verdict.passed());
}
