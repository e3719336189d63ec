use std::sync::Arc;

use serde::Serialize;

use super::{composite_samples, ConvexFunctionSpec, ConvexSetSpec};
use crate::error::{Error, Result};
use crate::extraction::{banach_saks_extract, szlenk_extract, ExtractionMethod, ExtractionTrace, SequencePool};
use crate::gallery::{weak_probe, weak_star_probe, ProbeReport, Verdict, VectorSequenceSpec};
use crate::grid::{ensure_same_grid, truncate_region, QuadratureGrid, RegionMask, ScalarField, VectorField};
use crate::norms::Exponent;

/// Relative slack on the liminf margin: pass iff `margin >= -1e-6 (1 + |∫ f(u)|)`.
pub const LIMINF_RELATIVE_TOLERANCE: f64 = 1e-6;
const JENSEN_SLACK: f64 = 1e-12;
const NONNEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
}

impl CheckVerdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == CheckVerdict::Pass
    }
}

impl std::fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.passed() { "pass" } else { "fail" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiminfRow {
    pub i: usize,
    /// `∫_Ω f(u_i)`
    pub alpha: f64,
    /// `min_{j >= i} α_j` over the stored horizon.
    pub tail_inf: f64,
}

/// Finite replay of the Cesàro, Jensen and Fatou steps on an extracted subsequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofReplay {
    pub method: ExtractionMethod,
    /// Original indices `i_1 < i_2 < ...`.
    pub indices: Vec<usize>,
    /// `(k, ‖(1/k) Σ_{r<=k} u_{i_r} − u‖)` in the probe exponent (`1` for `p = ∞`).
    pub cesaro: Vec<(usize, f64)>,
    pub cesaro_converging: bool,
    /// Smallest nodewise Jensen margin `(1/k) Σ f(u_{i_r}(x)) − f(mean_k(x))` at each `k`.
    pub jensen: Vec<(usize, f64)>,
    /// `∫ min_{k ∈ tail} f(mean_k)`
    pub fatou_integral_of_inf: f64,
    /// `min_{k ∈ tail} ∫ f(mean_k)`
    pub fatou_inf_of_integrals: f64,
    /// `min_{k ∈ tail} (1/k) Σ α_{i_r} − ∫ f(u)`
    pub chain_margin: f64,
    /// Set when the extraction stopped early or fell back to fewer levels.
    pub note: Option<String>,
}

impl ProofReplay {
    pub fn jensen_worst(&self) -> f64 {
        self.jensen.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min)
    }

    pub fn fatou_margin(&self) -> f64 {
        self.fatou_inf_of_integrals - self.fatou_integral_of_inf
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.cesaro_converging
            && self.jensen_worst() >= -JENSEN_SLACK
            && self.fatou_margin() >= -JENSEN_SLACK
            && self.chain_margin >= -tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiminfReport {
    pub rows: Vec<LiminfRow>,
    /// `∫_Ω f(u)`
    pub limit_integral: f64,
    /// Tail infimum over the last half of the horizon.
    pub tail_infimum: f64,
    /// `tail_infimum − limit_integral`
    pub margin: f64,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
    pub probe: Option<ProbeReport>,
    pub replay: Option<ProofReplay>,
}

impl LiminfReport {
    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.alpha)
    }

    pub fn replay_holds(&self) -> bool {
        self.replay.iter().all(|r| r.holds(self.tolerance))
    }
}

/// Inputs shared by every liminf check.
#[derive(Debug, Clone, Copy)]
pub struct LiminfProblem<'a> {
    pub seq: &'a VectorSequenceSpec,
    pub limit: &'a VectorField,
    pub f: &'a ConvexFunctionSpec,
    pub k: &'a ConvexSetSpec,
    pub region: &'a RegionMask,
    pub horizon: usize,
    /// Test functions for the convergence probe.
    pub dictionary: &'a [ScalarField],
}

/// `{1, t_a^2 (1 − t_a)}` per axis, with `t_a` the box coordinate rescaled to `[0,1]`.
///
/// The cubic vanishes at both ends with a one-sided kink, so its pairings with
/// `sin(2π i t)` fall off like `i^(-2)` and with dyadic sign patterns geometrically.
pub fn default_dictionary(grid: &Arc<QuadratureGrid>) -> Result<Vec<ScalarField>> {
    let mut out = vec![ScalarField::constant(grid, 1.0)?];
    for (axis, b) in grid.domain_box().iter().enumerate() {
        let (lo, len) = (b.lo, b.length());
        out.push(ScalarField::from_fn(grid, |x| {
            let t = (x[axis] - lo) / len;
            t * t * (1.0 - t)
        })?);
    }
    Ok(out)
}

fn validate(problem: &LiminfProblem) -> Result<()> {
    let LiminfProblem { seq, limit, k, region, horizon, .. } = *problem;
    if horizon < 8 {
        return Err(Error::invalid(format!("horizon must be at least 8, got {horizon}")));
    }
    if seq.dim() != limit.dim() {
        return Err(Error::invalid(format!(
            "sequence has {} components but the limit has {}",
            seq.dim(),
            limit.dim()
        )));
    }
    ensure_same_grid(limit.grid(), region.grid())?;
    k.validate(limit.dim())
}

fn require_converging(report: ProbeReport, which: &str) -> Result<ProbeReport> {
    if report.verdict != Verdict::Converging {
        let last = report.rows.last().map_or(0.0, |r| r.residual);
        return Err(Error::precondition(
            format!("{which} convergence"),
            format!("probe verdict is {} (final residual {last:e})", report.verdict),
        ));
    }
    Ok(report)
}

/// `f(u(x))` on the region with the K-membership and sign hypotheses enforced.
fn checked_samples(
    problem: &LiminfProblem,
    u: &VectorField,
    region: &RegionMask,
    what: &str,
    nonnegative: bool,
    out: &mut Vec<f64>,
) -> Result<f64> {
    composite_samples(problem.f, problem.k, u, region, out).map_err(|e| match e {
        Error::DomainViolation { node, detail } => {
            Error::precondition("values in K", format!("{what} at node {node}: {detail}"))
        }
        other => other,
    })?;
    if nonnegative {
        if let Some(node) = region.indices().find(|&i| out[i] < -NONNEGATIVE_SLACK) {
            return Err(Error::precondition(
                "f nonnegative",
                format!("f({what}) = {} at node {node}", out[node]),
            ));
        }
    }
    let w = u.grid().weights();
    Ok(region.indices().map(|i| w[i] * out[i]).sum())
}

struct Members {
    raw: Vec<VectorField>,
}

impl Members {
    fn generate(problem: &LiminfProblem) -> Result<Self> {
        let grid = problem.limit.grid();
        let raw = (1..=problem.horizon)
            .map(|i| problem.seq.generate(i, grid))
            .collect::<Result<_>>()?;
        Ok(Self { raw })
    }
}

fn alpha_report(
    problem: &LiminfProblem,
    members: &Members,
    region: &RegionMask,
    nonnegative: bool,
) -> Result<(LiminfReport, Vec<f64>)> {
    let mut buf = Vec::new();
    let limit_integral = checked_samples(problem, problem.limit, region, "limit u", nonnegative, &mut buf)?;
    let alphas: Vec<f64> = members
        .raw
        .iter()
        .enumerate()
        .map(|(i, u)| checked_samples(problem, u, region, &format!("u_{}", i + 1), nonnegative, &mut buf))
        .collect::<Result<_>>()?;

    let h = alphas.len();
    let mut tail = vec![0.0; h];
    let mut running = f64::INFINITY;
    for i in (0..h).rev() {
        running = running.min(alphas[i]);
        tail[i] = running;
    }
    let rows: Vec<LiminfRow> = (0..h)
        .map(|i| LiminfRow { i: i + 1, alpha: alphas[i], tail_inf: tail[i] })
        .collect();
    // last half: indices floor(H/2)+1 ..= H
    let tail_infimum = tail[h / 2];
    let margin = tail_infimum - limit_integral;
    let tolerance = LIMINF_RELATIVE_TOLERANCE * (1.0 + limit_integral.abs());
    Ok((
        LiminfReport {
            rows,
            limit_integral,
            tail_infimum,
            margin,
            tolerance,
            verdict: CheckVerdict::from_bool(margin >= -tolerance),
            probe: None,
            replay: None,
        },
        alphas,
    ))
}

/// Subsequence used by the replay, in original indices, with its Cesàro distances.
struct Extracted {
    method: ExtractionMethod,
    trace: ExtractionTrace,
    note: Option<String>,
}

fn szlenk_levels(horizon: usize) -> usize {
    ((horizon as f64).sqrt().floor() as usize).clamp(1, 4)
}

fn extract_for_replay(problem: &LiminfProblem, members: &Members, p: Exponent) -> Result<Extracted> {
    let pool = SequencePool::from_members(members.raw.clone())?.centered(problem.limit)?;
    match p {
        Exponent::Finite(p) if p > 1.0 => match banach_saks_extract(&pool, p, pool.len()) {
            Ok(trace) => Ok(Extracted { method: ExtractionMethod::BanachSaks, trace, note: None }),
            Err(Error::ExtractionStalled { trace, reason }) if !trace.is_empty() => Ok(Extracted {
                method: ExtractionMethod::BanachSaks,
                trace: *trace,
                note: Some(format!("selection stopped inside the horizon: {reason}")),
            }),
            Err(e) => Err(e),
        },
        _ => {
            let wanted = szlenk_levels(pool.len());
            let mut note = None;
            for levels in (1..=wanted).rev() {
                match szlenk_extract(&pool, levels, None) {
                    Ok((_, trace)) => {
                        return Ok(Extracted { method: ExtractionMethod::Szlenk, trace, note });
                    }
                    Err(Error::LevelStalled { level, reason, .. }) => {
                        note = Some(format!("{levels} levels stalled at level {level} ({reason}); used fewer"));
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Internal("no level count produced a diagonal".into()))
        }
    }
}

fn cesaro_converging(curve: &[(usize, f64)]) -> bool {
    let Some(&(_, last)) = curve.last() else {
        return false;
    };
    if last <= 1e-12 {
        return true;
    }
    let peak = curve.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    if curve.len() < 2 || last > 0.5 * peak {
        return false;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(k, v)| ((*k as f64).ln(), v.ln()))
        .unzip();
    crate::gallery::least_squares_slope(&xs, &ys).is_some_and(|s| s < 0.0)
}

fn replay(
    problem: &LiminfProblem,
    members: &Members,
    extracted: &Extracted,
    region: &RegionMask,
    alphas: &[f64],
    limit_integral: f64,
) -> Result<ProofReplay> {
    let trace = &extracted.trace;
    let indices = trace.indices();
    let cesaro: Vec<(usize, f64)> = trace
        .steps()
        .iter()
        .map(|s| (s.k, s.cesaro_norm * trace.scale()))
        .collect();

    let grid = problem.limit.grid();
    let weights = grid.weights();
    let m = problem.limit.dim();
    let nodes: Vec<usize> = region.indices().collect();
    let len = indices.len();
    let tail_start = len / 2 + 1;

    let mut sums = vec![0.0; nodes.len() * m];
    let mut f_sums = vec![0.0; nodes.len()];
    let mut fatou_pointwise = vec![f64::INFINITY; nodes.len()];
    let mut jensen = Vec::with_capacity(len);
    let mut fatou_inf_of_integrals = f64::INFINITY;
    let mut chain = f64::INFINITY;
    let mut alpha_sum = 0.0;
    let mut w = vec![0.0; m];
    let mut mean = vec![0.0; m];

    for (k, &index) in (1..).zip(&indices) {
        let u = &members.raw[index - 1];
        alpha_sum += alphas[index - 1];
        let kf = k as f64;
        let mut worst = f64::INFINITY;
        let mut integral = 0.0;
        for (slot, &node) in nodes.iter().enumerate() {
            u.value_at(node, &mut w);
            f_sums[slot] += problem.f.eval(&w);
            let s = &mut sums[slot * m..(slot + 1) * m];
            for ((acc, x), mu) in s.iter_mut().zip(&w).zip(mean.iter_mut()) {
                *acc += x;
                *mu = *acc / kf;
            }
            let g = problem.f.eval(&mean);
            worst = worst.min(f_sums[slot] / kf - g);
            if k >= tail_start {
                integral += weights[node] * g;
                fatou_pointwise[slot] = fatou_pointwise[slot].min(g);
            }
        }
        jensen.push((k, worst));
        if k >= tail_start {
            fatou_inf_of_integrals = fatou_inf_of_integrals.min(integral);
            chain = chain.min(alpha_sum / kf - limit_integral);
        }
    }
    let fatou_integral_of_inf = nodes
        .iter()
        .zip(&fatou_pointwise)
        .map(|(&node, g)| weights[node] * g)
        .sum();

    Ok(ProofReplay {
        method: extracted.method,
        cesaro_converging: cesaro_converging(&cesaro),
        indices,
        cesaro,
        jensen,
        fatou_integral_of_inf,
        fatou_inf_of_integrals,
        chain_margin: chain,
        note: extracted.note.clone(),
    })
}

/// `liminf_i ∫_Ω f(u_i) >= ∫_Ω f(u)` for nonnegative convex `f` and `u_i ⇀ u`
/// in `(L^p)^m`, with the proof chain replayed on an extracted subsequence.
///
/// `p = ∞` probes weak* convergence instead; `p = 1` and `p = ∞` replay with
/// the level-wise selection.
pub fn liminf_verify(problem: &LiminfProblem, p: Exponent) -> Result<LiminfReport> {
    validate(problem)?;
    let probe = match p {
        Exponent::Infinity => require_converging(
            weak_star_probe(problem.seq, problem.limit, problem.dictionary, problem.horizon)?,
            "weak*",
        )?,
        Exponent::Finite(_) => require_converging(
            weak_probe(problem.seq, problem.limit, p, problem.dictionary, problem.horizon)?,
            "weak",
        )?,
    };
    let members = Members::generate(problem)?;
    let (mut report, alphas) = alpha_report(problem, &members, problem.region, true)?;
    let extracted = extract_for_replay(problem, &members, p)?;
    report.replay = Some(replay(
        problem,
        &members,
        &extracted,
        problem.region,
        &alphas,
        report.limit_integral,
    )?);
    report.probe = Some(probe);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakStarReport {
    pub probe: ProbeReport,
    pub radii: Vec<f64>,
    /// One report per radius, over `Ω ∩ {|x| < R}`.
    pub truncations: Vec<LiminfReport>,
    pub verdict: CheckVerdict,
}

impl WeakStarReport {
    pub fn limit_integrals(&self) -> Vec<f64> {
        self.truncations.iter().map(|r| r.limit_integral).collect()
    }
}

/// Weak* variant: the liminf check on every truncation `Ω ∩ {|x| < R}` of an
/// increasing radius schedule, with the limit-side integrals required to be
/// non-decreasing in `R`.
pub fn weak_star_verify(problem: &LiminfProblem, radii: &[f64]) -> Result<WeakStarReport> {
    validate(problem)?;
    if radii.is_empty() {
        return Err(Error::invalid("radius schedule is empty"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::invalid(format!("radius {r} is not a positive finite number")));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radius schedule must be strictly increasing"));
    }
    let probe = require_converging(
        weak_star_probe(problem.seq, problem.limit, problem.dictionary, problem.horizon)?,
        "weak*",
    )?;
    let members = Members::generate(problem)?;
    let extracted = extract_for_replay(problem, &members, Exponent::Finite(1.0))?;

    let mut truncations = Vec::with_capacity(radii.len());
    for &r in radii {
        let region = truncate_region(problem.region, r)?;
        let (mut report, alphas) = alpha_report(problem, &members, &region, true)?;
        report.replay = Some(replay(
            problem,
            &members,
            &extracted,
            &region,
            &alphas,
            report.limit_integral,
        )?);
        truncations.push(report);
    }
    for (w, r) in truncations.windows(2).zip(radii.windows(2)) {
        if w[1].limit_integral < w[0].limit_integral - 1e-12 {
            return Err(Error::InternalConsistency(format!(
                "limit integral drops from {} at R = {} to {} at R = {}",
                w[0].limit_integral, r[0], w[1].limit_integral, r[1]
            )));
        }
    }
    let verdict = CheckVerdict::from_bool(truncations.iter().all(|t| t.verdict.passed()));
    Ok(WeakStarReport {
        probe,
        radii: radii.to_vec(),
        truncations,
        verdict,
    })
}

/// Liminf comparison for a sign-free convex `f` on a closed convex `K` over
/// a bounded region, under weak* convergence. Only the conclusion is checked.
pub fn mazur_scenario_verify(problem: &LiminfProblem) -> Result<LiminfReport> {
    validate(problem)?;
    if !problem.k.closed {
        return Err(Error::precondition("closed K", "the convex set is declared open"));
    }
    if !problem.region.measure().is_finite() {
        return Err(Error::precondition("bounded region", "region has infinite mass"));
    }
    let probe = require_converging(
        weak_star_probe(problem.seq, problem.limit, problem.dictionary, problem.horizon)?,
        "weak*",
    )?;
    let members = Members::generate(problem)?;
    let (mut report, _) = alpha_report(problem, &members, problem.region, false)?;
    report.probe = Some(probe);
    Ok(report)
}
