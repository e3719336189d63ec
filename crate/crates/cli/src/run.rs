//! Phase pipeline: probe, extraction, growth bound, Cesàro analytics, liminf.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use wbs_core::extraction::{decay_rate_fit_window, szlenk::default_checkpoint};
use wbs_core::{
    banach_saks_extract, liminf_verify, mazur_scenario_verify, szlenk_extract, verify_growth_bound,
    weak_probe, weak_star_probe, weak_star_verify, Error, ExtractionTrace, GrowthReport, LemmaConstants,
    LiminfProblem, LiminfReport, SequencePool, Verdict,
};

use crate::config::{ExtractionMode, Scenario, ScenarioConfig, VerificationMode};
use crate::error::CliError;
use crate::report;

/// Stored pairings may exceed the threshold by this much.
pub const PAIRING_SLACK: f64 = 1e-12;
/// Level targets at checkpoints may be exceeded by this much.
pub const CHECKPOINT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseRecord {
    pub phase: &'static str,
    pub status: Status,
    pub detail: String,
    pub wall_ms: f64,
    pub metrics: Map<String, Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub name: String,
    pub config_digest: String,
    pub tool_version: &'static str,
    pub status: Status,
    pub phases: Vec<PhaseRecord>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseRecord> {
        self.phases.iter().find(|p| p.phase == name)
    }
}

/// Which phases a subcommand runs.
#[derive(Debug, Clone, Copy)]
pub struct Phases {
    pub probe: bool,
    pub extraction: bool,
    pub growth: bool,
    pub cesaro: bool,
    pub liminf: bool,
}

impl Phases {
    pub const ALL: Phases = Phases { probe: true, extraction: true, growth: true, cesaro: true, liminf: true };
    pub const PROBE: Phases = Phases { probe: true, extraction: false, growth: false, cesaro: false, liminf: false };
    pub const EXTRACT: Phases = Phases { probe: false, extraction: true, growth: true, cesaro: true, liminf: false };
    pub const LIMINF: Phases = Phases { probe: true, extraction: false, growth: false, cesaro: false, liminf: true };
}

struct Phase {
    name: &'static str,
    started: Instant,
    metrics: Map<String, Value>,
}

impl Phase {
    fn start(name: &'static str) -> Self {
        Self { name, started: Instant::now(), metrics: Map::new() }
    }

    fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics.insert(key.to_string(), json!(value));
    }

    fn finish(self, status: Status, detail: impl Into<String>) -> PhaseRecord {
        PhaseRecord {
            phase: self.name,
            status,
            detail: detail.into(),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            metrics: self.metrics,
        }
    }
}

fn skipped(name: &'static str, why: &str) -> PhaseRecord {
    Phase::start(name).finish(Status::Skipped, why)
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn within(v: f64, range: Option<[f64; 2]>) -> bool {
    range.iter().all(|&[lo, hi]| (lo..=hi).contains(&v))
}

fn default_levels(horizon: usize) -> usize {
    ((horizon as f64).sqrt().floor() as usize).clamp(1, 4)
}

struct Extraction {
    trace: ExtractionTrace,
    growth: Option<GrowthReport>,
}

/// Runs the requested phases and writes CSVs plus the manifest into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path, phases: Phases) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let scenario = Scenario::build(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let path = |suffix: &str| out_dir.join(format!("{}.{suffix}", cfg.name));

    let mut records = Vec::new();
    let mut outputs = Vec::new();

    // probe
    let mut probe_converging = None;
    if phases.probe {
        let mut ph = Phase::start("probe");
        let result = if cfg.weak_star() {
            weak_star_probe(&scenario.seq, &scenario.limit, &scenario.dictionary, cfg.horizon)
        } else {
            weak_probe(&scenario.seq, &scenario.limit, cfg.p, &scenario.dictionary, cfg.horizon)
        };
        let record = match result {
            Ok(r) => {
                let file = path("probe.csv");
                report::write_probe(&file, &r)?;
                outputs.push(file);
                let expected = cfg.expect.probe_verdict.unwrap_or(Verdict::Converging);
                probe_converging = Some(r.verdict == Verdict::Converging);
                ph.metric("kind", if cfg.weak_star() { "weak*" } else { "weak" });
                ph.metric("verdict", r.verdict);
                ph.metric("slope", r.slope);
                ph.metric("final_residual", r.rows.last().map(|x| x.residual));
                ph.finish(
                    pass_if(r.verdict == expected),
                    format!("verdict {} (expected {expected})", r.verdict),
                )
            }
            Err(e) => {
                probe_converging = Some(false);
                ph.finish(Status::Fail, e.to_string())
            }
        };
        records.push(record);
    }

    // extraction and growth bound
    let mut extraction: Option<Extraction> = None;
    if phases.extraction {
        let mut ph = Phase::start("extraction");
        let record = match cfg.extraction {
            ExtractionMode::None => ph.finish(Status::Skipped, "not requested"),
            mode => {
                let pool = SequencePool::generate(&scenario.seq, &scenario.grid, cfg.horizon)?
                    .centered(&scenario.limit)?;
                ph.metric("pool", pool.len());
                match mode {
                    ExtractionMode::Recursive => {
                        let p = cfg.p.value();
                        match banach_saks_extract(&pool, p, cfg.steps()) {
                            Ok(trace) => {
                                let worst = trace
                                    .steps()
                                    .iter()
                                    .map(|s| s.max_pairing())
                                    .fold(f64::NEG_INFINITY, f64::max);
                                ph.metric("selections", trace.len());
                                ph.metric("max_pairing", worst);
                                ph.metric("scale", trace.scale());
                                let ok = worst <= 1.0 + PAIRING_SLACK;
                                extraction = Some(Extraction { trace, growth: None });
                                ph.finish(pass_if(ok), format!("{} selections, max pairing {worst:e}", cfg.steps()))
                            }
                            Err(Error::ExtractionStalled { trace, reason }) => {
                                ph.metric("selections", trace.len());
                                let detail = format!("stalled after {} of {} selections: {reason}", trace.len(), cfg.steps());
                                if !trace.is_empty() {
                                    extraction = Some(Extraction { trace: *trace, growth: None });
                                }
                                ph.finish(Status::Fail, detail)
                            }
                            Err(e) => ph.finish(Status::Fail, e.to_string()),
                        }
                    }
                    _ => {
                        let levels = cfg.levels.unwrap_or_else(|| default_levels(cfg.horizon));
                        match szlenk_extract(&pool, levels, cfg.checkpoints.as_deref()) {
                            Ok((schedule, trace)) => {
                                let ok = schedule.nesting_exact()
                                    && schedule.tails_nested
                                    && schedule.diagonal_increasing()
                                    && schedule.checkpoints_hold(CHECKPOINT_SLACK);
                                ph.metric("levels", levels);
                                ph.metric(
                                    "level_sizes",
                                    schedule.levels.iter().map(|l| l.indices.len()).collect::<Vec<_>>(),
                                );
                                ph.metric(
                                    "checkpoints",
                                    (1..=levels)
                                        .map(|l| cfg.checkpoints.as_ref().map_or(default_checkpoint(l), |c| c[l - 1]))
                                        .collect::<Vec<_>>(),
                                );
                                ph.metric("checkpoint_rows", &schedule.checkpoints);
                                ph.metric("nesting_exact", schedule.nesting_exact());
                                ph.metric("tails_nested", schedule.tails_nested);
                                ph.metric("splitting_margin", schedule.splitting_margin);
                                ph.metric("scale", trace.scale());
                                let detail = format!(
                                    "{levels} levels, diagonal of {} indices, checkpoints {}",
                                    schedule.diagonal.len(),
                                    if schedule.checkpoints_hold(CHECKPOINT_SLACK) { "met" } else { "missed" }
                                );
                                extraction = Some(Extraction { trace, growth: None });
                                ph.finish(pass_if(ok), detail)
                            }
                            Err(Error::LevelStalled { level, reason, .. }) => {
                                ph.finish(Status::Fail, format!("level {level} stalled: {reason}"))
                            }
                            Err(e) => ph.finish(Status::Fail, e.to_string()),
                        }
                    }
                }
            }
        };
        records.push(record);
    }

    if phases.growth {
        let record = match (&mut extraction, cfg.extraction) {
            (Some(ex), ExtractionMode::Recursive) => {
                let mut ph = Phase::start("growth");
                let consts = LemmaConstants::new(cfg.p.value())?;
                ph.metric("constants", consts);
                match verify_growth_bound(&ex.trace, &consts) {
                    Ok(g) => {
                        ph.metric("worst_bound_margin", g.worst_bound_margin());
                        ph.metric("worst_summed_margin", g.worst_summed_margin());
                        ph.metric("worst_recursion_margin", g.worst_recursion_margin());
                        ph.metric("first_stated_violation", g.first_stated_violation());
                        let expected = cfg.expect.stated_growth_bound.unwrap_or(true);
                        let stated = g.stated_bound_holds();
                        let ok = g.holds() && stated == expected;
                        let detail = match (g.holds(), g.first_stated_violation()) {
                            (false, _) => "one-step recursion or its sum violated".to_string(),
                            (true, None) => "recursion, summed bound and stated bound hold".to_string(),
                            (true, Some(k)) => format!(
                                "recursion and summed bound hold; stated bound exceeded from k = {k} (worst {:.3e}){}",
                                g.worst_bound_margin(),
                                if expected { "" } else { ", as expected" }
                            ),
                        };
                        ex.growth = Some(g);
                        ph.finish(pass_if(ok), detail)
                    }
                    Err(e) => ph.finish(Status::Fail, e.to_string()),
                }
            }
            (_, ExtractionMode::Recursive) => skipped("growth", "no trace to check"),
            _ => skipped("growth", "applies to extraction \"p>1\" only"),
        };
        records.push(record);
    }

    if let Some(ex) = &extraction {
        let file = path("trace.csv");
        report::write_trace(&file, &ex.trace, ex.growth.as_ref())?;
        outputs.push(file);
    }

    if phases.cesaro {
        let record = match &extraction {
            Some(ex) => cesaro_phase(cfg, &ex.trace),
            None if cfg.extraction == ExtractionMode::None => skipped("cesaro", "no extraction requested"),
            None => skipped("cesaro", "extraction produced no trace"),
        };
        records.push(record);
    }

    if phases.liminf {
        let record = if cfg.verification == VerificationMode::None {
            skipped("liminf", "no verification requested")
        } else if probe_converging == Some(false) {
            skipped("liminf", "convergence hypothesis failed in the probe phase")
        } else {
            let (record, file) = liminf_phase(cfg, &scenario, &path("liminf.csv"))?;
            outputs.extend(file);
            record
        };
        records.push(record);
    }

    let status = pass_if(records.iter().all(|r| r.status != Status::Fail));
    let manifest = RunManifest {
        name: cfg.name.clone(),
        config_digest: hex::encode(Sha256::digest(cfg.canonical_json().as_bytes())),
        tool_version: env!("CARGO_PKG_VERSION"),
        status,
        phases: records,
        outputs,
    };
    let file = path("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&file, text + "\n").map_err(|e| CliError::io(&file, e))?;
    let mut manifest = manifest;
    manifest.outputs.push(file);
    Ok(manifest)
}

fn cesaro_phase(cfg: &ScenarioConfig, trace: &ExtractionTrace) -> PhaseRecord {
    let mut ph = Phase::start("cesaro");
    let curve: Vec<(usize, f64)> = trace.steps().iter().map(|s| (s.k, s.cesaro_norm)).collect();
    let Some(&(k_last, last)) = curve.last() else {
        return ph.finish(Status::Skipped, "empty trace");
    };
    let first = curve[0].1;
    ph.metric("initial", first);
    ph.metric("final", last);
    ph.metric("k_final", k_last);
    if first == 0.0 && last == 0.0 {
        ph.metric("slope", Value::Null);
        let ok = curve.iter().all(|(_, v)| *v == 0.0);
        return ph.finish(pass_if(ok), "Cesàro norms vanish identically");
    }
    let ratio = last / first;
    ph.metric("ratio", ratio);
    let [lo, hi] = cfg.cesaro_window.unwrap_or([8.min(k_last), k_last]);
    ph.metric("window", [lo, hi]);
    let slope = decay_rate_fit_window(&curve, lo, hi);
    let mut problems = Vec::new();
    match &slope {
        Ok(s) => {
            ph.metric("slope", s);
            if !(*s < 0.0) {
                problems.push(format!("slope {s:.4} is not negative"));
            }
            if !within(*s, cfg.expect.cesaro_slope) {
                problems.push(format!("slope {s:.4} outside {:?}", cfg.expect.cesaro_slope.unwrap()));
            }
        }
        Err(e) => {
            ph.metric("slope", Value::Null);
            if cfg.expect.cesaro_slope.is_some() {
                problems.push(format!("no slope: {e}"));
            }
        }
    }
    if let Some(bound) = cfg.expect.cesaro_ratio_below {
        if !(ratio < bound) {
            problems.push(format!("ratio {ratio:.4} not below {bound}"));
        }
    }
    if problems.is_empty() {
        let detail = match slope {
            Ok(s) => format!("slope {s:.4} over k in [{lo}, {hi}], final/initial {ratio:.4}"),
            Err(_) => format!("final/initial {ratio:.4}"),
        };
        ph.finish(Status::Pass, detail)
    } else {
        ph.finish(Status::Fail, problems.join("; "))
    }
}

fn liminf_phase(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    file: &Path,
) -> Result<(PhaseRecord, Option<PathBuf>), CliError> {
    let mut ph = Phase::start("liminf");
    let integrand = cfg.f.as_ref().expect("validated");
    let problem = LiminfProblem {
        seq: &scenario.seq,
        limit: &scenario.limit,
        f: &integrand.f,
        k: &integrand.k,
        region: &scenario.region,
        horizon: cfg.horizon,
        dictionary: &scenario.dictionary,
    };
    let outcome: Result<(LiminfReport, bool, String), Error> = match cfg.verification {
        VerificationMode::Liminf => liminf_verify(&problem, cfg.p).map(|r| {
            let ok = r.verdict.passed() && r.replay_holds();
            record_replay(&mut ph, &r);
            (r, ok, "liminf with proof replay".to_string())
        }),
        VerificationMode::WeakStar => {
            let radii = cfg.r_schedule.as_deref().expect("validated");
            weak_star_verify(&problem, radii).map(|w| {
                ph.metric("radii", &w.radii);
                ph.metric("limit_integrals", w.limit_integrals());
                ph.metric("margins", w.truncations.iter().map(|t| t.margin).collect::<Vec<_>>());
                ph.metric(
                    "truncation_verdicts",
                    w.truncations.iter().map(|t| t.verdict).collect::<Vec<_>>(),
                );
                let replays = w.truncations.iter().all(|t| t.replay_holds());
                ph.metric("replays_hold", replays);
                let ok = w.verdict.passed() && replays;
                let last = w.truncations.last().expect("non-empty schedule").clone();
                (last, ok, format!("{} truncations, limit integrals non-decreasing", w.radii.len()))
            })
        }
        VerificationMode::Mazur => {
            mazur_scenario_verify(&problem).map(|r| (r.clone(), r.verdict.passed(), "closed convex set, no replay".into()))
        }
        VerificationMode::None => unreachable!("checked by caller"),
    };
    match outcome {
        Ok((r, ok, what)) => {
            report::write_liminf(file, &r)?;
            ph.metric("limit_integral", r.limit_integral);
            ph.metric("tail_infimum", r.tail_infimum);
            ph.metric("margin", r.margin);
            ph.metric("tolerance", r.tolerance);
            let in_range = within(r.tail_infimum, cfg.expect.tail_infimum);
            let detail = format!(
                "{what}: tail inf {:.6} vs limit {:.6}, margin {:.3e}{}",
                r.tail_infimum,
                r.limit_integral,
                r.margin,
                if in_range { "" } else { " (tail infimum outside expected range)" }
            );
            Ok((ph.finish(pass_if(ok && in_range), detail), Some(file.to_path_buf())))
        }
        Err(Error::PreconditionViolation { hypothesis, detail }) => {
            ph.metric("refused", &hypothesis);
            Ok((ph.finish(Status::Fail, format!("hypothesis \"{hypothesis}\" fails: {detail}")), None))
        }
        Err(e) => Ok((ph.finish(Status::Fail, e.to_string()), None)),
    }
}

fn record_replay(ph: &mut Phase, r: &LiminfReport) {
    if let Some(rep) = &r.replay {
        ph.metric("replay_method", rep.method);
        ph.metric("replay_selections", rep.indices.len());
        ph.metric("replay_cesaro_final", rep.cesaro.last().map(|c| c.1));
        ph.metric("replay_cesaro_converging", rep.cesaro_converging);
        ph.metric("jensen_worst", rep.jensen_worst());
        ph.metric("fatou_margin", rep.fatou_margin());
        ph.metric("chain_margin", rep.chain_margin);
        if let Some(note) = &rep.note {
            ph.metric("replay_note", note);
        }
    }
}
