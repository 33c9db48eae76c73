//! Experiment plumbing: spec files, CLI flag merging, scheduler and checker
//! construction, single runs, parameter sweeps, and lower-bound reports.
//!
//! A run is described by an [`ExperimentSpec`], stored as JSON and mirrored
//! one-to-one by CLI flags (flags override file values). Runs are
//! reproducible bit for bit from their spec: all randomness flows from the
//! single seed, and traces are compared on their serialized round records.

use crate::adversary::{random_bounded, InjectionPattern};
use crate::engine::{run, Checker, RunOptions, Scheduler};
use crate::lower_bound::LbParams;
use crate::metrics::{
    BadDecreaseChecker, BadnessExcessChecker, BadnessScheme, HptsPhaseChecker, LoadBoundChecker,
};
use crate::rational::{parse_rational, RationalStr};
use crate::schedulers::{brute_force_optimal, Greedy, Hpts, Ppts, Pts, TreePpts, TreePts};
use crate::stale::{scenario_check, stale_oracle, ScenarioOutcome, StaleKind};
use crate::topology::{NodeId, Topology, TopologySpec};
use crate::trace::Trace;
use crate::{AqtError, Rational, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Where the packets come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    /// Token-bucket random injections, (rho, sigma)-bounded by construction.
    Random {
        #[serde(default)]
        seed: u64,
        rho: RationalStr,
        sigma: u64,
        dests: Vec<NodeId>,
    },
    /// The worst-case construction; fixes the topology and horizon.
    Lowerbound { m: u32, ell: u32, rho: RationalStr },
    /// A stored `round,source,dest,type` CSV. Rate and burst are optional
    /// metadata used to enable rate-dependent checkers and bounds.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<RationalStr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<u64>,
    },
}

/// Which forwarding algorithm runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchedulerSpec {
    Pts { dest: NodeId },
    Ppts { dests: Vec<NodeId> },
    Hpts { m: u32, ell: u32 },
    TreePts,
    TreePpts { dests: Vec<NodeId> },
    Greedy,
    /// Exhaustive search over all protocols; reports the optimum instead of
    /// producing a trace. Tiny instances only.
    Optimal,
}

impl SchedulerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerSpec::Pts { .. } => "pts",
            SchedulerSpec::Ppts { .. } => "ppts",
            SchedulerSpec::Hpts { .. } => "hpts",
            SchedulerSpec::TreePts => "tree-pts",
            SchedulerSpec::TreePpts { .. } => "tree-ppts",
            SchedulerSpec::Greedy => "greedy",
            SchedulerSpec::Optimal => "optimal",
        }
    }
}

/// One fully described run. `topology` and `horizon` may be omitted for the
/// lower-bound adversary, which determines both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    pub adversary: AdversarySpec,
    pub scheduler: SchedulerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(default)]
    pub drain: bool,
    /// `["all"]`, `["none"]`, or a subset of
    /// {load-bound, bad-decrease, hpts-phase, badness-excess}.
    #[serde(default = "default_checkers")]
    pub checkers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_out: Option<PathBuf>,
}

fn default_checkers() -> Vec<String> {
    vec!["all".into()]
}

impl ExperimentSpec {
    pub fn read_json(path: &Path) -> Result<ExperimentSpec> {
        let file = File::open(path)?;
        serde_json::from_reader(file).map_err(|e| AqtError::Spec(format!("{}: {e}", path.display())))
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(|e| AqtError::Spec(format!("json: {e}")))?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// A spec with the topology, pattern, and horizon pinned down.
pub struct ResolvedExperiment {
    pub topo: Topology,
    pub pattern: InjectionPattern,
    pub horizon: u32,
    /// Injection rate, when the adversary declares one.
    pub rho: Option<Rational>,
    /// Burst allowance, when the adversary declares one.
    pub sigma: Option<u64>,
    pub lb: Option<LbParams>,
}

pub fn resolve(spec: &ExperimentSpec) -> Result<ResolvedExperiment> {
    match &spec.adversary {
        AdversarySpec::Lowerbound { m, ell, rho } => {
            let params = LbParams::new(*m, *ell, rho.0)?;
            let topo = params.topology();
            if let Some(ts) = &spec.topology {
                if Topology::from_spec(ts)?.node_count() != topo.node_count() {
                    return Err(AqtError::Spec(format!(
                        "lower-bound adversary needs a line of {} buffers",
                        topo.node_count()
                    )));
                }
            }
            let horizon = spec.horizon.unwrap_or_else(|| params.horizon());
            if horizon < params.horizon() {
                return Err(AqtError::Spec(format!(
                    "horizon {horizon} shorter than the construction's {}",
                    params.horizon()
                )));
            }
            Ok(ResolvedExperiment {
                topo,
                pattern: params.pattern()?,
                horizon,
                rho: Some(params.rho),
                sigma: Some(1),
                lb: Some(params),
            })
        }
        AdversarySpec::Random { seed, rho, sigma, dests } => {
            let topo = require_topology(spec)?;
            let horizon = spec
                .horizon
                .ok_or_else(|| AqtError::Spec("horizon required for a random adversary".into()))?;
            let pattern = random_bounded(*seed, &topo, rho.0, *sigma, horizon, dests)?;
            Ok(ResolvedExperiment {
                topo,
                pattern,
                horizon,
                rho: Some(rho.0),
                sigma: Some(*sigma),
                lb: None,
            })
        }
        AdversarySpec::File { path, rho, sigma } => {
            let topo = require_topology(spec)?;
            let pattern = InjectionPattern::read_csv(&topo, File::open(path)?)?;
            let horizon = spec.horizon.unwrap_or_else(|| pattern.max_round());
            Ok(ResolvedExperiment {
                topo,
                pattern,
                horizon,
                rho: rho.map(|r| r.0),
                sigma: *sigma,
                lb: None,
            })
        }
    }
}

fn require_topology(spec: &ExperimentSpec) -> Result<Topology> {
    let ts = spec
        .topology
        .as_ref()
        .ok_or_else(|| AqtError::Spec("topology required".into()))?;
    Topology::from_spec(ts)
}

pub fn build_scheduler(topo: &Topology, spec: &SchedulerSpec) -> Result<Box<dyn Scheduler>> {
    Ok(match spec {
        SchedulerSpec::Pts { dest } => Box::new(Pts::new(topo, *dest)?),
        SchedulerSpec::Ppts { dests } => Box::new(Ppts::new(topo, dests.clone())?),
        SchedulerSpec::Hpts { m, ell } => Box::new(Hpts::new(topo, *m, *ell)?),
        SchedulerSpec::TreePts => Box::new(TreePts),
        SchedulerSpec::TreePpts { dests } => Box::new(TreePpts::new(topo, dests.clone())?),
        SchedulerSpec::Greedy => Box::new(Greedy),
        SchedulerSpec::Optimal => {
            return Err(AqtError::Spec(
                "the exhaustive optimum is not a round-by-round scheduler; \
                 use run_optimal / the simulate subcommand handles it directly"
                    .into(),
            ))
        }
    })
}

/// The per-destination-class badness bookkeeping matching a scheduler, when
/// its decrease law applies. Single-destination schemes need a pattern with
/// one destination; greedy follows no law.
pub fn badness_scheme(
    spec: &SchedulerSpec,
    pattern: &InjectionPattern,
) -> Option<BadnessScheme> {
    match spec {
        SchedulerSpec::Pts { dest } => Some(BadnessScheme::SingleDest { dest: *dest }),
        SchedulerSpec::TreePts => {
            let mut dests = pattern.packets().iter().map(|p| p.dest);
            let first = dests.next()?;
            dests.all(|w| w == first).then_some(BadnessScheme::SingleDest { dest: first })
        }
        SchedulerSpec::Ppts { .. } | SchedulerSpec::TreePpts { .. } => Some(BadnessScheme::PerDest),
        SchedulerSpec::Hpts { m, ell } => {
            let part = crate::schedulers::HierarchicalPartition::new(*m, *ell).ok()?;
            Some(BadnessScheme::Hierarchical(part))
        }
        SchedulerSpec::Greedy | SchedulerSpec::Optimal => None,
    }
}

/// The proven worst-case load for a scheduler against a (`rho`, `sigma`)
/// adversary, if there is one: 2+sigma single-destination, 1+d'+sigma for
/// destination depth d', ell*m+sigma+1 hierarchical. The hierarchical bound
/// needs rate at most 1/ell (its phases serve each level every ell rounds),
/// so it is withheld at higher rates.
pub fn theoretical_bound(
    topo: &Topology,
    spec: &SchedulerSpec,
    rho: Option<Rational>,
    sigma: u64,
) -> Option<u32> {
    let s = u32::try_from(sigma).ok()?;
    match spec {
        SchedulerSpec::Pts { .. } | SchedulerSpec::TreePts => Some(2 + s),
        SchedulerSpec::Ppts { dests } | SchedulerSpec::TreePpts { dests } => {
            Some(1 + topo.destination_depth(dests) + s)
        }
        SchedulerSpec::Hpts { m, ell } => {
            let rho = rho?;
            (rho * Rational::from_integer(*ell as i64) <= Rational::from_integer(1))
                .then_some(ell * m + s + 1)
        }
        SchedulerSpec::Greedy | SchedulerSpec::Optimal => None,
    }
}

const CHECKER_NAMES: [&str; 4] = ["load-bound", "bad-decrease", "hpts-phase", "badness-excess"];

/// Instantiate the requested checkers, silently dropping the ones whose
/// prerequisites are missing (no known rate, no applicable badness law).
/// Draining breaks the per-round invariants, so under `drain` only the load
/// bound survives.
pub fn build_checkers(
    spec: &ExperimentSpec,
    resolved: &ResolvedExperiment,
) -> Result<Vec<Box<dyn Checker>>> {
    let mut names: Vec<&str> = Vec::new();
    for entry in &spec.checkers {
        match entry.as_str() {
            "all" => names.extend(CHECKER_NAMES),
            "none" => {}
            other if CHECKER_NAMES.contains(&other) => names.push(other),
            other => {
                return Err(AqtError::Spec(format!(
                    "unknown checker {other:?} (expected all, none, or one of {CHECKER_NAMES:?})"
                )))
            }
        }
    }
    names.dedup();
    let scheme = badness_scheme(&spec.scheduler, &resolved.pattern);
    let mut out: Vec<Box<dyn Checker>> = Vec::new();
    for name in names {
        match name {
            "load-bound" => {
                if let Some(sigma) = resolved.sigma {
                    if let Some(bound) =
                        theoretical_bound(&resolved.topo, &spec.scheduler, resolved.rho, sigma)
                    {
                        out.push(Box::new(LoadBoundChecker { bound }));
                    }
                }
            }
            "bad-decrease" if !spec.drain => {
                if let Some(scheme) = scheme {
                    out.push(Box::new(BadDecreaseChecker::new(scheme)));
                }
            }
            "hpts-phase" if !spec.drain => {
                if let SchedulerSpec::Hpts { m, ell } = spec.scheduler {
                    let part = crate::schedulers::HierarchicalPartition::new(m, ell)?;
                    out.push(Box::new(HptsPhaseChecker::new(part)));
                }
            }
            "badness-excess" if !spec.drain => {
                if let (Some(scheme), Some(rho)) = (scheme, resolved.rho) {
                    out.push(Box::new(BadnessExcessChecker::new(
                        &resolved.topo,
                        &resolved.pattern,
                        rho,
                        resolved.horizon,
                        scheme,
                    )?));
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

pub struct ExperimentOutcome {
    pub topo: Topology,
    pub pattern: InjectionPattern,
    pub trace: Trace,
    /// The applicable proven bound, for the summary line.
    pub bound: Option<u32>,
}

/// Resolve, run, and (if paths are set) persist one experiment. A checker
/// failure surfaces as `Err(CheckerFailure)`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let resolved = resolve(spec)?;
    let mut scheduler = build_scheduler(&resolved.topo, &spec.scheduler)?;
    let mut checkers = build_checkers(spec, &resolved)?;
    let trace = run(
        &resolved.topo,
        &resolved.pattern,
        scheduler.as_mut(),
        RunOptions { horizon: resolved.horizon, drain: spec.drain },
        &mut checkers,
    )?;
    if let Some(path) = &spec.trace_out {
        trace.write_jsonl(File::create(path)?)?;
    }
    if let Some(path) = &spec.summary_out {
        trace.write_summary_csv(File::create(path)?)?;
    }
    let bound = resolved
        .sigma
        .and_then(|s| theoretical_bound(&resolved.topo, &spec.scheduler, resolved.rho, s));
    Ok(ExperimentOutcome { topo: resolved.topo, pattern: resolved.pattern, trace, bound })
}

/// The exhaustive-search path for `scheduler = optimal`: the best peak load
/// any protocol can achieve on this instance.
pub fn run_optimal(spec: &ExperimentSpec) -> Result<u32> {
    let resolved = resolve(spec)?;
    brute_force_optimal(&resolved.topo, &resolved.pattern, resolved.horizon)
}

/// Check a stored trace against a spec: the trace must be internally
/// consistent with the spec's injection pattern, and re-running the spec
/// (with its checkers) must reproduce the stored rounds byte for byte.
pub fn validate_stored_trace(spec: &ExperimentSpec, trace_path: &Path) -> Result<()> {
    let stored = Trace::read_jsonl(File::open(trace_path)?)?;
    let resolved = resolve(spec)?;
    stored.validate_consistency(&resolved.topo, &resolved.pattern)?;
    let mut clean = spec.clone();
    clean.trace_out = None;
    clean.summary_out = None;
    let rerun = run_experiment(&clean)?;
    if rerun.trace.rounds_jsonl() != stored.rounds_jsonl() {
        let differing = rerun
            .trace
            .rounds()
            .iter()
            .zip(stored.rounds())
            .find(|(a, b)| a != b)
            .map_or_else(|| "round counts differ".into(), |(a, _)| format!("first at round {}", a.round));
        return Err(AqtError::CheckerFailure {
            checker: "replay".into(),
            round: 0,
            detail: format!("stored trace does not match a fresh run: {differing}"),
        });
    }
    Ok(())
}

/// A grid of runs; every cell is an independent single-threaded simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepSpec {
    /// Random adversaries on lines: grid over sizes, rates, bursts,
    /// destination counts, hierarchy depths, schedulers, and seeds.
    Random {
        n: Vec<u32>,
        rho: Vec<RationalStr>,
        sigma: Vec<u64>,
        /// Destination counts; destinations are spread evenly over the line.
        dests: Vec<u32>,
        /// Hierarchy depths, used by hpts cells only.
        #[serde(default = "one_level")]
        ell: Vec<u32>,
        schedulers: Vec<String>,
        seeds: Vec<u64>,
        horizon: u32,
    },
    /// The worst-case construction across bases, depths, rates, and
    /// schedulers; each cell also runs the stale-packet audit.
    Lowerbound {
        m: Vec<u32>,
        ell: Vec<u32>,
        rho: Vec<RationalStr>,
        schedulers: Vec<String>,
    },
}

fn one_level() -> Vec<u32> {
    vec![1]
}

impl SweepSpec {
    pub fn read_json(path: &Path) -> Result<SweepSpec> {
        let file = File::open(path)?;
        serde_json::from_reader(file).map_err(|e| AqtError::Spec(format!("{}: {e}", path.display())))
    }
}

/// One output row of a sweep, serialized as aggregate CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheduler: String,
    pub n: u32,
    pub rho: String,
    pub sigma: u64,
    pub dests: u32,
    pub ell: Option<u32>,
    pub m: Option<u32>,
    pub seed: Option<u64>,
    pub max_load: u32,
    pub bound: Option<u32>,
    pub ratio: Option<f64>,
    /// Lower-bound cells: scenario verdicts and stale-audit violation count.
    pub scenario: Option<String>,
    pub violations: Option<usize>,
}

/// Destination sets for sweep cells: `d` nodes spread evenly over a line of
/// `n` buffers, ending at the sink.
pub fn spread_dests(n: u32, d: u32) -> Vec<NodeId> {
    let d = d.clamp(1, n);
    let mut out: Vec<NodeId> = (1..=d).map(|i| i * n / d).collect();
    out.dedup();
    out
}

fn sweep_cells(spec: &SweepSpec) -> Result<Vec<ExperimentSpec>> {
    let mut cells = Vec::new();
    match spec {
        SweepSpec::Random { n, rho, sigma, dests, ell, schedulers, seeds, horizon } => {
            for &n in n {
                for &rho in rho {
                    for &sigma in sigma {
                        for (di, &d) in dests.iter().enumerate() {
                            for name in schedulers {
                                // Single-destination schedulers need a
                                // single-destination adversary; vary them
                                // once, not per destination count.
                                let single = name == "pts" || name == "tree-pts";
                                if single && di > 0 {
                                    continue;
                                }
                                let ells: &[u32] = if name == "hpts" { ell } else { &[1] };
                                for &ell in ells {
                                    for &seed in seeds {
                                        let ws =
                                            if single { vec![n] } else { spread_dests(n, d) };
                                        let scheduler = scheduler_for_cell(name, n, &ws, ell)?;
                                        cells.push(ExperimentSpec {
                                            topology: Some(TopologySpec { n, root: None, parent: None }),
                                            adversary: AdversarySpec::Random {
                                                seed,
                                                rho,
                                                sigma,
                                                dests: ws,
                                            },
                                            scheduler,
                                            horizon: Some(*horizon),
                                            drain: false,
                                            checkers: vec!["none".into()],
                                            trace_out: None,
                                            summary_out: None,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        SweepSpec::Lowerbound { m, ell, rho, schedulers } => {
            for &m in m {
                for &ell in ell {
                    for &rho in rho {
                        for name in schedulers {
                            cells.push(lb_cell_spec(m, ell, rho, name)?);
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn scheduler_for_cell(name: &str, n: u32, ws: &[NodeId], ell: u32) -> Result<SchedulerSpec> {
    Ok(match name {
        // single-destination schedulers always target the sink
        "pts" => SchedulerSpec::Pts { dest: n },
        "tree-pts" => SchedulerSpec::TreePts,
        "ppts" => SchedulerSpec::Ppts { dests: ws.to_vec() },
        "tree-ppts" => SchedulerSpec::TreePpts { dests: ws.to_vec() },
        "hpts" => SchedulerSpec::Hpts { m: Hpts::fitting_base(n, ell), ell },
        "greedy" => SchedulerSpec::Greedy,
        other => return Err(AqtError::Spec(format!("unknown sweep scheduler {other:?}"))),
    })
}

fn lb_cell_spec(m: u32, ell: u32, rho: RationalStr, name: &str) -> Result<ExperimentSpec> {
    let params = LbParams::new(m, ell, rho.0)?;
    let n = params.node_count();
    let (drain, base) = match name.strip_prefix("drain-") {
        Some(rest) => (true, rest),
        None => (false, name),
    };
    let dests: Vec<NodeId> = {
        let pattern = params.pattern()?;
        let mut ws: Vec<NodeId> = pattern.packets().iter().map(|p| p.dest).collect();
        ws.sort_unstable();
        ws.dedup();
        ws
    };
    let scheduler = match base {
        "ppts" => SchedulerSpec::Ppts { dests },
        "hpts" => SchedulerSpec::Hpts { m: Hpts::fitting_base(n, ell), ell },
        "greedy" => SchedulerSpec::Greedy,
        other => return Err(AqtError::Spec(format!("unknown lower-bound scheduler {other:?}"))),
    };
    // Drained cells get extra rounds so every packet reaches its destination.
    let horizon = if drain { params.horizon() + 3 * n } else { params.horizon() };
    Ok(ExperimentSpec {
        topology: None,
        adversary: AdversarySpec::Lowerbound { m, ell, rho },
        scheduler,
        horizon: Some(horizon),
        drain,
        checkers: vec!["none".into()],
        trace_out: None,
        summary_out: None,
    })
}

fn sweep_row(cell: &ExperimentSpec) -> Result<SweepRow> {
    let outcome = run_experiment(cell)?;
    let max_load = outcome.trace.peak_load();
    let (mut scenario, mut violations) = (None, None);
    if let AdversarySpec::Lowerbound { .. } = cell.adversary {
        let resolved = resolve(cell)?;
        let params = resolved.lb.expect("lower-bound cell");
        let report = stale_oracle(&params, &outcome.pattern, &outcome.trace)?;
        violations = Some(report.violations.len());
        scenario = Some(if report.is_ok() && !cell.drain {
            let outcomes = scenario_check(&params, &report)?;
            outcomes.iter().map(describe_scenario).collect::<Vec<_>>().join(" ")
        } else if cell.drain {
            "drained".into()
        } else {
            "stale-audit-failed".into()
        });
    }
    let (rho, sigma) = match &cell.adversary {
        AdversarySpec::Random { rho, sigma, .. } => (rho.to_string(), *sigma),
        AdversarySpec::Lowerbound { rho, .. } => (rho.to_string(), 1),
        AdversarySpec::File { rho, sigma, .. } => (
            rho.map_or_else(String::new, |r| r.to_string()),
            sigma.unwrap_or(0),
        ),
    };
    let (ell, m) = match cell.scheduler {
        SchedulerSpec::Hpts { m, ell } => (Some(ell), Some(m)),
        _ => (None, None),
    };
    let dcount = match &cell.scheduler {
        SchedulerSpec::Ppts { dests } | SchedulerSpec::TreePpts { dests } => dests.len() as u32,
        _ => 1,
    };
    let seed = match cell.adversary {
        AdversarySpec::Random { seed, .. } => Some(seed),
        _ => None,
    };
    let bound = outcome.bound;
    Ok(SweepRow {
        scheduler: if cell.drain {
            format!("drain-{}", cell.scheduler.name())
        } else {
            cell.scheduler.name().to_string()
        },
        n: outcome.topo.node_count(),
        rho,
        sigma,
        dests: dcount,
        ell,
        m,
        seed,
        max_load,
        bound,
        ratio: bound.map(|b| max_load as f64 / b as f64),
        scenario,
        violations,
    })
}

fn describe_scenario(o: &ScenarioOutcome) -> String {
    match o {
        ScenarioOutcome::BetaBurst { top_digit, phase_end, k, count } => {
            format!("digit{top_digit}:beta-burst(t={phase_end},k={k},count={count})")
        }
        ScenarioOutcome::FreshGrowth { top_digit, from, to } => {
            format!("digit{top_digit}:fresh-growth({from}->{to})")
        }
    }
}

/// Run every cell of the grid, up to `jobs` in parallel, preserving grid
/// order in the output. A failing cell aborts the sweep with its spec
/// attached to the error.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let cells = sweep_cells(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AqtError::Spec(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                sweep_row(cell).map_err(|e| {
                    AqtError::Spec(format!(
                        "cell {} failed: {e}",
                        serde_json::to_string(cell).unwrap_or_default()
                    ))
                })
            })
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| AqtError::Spec(format!("csv: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// The default parallelism: `AQT_JOBS` if set, else the available cores.
pub fn default_jobs() -> usize {
    std::env::var("AQT_JOBS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, |p| p.get())
        })
}

/// One scheduler's showing against the worst-case construction.
#[derive(Debug, Clone, Serialize)]
pub struct LbSchedulerReport {
    pub scheduler: String,
    pub drain: bool,
    pub peak_load: u32,
    pub alpha_stale: u64,
    pub beta_stale: u64,
    pub violations: Vec<String>,
    pub scenarios: Vec<String>,
}

/// Full report for the lower-bound construction: pattern statistics, the
/// boundedness re-check, and one entry per requested scheduler.
#[derive(Debug, Clone, Serialize)]
pub struct LbReport {
    pub m: u32,
    pub ell: u32,
    pub rho: String,
    pub node_count: u32,
    pub horizon: u32,
    pub packets: usize,
    pub bounded_ok: bool,
    /// Exact witness rate of the construction: ((ell+1)rho - 1) * m / (2 ell),
    /// the guaranteed buffer growth per hierarchy step.
    pub witness: String,
    pub runs: Vec<LbSchedulerReport>,
}

pub fn lower_bound_report(params: &LbParams, schedulers: &[String]) -> Result<LbReport> {
    let topo = params.topology();
    let pattern = params.pattern()?;
    let bounded = pattern.validate_bounded(&topo, params.rho, 1);
    let witness = (Rational::from_integer(params.ell as i64 + 1) * params.rho
        - Rational::from_integer(1))
        * Rational::new(params.m as i64, 2 * params.ell as i64);
    let mut runs = Vec::new();
    for name in schedulers {
        let cell = lb_cell_spec(params.m, params.ell, RationalStr(params.rho), name)?;
        let outcome = run_experiment(&cell)?;
        let report = stale_oracle(params, &outcome.pattern, &outcome.trace)?;
        let scenarios = if cell.drain || !report.is_ok() {
            Vec::new()
        } else {
            scenario_check(params, &report)?.iter().map(describe_scenario).collect()
        };
        runs.push(LbSchedulerReport {
            scheduler: name.clone(),
            drain: cell.drain,
            peak_load: outcome.trace.peak_load(),
            alpha_stale: report.count(StaleKind::Alpha),
            beta_stale: report.count(StaleKind::Beta),
            violations: report.violations.clone(),
            scenarios,
        });
    }
    Ok(LbReport {
        m: params.m,
        ell: params.ell,
        rho: crate::rational::format_rational(params.rho),
        node_count: params.node_count(),
        horizon: params.horizon(),
        packets: pattern.len(),
        bounded_ok: bounded.is_ok(),
        witness: crate::rational::format_rational(witness),
        runs,
    })
}

/// CLI flags that mirror the spec file one to one; any flag given overrides
/// the file's value.
#[derive(Debug, Default, clap::Args)]
pub struct SpecArgs {
    /// Spec file (JSON) providing defaults for all other flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// `line:N`, or a path to a topology JSON file.
    #[arg(long)]
    pub topo: Option<String>,
    /// `random`, `lowerbound`, or `file:PATH`.
    #[arg(long)]
    pub adversary: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Injection rate as `num/den`.
    #[arg(long)]
    pub rho: Option<String>,
    /// Burst allowance.
    #[arg(long)]
    pub sigma: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Destinations as `8,16` (also the ppts destination set).
    #[arg(long, value_delimiter = ',')]
    pub dests: Option<Vec<u32>>,
    /// Hierarchy base (hpts) or construction base (lowerbound).
    #[arg(long)]
    pub m: Option<u32>,
    /// Hierarchy depth (hpts) or construction depth (lowerbound).
    #[arg(long)]
    pub ell: Option<u32>,
    /// pts | ppts | hpts | tree-pts | tree-ppts | greedy | optimal.
    #[arg(long)]
    pub scheduler: Option<String>,
    /// Keep forwarding stored packets beyond the pure activation rule.
    #[arg(long)]
    pub drain: bool,
    /// `all`, `none`, or a comma list of checker names.
    #[arg(long, value_delimiter = ',')]
    pub checkers: Option<Vec<String>>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

impl SpecArgs {
    /// Assemble the effective spec: the file (if any) overridden field by
    /// field with the given flags.
    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let base = match &self.spec {
            Some(path) => Some(ExperimentSpec::read_json(path)?),
            None => None,
        };
        let topology = match &self.topo {
            Some(s) => Some(parse_topology(s)?),
            None => base.as_ref().and_then(|b| b.topology.clone()),
        };
        let adversary = self.merge_adversary(base.as_ref())?;
        let scheduler = self.merge_scheduler(base.as_ref(), &topology, &adversary)?;
        let horizon = self.horizon.or(base.as_ref().and_then(|b| b.horizon));
        Ok(ExperimentSpec {
            topology,
            adversary,
            scheduler,
            horizon,
            drain: self.drain || base.as_ref().is_some_and(|b| b.drain),
            checkers: self
                .checkers
                .clone()
                .or_else(|| base.as_ref().map(|b| b.checkers.clone()))
                .unwrap_or_else(default_checkers),
            trace_out: self.trace_out.clone().or(base.as_ref().and_then(|b| b.trace_out.clone())),
            summary_out: self
                .summary_out
                .clone()
                .or(base.as_ref().and_then(|b| b.summary_out.clone())),
        })
    }

    fn rho(&self) -> Result<Option<RationalStr>> {
        self.rho
            .as_deref()
            .map(|s| parse_rational(s).map(RationalStr).map_err(AqtError::Spec))
            .transpose()
    }

    fn merge_adversary(&self, base: Option<&ExperimentSpec>) -> Result<AdversarySpec> {
        let prior = base.map(|b| &b.adversary);
        let kind = match (&self.adversary, prior) {
            (Some(k), _) => k.clone(),
            (None, Some(a)) => return self.override_adversary(a.clone()),
            (None, None) => return Err(AqtError::Spec("adversary required".into())),
        };
        let a = match kind.as_str() {
            "random" => AdversarySpec::Random {
                seed: 0,
                rho: RationalStr(Rational::from_integer(1)),
                sigma: 0,
                dests: Vec::new(),
            },
            "lowerbound" => AdversarySpec::Lowerbound {
                m: 0,
                ell: 0,
                rho: RationalStr(Rational::from_integer(1)),
            },
            other => match other.strip_prefix("file:") {
                Some(path) => AdversarySpec::File { path: path.into(), rho: None, sigma: None },
                None => return Err(AqtError::Spec(format!("unknown adversary {other:?}"))),
            },
        };
        // Carry over fields from a same-kind file spec before applying flags.
        let a = match (prior, &a) {
            (Some(p), _) if std::mem::discriminant(p) == std::mem::discriminant(&a) => p.clone(),
            _ => a,
        };
        let merged = self.override_adversary(a)?;
        self.check_complete(&merged)?;
        Ok(merged)
    }

    fn override_adversary(&self, a: AdversarySpec) -> Result<AdversarySpec> {
        let rho_flag = self.rho()?;
        Ok(match a {
            AdversarySpec::Random { seed, rho, sigma, dests } => AdversarySpec::Random {
                seed: self.seed.unwrap_or(seed),
                rho: rho_flag.unwrap_or(rho),
                sigma: self.sigma.unwrap_or(sigma),
                dests: self.dests.clone().unwrap_or(dests),
            },
            AdversarySpec::Lowerbound { m, ell, rho } => AdversarySpec::Lowerbound {
                m: self.m.unwrap_or(m),
                ell: self.ell.unwrap_or(ell),
                rho: rho_flag.unwrap_or(rho),
            },
            AdversarySpec::File { path, rho, sigma } => AdversarySpec::File {
                path,
                rho: rho_flag.or(rho),
                sigma: self.sigma.or(sigma),
            },
        })
    }

    fn check_complete(&self, a: &AdversarySpec) -> Result<()> {
        match a {
            AdversarySpec::Random { dests, .. } if dests.is_empty() => {
                Err(AqtError::Spec("random adversary needs --dests".into()))
            }
            AdversarySpec::Lowerbound { m, ell, .. } if *m == 0 || *ell == 0 => {
                Err(AqtError::Spec("lowerbound adversary needs --m and --ell".into()))
            }
            _ => Ok(()),
        }
    }

    fn merge_scheduler(
        &self,
        base: Option<&ExperimentSpec>,
        topology: &Option<TopologySpec>,
        adversary: &AdversarySpec,
    ) -> Result<SchedulerSpec> {
        let name = match (&self.scheduler, base) {
            (Some(n), _) => n.clone(),
            (None, Some(b)) => return Ok(b.scheduler.clone()),
            (None, None) => return Err(AqtError::Spec("scheduler required".into())),
        };
        // Line length, for defaulting destinations to the sink.
        let n = match (topology, adversary) {
            (Some(ts), _) if ts.parent.is_none() => Some(ts.n),
            (_, AdversarySpec::Lowerbound { m, ell, .. }) => Some((*ell + 1) * m.pow(*ell)),
            _ => None,
        };
        let dests = |flag: &Option<Vec<u32>>| -> Result<Vec<u32>> {
            match (flag, adversary, n) {
                (Some(ws), _, _) => Ok(ws.clone()),
                (None, AdversarySpec::Random { dests, .. }, _) if !dests.is_empty() => {
                    let mut ws = dests.clone();
                    ws.sort_unstable();
                    ws.dedup();
                    Ok(ws)
                }
                (None, AdversarySpec::Lowerbound { m, ell, rho }, _) => {
                    let params = LbParams::new(*m, *ell, rho.0)?;
                    let mut ws: Vec<u32> =
                        params.pattern()?.packets().iter().map(|p| p.dest).collect();
                    ws.sort_unstable();
                    ws.dedup();
                    Ok(ws)
                }
                (None, _, Some(n)) => Ok(vec![n]),
                (None, _, None) => Err(AqtError::Spec("scheduler needs --dests".into())),
            }
        };
        Ok(match name.as_str() {
            "pts" => SchedulerSpec::Pts {
                dest: *dests(&self.dests)?
                    .last()
                    .ok_or_else(|| AqtError::Spec("pts needs a destination".into()))?,
            },
            "ppts" => SchedulerSpec::Ppts { dests: dests(&self.dests)? },
            "tree-pts" => SchedulerSpec::TreePts,
            "tree-ppts" => SchedulerSpec::TreePpts { dests: dests(&self.dests)? },
            "hpts" => {
                // Under the lowerbound adversary, --m and --ell configure
                // the construction; the scheduler takes the construction's
                // depth and the smallest base that covers its line.
                if let AdversarySpec::Lowerbound { ell, .. } = adversary {
                    let n = n.expect("lowerbound fixes the line length");
                    SchedulerSpec::Hpts { m: Hpts::fitting_base(n, *ell), ell: *ell }
                } else {
                    let ell = self.ell.unwrap_or(1);
                    let m = match (self.m, n) {
                        (Some(m), _) => m,
                        (None, Some(n)) => Hpts::fitting_base(n, ell),
                        (None, None) => return Err(AqtError::Spec("hpts needs --m".into())),
                    };
                    SchedulerSpec::Hpts { m, ell }
                }
            }
            "greedy" => SchedulerSpec::Greedy,
            "optimal" => SchedulerSpec::Optimal,
            other => return Err(AqtError::Spec(format!("unknown scheduler {other:?}"))),
        })
    }
}

fn parse_topology(s: &str) -> Result<TopologySpec> {
    if let Some(n) = s.strip_prefix("line:") {
        let n: u32 = n
            .parse()
            .map_err(|e| AqtError::Spec(format!("bad line size {n:?}: {e}")))?;
        return Ok(TopologySpec { n, root: None, parent: None });
    }
    let file = File::open(s)?;
    serde_json::from_reader(file).map_err(|e| AqtError::Spec(format!("{s}: {e}")))
}

/// Process exit code for an error: 1 for a failed runtime check, 2 for an
/// invalid spec or any other failure.
pub fn exit_code(e: &AqtError) -> i32 {
    match e {
        AqtError::CheckerFailure { .. } => 1,
        _ => 2,
    }
}

/// A checker failure as a one-line JSON report for stderr.
pub fn checker_report(e: &AqtError) -> Option<String> {
    if let AqtError::CheckerFailure { checker, round, detail } = e {
        Some(
            serde_json::json!({ "checker": checker, "round": round, "detail": detail })
                .to_string(),
        )
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim_args() -> SpecArgs {
        SpecArgs {
            topo: Some("line:16".into()),
            adversary: Some("random".into()),
            rho: Some("1/2".into()),
            sigma: Some(2),
            horizon: Some(200),
            dests: Some(vec![8, 16]),
            scheduler: Some("ppts".into()),
            ..Default::default()
        }
    }

    #[test]
    fn flags_assemble_a_spec() {
        let spec = sim_args().into_spec().unwrap();
        assert_eq!(spec.scheduler, SchedulerSpec::Ppts { dests: vec![8, 16] });
        assert_eq!(spec.horizon, Some(200));
        match &spec.adversary {
            AdversarySpec::Random { rho, sigma, dests, seed } => {
                assert_eq!(rho.0, Rational::new(1, 2));
                assert_eq!((*sigma, *seed), (2, 0));
                assert_eq!(dests, &vec![8, 16]);
            }
            other => panic!("unexpected adversary {other:?}"),
        }
    }

    #[test]
    fn flags_override_a_spec_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        sim_args().into_spec().unwrap().write_json(File::create(&path).unwrap()).unwrap();
        let args = SpecArgs {
            spec: Some(path),
            sigma: Some(4),
            scheduler: Some("greedy".into()),
            ..Default::default()
        };
        let spec = args.into_spec().unwrap();
        assert_eq!(spec.scheduler, SchedulerSpec::Greedy);
        match &spec.adversary {
            AdversarySpec::Random { sigma, dests, .. } => {
                assert_eq!(*sigma, 4);
                assert_eq!(dests, &vec![8, 16], "unset fields keep file values");
            }
            other => panic!("unexpected adversary {other:?}"),
        }
    }

    #[test]
    fn ppts_run_respects_its_bound() {
        let outcome = run_experiment(&sim_args().into_spec().unwrap()).unwrap();
        let bound = outcome.bound.unwrap();
        assert_eq!(bound, 1 + 2 + 2);
        assert!(outcome.trace.peak_load() <= bound);
    }

    #[test]
    fn empty_adversary_gives_zero_load() {
        let mut args = sim_args();
        args.rho = Some("0".into());
        args.sigma = Some(0);
        let outcome = run_experiment(&args.into_spec().unwrap()).unwrap();
        assert_eq!(outcome.trace.peak_load(), 0);
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_experiment(&sim_args().into_spec().unwrap()).unwrap();
        let b = run_experiment(&sim_args().into_spec().unwrap()).unwrap();
        assert_eq!(a.trace.rounds_jsonl(), b.trace.rounds_jsonl());
    }

    #[test]
    fn stored_traces_validate_and_tampering_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let mut args = sim_args();
        args.trace_out = Some(path.clone());
        let spec = args.into_spec().unwrap();
        run_experiment(&spec).unwrap();
        validate_stored_trace(&spec, &path).unwrap();

        // Flip one recorded load and the audit must fail.
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"max_load\":1", "\"max_load\":7", 1);
        assert_ne!(text, tampered, "expected a replaceable load field");
        std::fs::write(&path, tampered).unwrap();
        assert!(validate_stored_trace(&spec, &path).is_err());
    }

    #[test]
    fn lowerbound_spec_fills_in_topology_and_horizon() {
        let args = SpecArgs {
            adversary: Some("lowerbound".into()),
            m: Some(2),
            ell: Some(2),
            rho: Some("1/2".into()),
            scheduler: Some("ppts".into()),
            ..Default::default()
        };
        let spec = args.into_spec().unwrap();
        let resolved = resolve(&spec).unwrap();
        assert_eq!(resolved.topo.node_count(), 12);
        assert_eq!(resolved.horizon, 8);
        assert_eq!(resolved.sigma, Some(1));
        run_experiment(&spec).unwrap();
    }

    #[test]
    fn file_adversary_round_trips_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pattern.csv");
        let spec = sim_args().into_spec().unwrap();
        let resolved = resolve(&spec).unwrap();
        resolved.pattern.write_csv(File::create(&path).unwrap()).unwrap();
        let args = SpecArgs {
            topo: Some("line:16".into()),
            adversary: Some(format!("file:{}", path.display())),
            rho: Some("1/2".into()),
            sigma: Some(2),
            horizon: Some(200),
            dests: Some(vec![8, 16]),
            scheduler: Some("ppts".into()),
            ..Default::default()
        };
        let outcome = run_experiment(&args.into_spec().unwrap()).unwrap();
        assert_eq!(outcome.pattern.packets(), resolved.pattern.packets());
    }

    #[test]
    fn single_cell_sweep_matches_simulate() {
        let sweep_spec = SweepSpec::Random {
            n: vec![16],
            rho: vec![RationalStr(Rational::new(1, 2))],
            sigma: vec![2],
            dests: vec![2],
            ell: vec![1],
            schedulers: vec!["ppts".into()],
            seeds: vec![0],
            horizon: 200,
        };
        let rows = sweep(&sweep_spec, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = run_experiment(&sim_args().into_spec().unwrap()).unwrap();
        assert_eq!(rows[0].max_load, direct.trace.peak_load());
        assert_eq!(rows[0].bound, Some(5));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scheduler,n,rho,sigma,dests"));
    }

    #[test]
    fn lowerbound_sweep_reports_scenarios() {
        let sweep_spec = SweepSpec::Lowerbound {
            m: vec![2],
            ell: vec![2],
            rho: vec![RationalStr(Rational::new(1, 2))],
            schedulers: vec!["ppts".into(), "drain-ppts".into(), "greedy".into()],
        };
        let rows = sweep(&sweep_spec, 1).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert_eq!(row.violations, Some(0), "{}", row.scheduler);
        }
        assert!(rows[0].scenario.as_deref().unwrap().contains("digit0"));
        assert_eq!(rows[1].scenario.as_deref(), Some("drained"));
    }

    #[test]
    fn lower_bound_report_is_clean() {
        let params = LbParams::new(2, 2, Rational::new(1, 2)).unwrap();
        let report = lower_bound_report(
            &params,
            &["ppts".into(), "hpts".into(), "greedy".into(), "drain-ppts".into()],
        )
        .unwrap();
        assert!(report.bounded_ok);
        assert_eq!(report.witness, "1/4");
        assert_eq!(report.runs.len(), 4);
        for run in &report.runs {
            assert!(run.violations.is_empty(), "{}: {:?}", run.scheduler, run.violations);
        }
    }

    #[test]
    fn optimal_path_reports_the_exhaustive_optimum() {
        let args = SpecArgs {
            topo: Some("line:3".into()),
            adversary: Some("random".into()),
            rho: Some("1/2".into()),
            sigma: Some(1),
            horizon: Some(6),
            dests: Some(vec![3]),
            scheduler: Some("optimal".into()),
            ..Default::default()
        };
        let spec = args.into_spec().unwrap();
        let opt = run_optimal(&spec).unwrap();
        assert!(opt <= 2);
        assert!(run_experiment(&spec).is_err(), "optimal is not a running scheduler");
    }

    #[test]
    fn checker_failure_maps_to_exit_one() {
        let err = AqtError::CheckerFailure { checker: "x".into(), round: 3, detail: "d".into() };
        assert_eq!(exit_code(&err), 1);
        assert_eq!(exit_code(&AqtError::Spec("bad".into())), 2);
        let report = checker_report(&err).unwrap();
        assert!(report.contains("\"round\":3"));
    }
}
