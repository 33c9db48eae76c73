//! Badness accounting and per-round invariant checkers.
//!
//! A pseudo-buffer is *bad* when it holds two or more packets; its badness
//! count is its load minus one. The badness of a node aggregates the bad
//! packets in buffers at or before it whose journey still crosses it; the
//! scheduling analysis rests on two facts that the checkers here verify on
//! every round of a live run:
//!
//! * forwarding never increases any node's badness, and strictly decreases
//!   it wherever it was positive (per round for the flat schedulers, per
//!   phase for the hierarchical one);
//! * badness stays within one packet of the adversary's excess, which yields
//!   the load bounds.

use crate::adversary::{ExcessTrace, InjectionPattern};
use crate::engine::{ActivationSet, Checker, Configuration, PseudoBufferKey};
use crate::rational::Rational;
use crate::schedulers::HierarchicalPartition;
use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};
use std::collections::BTreeMap;

/// How a configuration's pseudo-buffers map to badness classes.
#[derive(Debug, Clone, Copy)]
pub enum BadnessScheme {
    /// Whole-buffer stacks, every packet bound for `dest` (single-destination
    /// peak-to-sink, on a line or a tree).
    SingleDest { dest: NodeId },
    /// Per-destination pseudo-buffers (parallel peak-to-sink variants).
    PerDest,
    /// Per-(level, intermediate destination) pseudo-buffers with
    /// interval-local prefix sums.
    Hierarchical(HierarchicalPartition),
}

/// Badness of every node, broken down by class and by level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadnessSnapshot {
    /// Per (level, destination) class; flat schemes use level 0.
    pub classes: BTreeMap<(u32, NodeId), Vec<u32>>,
    /// Per-level totals; flat schemes have a single level.
    pub per_level: Vec<Vec<u32>>,
    /// Per-node totals across all classes.
    pub total: Vec<u32>,
}

/// Compute the badness snapshot of a configuration under a scheme.
pub fn badness(topo: &Topology, cfg: &Configuration, scheme: BadnessScheme) -> BadnessSnapshot {
    let n = topo.node_count() as usize;
    match scheme {
        BadnessScheme::SingleDest { .. } | BadnessScheme::PerDest => {
            // beta per destination class at each node
            let mut betas: BTreeMap<NodeId, Vec<u32>> = BTreeMap::new();
            for v in 0..topo.node_count() {
                for (key, stack) in cfg.buffers(v) {
                    let beta = (stack.len() as u32).saturating_sub(1);
                    if beta == 0 {
                        continue;
                    }
                    let dest = match (*key, scheme) {
                        (PseudoBufferKey::Whole, BadnessScheme::SingleDest { dest }) => dest,
                        (PseudoBufferKey::Dest(w), BadnessScheme::PerDest) => w,
                        _ => panic!("pseudo-buffer {key:?} does not match the badness scheme"),
                    };
                    betas.entry(dest).or_insert_with(|| vec![0; n])[v as usize] += beta;
                }
            }
            // B_w(v): bad packets for w in the subtree of v, zero at or past w
            let order = subtree_order(topo);
            let mut classes = BTreeMap::new();
            let mut total = vec![0u32; n];
            for (w, beta) in betas {
                let mut b = beta;
                for &v in &order {
                    let parent = topo.parent_of(v);
                    if v != topo.root() {
                        b[parent as usize] += b[v as usize];
                    }
                }
                for v in 0..topo.node_count() {
                    let crosses = if topo.is_line() { v < w } else { topo.precedes(v, w) };
                    if !crosses {
                        b[v as usize] = 0;
                    }
                    total[v as usize] += b[v as usize];
                }
                classes.insert((0, w), b);
            }
            BadnessSnapshot { per_level: vec![total.clone()], classes, total }
        }
        BadnessScheme::Hierarchical(part) => {
            let mut classes: BTreeMap<(u32, NodeId), Vec<u32>> = BTreeMap::new();
            for v in 0..topo.node_count() {
                for (key, stack) in cfg.buffers(v) {
                    let beta = (stack.len() as u32).saturating_sub(1);
                    if beta == 0 {
                        continue;
                    }
                    let (level, dest) = match *key {
                        PseudoBufferKey::LevelDest { level, dest } => (level, dest),
                        _ => panic!("pseudo-buffer {key:?} does not match the badness scheme"),
                    };
                    // A bad packet at v counts toward B_{level,dest}(i) for
                    // every i from v up to the segment's end, all inside v's
                    // level interval.
                    let row = classes.entry((level, dest)).or_insert_with(|| vec![0; n]);
                    let hi = (dest - 1).min(topo.node_count() - 1);
                    for i in v..=hi {
                        row[i as usize] += beta;
                    }
                }
            }
            let mut per_level = vec![vec![0u32; n]; part.ell as usize];
            let mut total = vec![0u32; n];
            for (&(level, _), row) in &classes {
                for i in 0..n {
                    per_level[level as usize][i] += row[i];
                    total[i] += row[i];
                }
            }
            BadnessSnapshot { classes, per_level, total }
        }
    }
}

/// Nodes ordered children-before-parents, for subtree accumulation.
fn subtree_order(topo: &Topology) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..topo.node_count()).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(topo.depth_of(v)));
    order
}

fn fail(checker: &str, round: u32, detail: String) -> AqtError {
    AqtError::CheckerFailure { checker: checker.into(), round, detail }
}

/// Asserts the forwarding-step badness laws: no class ever gains badness, and
/// every node with positive badness loses at least one unit per round (flat
/// schemes) or sees the round's level drop with higher levels untouched
/// (hierarchical scheme).
pub struct BadDecreaseChecker {
    scheme: BadnessScheme,
    before: Option<BadnessSnapshot>,
}

impl BadDecreaseChecker {
    pub fn new(scheme: BadnessScheme) -> BadDecreaseChecker {
        BadDecreaseChecker { scheme, before: None }
    }
}

impl Checker for BadDecreaseChecker {
    fn name(&self) -> &'static str {
        "bad-decrease"
    }

    fn after_injection(&mut self, topo: &Topology, cfg: &Configuration, _: u32) -> Result<()> {
        self.before = Some(badness(topo, cfg, self.scheme));
        Ok(())
    }

    fn after_forwarding(
        &mut self,
        topo: &Topology,
        cfg: &Configuration,
        act: &ActivationSet,
        t: u32,
    ) -> Result<()> {
        let before = self.before.take().ok_or_else(|| {
            fail("bad-decrease", t, "missing pre-forwarding snapshot".into())
        })?;
        let after = badness(topo, cfg, self.scheme);
        let n = topo.node_count() as usize;
        match self.scheme {
            BadnessScheme::SingleDest { .. } | BadnessScheme::PerDest => {
                for (class, row) in &after.classes {
                    let zero = vec![0u32; n];
                    let prev = before.classes.get(class).unwrap_or(&zero);
                    for v in 0..n {
                        if row[v] > prev[v] {
                            return Err(fail(
                                "bad-decrease",
                                t,
                                format!("class {class:?} badness grew at node {v}"),
                            ));
                        }
                    }
                }
                for v in 0..n {
                    if after.total[v] > before.total[v].saturating_sub(1) {
                        return Err(fail(
                            "bad-decrease",
                            t,
                            format!(
                                "node {v}: badness {} -> {} did not decrease",
                                before.total[v], after.total[v]
                            ),
                        ));
                    }
                }
                // every activated per-destination pseudo-buffer relieves its
                // own class
                if matches!(self.scheme, BadnessScheme::PerDest) {
                    for (v, key) in act.iter() {
                        let w = key.target(v);
                        let prev =
                            before.classes.get(&(0, w)).map_or(0, |r| r[v as usize]);
                        let now = after.classes.get(&(0, w)).map_or(0, |r| r[v as usize]);
                        if prev >= 1 && now > prev - 1 {
                            return Err(fail(
                                "bad-decrease",
                                t,
                                format!("activated node {v} kept its badness for {w}"),
                            ));
                        }
                    }
                }
            }
            BadnessScheme::Hierarchical(part) => {
                let lambda = part.round_level(t) as usize;
                // levels above the round's own stay untouched; the round's
                // level drops where positive; lower levels may gain (packets
                // crossing into their next segment) but the total cannot
                for (j, (prev, now)) in
                    before.per_level.iter().zip(&after.per_level).enumerate()
                {
                    for v in 0..n {
                        if j > lambda && now[v] != prev[v] {
                            return Err(fail(
                                "bad-decrease",
                                t,
                                format!("level {j} badness changed at node {v} in a level-{lambda} round"),
                            ));
                        }
                        if j == lambda && now[v] > prev[v].saturating_sub(1) {
                            return Err(fail(
                                "bad-decrease",
                                t,
                                format!("level {j} badness grew at node {v}: {} -> {}", prev[v], now[v]),
                            ));
                        }
                    }
                }
                for v in 0..n {
                    if after.total[v] > before.total[v] {
                        return Err(fail(
                            "bad-decrease",
                            t,
                            format!("total badness grew at node {v}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Phase-level law for the hierarchical scheduler: across one full phase
/// (injection at the start, `ell` forwarding rounds, nothing arriving in
/// between), every node's badness drops by at least one where positive.
pub struct HptsPhaseChecker {
    part: HierarchicalPartition,
    start: Option<Vec<u32>>,
}

impl HptsPhaseChecker {
    pub fn new(part: HierarchicalPartition) -> HptsPhaseChecker {
        HptsPhaseChecker { part, start: None }
    }
}

impl Checker for HptsPhaseChecker {
    fn name(&self) -> &'static str {
        "phase-bad-decrease"
    }

    fn after_injection(&mut self, topo: &Topology, cfg: &Configuration, t: u32) -> Result<()> {
        if (t - 1).is_multiple_of(self.part.ell) {
            self.start =
                Some(badness(topo, cfg, BadnessScheme::Hierarchical(self.part)).total);
        }
        Ok(())
    }

    fn after_forwarding(
        &mut self,
        topo: &Topology,
        cfg: &Configuration,
        _: &ActivationSet,
        t: u32,
    ) -> Result<()> {
        if !t.is_multiple_of(self.part.ell) {
            return Ok(());
        }
        let start = self.start.take().ok_or_else(|| {
            fail("phase-bad-decrease", t, "missing phase-start snapshot".into())
        })?;
        let end = badness(topo, cfg, BadnessScheme::Hierarchical(self.part)).total;
        for v in 0..topo.node_count() as usize {
            if end[v] > start[v].saturating_sub(1) {
                return Err(fail(
                    "phase-bad-decrease",
                    t,
                    format!("node {v}: badness {} -> {} over the phase", start[v], end[v]),
                ));
            }
        }
        Ok(())
    }
}

/// Couples badness to the adversary's excess: after injections badness is at
/// most excess + 1, after forwarding at most excess. For the hierarchical
/// scheduler the comparison happens at phase boundaries against the
/// ell-reduced pattern (whose rate is `ell * rho`).
pub struct BadnessExcessChecker {
    scheme: BadnessScheme,
    excess: Vec<ExcessTrace>,
    /// Phase length; 1 compares every round.
    batch: u32,
}

impl BadnessExcessChecker {
    pub fn new(
        topo: &Topology,
        pattern: &InjectionPattern,
        rho: Rational,
        horizon: u32,
        scheme: BadnessScheme,
    ) -> Result<BadnessExcessChecker> {
        let (batch, excess) = match scheme {
            BadnessScheme::Hierarchical(part) => {
                let reduced = pattern.ell_reduction(topo, part.ell)?;
                let rate = rho * Rational::from_integer(part.ell as i64);
                let phases = horizon.div_ceil(part.ell);
                (part.ell, reduced.excess_traces(topo, rate, phases))
            }
            _ => (1, pattern.excess_traces(topo, rho, horizon)),
        };
        Ok(BadnessExcessChecker { scheme, excess, batch })
    }

    fn check(&self, topo: &Topology, cfg: &Configuration, tau: u32, slack: i64, t: u32) -> Result<()> {
        let snapshot = badness(topo, cfg, self.scheme);
        for v in 0..topo.node_count() as usize {
            let xi = &self.excess[v];
            let bound = xi.scaled[tau as usize] + slack * xi.den;
            if snapshot.total[v] as i64 * xi.den > bound {
                return Err(fail(
                    "badness-excess",
                    t,
                    format!(
                        "node {v}: badness {} exceeds excess {} + {slack}",
                        snapshot.total[v],
                        xi.value(tau as usize)
                    ),
                ));
            }
        }
        Ok(())
    }
}

impl Checker for BadnessExcessChecker {
    fn name(&self) -> &'static str {
        "badness-excess"
    }

    fn after_injection(&mut self, topo: &Topology, cfg: &Configuration, t: u32) -> Result<()> {
        if !(t - 1).is_multiple_of(self.batch) {
            return Ok(());
        }
        let tau = (t - 1) / self.batch + 1;
        self.check(topo, cfg, tau, 1, t)
    }

    fn after_forwarding(
        &mut self,
        topo: &Topology,
        cfg: &Configuration,
        _: &ActivationSet,
        t: u32,
    ) -> Result<()> {
        if !t.is_multiple_of(self.batch) {
            return Ok(());
        }
        self.check(topo, cfg, t / self.batch, 0, t)
    }
}

/// Fails the run as soon as any buffer load exceeds `bound`, at either step
/// of a round.
pub struct LoadBoundChecker {
    pub bound: u32,
}

impl Checker for LoadBoundChecker {
    fn name(&self) -> &'static str {
        "load-bound"
    }

    fn after_injection(&mut self, topo: &Topology, cfg: &Configuration, t: u32) -> Result<()> {
        check_load(topo, cfg, self.bound, t)
    }

    fn after_forwarding(
        &mut self,
        topo: &Topology,
        cfg: &Configuration,
        _: &ActivationSet,
        t: u32,
    ) -> Result<()> {
        check_load(topo, cfg, self.bound, t)
    }
}

fn check_load(topo: &Topology, cfg: &Configuration, bound: u32, t: u32) -> Result<()> {
    for v in 0..topo.node_count() {
        let load = cfg.load(v);
        if load > bound {
            return Err(fail("load-bound", t, format!("node {v} holds {load} > {bound}")));
        }
    }
    Ok(())
}
