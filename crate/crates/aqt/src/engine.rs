//! The round loop: injection, activation, simultaneous forwarding, delivery.
//!
//! Each round has an injection step (new packets appended to the pseudo-buffer
//! the scheduler's routing assigns) and a forwarding step (every nonempty
//! activated pseudo-buffer forwards one packet, LIFO, all simultaneously).
//! Forwarding is a two-phase commit: all sends are collected before any
//! receive is applied, so the result is order-independent. A packet arriving
//! at its destination is delivered; otherwise it is re-housed at the receiving
//! node.

use crate::adversary::{InjectionPattern, Packet};
use crate::topology::{NodeId, Topology};
use crate::trace::{RoundRecord, Trace, TraceMeta};
use crate::{AqtError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Identifies one pseudo-buffer within a node: the whole buffer, the slot for
/// one final destination, or the slot for one (level, intermediate
/// destination) pair. Keys carry node ids, not list indices, so activation
/// records from different schedulers are directly comparable.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PseudoBufferKey {
    Whole,
    Dest(NodeId),
    LevelDest { level: u32, dest: NodeId },
}

impl PseudoBufferKey {
    /// The node this pseudo-buffer forwards toward; `Whole` has no target of
    /// its own and reports the holding node.
    pub fn target(&self, holder: NodeId) -> NodeId {
        match *self {
            PseudoBufferKey::Whole => holder,
            PseudoBufferKey::Dest(w) => w,
            PseudoBufferKey::LevelDest { dest, .. } => dest,
        }
    }
}

/// Per-node pseudo-buffer contents. Packets within a pseudo-buffer are a
/// stack: the last element is the most recently stored and is the one
/// forwarded (LIFO).
#[derive(Debug, Clone, Default)]
pub struct Configuration {
    nodes: Vec<BTreeMap<PseudoBufferKey, Vec<Packet>>>,
}

impl Configuration {
    pub fn new(topo: &Topology) -> Configuration {
        Configuration { nodes: vec![BTreeMap::new(); topo.node_count() as usize] }
    }

    pub fn node_count(&self) -> u32 {
        self.nodes.len() as u32
    }

    pub fn push(&mut self, v: NodeId, key: PseudoBufferKey, p: Packet) {
        self.nodes[v as usize].entry(key).or_default().push(p);
    }

    /// Pop the most recently stored packet of a pseudo-buffer, dropping the
    /// map entry once empty.
    pub fn pop(&mut self, v: NodeId, key: PseudoBufferKey) -> Option<Packet> {
        let node = &mut self.nodes[v as usize];
        let stack = node.get_mut(&key)?;
        let p = stack.pop();
        if stack.is_empty() {
            node.remove(&key);
        }
        p
    }

    /// Nonempty pseudo-buffers of `v`, in key order.
    pub fn buffers(&self, v: NodeId) -> impl Iterator<Item = (&PseudoBufferKey, &[Packet])> {
        self.nodes[v as usize].iter().map(|(k, s)| (k, s.as_slice()))
    }

    pub fn pseudo_load(&self, v: NodeId, key: PseudoBufferKey) -> u32 {
        self.nodes[v as usize].get(&key).map_or(0, |s| s.len() as u32)
    }

    pub fn load(&self, v: NodeId) -> u32 {
        self.nodes[v as usize].values().map(|s| s.len() as u32).sum()
    }

    pub fn loads(&self) -> Vec<u32> {
        (0..self.node_count()).map(|v| self.load(v)).collect()
    }

    pub fn max_load(&self) -> u32 {
        (0..self.node_count()).map(|v| self.load(v)).max().unwrap_or(0)
    }

    pub fn total_load(&self) -> u64 {
        (0..self.node_count()).map(|v| self.load(v) as u64).sum()
    }

    pub fn packets_at(&self, v: NodeId) -> impl Iterator<Item = &Packet> {
        self.nodes[v as usize].values().flatten()
    }

    pub fn all_packets(&self) -> impl Iterator<Item = (NodeId, &Packet)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(v, m)| m.values().flatten().map(move |p| (v as NodeId, p)))
    }

    /// The nonempty pseudo-buffer with the largest target at `v`, used by the
    /// drain rule.
    pub fn largest_key(&self, v: NodeId) -> Option<PseudoBufferKey> {
        self.nodes[v as usize]
            .keys()
            .copied()
            .max_by_key(|k| (k.target(v), *k))
    }
}

/// The (node, pseudo-buffer) pairs selected to forward in one round. Feasible
/// by construction: at most one key per node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivationSet {
    entries: BTreeMap<NodeId, PseudoBufferKey>,
}

impl ActivationSet {
    pub fn new() -> ActivationSet {
        ActivationSet::default()
    }

    /// Insert an activation; a second key for the same node is infeasible.
    pub fn insert(&mut self, v: NodeId, key: PseudoBufferKey) -> Result<()> {
        match self.entries.get(&v) {
            Some(&prev) if prev != key => Err(AqtError::InfeasibleActivation(v)),
            _ => {
                self.entries.insert(v, key);
                Ok(())
            }
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.entries.contains_key(&v)
    }

    pub fn get(&self, v: NodeId) -> Option<PseudoBufferKey> {
        self.entries.get(&v).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, PseudoBufferKey)> + '_ {
        self.entries.iter().map(|(&v, &k)| (v, k))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True iff no node appears twice in the raw pair list.
    pub fn feasible(pairs: &[(NodeId, PseudoBufferKey)]) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        pairs.iter().all(|&(v, _)| seen.insert(v))
    }
}

impl FromIterator<(NodeId, PseudoBufferKey)> for ActivationSet {
    fn from_iter<I: IntoIterator<Item = (NodeId, PseudoBufferKey)>>(it: I) -> Self {
        let mut set = ActivationSet::new();
        for (v, k) in it {
            set.insert(v, k).expect("duplicate node in activation set");
        }
        set
    }
}

/// A forwarding algorithm: houses arriving packets into pseudo-buffers and
/// selects the activation set each round.
pub trait Scheduler {
    fn name(&self) -> &'static str;

    /// Rounds whose injections are accepted together at the start of each
    /// batch window (1 for everything except the hierarchical scheduler).
    fn batch_len(&self) -> u32 {
        1
    }

    /// The pseudo-buffer packet `p` occupies while stored at buffer `v`.
    fn house(&self, topo: &Topology, v: NodeId, p: &Packet) -> PseudoBufferKey;

    /// Select the pseudo-buffers that forward in round `t`.
    fn activate(&mut self, topo: &Topology, cfg: &Configuration, t: u32) -> ActivationSet;
}

/// A per-round invariant checker, invoked after the injection step and after
/// the forwarding step. Failures abort the run.
pub trait Checker {
    fn name(&self) -> &'static str;

    fn after_injection(&mut self, _topo: &Topology, _cfg: &Configuration, _t: u32) -> Result<()> {
        Ok(())
    }

    fn after_forwarding(
        &mut self,
        _topo: &Topology,
        _cfg: &Configuration,
        _act: &ActivationSet,
        _t: u32,
    ) -> Result<()> {
        Ok(())
    }
}

/// Engine knobs for one run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Rounds to simulate; must cover every injection round.
    pub horizon: u32,
    /// After the scheduler's activation, additionally activate the
    /// largest-target nonempty pseudo-buffer at every inactive node so stored
    /// packets eventually deliver. Load bounds survive this (a node that
    /// receives while nonempty also sends) but the invariant checkers assume
    /// the pure rule and must be disabled.
    pub drain: bool,
}

/// Execute one injection + forwarding round. `injections` must all be housed
/// at this round (the caller handles batching). Returns the round record.
pub fn step(
    topo: &Topology,
    cfg: &mut Configuration,
    injections: &[Packet],
    scheduler: &mut dyn Scheduler,
    drain: bool,
    t: u32,
    checkers: &mut [Box<dyn Checker + '_>],
) -> Result<RoundRecord> {
    let mut injected = Vec::with_capacity(injections.len());
    for p in injections {
        let key = scheduler.house(topo, p.source, p);
        cfg.push(p.source, key, *p);
        injected.push(p.id);
    }
    for c in checkers.iter_mut() {
        c.after_injection(topo, cfg, t).map_err(|e| checker_err(c.name(), t, e))?;
    }
    let max_load_pre = cfg.max_load();

    let mut act = scheduler.activate(topo, cfg, t);
    if drain {
        for v in 0..cfg.node_count() {
            if !act.contains(v) && topo.next_hop(v).is_some() {
                if let Some(key) = cfg.largest_key(v) {
                    act.insert(v, key)?;
                }
            }
        }
    }

    // Phase one: collect all sends.
    let mut sends: Vec<(NodeId, NodeId, Packet)> = Vec::new();
    for (v, key) in act.iter() {
        if cfg.pseudo_load(v, key) == 0 {
            continue;
        }
        let next = topo.next_hop(v).ok_or(AqtError::NoPath { from: v, to: v })?;
        let p = cfg.pop(v, key).expect("nonempty pseudo-buffer");
        sends.push((v, next, p));
    }
    // Phase two: apply all receives.
    let mut moves = Vec::with_capacity(sends.len());
    let mut delivered = Vec::new();
    for (v, next, p) in sends {
        moves.push((p.id, v, next));
        if next == p.dest {
            delivered.push(p.id);
        } else {
            let key = scheduler.house(topo, next, &p);
            cfg.push(next, key, p);
        }
    }
    for c in checkers.iter_mut() {
        c.after_forwarding(topo, cfg, &act, t)
            .map_err(|e| checker_err(c.name(), t, e))?;
    }

    let activations = act.iter().map(|(v, k)| (v, k.target(v))).collect();
    Ok(RoundRecord {
        round: t,
        injected,
        activations,
        moves,
        delivered,
        max_load_pre,
        max_load: cfg.max_load(),
        total_load: cfg.total_load(),
        loads: cfg.loads(),
    })
}

fn checker_err(name: &str, round: u32, e: AqtError) -> AqtError {
    match e {
        e @ AqtError::CheckerFailure { .. } => e,
        e => AqtError::CheckerFailure { checker: name.to_string(), round, detail: e.to_string() },
    }
}

/// Run rounds `1..=horizon`. Injections are fed in windows of the scheduler's
/// batch length: at the first round of each window, all of the window's
/// injections are accepted at once.
pub fn run(
    topo: &Topology,
    pattern: &InjectionPattern,
    scheduler: &mut dyn Scheduler,
    opts: RunOptions,
    checkers: &mut [Box<dyn Checker + '_>],
) -> Result<Trace> {
    if opts.horizon < pattern.max_round() {
        return Err(AqtError::InvalidParams(format!(
            "horizon {} does not cover last injection round {}",
            opts.horizon,
            pattern.max_round()
        )));
    }
    let batch = scheduler.batch_len().max(1);
    let mut cfg = Configuration::new(topo);
    let mut trace = Trace::new(TraceMeta {
        scheduler: scheduler.name().to_string(),
        topology: topo.to_spec(),
        horizon: opts.horizon,
        drain: opts.drain,
    });
    for t in 1..=opts.horizon {
        let injections = if (t - 1) % batch == 0 {
            pattern.in_rounds(t, t + batch - 1)
        } else {
            &[]
        };
        let record = step(topo, &mut cfg, injections, scheduler, opts.drain, t, checkers)?;
        trace.push_round(record);
    }
    Ok(trace)
}
