//! Baseline: every nonempty buffer forwards every round.

use crate::engine::{ActivationSet, Configuration, PseudoBufferKey, Scheduler};
use crate::topology::{NodeId, Topology};

/// Work-conserving baseline with a single whole-buffer stack per node. Not
/// subject to the peak-to-sink load guarantees; useful as a comparison point
/// and as an arbitrary protocol for adversary experiments.
#[derive(Debug, Clone, Default)]
pub struct Greedy;

impl Scheduler for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn house(&self, _: &Topology, _: NodeId, _: &crate::Packet) -> PseudoBufferKey {
        PseudoBufferKey::Whole
    }

    fn activate(&mut self, topo: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
        (0..cfg.node_count())
            .filter(|&v| cfg.load(v) > 0 && topo.next_hop(v).is_some())
            .map(|v| (v, PseudoBufferKey::Whole))
            .collect()
    }
}
