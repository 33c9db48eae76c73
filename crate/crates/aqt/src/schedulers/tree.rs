//! Peak-to-sink variants on trees directed toward the root.
//!
//! The line's "leftmost bad buffer" generalizes to the order-minimal
//! antichain of overloaded buffers; relief paths run from each antichain
//! member toward the destination, skipping buffers already claimed by a
//! farther destination.

use crate::engine::{ActivationSet, Configuration, PseudoBufferKey, Scheduler};
use crate::topology::{NodeId, Topology};
use crate::Result;

use super::validate_dests;

/// Tree peak-to-sink with every packet destined for the root: activate every
/// buffer on the path from any overloaded buffer toward the root. The root
/// itself never forwards (packets arriving there are delivered); on a line
/// viewed as a tree the last buffer forwards into the sink as usual.
#[derive(Debug, Clone, Default)]
pub struct TreePts;

impl Scheduler for TreePts {
    fn name(&self) -> &'static str {
        "tree-pts"
    }

    fn house(&self, _: &Topology, _: NodeId, _: &crate::Packet) -> PseudoBufferKey {
        PseudoBufferKey::Whole
    }

    fn activate(&mut self, topo: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
        let bad: Vec<NodeId> = (0..cfg.node_count()).filter(|&v| cfg.load(v) >= 2).collect();
        let mut act = ActivationSet::new();
        for u in topo.min_antichain(&bad) {
            let mut v = u;
            while let Some(next) = topo.next_hop(v) {
                act.insert(v, PseudoBufferKey::Whole).expect("single key");
                if !topo.is_buffer(next) {
                    break;
                }
                v = next;
            }
        }
        act
    }
}

/// Tree parallel peak-to-sink for destinations `W`, listed in an order
/// compatible with precedence (if `w_i` precedes `w_j` then `i < j`). Served
/// farthest-first; each destination activates the paths from the minimal
/// antichain of its overloaded pseudo-buffers toward itself, minus buffers
/// already claimed this round.
#[derive(Debug, Clone)]
pub struct TreePpts {
    dests: Vec<NodeId>,
}

impl TreePpts {
    pub fn new(topo: &Topology, dests: Vec<NodeId>) -> Result<TreePpts> {
        validate_dests(topo, &dests)?;
        Ok(TreePpts { dests })
    }

    pub fn dests(&self) -> &[NodeId] {
        &self.dests
    }
}

impl Scheduler for TreePpts {
    fn name(&self) -> &'static str {
        "tree-ppts"
    }

    fn house(&self, _: &Topology, _: NodeId, p: &crate::Packet) -> PseudoBufferKey {
        debug_assert!(self.dests.contains(&p.dest), "destination {} not declared", p.dest);
        PseudoBufferKey::Dest(p.dest)
    }

    fn activate(&mut self, topo: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
        let mut act = ActivationSet::new();
        for &w in self.dests.iter().rev() {
            let key = PseudoBufferKey::Dest(w);
            let bad: Vec<NodeId> = (0..cfg.node_count())
                .filter(|&v| cfg.pseudo_load(v, key) >= 2)
                .collect();
            for u in topo.min_antichain(&bad) {
                for v in topo.path(u, w).expect("stored packets stay on their paths") {
                    if v == w {
                        break; // the destination itself never forwards for w
                    }
                    if !act.contains(v) {
                        act.insert(v, key).expect("checked inactive");
                    }
                }
            }
        }
        act
    }
}
