//! The forwarding algorithms.
//!
//! Every scheduler maps a round and a [`Configuration`](crate::Configuration)
//! to a feasible activation set. The peak-to-sink family clears the leftmost
//! (or order-minimal) overloaded buffer by activating a contiguous stretch of
//! buffers ahead of it; the parallel variant does this per destination, the
//! hierarchical variant per (level, intermediate destination) with
//! time-division multiplexing across levels. A greedy baseline and an
//! exhaustive-search optimum round out the set.

mod greedy;
mod hpts;
mod optimal;
mod pts;
mod tree;

pub use greedy::Greedy;
pub use hpts::{HierarchicalPartition, Hpts};
pub use optimal::brute_force_optimal;
pub use pts::{Ppts, Pts};
pub use tree::{TreePpts, TreePts};

use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};

/// Check that a destination list is duplicate-free and sorted ascending by
/// the precedence order (`w_i` precedes `w_j` implies `i < j`).
pub(crate) fn validate_dests(topo: &Topology, dests: &[NodeId]) -> Result<()> {
    if dests.is_empty() {
        return Err(AqtError::InvalidParams("destination list is empty".into()));
    }
    for &w in dests {
        if !topo.is_destination(w) {
            return Err(AqtError::InvalidParams(format!("invalid destination {w}")));
        }
    }
    for (i, &wi) in dests.iter().enumerate() {
        for &wj in &dests[i + 1..] {
            if wi == wj {
                return Err(AqtError::InvalidParams(format!("duplicate destination {wi}")));
            }
            let wj_before_wi = if topo.is_line() {
                wj < wi
            } else {
                topo.precedes(wj, wi)
            };
            if wj_before_wi {
                return Err(AqtError::InvalidParams(format!(
                    "destinations out of order: {wj} precedes {wi}"
                )));
            }
        }
    }
    Ok(())
}
