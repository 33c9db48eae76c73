//! Exhaustive search for the best achievable peak load on tiny instances.
//!
//! Useful as a ground-truth oracle: adversary lower bounds quantify over all
//! forwarding protocols, so the search is not restricted to LIFO order or to
//! any particular activation rule. Each round, every occupied buffer may
//! forward any one of its packets (or hold them all); the search minimizes
//! the maximum buffer load ever attained, measured after every injection and
//! every forwarding step.

use crate::adversary::InjectionPattern;
use crate::topology::Topology;
use crate::{AqtError, Result};
use std::collections::HashMap;

const MAX_NODES: u32 = 6;
const MAX_HORIZON: u32 = 8;
const MAX_PACKETS: usize = 10;

/// Position of each packet: its node, or one of the markers below.
type State = Vec<u8>;
const PENDING: u8 = u8::MAX;
const DONE: u8 = u8::MAX - 1;

/// The minimum, over all protocols, of the maximum buffer load reached while
/// playing `pattern` for `horizon` rounds.
pub fn brute_force_optimal(
    topo: &Topology,
    pattern: &InjectionPattern,
    horizon: u32,
) -> Result<u32> {
    if topo.node_count() > MAX_NODES {
        return Err(AqtError::TooLarge(format!("{} buffers (limit {MAX_NODES})", topo.node_count())));
    }
    if horizon > MAX_HORIZON {
        return Err(AqtError::TooLarge(format!("horizon {horizon} (limit {MAX_HORIZON})")));
    }
    if pattern.len() > MAX_PACKETS {
        return Err(AqtError::TooLarge(format!("{} packets (limit {MAX_PACKETS})", pattern.len())));
    }
    if horizon < pattern.max_round() {
        return Err(AqtError::InvalidParams(format!(
            "horizon {horizon} does not cover last injection round {}",
            pattern.max_round()
        )));
    }
    let mut search = Search { topo, pattern, horizon, memo: HashMap::new() };
    Ok(search.value(1, vec![PENDING; pattern.len()]))
}

struct Search<'a> {
    topo: &'a Topology,
    pattern: &'a InjectionPattern,
    horizon: u32,
    memo: HashMap<(u32, State), u32>,
}

impl Search<'_> {
    /// Best achievable peak from round `t` on, given positions before round
    /// `t`'s injection.
    fn value(&mut self, t: u32, mut state: State) -> u32 {
        if t > self.horizon {
            return 0;
        }
        if let Some(&v) = self.memo.get(&(t, state.clone())) {
            return v;
        }
        let key_state = state.clone();
        for p in self.pattern.in_rounds(t, t) {
            debug_assert_eq!(state[p.id as usize], PENDING);
            state[p.id as usize] = p.source as u8;
        }
        let peak_after_injection = self.max_load(&state);

        // Enumerate one forwarding choice per occupied node: hold, or send
        // any one stored packet.
        let mut occupied: Vec<(u8, Vec<usize>)> = Vec::new();
        for v in 0..self.topo.node_count() as u8 {
            let here: Vec<usize> =
                (0..state.len()).filter(|&i| state[i] == v).collect();
            if !here.is_empty() {
                occupied.push((v, here));
            }
        }
        let mut best = u32::MAX;
        let mut choice: Vec<Option<usize>> = vec![None; occupied.len()];
        self.enumerate(t, &state, &occupied, &mut choice, 0, peak_after_injection, &mut best);
        self.memo.insert((t, key_state), best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &mut self,
        t: u32,
        state: &State,
        occupied: &[(u8, Vec<usize>)],
        choice: &mut Vec<Option<usize>>,
        depth: usize,
        peak: u32,
        best: &mut u32,
    ) {
        if peak >= *best {
            return; // cannot improve
        }
        if depth == occupied.len() {
            let mut next = state.clone();
            for (slot, sent) in choice.iter().enumerate() {
                if let Some(i) = *sent {
                    let from = occupied[slot].0 as u32;
                    let to = self.topo.next_hop(from).expect("packets stop before the root");
                    let dest = self.pattern.packets()[i].dest;
                    next[i] = if to == dest { DONE } else { to as u8 };
                }
            }
            let here = peak.max(self.max_load(&next)).max(self.value(t + 1, next));
            *best = (*best).min(here);
            return;
        }
        choice[depth] = None;
        self.enumerate(t, state, occupied, choice, depth + 1, peak, best);
        for idx in 0..occupied[depth].1.len() {
            let i = occupied[depth].1[idx];
            // Sending two packets from the same node position is symmetric;
            // skip duplicates heading to the same destination.
            if occupied[depth].1[..idx]
                .iter()
                .any(|&j| self.pattern.packets()[j].dest == self.pattern.packets()[i].dest)
            {
                continue;
            }
            choice[depth] = Some(i);
            self.enumerate(t, state, occupied, choice, depth + 1, peak, best);
        }
        choice[depth] = None;
    }

    fn max_load(&self, state: &State) -> u32 {
        let mut loads = [0u32; MAX_NODES as usize];
        for &pos in state {
            if pos != PENDING && pos != DONE {
                loads[pos as usize] += 1;
            }
        }
        loads.iter().copied().max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Packet;

    fn pat(topo: &Topology, specs: &[(u32, u32, u32)]) -> InjectionPattern {
        InjectionPattern::new(
            topo,
            specs
                .iter()
                .map(|&(round, source, dest)| Packet { id: 0, round, source, dest, tag: None })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn trivial_cases() {
        let topo = Topology::line(3);
        assert_eq!(brute_force_optimal(&topo, &pat(&topo, &[]), 4).unwrap(), 0);
        assert_eq!(brute_force_optimal(&topo, &pat(&topo, &[(1, 0, 3)]), 4).unwrap(), 1);
    }

    #[test]
    fn same_round_collision_is_unavoidable() {
        let topo = Topology::line(3);
        let p = pat(&topo, &[(1, 0, 3), (1, 0, 3)]);
        assert_eq!(brute_force_optimal(&topo, &p, 6).unwrap(), 2);
    }

    #[test]
    fn pipelining_keeps_loads_at_one() {
        let topo = Topology::line(4);
        let p = pat(&topo, &[(1, 0, 4), (2, 0, 4), (3, 0, 4), (4, 0, 4)]);
        assert_eq!(brute_force_optimal(&topo, &p, 8).unwrap(), 1);
    }

    #[test]
    fn merging_streams_forces_load_two() {
        // Nodes 0 and 1 inject simultaneously toward the sink twice in a
        // row; the shared edge from 1 cannot carry both streams.
        let topo = Topology::line(3);
        let p = pat(&topo, &[(1, 0, 3), (1, 1, 3), (2, 0, 3), (2, 1, 3)]);
        assert_eq!(brute_force_optimal(&topo, &p, 7).unwrap(), 2);
    }

    #[test]
    fn limits_are_enforced() {
        let big = Topology::line(7);
        assert!(brute_force_optimal(&big, &pat(&big, &[]), 4).is_err());
        let topo = Topology::line(3);
        assert!(brute_force_optimal(&topo, &pat(&topo, &[]), 9).is_err());
        assert!(brute_force_optimal(&topo, &pat(&topo, &[(5, 0, 3)]), 4).is_err());
    }
}
