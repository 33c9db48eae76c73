//! Hierarchical peak-to-sink on a line of up to `m^ell` buffers.
//!
//! The line is partitioned into nested intervals: level `j` consists of the
//! `m^(ell-j-1)` intervals of size `m^(j+1)`, each containing `m` level-(j-1)
//! subintervals. A packet heading to `w` from `i` travels in segments, one
//! per base-m digit in which `i` and `w` differ, from the most significant
//! digit down; each segment ends at an *intermediate destination*
//! `x(i, w) = floor(w / m^j) * m^j`. Within each interval an independent
//! per-intermediate-destination peak-to-sink instance runs, and the levels
//! share the wire by time-division multiplexing: each phase of `ell` rounds
//! serves the levels from coarsest down to finest, with pre-bad chasing down
//! into lower levels within a round.
//!
//! Injections are accepted in batches of `ell` rounds at each phase start, so
//! the effective adversary is the ell-reduction of the input pattern. With
//! `ell = 1` the algorithm is the parallel peak-to-sink scheduler exactly.

use crate::engine::{ActivationSet, Configuration, PseudoBufferKey, Scheduler};
use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};

/// The nested interval structure for a virtual line of `m^ell` buffers.
#[derive(Debug, Clone, Copy)]
pub struct HierarchicalPartition {
    pub m: u32,
    pub ell: u32,
}

impl HierarchicalPartition {
    pub fn new(m: u32, ell: u32) -> Result<HierarchicalPartition> {
        if m < 2 || ell < 1 {
            return Err(AqtError::InvalidParams("need m >= 2 and ell >= 1".into()));
        }
        if (m as u64).checked_pow(ell).is_none_or(|n| n > u32::MAX as u64) {
            return Err(AqtError::InvalidParams(format!("m^ell overflows: {m}^{ell}")));
        }
        Ok(HierarchicalPartition { m, ell })
    }

    /// Number of buffers in the virtual line.
    pub fn virtual_len(&self) -> u32 {
        self.m.pow(self.ell)
    }

    /// Interval size at level `j`.
    pub fn interval_len(&self, j: u32) -> u32 {
        self.m.pow(j + 1)
    }

    /// The level and intermediate destination of a packet stored at `i`
    /// heading to `w`: the level is the most significant base-m digit
    /// position in which `i` and `w` differ (capped at `ell - 1`, which
    /// covers `w = m^ell`, the virtual line's sink), and the intermediate
    /// destination is `w` truncated to a multiple of `m^level`.
    pub fn level_and_dest(&self, i: NodeId, w: NodeId) -> (u32, NodeId) {
        debug_assert!(i < w && w <= self.virtual_len());
        let mut j = self.ell - 1;
        while j > 0 && i / self.m.pow(j) == w / self.m.pow(j) {
            j -= 1;
        }
        let x = w / self.m.pow(j) * self.m.pow(j);
        (j, x)
    }

    /// The level served in (1-based) round `t`. Phases run from the coarsest
    /// level down to level 0: badness pushed into a finer level mid-phase is
    /// then relieved by a later round of the same phase, which is what makes
    /// per-node badness strictly decrease across a phase. (Level-0 rounds
    /// push nothing anywhere: a finest-level segment ends at the packet's
    /// true destination.)
    pub fn round_level(&self, t: u32) -> u32 {
        self.ell - 1 - ((t - 1) % self.ell)
    }

    /// The pseudo-buffer of a packet to `w` stored at `i`.
    pub fn key_for(&self, i: NodeId, w: NodeId) -> PseudoBufferKey {
        let (level, dest) = self.level_and_dest(i, w);
        PseudoBufferKey::LevelDest { level, dest }
    }
}

/// The hierarchical scheduler itself. Runs on any line with at most `m^ell`
/// buffers (shorter lines simply leave the upper part of the virtual line
/// unused).
#[derive(Debug, Clone)]
pub struct Hpts {
    part: HierarchicalPartition,
}

impl Hpts {
    pub fn new(topo: &Topology, m: u32, ell: u32) -> Result<Hpts> {
        if !topo.is_line() {
            return Err(AqtError::InvalidParams("this scheduler runs on lines".into()));
        }
        let part = HierarchicalPartition::new(m, ell)?;
        if topo.node_count() > part.virtual_len() {
            return Err(AqtError::InvalidParams(format!(
                "line of {} buffers does not fit in m^ell = {}",
                topo.node_count(),
                part.virtual_len()
            )));
        }
        Ok(Hpts { part })
    }

    /// The smallest base `m` such that `m^ell` covers a line of `n` buffers
    /// and its sink.
    pub fn fitting_base(n: u32, ell: u32) -> u32 {
        let mut m = 2;
        while (m as u64).pow(ell) < n as u64 + 1 {
            m += 1;
        }
        m
    }

    pub fn partition(&self) -> HierarchicalPartition {
        self.part
    }

    /// Per-interval parallel peak-to-sink over the level's intermediate
    /// destinations.
    fn form_paths(&self, cfg: &Configuration, act: &mut ActivationSet, level: u32, a: NodeId) {
        let m = self.part.m;
        let step = self.part.m.pow(level);
        let n = cfg.node_count();
        // Candidate intermediate destinations, high to low; `a + m * step` is
        // the interval's right boundary and is a real target only for
        // top-level sink-bound segments.
        let mut fence = a + m * step;
        for c in (1..=m).rev() {
            let w = a + c * step;
            let key = PseudoBufferKey::LevelDest { level, dest: w };
            let limit = fence.min(w).min(n);
            let leftmost_bad = (a..limit).find(|&i| cfg.pseudo_load(i, key) >= 2);
            if let Some(i0) = leftmost_bad {
                let hi = (fence - 1).min(w - 1).min(n - 1);
                for i in i0..=hi {
                    act.insert(i, key).expect("intervals are disjoint");
                }
                fence = i0;
            }
        }
    }

    /// Extend the activation into level-`j` intervals whose left endpoint is
    /// about to receive a packet that lands in an already occupied level-`j`
    /// pseudo-buffer there.
    fn activate_pre_bad(
        &self,
        cfg: &Configuration,
        act: &mut ActivationSet,
        j: u32,
    ) {
        let n = cfg.node_count();
        let ilen = self.part.interval_len(j);
        let mut a = ilen; // interval starting at 0 has no incoming edge
        while a < n {
            if !act.contains(a) {
                if let Some((key, cap)) = self.pre_bad_arrival(cfg, act, j, a) {
                    let mut i = a;
                    while i <= cap && !act.contains(i) {
                        act.insert(i, key).expect("checked inactive");
                        i += 1;
                    }
                }
            }
            a += ilen;
        }
    }

    /// If the packet about to be forwarded into `a` switches to level `j`
    /// there and its new pseudo-buffer is occupied, return that pseudo-buffer
    /// and the last buffer the relief path may cover.
    fn pre_bad_arrival(
        &self,
        cfg: &Configuration,
        act: &ActivationSet,
        j: u32,
        a: NodeId,
    ) -> Option<(PseudoBufferKey, NodeId)> {
        let sender_key = act.get(a - 1)?;
        // The sender forwards into `a` only at the end of its segment.
        if sender_key.target(a - 1) != a {
            return None;
        }
        let p = cfg.packets_at(a - 1).filter(|p| {
            self.house_key(a - 1, p.dest) == sender_key
        });
        let p = p.last()?; // LIFO: last stored is the one sent
        if p.dest == a {
            return None; // delivered on arrival, never stored
        }
        let (level, dest) = self.part.level_and_dest(a, p.dest);
        if level != j {
            return None;
        }
        let key = PseudoBufferKey::LevelDest { level, dest };
        if cfg.pseudo_load(a, key) == 0 {
            return None;
        }
        Some((key, (dest - 1).min(cfg.node_count() - 1)))
    }

    fn house_key(&self, v: NodeId, dest: NodeId) -> PseudoBufferKey {
        self.part.key_for(v, dest)
    }
}

impl Scheduler for Hpts {
    fn name(&self) -> &'static str {
        "hpts"
    }

    fn batch_len(&self) -> u32 {
        self.part.ell
    }

    fn house(&self, _: &Topology, v: NodeId, p: &crate::Packet) -> PseudoBufferKey {
        self.house_key(v, p.dest)
    }

    fn activate(&mut self, _: &Topology, cfg: &Configuration, t: u32) -> ActivationSet {
        let lambda = self.part.round_level(t);
        let mut act = ActivationSet::new();
        let ilen = self.part.interval_len(lambda);
        let mut a = 0;
        while a < cfg.node_count() {
            self.form_paths(cfg, &mut act, lambda, a);
            a += ilen;
        }
        for j in (0..lambda).rev() {
            self.activate_pre_bad(cfg, &mut act, j);
        }
        act
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Packet;

    #[test]
    fn intermediate_destination_examples() {
        let part = HierarchicalPartition::new(2, 4).unwrap();
        assert_eq!(part.level_and_dest(3, 12), (3, 8));
        assert_eq!(part.level_and_dest(8, 12), (2, 12));
        // differing only in digit 0: destination is final
        assert_eq!(part.level_and_dest(6, 7), (0, 7));
        // sink of the virtual line
        assert_eq!(part.level_and_dest(0, 16), (3, 16));
        assert_eq!(part.level_and_dest(15, 16), (3, 16));
    }

    #[test]
    fn segment_levels_strictly_decrease() {
        let part = HierarchicalPartition::new(3, 3).unwrap();
        for w in 1..=part.virtual_len() {
            for i in 0..w {
                let mut at = i;
                let mut last_level = part.ell;
                while at != w {
                    let (level, dest) = part.level_and_dest(at, w);
                    assert!(level < last_level || (at == i && level == part.ell - 1));
                    assert!(dest > at && dest <= w);
                    assert_eq!(dest % part.m.pow(level), 0);
                    last_level = level;
                    at = dest;
                }
            }
        }
    }

    #[test]
    fn fitting_base_examples() {
        assert_eq!(Hpts::fitting_base(12, 2), 4);
        assert_eq!(Hpts::fitting_base(12, 3), 3);
        assert_eq!(Hpts::fitting_base(16, 2), 5);
        assert_eq!(Hpts::fitting_base(3, 2), 2);
    }

    #[test]
    fn form_paths_hand_trace() {
        // m=2, ell=2, n=4: two sink-bound packets at node 0. At a level-1
        // round their pseudo-buffer (level 1, dest 4) is bad, so the path
        // [0, 3] is activated toward the virtual sink.
        let topo = Topology::line(4);
        let mut hpts = Hpts::new(&topo, 2, 2).unwrap();
        let mut cfg = Configuration::new(&topo);
        for id in 0..2 {
            let p = Packet { id, round: 1, source: 0, dest: 4, tag: None };
            let key = hpts.house(&topo, 0, &p);
            assert_eq!(key, PseudoBufferKey::LevelDest { level: 1, dest: 4 });
            cfg.push(0, key, p);
        }
        // phases serve coarse levels first: level-1 rounds are t = 1, 3, ...
        let act = hpts.activate(&topo, &cfg, 1);
        let nodes: Vec<_> = act.iter().map(|(v, _)| v).collect();
        assert_eq!(nodes, vec![0, 1, 2, 3]);
        // level-0 round: the packets are at level 1, nothing is activated
        assert!(hpts.activate(&topo, &cfg, 2).is_empty());
    }

    #[test]
    fn pre_bad_extends_into_lower_level() {
        // m=2, ell=2, n=4. A packet at node 1 with destination 3 travels
        // level-1 segment [1, 2] then level-0 segment [2, 3]. If its level-1
        // pseudo-buffer at 1 is bad and node 2 already holds a level-0 packet
        // for destination 3, the level-1 relief path would push a packet into
        // an occupied level-0 pseudo-buffer, so the level-0 interval [2, 3]
        // is activated in the same round.
        let topo = Topology::line(4);
        let mut hpts = Hpts::new(&topo, 2, 2).unwrap();
        let mut cfg = Configuration::new(&topo);
        for id in 0..2 {
            let p = Packet { id, round: 1, source: 1, dest: 3, tag: None };
            let key = hpts.house(&topo, 1, &p);
            assert_eq!(key, PseudoBufferKey::LevelDest { level: 1, dest: 2 });
            cfg.push(1, key, p);
        }
        let q = Packet { id: 2, round: 1, source: 2, dest: 3, tag: None };
        let qkey = hpts.house(&topo, 2, &q);
        assert_eq!(qkey, PseudoBufferKey::LevelDest { level: 0, dest: 3 });
        cfg.push(2, qkey, q);

        let act = hpts.activate(&topo, &cfg, 1);
        assert_eq!(act.get(1), Some(PseudoBufferKey::LevelDest { level: 1, dest: 2 }));
        assert_eq!(act.get(2), Some(PseudoBufferKey::LevelDest { level: 0, dest: 3 }));
        assert!(!act.contains(0));
        assert!(!act.contains(3));
    }

    #[test]
    fn no_bad_no_activation() {
        let topo = Topology::line(8);
        let mut hpts = Hpts::new(&topo, 2, 3).unwrap();
        let mut cfg = Configuration::new(&topo);
        let p = Packet { id: 0, round: 1, source: 0, dest: 8, tag: None };
        let key = hpts.house(&topo, 0, &p);
        cfg.push(0, key, p);
        for t in 1..=3 {
            assert!(hpts.activate(&topo, &cfg, t).is_empty());
        }
    }
}
