//! Single- and multi-destination peak-to-sink scheduling on a line.

use crate::engine::{ActivationSet, Configuration, PseudoBufferKey, Scheduler};
use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};

use super::validate_dests;

/// Peak-to-sink for a single destination `w`: find the leftmost buffer
/// holding at least two packets and activate every buffer from there up to
/// `w - 1`, so the whole stretch shifts forward by one.
#[derive(Debug, Clone)]
pub struct Pts {
    w: NodeId,
}

impl Pts {
    pub fn new(topo: &Topology, w: NodeId) -> Result<Pts> {
        if !topo.is_line() {
            return Err(AqtError::InvalidParams("this scheduler runs on lines".into()));
        }
        validate_dests(topo, &[w])?;
        Ok(Pts { w })
    }
}

impl Scheduler for Pts {
    fn name(&self) -> &'static str {
        "pts"
    }

    fn house(&self, _: &Topology, _: NodeId, p: &crate::Packet) -> PseudoBufferKey {
        debug_assert_eq!(p.dest, self.w, "all packets must share the destination");
        PseudoBufferKey::Whole
    }

    fn activate(&mut self, _: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
        let mut act = ActivationSet::new();
        let leftmost_bad = (0..cfg.node_count().min(self.w)).find(|&i| cfg.load(i) >= 2);
        if let Some(i0) = leftmost_bad {
            for i in i0..self.w.min(cfg.node_count()) {
                act.insert(i, PseudoBufferKey::Whole).expect("interval is duplicate-free");
            }
        }
        act
    }
}

/// Parallel peak-to-sink for destinations `W = {w_0 < ... < w_{d-1}}`: each
/// buffer is split into per-destination pseudo-buffers, and destinations are
/// served from the largest down, each clearing its leftmost overloaded
/// pseudo-buffer on an interval capped below the previously claimed one.
#[derive(Debug, Clone)]
pub struct Ppts {
    dests: Vec<NodeId>,
}

impl Ppts {
    pub fn new(topo: &Topology, dests: Vec<NodeId>) -> Result<Ppts> {
        if !topo.is_line() {
            return Err(AqtError::InvalidParams("this scheduler runs on lines".into()));
        }
        validate_dests(topo, &dests)?;
        Ok(Ppts { dests })
    }

    pub fn dests(&self) -> &[NodeId] {
        &self.dests
    }
}

impl Scheduler for Ppts {
    fn name(&self) -> &'static str {
        "ppts"
    }

    fn house(&self, _: &Topology, _: NodeId, p: &crate::Packet) -> PseudoBufferKey {
        debug_assert!(self.dests.contains(&p.dest), "destination {} not declared", p.dest);
        PseudoBufferKey::Dest(p.dest)
    }

    fn activate(&mut self, _: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
        let mut act = ActivationSet::new();
        // The fence below which the next destination may claim buffers;
        // starts above every destination and moves to each claimed interval's
        // left end.
        let mut fence = *self.dests.last().expect("non-empty dests");
        for &w in self.dests.iter().rev() {
            let key = PseudoBufferKey::Dest(w);
            let limit = fence.min(w).min(cfg.node_count());
            let leftmost_bad = (0..limit).find(|&i| cfg.pseudo_load(i, key) >= 2);
            if let Some(i0) = leftmost_bad {
                let hi = (fence - 1).min(w - 1).min(cfg.node_count() - 1);
                for i in i0..=hi {
                    act.insert(i, key).expect("intervals are disjoint");
                }
                fence = i0;
            }
        }
        act
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Packet;
    use crate::engine::Configuration;

    fn packet(id: u64, source: NodeId, dest: NodeId) -> Packet {
        Packet { id, round: 1, source, dest, tag: None }
    }

    fn fill(topo: &Topology, sched: &dyn Scheduler, specs: &[(NodeId, NodeId)]) -> Configuration {
        let mut cfg = Configuration::new(topo);
        for (id, &(v, w)) in specs.iter().enumerate() {
            let p = packet(id as u64, v, w);
            cfg.push(v, sched.house(topo, v, &p), p);
        }
        cfg
    }

    fn activated(act: &ActivationSet) -> Vec<(NodeId, NodeId)> {
        act.iter().map(|(v, k)| (v, k.target(v))).collect()
    }

    #[test]
    fn pts_activates_from_leftmost_bad() {
        let topo = Topology::line(3);
        let mut pts = Pts::new(&topo, 3).unwrap();
        // loads (2, 0, 1): stretch from buffer 0 to w - 1
        let cfg = fill(&topo, &pts, &[(0, 3), (0, 3), (2, 3)]);
        let act = pts.activate(&topo, &cfg, 1);
        assert_eq!(activated(&act), vec![(0, 0), (1, 1), (2, 2)]);
        // loads (1, 1, 1): no bad buffer, nothing moves
        let cfg = fill(&topo, &pts, &[(0, 3), (1, 3), (2, 3)]);
        assert!(pts.activate(&topo, &cfg, 1).is_empty());
        // loads (0, 0, 2): leftmost bad is the last buffer
        let cfg = fill(&topo, &pts, &[(2, 3), (2, 3)]);
        assert_eq!(activated(&pts.activate(&topo, &cfg, 1)), vec![(2, 2)]);
    }

    #[test]
    fn ppts_hand_trace() {
        // Two packets to 4 at node 1 and two packets to 2 at node 0: the far
        // destination claims [1, 3], the near one only its own buffer 0.
        let topo = Topology::line(5);
        let mut ppts = Ppts::new(&topo, vec![2, 4]).unwrap();
        let cfg = fill(&topo, &ppts, &[(1, 4), (1, 4), (0, 2), (0, 2)]);
        let act = ppts.activate(&topo, &cfg, 1);
        assert_eq!(activated(&act), vec![(0, 2), (1, 4), (2, 4), (3, 4)]);
    }

    #[test]
    fn ppts_no_bad_is_idle() {
        let topo = Topology::line(5);
        let mut ppts = Ppts::new(&topo, vec![2, 4]).unwrap();
        let cfg = fill(&topo, &ppts, &[(1, 4), (0, 2)]);
        assert!(ppts.activate(&topo, &cfg, 1).is_empty());
    }

    #[test]
    fn ppts_single_dest_matches_pts() {
        let topo = Topology::line(6);
        let w = 5;
        for case in [
            vec![(0, w), (0, w), (3, w)],
            vec![(2, w), (2, w), (2, w), (4, w)],
            vec![(4, w), (4, w)],
            vec![(1, w)],
        ] {
            let mut pts = Pts::new(&topo, w).unwrap();
            let mut ppts = Ppts::new(&topo, vec![w]).unwrap();
            let cfg_pts = fill(&topo, &pts, &case);
            let cfg_ppts = fill(&topo, &ppts, &case);
            // keys differ (whole buffer vs per-destination), so compare the
            // set of forwarding nodes
            let nodes = |act: &ActivationSet| act.iter().map(|(v, _)| v).collect::<Vec<_>>();
            assert_eq!(
                nodes(&pts.activate(&topo, &cfg_pts, 1)),
                nodes(&ppts.activate(&topo, &cfg_ppts, 1)),
                "case {case:?}"
            );
        }
    }

    #[test]
    fn dest_validation() {
        let topo = Topology::line(5);
        assert!(Ppts::new(&topo, vec![]).is_err());
        assert!(Ppts::new(&topo, vec![4, 2]).is_err());
        assert!(Ppts::new(&topo, vec![2, 2]).is_err());
        assert!(Ppts::new(&topo, vec![2, 6]).is_err());
        assert!(Ppts::new(&topo, vec![2, 5]).is_ok());
    }
}
