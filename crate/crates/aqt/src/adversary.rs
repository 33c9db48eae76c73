//! Injection patterns, rate/burst boundedness, and excess accounting.
//!
//! An adversary is a set of packets `(round, source, dest)`. It is
//! (rho, sigma)-bounded if for every buffer `v` and round interval `T`, the
//! number of injected packets whose paths require forwarding *from* `v` is at
//! most `rho * |T| + sigma`. The destination buffer never forwards a packet,
//! so "crossing v" throughout this crate means `v` lies in
//! `[source, dest - 1]` along the packet's path.
//!
//! All rate arithmetic is exact: excess values are multiples of `1/den` for
//! `rho = num/den` and are stored as scaled integers.

use crate::rational::Rational;
use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// A packet injected by the adversary. `tag` carries the route type for
/// lower-bound patterns (1..=ell+1) and is `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    /// Injection round, starting at 1.
    pub round: u32,
    pub source: NodeId,
    pub dest: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<u8>,
}

impl Packet {
    /// True iff the packet's path requires it to be forwarded from `v`.
    pub fn crosses(&self, topo: &Topology, v: NodeId) -> bool {
        v != self.dest && topo.ancestor_or_eq(v, self.source) && topo.ancestor_or_eq(self.dest, v)
    }
}

/// An injection pattern: packets sorted by round, ids assigned in injection
/// order. Immutable after construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionPattern {
    packets: Vec<Packet>,
}

/// Outcome of exact boundedness validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundedness {
    Ok,
    /// A witness interval with the maximal excess over the bound.
    Violation {
        node: NodeId,
        interval: (u32, u32),
        count: u64,
    },
}

impl Boundedness {
    pub fn is_ok(&self) -> bool {
        matches!(self, Boundedness::Ok)
    }
}

/// Per-round excess of one buffer: `xi^t(v) = max over s <= t of
/// N_[s,t](v) - rho (t - s + 1)`, clamped at zero. Stored scaled by the
/// denominator of rho so every comparison is exact integer arithmetic.
#[derive(Debug, Clone)]
pub struct ExcessTrace {
    pub node: NodeId,
    /// `scaled[t] = xi^t(v) * den`; index 0 is the all-zero initial state.
    pub scaled: Vec<i64>,
    pub den: i64,
}

impl ExcessTrace {
    pub fn value(&self, t: usize) -> Rational {
        Rational::new(self.scaled[t], self.den)
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }
}

impl InjectionPattern {
    /// Build a pattern from packets in injection order. Rounds must be >= 1
    /// and every source must strictly precede its destination. Ids are
    /// reassigned sequentially after a stable sort by round, so ties keep
    /// their given order.
    pub fn new(topo: &Topology, mut packets: Vec<Packet>) -> Result<InjectionPattern> {
        for p in &packets {
            if p.round == 0 {
                return Err(AqtError::Spec(format!("packet round must be >= 1: {p:?}")));
            }
            if !topo.is_buffer(p.source)
                || !topo.is_destination(p.dest)
                || p.source == p.dest
                || !topo.ancestor_or_eq(p.dest, p.source)
            {
                return Err(AqtError::Spec(format!(
                    "packet source must strictly precede destination: {p:?}"
                )));
            }
        }
        packets.sort_by_key(|p| p.round);
        for (i, p) in packets.iter_mut().enumerate() {
            p.id = i as u64;
        }
        Ok(InjectionPattern { packets })
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn max_round(&self) -> u32 {
        self.packets.last().map(|p| p.round).unwrap_or(0)
    }

    /// Packets injected in the round window `[from, to]` (inclusive).
    pub fn in_rounds(&self, from: u32, to: u32) -> &[Packet] {
        let lo = self.packets.partition_point(|p| p.round < from);
        let hi = self.packets.partition_point(|p| p.round <= to);
        &self.packets[lo..hi]
    }

    /// Number of packets injected in rounds `[s, t]` whose paths require
    /// forwarding from `v`.
    pub fn count_crossing(&self, topo: &Topology, v: NodeId, s: u32, t: u32) -> u64 {
        assert!(s <= t);
        self.in_rounds(s, t)
            .iter()
            .filter(|p| p.crosses(topo, v))
            .count() as u64
    }

    /// `counts[v][t]` = packets injected in round `t` crossing buffer `v`,
    /// for `t` in `0..=horizon` (index 0 unused).
    pub fn crossing_matrix(&self, topo: &Topology, horizon: u32) -> Vec<Vec<u32>> {
        let n = topo.node_count() as usize;
        let mut counts = vec![vec![0u32; horizon as usize + 1]; n];
        for p in &self.packets {
            if p.round > horizon {
                break;
            }
            let mut v = p.source;
            while v != p.dest {
                counts[v as usize][p.round as usize] += 1;
                v = topo.next_hop(v).expect("destination beyond root");
            }
        }
        counts
    }

    /// Exact (rho, sigma)-boundedness check over every buffer and interval,
    /// via the incremental excess recurrence. On failure returns the witness
    /// interval with the maximal excess over the bound.
    pub fn validate_bounded(
        &self,
        topo: &Topology,
        rho: Rational,
        sigma: u64,
    ) -> Boundedness {
        let horizon = self.max_round();
        let counts = self.crossing_matrix(topo, horizon);
        let (num, den) = (*rho.numer(), *rho.denom());
        let limit = sigma as i64 * den;
        let mut worst: Option<(i64, NodeId, (u32, u32))> = None;
        for (v, row) in counts.iter().enumerate() {
            let mut x = 0i64;
            let mut run_start = 1u32;
            for t in 1..=horizon {
                let next = x + row[t as usize] as i64 * den - num;
                if next <= 0 {
                    x = 0;
                    run_start = t + 1;
                    continue;
                }
                x = next;
                if x > limit && worst.is_none_or(|(w, _, _)| x > w) {
                    worst = Some((x, v as NodeId, (run_start, t)));
                }
            }
        }
        match worst {
            None => Boundedness::Ok,
            Some((_, node, interval)) => Boundedness::Violation {
                node,
                interval,
                count: self.count_crossing(topo, node, interval.0, interval.1),
            },
        }
    }

    /// Excess of `v` for rounds `0..=horizon`, computed incrementally:
    /// `xi^t = max(xi^{t-1} + N_{t}(v) - rho, 0)`.
    pub fn excess_trace(
        &self,
        topo: &Topology,
        v: NodeId,
        rho: Rational,
        horizon: u32,
    ) -> ExcessTrace {
        let (num, den) = (*rho.numer(), *rho.denom());
        let mut scaled = Vec::with_capacity(horizon as usize + 1);
        scaled.push(0i64);
        let mut x = 0i64;
        for t in 1..=horizon {
            let c = self.count_crossing(topo, v, t, t) as i64;
            x = (x + c * den - num).max(0);
            scaled.push(x);
        }
        ExcessTrace { node: v, scaled, den }
    }

    /// Excess traces for every buffer at once (shares one crossing pass).
    pub fn excess_traces(&self, topo: &Topology, rho: Rational, horizon: u32) -> Vec<ExcessTrace> {
        let counts = self.crossing_matrix(topo, horizon.max(self.max_round()));
        let (num, den) = (*rho.numer(), *rho.denom());
        counts
            .iter()
            .enumerate()
            .map(|(v, row)| {
                let mut scaled = Vec::with_capacity(horizon as usize + 1);
                scaled.push(0i64);
                let mut x = 0i64;
                for t in 1..=horizon {
                    let c = *row.get(t as usize).unwrap_or(&0) as i64;
                    x = (x + c * den - num).max(0);
                    scaled.push(x);
                }
                ExcessTrace { node: v as NodeId, scaled, den }
            })
            .collect()
    }

    /// The ell-reduction: packet round `t` maps to `(t-1)/ell + 1`. A
    /// (rho, sigma)-bounded pattern reduces to an (ell*rho, sigma)-bounded
    /// one.
    pub fn ell_reduction(&self, topo: &Topology, ell: u32) -> Result<InjectionPattern> {
        if ell < 1 {
            return Err(AqtError::InvalidEll(ell as u64));
        }
        let packets = self
            .packets
            .iter()
            .map(|p| Packet { round: (p.round - 1) / ell + 1, ..*p })
            .collect();
        InjectionPattern::new(topo, packets)
    }

    /// Write the pattern as CSV with header `round,source,dest,type`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "source", "dest", "type"])
            .map_err(csv_err)?;
        for p in &self.packets {
            let tag = p.tag.map(|t| t.to_string()).unwrap_or_default();
            out.write_record([
                p.round.to_string(),
                p.source.to_string(),
                p.dest.to_string(),
                tag,
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(topo: &Topology, r: R) -> Result<InjectionPattern> {
        let mut reader = csv::Reader::from_reader(r);
        let mut packets = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i)
                    .ok_or_else(|| AqtError::Spec(format!("short CSV record: {rec:?}")))
            };
            let parse = |s: &str| -> Result<u32> {
                s.trim()
                    .parse()
                    .map_err(|e| AqtError::Spec(format!("bad CSV field {s:?}: {e}")))
            };
            let tag = match field(3) {
                Ok(s) if !s.trim().is_empty() => Some(parse(s)? as u8),
                _ => None,
            };
            packets.push(Packet {
                id: 0,
                round: parse(field(0)?)?,
                source: parse(field(1)?)?,
                dest: parse(field(2)?)?,
                tag,
            });
        }
        InjectionPattern::new(topo, packets)
    }
}

fn csv_err(e: csv::Error) -> AqtError {
    AqtError::Spec(format!("csv: {e}"))
}

/// Token-bucket random pattern generator: one bucket per buffer tracking that
/// buffer's spent excess; a packet is admitted only if every buffer on its
/// forwarding path stays within `sigma`. The output always validates as
/// (rho, sigma)-bounded. Deterministic given the seed.
pub fn random_bounded(
    seed: u64,
    topo: &Topology,
    rho: Rational,
    sigma: u64,
    horizon: u32,
    dests: &[NodeId],
) -> Result<InjectionPattern> {
    if dests.is_empty() {
        return Err(AqtError::InvalidParams("dests must be non-empty".into()));
    }
    if rho > Rational::from_integer(1) || rho < Rational::from_integer(0) {
        return Err(AqtError::InvalidParams("rate must be in [0, 1]".into()));
    }
    for &w in dests {
        if !topo.is_destination(w) {
            return Err(AqtError::InvalidParams(format!("invalid destination {w}")));
        }
    }
    let n = topo.node_count() as usize;
    // Buffers that can source a packet for each destination.
    let sources: Vec<Vec<NodeId>> = dests
        .iter()
        .map(|&w| {
            (0..topo.node_count())
                .filter(|&u| u != w && topo.ancestor_or_eq(w, u))
                .collect()
        })
        .collect();
    let (rnum, rden) = (*rho.numer(), *rho.denom());
    let limit = sigma as i64 * rden;
    let mut excess = vec![0i64; n];
    let mut injected_now = vec![0i64; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packets = Vec::new();
    let attempts_per_round = 2 + sigma as usize;
    for round in 1..=horizon {
        injected_now.iter_mut().for_each(|c| *c = 0);
        for _ in 0..attempts_per_round {
            let di = rng.gen_range(0..dests.len());
            let w = dests[di];
            if sources[di].is_empty() {
                continue;
            }
            let u = sources[di][rng.gen_range(0..sources[di].len())];
            let path_ok = {
                let mut v = u;
                let mut ok = true;
                while v != w {
                    if excess[v as usize] + (injected_now[v as usize] + 1) * rden - rnum > limit {
                        ok = false;
                        break;
                    }
                    v = topo.next_hop(v).unwrap();
                }
                ok
            };
            if !path_ok {
                continue;
            }
            let mut v = u;
            while v != w {
                injected_now[v as usize] += 1;
                v = topo.next_hop(v).unwrap();
            }
            packets.push(Packet { id: 0, round, source: u, dest: w, tag: None });
        }
        for v in 0..n {
            excess[v] = (excess[v] + injected_now[v] * rden - rnum).max(0);
        }
    }
    InjectionPattern::new(topo, packets)
}
