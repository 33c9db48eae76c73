//! Run traces: one record per round, serialized as JSON lines with a leading
//! meta line, plus a `round,max_load,total_load,delivered` summary CSV.
//!
//! A trace is self-checking: `validate_consistency` replays the recorded
//! moves against the recorded loads, so a trace file can be audited without
//! re-running the scheduler.

use crate::adversary::InjectionPattern;
use crate::topology::{NodeId, Topology, TopologySpec};
use crate::{AqtError, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

/// Run-level metadata, written as the first JSONL line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scheduler: String,
    pub topology: TopologySpec,
    pub horizon: u32,
    pub drain: bool,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Ids of packets accepted this round (includes batched future-round
    /// injections for batching schedulers).
    pub injected: Vec<u64>,
    /// Activated nodes with the target node of the chosen pseudo-buffer.
    pub activations: Vec<(NodeId, NodeId)>,
    /// Forwarded packets as (packet id, from, to); `to` may be a delivery.
    pub moves: Vec<(u64, NodeId, NodeId)>,
    pub delivered: Vec<u64>,
    /// Maximum buffer load after the injection step.
    pub max_load_pre: u32,
    /// Maximum buffer load after the forwarding step.
    pub max_load: u32,
    pub total_load: u64,
    /// Per-node loads after the forwarding step.
    pub loads: Vec<u32>,
}

#[derive(Debug)]
pub struct Trace {
    meta: TraceMeta,
    rounds: Vec<RoundRecord>,
    peak: u32,
    delivered: u64,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Trace {
        Trace { meta, rounds: Vec::new(), peak: 0, delivered: 0 }
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn push_round(&mut self, rec: RoundRecord) {
        self.peak = self.peak.max(rec.max_load_pre).max(rec.max_load);
        self.delivered += rec.delivered.len() as u64;
        self.rounds.push(rec);
    }

    /// Maximum buffer load observed at any point of the run (after injections
    /// or after forwarding).
    pub fn peak_load(&self) -> u32 {
        self.peak
    }

    pub fn total_delivered(&self) -> u64 {
        self.delivered
    }

    /// Packets still stored at the end of the run.
    pub fn remaining(&self) -> u64 {
        self.rounds.last().map_or(0, |r| r.total_load)
    }

    /// The round records as JSON lines, without the meta line. Two runs are
    /// compared for equality on exactly these bytes.
    pub fn rounds_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            out.push_str(&serde_json::to_string(r).expect("round record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.meta).map_err(json_err)?;
        w.write_all(b"\n")?;
        w.write_all(self.rounds_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Trace> {
        let mut lines = BufReader::new(r).lines();
        let meta_line = lines
            .next()
            .ok_or_else(|| AqtError::Spec("empty trace file".into()))??;
        let meta: TraceMeta = serde_json::from_str(&meta_line).map_err(json_err)?;
        let mut trace = Trace::new(meta);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RoundRecord = serde_json::from_str(&line).map_err(json_err)?;
            trace.push_round(rec);
        }
        Ok(trace)
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "max_load", "total_load", "delivered"])
            .map_err(|e| AqtError::Spec(format!("csv: {e}")))?;
        for r in &self.rounds {
            out.write_record([
                r.round.to_string(),
                r.max_load.to_string(),
                r.total_load.to_string(),
                r.delivered.len().to_string(),
            ])
            .map_err(|e| AqtError::Spec(format!("csv: {e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Audit the trace against its own records and the injection pattern:
    /// loads reconcile move by move, every node sends at most one packet per
    /// round (unit edge capacity), deliveries happen exactly at destinations,
    /// and injected = delivered + in-flight every round.
    pub fn validate_consistency(&self, topo: &Topology, pattern: &InjectionPattern) -> Result<()> {
        let n = topo.node_count() as usize;
        let mut position: Vec<Option<NodeId>> = vec![None; pattern.len()];
        let mut loads = vec![0u32; n];
        let mut injected_total = 0u64;
        let mut delivered_total = 0u64;
        let fail = |round: u32, detail: String| AqtError::CheckerFailure {
            checker: "trace-consistency".into(),
            round,
            detail,
        };
        for rec in &self.rounds {
            for &id in &rec.injected {
                let p = pattern
                    .packets()
                    .get(id as usize)
                    .ok_or_else(|| fail(rec.round, format!("unknown packet id {id}")))?;
                if position[id as usize].is_some() {
                    return Err(fail(rec.round, format!("packet {id} injected twice")));
                }
                position[id as usize] = Some(p.source);
                loads[p.source as usize] += 1;
                injected_total += 1;
            }
            let mut senders = std::collections::BTreeSet::new();
            for &(id, from, to) in &rec.moves {
                let p = pattern
                    .packets()
                    .get(id as usize)
                    .ok_or_else(|| fail(rec.round, format!("unknown packet id {id}")))?;
                if !senders.insert(from) {
                    return Err(fail(rec.round, format!("node {from} sent twice")));
                }
                if position[id as usize] != Some(from) {
                    return Err(fail(rec.round, format!("packet {id} not at {from}")));
                }
                if topo.next_hop(from) != Some(to) {
                    return Err(fail(rec.round, format!("move {from}->{to} is not an edge")));
                }
                loads[from as usize] -= 1;
                if to == p.dest {
                    if !rec.delivered.contains(&id) {
                        return Err(fail(rec.round, format!("packet {id} reached its destination but is not recorded as delivered")));
                    }
                    position[id as usize] = None;
                    delivered_total += 1;
                } else {
                    position[id as usize] = Some(to);
                    loads[to as usize] += 1;
                }
            }
            for &id in &rec.delivered {
                if !rec.moves.iter().any(|&(m, _, _)| m == id) {
                    return Err(fail(rec.round, format!("delivery of {id} without a move")));
                }
            }
            if loads != rec.loads {
                return Err(fail(rec.round, "recorded loads do not reconcile".into()));
            }
            let in_flight: u64 = loads.iter().map(|&l| l as u64).sum();
            if injected_total != delivered_total + in_flight {
                return Err(fail(rec.round, "packet conservation violated".into()));
            }
        }
        Ok(())
    }
}

fn json_err(e: serde_json::Error) -> AqtError {
    AqtError::Spec(format!("json: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Packet;
    use crate::engine::{run, ActivationSet, Configuration, PseudoBufferKey, RunOptions, Scheduler};

    struct ForwardAll;

    impl Scheduler for ForwardAll {
        fn name(&self) -> &'static str {
            "forward-all"
        }
        fn house(&self, _: &Topology, _: NodeId, _: &Packet) -> PseudoBufferKey {
            PseudoBufferKey::Whole
        }
        fn activate(&mut self, topo: &Topology, cfg: &Configuration, _: u32) -> ActivationSet {
            (0..cfg.node_count())
                .filter(|&v| cfg.load(v) > 0 && topo.next_hop(v).is_some())
                .map(|v| (v, PseudoBufferKey::Whole))
                .collect()
        }
    }

    fn sample() -> (Topology, InjectionPattern, Trace) {
        let topo = Topology::line(4);
        let pattern = InjectionPattern::new(
            &topo,
            vec![
                Packet { id: 0, round: 1, source: 0, dest: 4, tag: None },
                Packet { id: 0, round: 1, source: 2, dest: 4, tag: None },
                Packet { id: 0, round: 3, source: 1, dest: 3, tag: None },
            ],
        )
        .unwrap();
        let trace = run(
            &topo,
            &pattern,
            &mut ForwardAll,
            RunOptions { horizon: 10, drain: false },
            &mut [],
        )
        .unwrap();
        (topo, pattern, trace)
    }

    #[test]
    fn jsonl_round_trip() {
        let (_, _, trace) = sample();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let back = Trace::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.rounds(), trace.rounds());
        assert_eq!(back.peak_load(), trace.peak_load());
        assert_eq!(back.total_delivered(), trace.total_delivered());
        assert_eq!(back.meta().scheduler, "forward-all");
    }

    #[test]
    fn summary_csv_shape() {
        let (_, _, trace) = sample();
        let mut buf = Vec::new();
        trace.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("round,max_load,total_load,delivered"));
        assert_eq!(text.lines().count(), 11);
    }

    #[test]
    fn consistency_accepts_real_and_rejects_tampered() {
        let (topo, pattern, trace) = sample();
        trace.validate_consistency(&topo, &pattern).unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let mut tampered = Trace::read_jsonl(buf.as_slice()).unwrap();
        tampered.rounds.first_mut().unwrap().loads[0] += 1;
        assert!(tampered.validate_consistency(&topo, &pattern).is_err());
    }
}
