//! Ground truth on tiny instances: exhaustive search over *every* forwarding
//! protocol (not just activation-rule schedulers) finds the best achievable
//! peak load. Useful to confirm that collisions are genuinely unavoidable
//! and that the practical schedulers are not far off.

use aqt::adversary::{InjectionPattern, Packet};
use aqt::engine::{run, RunOptions, Scheduler};
use aqt::schedulers::{brute_force_optimal, Greedy, Ppts, Pts};
use aqt::Topology;

fn pat(topo: &Topology, specs: &[(u32, u32, u32)]) -> aqt::Result<InjectionPattern> {
    InjectionPattern::new(
        topo,
        specs
            .iter()
            .map(|&(round, source, dest)| Packet { id: 0, round, source, dest, tag: None })
            .collect(),
    )
}

fn main() -> aqt::Result<()> {
    let topo = Topology::line(4);
    let horizon = 8;

    // Two streams merging at buffer 1 twice in a row: no protocol can keep
    // every buffer below two packets.
    let pattern = pat(&topo, &[(1, 0, 4), (1, 1, 4), (2, 0, 4), (2, 1, 4), (3, 0, 4)])?;
    let best = brute_force_optimal(&topo, &pattern, horizon)?;
    println!("merging streams: optimal peak over all protocols = {best}");
    assert_eq!(best, 2);

    // A clean pipeline needs no buffering at all.
    let pipeline = pat(&topo, &[(1, 0, 4), (2, 0, 4), (3, 0, 4)])?;
    assert_eq!(brute_force_optimal(&topo, &pipeline, horizon)?, 1);
    println!("pipelined stream: optimal peak = 1");

    // The real schedulers can only do worse than the exhaustive optimum.
    let opts = RunOptions { horizon, drain: false };
    let mut contenders: Vec<Box<dyn Scheduler>> = vec![
        Box::new(Pts::new(&topo, 4)?),
        Box::new(Ppts::new(&topo, vec![4])?),
        Box::new(Greedy),
    ];
    for scheduler in contenders.iter_mut() {
        let trace = run(&topo, &pattern, scheduler.as_mut(), opts, &mut [])?;
        println!("  {:>6}: peak {}", trace.meta().scheduler, trace.peak_load());
        assert!(trace.peak_load() >= best);
    }
    Ok(())
}
