//! Several destinations at once: the parallel peak-to-sink scheduler splits
//! each buffer into per-destination pseudo-buffers and serves destinations
//! farthest-first, keeping the peak load below 1 + d + sigma. The run is
//! watched by the per-round badness checkers.

use aqt::adversary::random_bounded;
use aqt::engine::{run, Checker, Configuration, RunOptions};
use aqt::metrics::{badness, BadDecreaseChecker, BadnessExcessChecker, BadnessScheme};
use aqt::schedulers::Ppts;
use aqt::{Rational, Topology};

fn main() -> aqt::Result<()> {
    let n = 24;
    let topo = Topology::line(n);
    let dests = vec![6, 12, 18, 24];
    let (rho, sigma) = (Rational::new(1, 2), 2);
    let horizon = 300;
    let pattern = random_bounded(11, &topo, rho, sigma, horizon, &dests)?;

    // Badness counts the overload of each prefix of the line, one class per
    // destination; the scheduler's activation rule makes every class
    // non-increase and the total drop wherever it is positive.
    let mut checkers: Vec<Box<dyn Checker>> = vec![
        Box::new(BadDecreaseChecker::new(BadnessScheme::PerDest)),
        Box::new(BadnessExcessChecker::new(
            &topo,
            &pattern,
            rho,
            horizon,
            BadnessScheme::PerDest,
        )?),
    ];
    let mut scheduler = Ppts::new(&topo, dests.clone())?;
    let trace = run(
        &topo,
        &pattern,
        &mut scheduler,
        RunOptions { horizon, drain: false },
        &mut checkers,
    )?;

    let bound = 1 + dests.len() as u32 + sigma as u32;
    println!(
        "{} destinations, peak load {} (proven bound {bound}), checkers passed",
        dests.len(),
        trace.peak_load()
    );
    assert!(trace.peak_load() <= bound);

    // Replay the final configuration to show the badness snapshot shape.
    let mut cfg = Configuration::new(&topo);
    for p in pattern.packets() {
        if let Some(v) = final_position(&trace, p) {
            cfg.push(v, aqt::PseudoBufferKey::Dest(p.dest), *p);
        }
    }
    let snap = badness(&topo, &cfg, BadnessScheme::PerDest);
    println!("final badness per buffer: {:?}", snap.total);
    Ok(())
}

/// Where a packet sits at the end of the trace, if still stored.
fn final_position(trace: &aqt::trace::Trace, p: &aqt::Packet) -> Option<u32> {
    let mut pos = None;
    for rec in trace.rounds() {
        if rec.injected.contains(&p.id) {
            pos = Some(p.source);
        }
        for &(m, _, to) in &rec.moves {
            if m == p.id {
                pos = Some(to);
            }
        }
        if rec.delivered.contains(&p.id) {
            return None;
        }
    }
    pos
}
