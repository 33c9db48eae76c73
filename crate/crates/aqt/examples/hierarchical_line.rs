//! The hierarchical scheduler: the line is covered by nested intervals of
//! lengths m, m^2, ..., m^ell, each phase of ell rounds serves one hierarchy
//! level per round from coarsest to finest, and packets are handed segment
//! by segment toward their destinations. Peak load stays below
//! ell * n^(1/ell) + sigma + 1 at rate 1/ell, at the cost of batching
//! injections per phase.

use aqt::adversary::random_bounded;
use aqt::engine::{run, Checker, RunOptions};
use aqt::metrics::{BadDecreaseChecker, BadnessExcessChecker, BadnessScheme, HptsPhaseChecker};
use aqt::schedulers::{Hpts, Ppts};
use aqt::{Rational, Topology};

fn main() -> aqt::Result<()> {
    let (m, ell) = (4u32, 2u32);
    let n = m.pow(ell); // the hierarchy covers the line and its sink
    let topo = Topology::line(n - 1);
    let (rho, sigma) = (Rational::new(1, ell as i64), 2);
    let horizon = 400;
    let dests: Vec<u32> = (1..=n - 1).step_by(3).collect();
    let pattern = random_bounded(3, &topo, rho, sigma, horizon, &dests)?;

    let mut scheduler = Hpts::new(&topo, m, ell)?;
    let part = scheduler.partition();
    println!(
        "hierarchy: base {m}, {ell} levels, interval lengths {:?}, phase = {ell} rounds",
        (0..ell).map(|j| part.interval_len(j)).collect::<Vec<_>>()
    );

    // Three layers of auditing: per-round badness laws at the level being
    // served, the per-phase decrease of total badness, and the comparison
    // against the phase-compressed pattern's excess.
    let scheme = BadnessScheme::Hierarchical(part);
    let mut checkers: Vec<Box<dyn Checker>> = vec![
        Box::new(BadDecreaseChecker::new(scheme)),
        Box::new(HptsPhaseChecker::new(part)),
        Box::new(BadnessExcessChecker::new(&topo, &pattern, rho, horizon, scheme)?),
    ];
    let trace = run(
        &topo,
        &pattern,
        &mut scheduler,
        RunOptions { horizon, drain: false },
        &mut checkers,
    )?;
    let bound = ell * m + sigma as u32 + 1;
    println!("peak load {} (proven bound {bound}), checkers passed", trace.peak_load());
    assert!(trace.peak_load() <= bound);

    // With a single level the hierarchy degenerates to plain parallel
    // peak-to-sink over the interval endpoints: the traces agree byte for
    // byte.
    let flat_topo = Topology::line(15);
    let flat = random_bounded(5, &flat_topo, Rational::new(1, 2), 2, 200, &[5, 10, 15])?;
    let mut one_level = Hpts::new(&flat_topo, 16, 1)?;
    let mut ppts = Ppts::new(&flat_topo, (1..=15).collect())?;
    let opts = RunOptions { horizon: 200, drain: false };
    let a = run(&flat_topo, &flat, &mut one_level, opts, &mut [])?;
    let b = run(&flat_topo, &flat, &mut ppts, opts, &mut [])?;
    assert_eq!(a.rounds_jsonl(), b.rounds_jsonl());
    println!("one-level hierarchy reproduced the flat scheduler exactly");
    Ok(())
}
