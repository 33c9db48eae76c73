//! A first run: a line of buffers, a rate-limited random adversary, and the
//! single-destination peak-to-sink scheduler, whose peak load stays below
//! 2 + sigma no matter what the adversary does.

use aqt::adversary::random_bounded;
use aqt::engine::{run, RunOptions};
use aqt::schedulers::Pts;
use aqt::{Rational, Topology};

fn main() -> aqt::Result<()> {
    let n = 32;
    let topo = Topology::line(n);
    let (rho, sigma) = (Rational::new(2, 3), 3);

    // Every packet targets the sink at node n. The generator keeps each
    // buffer's injection stream (rho, sigma)-bounded by construction.
    let pattern = random_bounded(7, &topo, rho, sigma, 400, &[n])?;
    assert!(pattern.validate_bounded(&topo, rho, sigma).is_ok());
    println!("injected {} packets over 400 rounds at rate {rho}", pattern.len());

    let mut scheduler = Pts::new(&topo, n)?;
    let trace = run(
        &topo,
        &pattern,
        &mut scheduler,
        RunOptions { horizon: 400, drain: false },
        &mut [],
    )?;

    println!(
        "peak load {} (proven bound {}), delivered {}, still stored {}",
        trace.peak_load(),
        2 + sigma,
        trace.total_delivered(),
        trace.remaining()
    );
    assert!(trace.peak_load() <= 2 + sigma as u32);

    // Traces serialize as JSON lines and audit themselves: the recorded
    // moves must reconcile with the recorded loads.
    trace.validate_consistency(&topo, &pattern)?;
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf)?;
    println!("trace file: {} bytes, {} rounds", buf.len(), trace.rounds().len());
    Ok(())
}
