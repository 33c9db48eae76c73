//! The bookkeeping behind every bound: a buffer's *excess* is how far the
//! packets that must cross it have outrun the allowed rate, and it is
//! computed incrementally in exact integer arithmetic. Badness (stored
//! overload) never exceeds excess, which is what turns the rate constraint
//! into a buffer bound.

use aqt::adversary::random_bounded;
use aqt::{Rational, Topology};

fn main() -> aqt::Result<()> {
    let topo = Topology::line(12);
    let rho = Rational::new(1, 3);
    let sigma = 4;
    let horizon = 120;
    let pattern = random_bounded(42, &topo, rho, sigma, horizon, &[6, 12])?;

    // The incremental recurrence xi^t = max(xi^{t-1} + N_t - rho, 0) equals
    // the maximum over all intervals ending at t; check one node by brute
    // force.
    let v = 3;
    let trace = pattern.excess_trace(&topo, v, rho, horizon);
    for t in 1..=horizon {
        let brute = (1..=t)
            .map(|s| {
                Rational::from_integer(pattern.count_crossing(&topo, v, s, t) as i64)
                    - rho * Rational::from_integer((t - s + 1) as i64)
            })
            .fold(Rational::from_integer(0), |a, b| a.max(b));
        assert_eq!(trace.value(t as usize), brute);
    }
    println!("incremental excess matches the brute-force interval maximum at node {v}");

    // The generator's post-condition: excess never exceeds sigma, which is
    // exactly (rho, sigma)-boundedness.
    let max_excess = pattern
        .excess_traces(&topo, rho, horizon)
        .iter()
        .flat_map(|tr| (0..tr.len()).map(|t| tr.value(t)))
        .fold(Rational::from_integer(0), |a, b| a.max(b));
    println!("max excess over all buffers: {max_excess} (allowance {sigma})");
    assert!(max_excess <= Rational::from_integer(sigma as i64));
    assert!(pattern.validate_bounded(&topo, rho, sigma).is_ok());

    // Batching rounds in groups of ell compresses the timeline: a
    // (rho, sigma)-bounded pattern becomes (ell*rho, sigma)-bounded. This is
    // how the hierarchical scheduler's phase structure is analyzed.
    for ell in [2u32, 3, 4] {
        let reduced = pattern.ell_reduction(&topo, ell)?;
        let rate = rho * Rational::from_integer(ell as i64);
        assert!(reduced.validate_bounded(&topo, rate, sigma).is_ok());
        println!(
            "ell = {ell}: compressed pattern is ({rate}, {sigma})-bounded over {} rounds",
            reduced.max_round()
        );
    }

    // Boundedness violations come with an exact witness interval.
    let too_tight = pattern.validate_bounded(&topo, Rational::new(1, 12), 0);
    println!("same pattern at rate 1/12, burst 0: {too_tight:?}");
    assert!(!too_tight.is_ok());
    Ok(())
}
