//! Scheduling on a directed tree: all edges point toward the root, packets
//! travel upward, and overload is measured per subtree. The tree schedulers
//! pick a minimal antichain of overloaded buffers and clear the paths above
//! them; their bounds depend on the destination depth d' (the longest chain
//! of nested destinations), not on the number of destinations.

use aqt::adversary::random_bounded;
use aqt::engine::{run, Checker, RunOptions};
use aqt::metrics::{BadDecreaseChecker, BadnessScheme};
use aqt::schedulers::{Ppts, TreePpts, TreePts};
use aqt::{Rational, Topology};

fn main() -> aqt::Result<()> {
    // A binary-ish tree: node 14 is the root, leaves at depth 3.
    let parent = vec![4, 4, 5, 6, 12, 12, 13, 13, 12, 13, 14, 14, 14, 14, 14];
    let topo = Topology::tree(14, parent)?;
    println!("tree of {} nodes, depth {}", topo.node_count(), topo.depth());

    let (rho, sigma) = (Rational::new(1, 2), 2);
    let horizon = 300;

    // Single destination: everything drains into the root.
    let pattern = random_bounded(21, &topo, rho, sigma, horizon, &[14])?;
    let mut checkers: Vec<Box<dyn Checker>> =
        vec![Box::new(BadDecreaseChecker::new(BadnessScheme::SingleDest { dest: 14 }))];
    let trace = run(
        &topo,
        &pattern,
        &mut TreePts,
        RunOptions { horizon, drain: false },
        &mut checkers,
    )?;
    println!("tree-pts peak {} (bound {})", trace.peak_load(), 2 + sigma);
    assert!(trace.peak_load() <= 2 + sigma as u32);

    // Multiple destinations on one root-to-leaf chain plus a side branch:
    // d' counts only the deepest nesting.
    let dests = vec![4, 12, 13, 14];
    let d_prime = topo.destination_depth(&dests);
    println!("destinations {dests:?} nest {d_prime} deep");
    let pattern = random_bounded(22, &topo, rho, sigma, horizon, &dests)?;
    let mut checkers: Vec<Box<dyn Checker>> =
        vec![Box::new(BadDecreaseChecker::new(BadnessScheme::PerDest))];
    let mut scheduler = TreePpts::new(&topo, dests.clone())?;
    let trace = run(
        &topo,
        &pattern,
        &mut scheduler,
        RunOptions { horizon, drain: false },
        &mut checkers,
    )?;
    let bound = 1 + d_prime + sigma as u32;
    println!("tree-ppts peak {} (bound {bound})", trace.peak_load());
    assert!(trace.peak_load() <= bound);

    // A line is a tree whose root has one child: the tree schedulers then
    // reproduce the line schedulers move for move.
    let line = Topology::line(10);
    let dests = vec![4, 8, 10];
    let pattern = random_bounded(23, &line, rho, sigma, 200, &dests)?;
    let opts = RunOptions { horizon: 200, drain: false };
    let a = run(&line, &pattern, &mut TreePpts::new(&line, dests.clone())?, opts, &mut [])?;
    let b = run(&line, &pattern, &mut Ppts::new(&line, dests)?, opts, &mut [])?;
    assert_eq!(
        a.rounds()
            .iter()
            .map(|r| (&r.moves, &r.loads))
            .collect::<Vec<_>>(),
        b.rounds()
            .iter()
            .map(|r| (&r.moves, &r.loads))
            .collect::<Vec<_>>()
    );
    println!("tree schedulers on a line match the line schedulers");
    Ok(())
}
