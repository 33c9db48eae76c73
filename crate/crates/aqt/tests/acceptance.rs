//! End-to-end acceptance suite: one test per headline guarantee, each
//! printing a single pass line (run with `--nocapture` to see them). Every
//! bound is checked with zero tolerance; randomness is seeded, so the suite
//! is fully deterministic.

use aqt::adversary::{random_bounded, InjectionPattern, Packet};
use aqt::engine::{run, Checker, RunOptions, Scheduler};
use aqt::harness::{run_experiment, ExperimentSpec};
use aqt::lower_bound::LbParams;
use aqt::metrics::{BadDecreaseChecker, BadnessExcessChecker, BadnessScheme, HptsPhaseChecker};
use aqt::schedulers::{brute_force_optimal, Greedy, Hpts, Ppts, Pts, TreePpts, TreePts};
use aqt::stale::{check_frontier_moves, scenario_check, stale_oracle};
use aqt::{Rational, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts(horizon: u32) -> RunOptions {
    RunOptions { horizon, drain: false }
}

#[test]
fn criterion_1_single_destination_peak_to_sink_bound() {
    let sizes = [8u32, 16, 32, 64, 128, 256];
    for seed in 0..1000u64 {
        let n = sizes[seed as usize % sizes.len()];
        let sigma = seed % 9;
        let topo = Topology::line(n);
        let pattern =
            random_bounded(seed, &topo, Rational::from_integer(1), sigma, 1000, &[n]).unwrap();
        let trace =
            run(&topo, &pattern, &mut Pts::new(&topo, n).unwrap(), opts(1000), &mut []).unwrap();
        assert!(
            trace.peak_load() <= 2 + sigma as u32,
            "criterion 1: FAIL at seed {seed}: peak {} > {}",
            trace.peak_load(),
            2 + sigma
        );
    }
    println!("criterion 1: pass - peak-to-sink stayed within 2+sigma over 1000 runs");
}

#[test]
fn criterion_2_parallel_peak_to_sink_bound() {
    let sizes = [8u32, 16, 32, 64, 128, 256];
    let rates = [Rational::from_integer(1), Rational::new(1, 2), Rational::new(2, 3)];
    for seed in 0..1000u64 {
        let n = sizes[seed as usize % sizes.len()];
        let sigma = seed % 9;
        let d = (seed % 8 + 1).min(n as u64) as u32;
        let rho = rates[(seed / 8) as usize % rates.len()];
        let topo = Topology::line(n);
        let dests: Vec<u32> = {
            let mut ws: Vec<u32> = (1..=d).map(|i| i * n / d).collect();
            ws.dedup();
            ws
        };
        let pattern = random_bounded(seed, &topo, rho, sigma, 1000, &dests).unwrap();
        let trace = run(
            &topo,
            &pattern,
            &mut Ppts::new(&topo, dests.clone()).unwrap(),
            opts(1000),
            &mut [],
        )
        .unwrap();
        let bound = 1 + dests.len() as u32 + sigma as u32;
        assert!(
            trace.peak_load() <= bound,
            "criterion 2: FAIL at seed {seed}: peak {} > {bound}",
            trace.peak_load()
        );
    }
    println!("criterion 2: pass - parallel peak-to-sink stayed within 1+d+sigma over 1000 runs");
}

#[test]
fn criterion_3_hierarchical_bound_and_flat_degeneration() {
    let mut runs = 0u32;
    for ell in [1u32, 2, 3] {
        for m in [2u32, 4, 8] {
            let n = m.pow(ell);
            let topo = Topology::line(n);
            let rho = Rational::new(1, ell as i64);
            let horizon = 240;
            for seed in 0..200u64 {
                let sigma = seed % 5;
                let dests: Vec<u32> = (1..=n).filter(|w| !(w + seed as u32).is_multiple_of(3)).collect();
                let dests = if dests.is_empty() { vec![n] } else { dests };
                let pattern = random_bounded(seed, &topo, rho, sigma, horizon, &dests).unwrap();
                let mut hpts = Hpts::new(&topo, m, ell).unwrap();
                let a = run(&topo, &pattern, &mut hpts, opts(horizon), &mut []).unwrap();
                let bound = ell * m + sigma as u32 + 1;
                assert!(
                    a.peak_load() <= bound,
                    "criterion 3: FAIL at (m={m}, ell={ell}, seed={seed}): peak {} > {bound}",
                    a.peak_load()
                );
                // One level is exactly the flat parallel scheduler.
                if ell == 1 && seed < 50 {
                    let mut ppts = Ppts::new(&topo, (1..=n).collect()).unwrap();
                    let b = run(&topo, &pattern, &mut ppts, opts(horizon), &mut []).unwrap();
                    assert_eq!(
                        a.rounds_jsonl(),
                        b.rounds_jsonl(),
                        "criterion 3: FAIL: one-level trace differs from flat at seed {seed}"
                    );
                }
                runs += 1;
            }
        }
    }
    println!(
        "criterion 3: pass - hierarchical bound ell*n^(1/ell)+sigma+1 held over {runs} runs, \
         one-level traces byte-identical to flat"
    );
}

/// A random tree on `n` nodes rooted at `n - 1`; parent indices increase
/// toward the root, so ascending node order is precedence-compatible.
fn random_tree(rng: &mut ChaCha8Rng, max_nodes: u32) -> Topology {
    let n = rng.gen_range(3..=max_nodes);
    let parent: Vec<u32> = (0..n)
        .map(|v| if v + 1 < n { rng.gen_range(v + 1..n) } else { v })
        .collect();
    Topology::tree(n - 1, parent).expect("acyclic by construction")
}

#[test]
fn criterion_4_tree_schedulers_bounds_and_line_degeneration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..500u64 {
        let topo = random_tree(&mut rng, 64);
        let n = topo.node_count();
        let root = topo.root();
        let sigma = seed % 5;
        let horizon = 250;

        // Random destination set (always including the root), ascending.
        let mut dests: Vec<u32> = (0..n).filter(|_| rng.gen_bool(0.25)).collect();
        if !dests.contains(&root) {
            dests.push(root);
        }
        dests.sort_unstable();
        let pattern =
            random_bounded(seed, &topo, Rational::new(1, 2), sigma, horizon, &dests).unwrap();
        let trace = run(
            &topo,
            &pattern,
            &mut TreePpts::new(&topo, dests.clone()).unwrap(),
            opts(horizon),
            &mut [],
        )
        .unwrap();
        let bound = 1 + topo.destination_depth(&dests) + sigma as u32;
        assert!(
            trace.peak_load() <= bound,
            "criterion 4: FAIL at seed {seed}: tree-ppts peak {} > {bound}",
            trace.peak_load()
        );

        // Single destination: everything to the root.
        let single =
            random_bounded(seed, &topo, Rational::new(1, 2), sigma, horizon, &[root]).unwrap();
        let trace = run(&topo, &single, &mut TreePts, opts(horizon), &mut []).unwrap();
        assert!(
            trace.peak_load() <= 2 + sigma as u32,
            "criterion 4: FAIL at seed {seed}: tree-pts peak {} > {}",
            trace.peak_load(),
            2 + sigma
        );
    }

    // A line viewed as a tree reproduces the line schedulers exactly.
    for seed in 0..50u64 {
        let n = 8 + (seed as u32 % 25);
        let topo = Topology::line(n);
        let dests = vec![n / 3 + 1, n];
        let pattern =
            random_bounded(seed, &topo, Rational::new(1, 2), seed % 4, 150, &dests).unwrap();
        let essence = |t: &aqt::trace::Trace| {
            t.rounds().iter().map(|r| (r.moves.clone(), r.loads.clone())).collect::<Vec<_>>()
        };
        let a = run(
            &topo,
            &pattern,
            &mut TreePpts::new(&topo, dests.clone()).unwrap(),
            opts(150),
            &mut [],
        )
        .unwrap();
        let b = run(&topo, &pattern, &mut Ppts::new(&topo, dests).unwrap(), opts(150), &mut [])
            .unwrap();
        assert_eq!(essence(&a), essence(&b), "criterion 4: FAIL: line-as-tree diverged");
    }
    println!(
        "criterion 4: pass - tree bounds 1+d'+sigma and 2+sigma held over 500 trees, \
         line-as-tree matched the line schedulers"
    );
}

#[test]
fn criterion_5_per_round_invariant_suite() {
    // Representative runs from every scheduler family, replayed under the
    // full checker suite: per-round badness decrease, per-phase decrease,
    // and badness bounded by excess. Any violation aborts the run.
    let mut audited = 0u32;
    for seed in 0..60u64 {
        let n = 12 + (seed as u32 % 40);
        let sigma = seed % 4;
        let topo = Topology::line(n);
        let horizon = 200;

        // Single destination under pts.
        let rho = Rational::from_integer(1);
        let pattern = random_bounded(seed, &topo, rho, sigma, horizon, &[n]).unwrap();
        let scheme = BadnessScheme::SingleDest { dest: n };
        let mut checkers: Vec<Box<dyn Checker>> = vec![
            Box::new(BadDecreaseChecker::new(scheme)),
            Box::new(BadnessExcessChecker::new(&topo, &pattern, rho, horizon, scheme).unwrap()),
        ];
        run(&topo, &pattern, &mut Pts::new(&topo, n).unwrap(), opts(horizon), &mut checkers)
            .expect("criterion 5: FAIL: pts invariant violation");

        // Multiple destinations under ppts.
        let rho = Rational::new(1, 2);
        let dests = vec![n / 2, n];
        let pattern = random_bounded(seed, &topo, rho, sigma, horizon, &dests).unwrap();
        let mut checkers: Vec<Box<dyn Checker>> = vec![
            Box::new(BadDecreaseChecker::new(BadnessScheme::PerDest)),
            Box::new(
                BadnessExcessChecker::new(&topo, &pattern, rho, horizon, BadnessScheme::PerDest)
                    .unwrap(),
            ),
        ];
        run(
            &topo,
            &pattern,
            &mut Ppts::new(&topo, dests.clone()).unwrap(),
            opts(horizon),
            &mut checkers,
        )
        .expect("criterion 5: FAIL: ppts invariant violation");

        // Trees under tree-ppts.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 32);
        let mut ws: Vec<u32> = (0..tree.node_count()).filter(|_| rng.gen_bool(0.3)).collect();
        if !ws.contains(&tree.root()) {
            ws.push(tree.root());
        }
        ws.sort_unstable();
        let pattern = random_bounded(seed, &tree, rho, sigma, horizon, &ws).unwrap();
        let mut checkers: Vec<Box<dyn Checker>> = vec![
            Box::new(BadDecreaseChecker::new(BadnessScheme::PerDest)),
            Box::new(
                BadnessExcessChecker::new(&tree, &pattern, rho, horizon, BadnessScheme::PerDest)
                    .unwrap(),
            ),
        ];
        run(&tree, &pattern, &mut TreePpts::new(&tree, ws).unwrap(), opts(horizon), &mut checkers)
            .expect("criterion 5: FAIL: tree-ppts invariant violation");

        // Hierarchy under hpts.
        let (m, ell) = (4u32, 2u32);
        let hn = m.pow(ell);
        let htopo = Topology::line(hn);
        let rho = Rational::new(1, ell as i64);
        let hdests: Vec<u32> = (1..=hn).collect();
        let pattern = random_bounded(seed, &htopo, rho, sigma, horizon, &hdests).unwrap();
        let mut hpts = Hpts::new(&htopo, m, ell).unwrap();
        let scheme = BadnessScheme::Hierarchical(hpts.partition());
        let mut checkers: Vec<Box<dyn Checker>> = vec![
            Box::new(BadDecreaseChecker::new(scheme)),
            Box::new(HptsPhaseChecker::new(hpts.partition())),
            Box::new(BadnessExcessChecker::new(&htopo, &pattern, rho, horizon, scheme).unwrap()),
        ];
        run(&htopo, &pattern, &mut hpts, opts(horizon), &mut checkers)
            .expect("criterion 5: FAIL: hpts invariant violation");

        audited += 4;
    }
    println!("criterion 5: pass - zero invariant violations across {audited} fully checked runs");
}

#[test]
fn criterion_6_worst_case_construction_audit() {
    let cases = [
        (2u32, 2u32, Rational::new(1, 2)),
        (4, 2, Rational::new(1, 2)),
        (8, 2, Rational::new(1, 2)),
        (3, 3, Rational::new(1, 3)),
    ];
    for (m, ell, rho) in cases {
        let params = LbParams::new(m, ell, rho).unwrap();
        let topo = params.topology();
        let pattern = params.pattern().unwrap();
        assert!(
            pattern.validate_bounded(&topo, rho, 1).is_ok(),
            "criterion 6: FAIL: (m={m}, ell={ell}) pattern not (rho, 1)-bounded"
        );
        check_frontier_moves(&params)
            .expect("criterion 6: FAIL: frontier arithmetic violated");

        let n = params.node_count();
        let dests: Vec<u32> = {
            let mut ws: Vec<u32> = pattern.packets().iter().map(|p| p.dest).collect();
            ws.sort_unstable();
            ws.dedup();
            ws
        };
        let runs: Vec<(Box<dyn Scheduler>, bool, u32)> = vec![
            (Box::new(Ppts::new(&topo, dests.clone()).unwrap()), false, 0),
            (Box::new(Hpts::new(&topo, Hpts::fitting_base(n, ell), ell).unwrap()), false, 0),
            (Box::new(Greedy), false, 0),
            (Box::new(Ppts::new(&topo, dests.clone()).unwrap()), true, 3 * n),
        ];
        for (mut sched, drain, extra) in runs {
            let name = sched.name().to_string();
            let trace = run(
                &topo,
                &pattern,
                sched.as_mut(),
                RunOptions { horizon: params.horizon() + extra, drain },
                &mut [],
            )
            .unwrap();
            let report = stale_oracle(&params, &pattern, &trace).unwrap();
            assert!(
                report.is_ok(),
                "criterion 6: FAIL: (m={m}, ell={ell}) {name} drain={drain}: {:?}",
                report.violations
            );
            if !drain {
                // Exact dichotomy per top-digit epoch: a beta-stale burst of
                // at least ((ell+1)rho - 1) m^(k+1) / (2 ell) packets, or
                // fresh growth of at least ((ell+1)rho - 1) m^ell / 2.
                scenario_check(&params, &report)
                    .expect("criterion 6: FAIL: scenario dichotomy violated");
            }
        }
    }
    println!(
        "criterion 6: pass - construction audited for 4 parameter sets against \
         ppts, hpts, greedy, and drained ppts"
    );
}

#[test]
fn criterion_7_oracle_equivalences() {
    // Incremental excess equals the brute-force interval maximum.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.gen_range(2..=8u32);
        let topo = Topology::line(n);
        let horizon = rng.gen_range(20..=200u32);
        let packets: Vec<Packet> = (0..rng.gen_range(0..40))
            .map(|_| {
                let source = rng.gen_range(0..n);
                Packet {
                    id: 0,
                    round: rng.gen_range(1..=horizon),
                    source,
                    dest: rng.gen_range(source + 1..=n),
                    tag: None,
                }
            })
            .collect();
        let pattern = InjectionPattern::new(&topo, packets).unwrap();
        let rho = Rational::new(rng.gen_range(1..=3), rng.gen_range(1..=4));
        for tr in pattern.excess_traces(&topo, rho, horizon) {
            for t in 1..=horizon {
                let brute = (1..=t)
                    .map(|s| {
                        Rational::from_integer(pattern.count_crossing(&topo, tr.node, s, t) as i64)
                            - rho * Rational::from_integer((t - s + 1) as i64)
                    })
                    .fold(Rational::from_integer(0), |a, b| a.max(b));
                assert_eq!(
                    tr.value(t as usize),
                    brute,
                    "criterion 7: FAIL: excess mismatch at node {} round {t}",
                    tr.node
                );
            }
        }
    }

    // Exhaustive search: collisions are real, and no scheduler beats it.
    let topo = Topology::line(4);
    let instances: Vec<Vec<(u32, u32, u32)>> = vec![
        vec![(1, 0, 4), (1, 0, 4)],
        vec![(1, 0, 4), (1, 1, 4), (2, 0, 4), (2, 1, 4)],
        vec![(1, 2, 4), (1, 2, 4), (2, 2, 4)],
        vec![(1, 0, 4), (2, 0, 4), (3, 0, 4), (4, 0, 4)],
        vec![(1, 0, 2), (1, 1, 4), (2, 0, 2), (3, 1, 3)],
    ];
    for specs in &instances {
        let pattern = InjectionPattern::new(
            &topo,
            specs
                .iter()
                .map(|&(round, source, dest)| Packet { id: 0, round, source, dest, tag: None })
                .collect(),
        )
        .unwrap();
        let best = brute_force_optimal(&topo, &pattern, 8).unwrap();
        let shared_source = specs.iter().enumerate().any(|(i, &(r, s, _))| {
            specs[..i].iter().any(|&(r2, s2, _)| r == r2 && s == s2)
        });
        if shared_source {
            assert!(best >= 2, "criterion 7: FAIL: same-round collision not reflected");
        }
        let mut contenders: Vec<Box<dyn Scheduler>> = vec![
            Box::new(Ppts::new(&topo, vec![2, 3, 4]).unwrap()),
            Box::new(Greedy),
            Box::new(TreePts),
        ];
        for sched in contenders.iter_mut() {
            let trace = run(&topo, &pattern, sched.as_mut(), opts(8), &mut []).unwrap();
            assert!(
                trace.peak_load() >= best,
                "criterion 7: FAIL: {} beat the exhaustive optimum",
                trace.meta().scheduler
            );
        }
    }
    println!(
        "criterion 7: pass - excess oracle exact on 200 patterns, \
         exhaustive optimum is a floor for every scheduler"
    );
}

#[test]
fn criterion_8_determinism() {
    let specs = [
        r#"{"topology": {"n": 24}, "horizon": 300,
            "adversary": {"kind": "random", "seed": 5, "rho": "2/3", "sigma": 3, "dests": [12, 24]},
            "scheduler": {"kind": "ppts", "dests": [12, 24]}}"#,
        r#"{"topology": {"n": 16}, "horizon": 200,
            "adversary": {"kind": "random", "seed": 1, "rho": "1/2", "sigma": 2, "dests": [16]},
            "scheduler": {"kind": "hpts", "m": 4, "ell": 2}}"#,
        r#"{"adversary": {"kind": "lowerbound", "m": 4, "ell": 2, "rho": "1/2"},
            "scheduler": {"kind": "greedy"}}"#,
    ];
    for text in specs {
        let spec: ExperimentSpec = serde_json::from_str(text).unwrap();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(
            a.trace.rounds_jsonl(),
            b.trace.rounds_jsonl(),
            "criterion 8: FAIL: repeated runs diverged"
        );
    }
    println!("criterion 8: pass - repeated runs produced byte-identical traces");
}
