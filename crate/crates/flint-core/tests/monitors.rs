//! The invariant monitors must stay silent on the real unison clock from any
//! initial configuration and under any schedule, must catch the broken
//! able-able guard, and the stabilization meter must report sensible rounds
//! on unison and leader-election runs.

use flint_core::engine::{run, InitPolicy, RunSpec, SchedulerKind, StopCondition, Trace};
use flint_core::le::LeProtocol;
use flint_core::restart::WithRestart;
use flint_core::topology::Graph;
use flint_core::unison::{Turn, UnisonProtocol};
use flint_core::verification::{
    attach_monitors, check_au_safety, check_le, measure_stabilization, standard_monitors,
    write_violations, TaskChecker, Violation,
};

fn run_clock(
    protocol: &UnisonProtocol,
    graph: &Graph,
    scheduler: SchedulerKind,
    init: InitPolicy,
    seed: u64,
    steps: u64,
) -> Trace {
    run(RunSpec {
        protocol,
        graph,
        scheduler,
        seed,
        init,
        stop: StopCondition::Steps(steps),
    })
    .unwrap()
    .trace
}

fn monitor_run(
    protocol: &UnisonProtocol,
    graph: &Graph,
    scheduler: SchedulerKind,
    init: InitPolicy,
    seed: u64,
    steps: u64,
) -> Vec<Violation> {
    let trace = run_clock(protocol, graph, scheduler, init, seed, steps);
    let mut monitors = standard_monitors(protocol);
    attach_monitors(protocol, graph, &trace, &mut monitors).unwrap()
}

fn schedulers() -> Vec<SchedulerKind> {
    vec![
        SchedulerKind::Synchronous,
        SchedulerKind::RoundRobin,
        SchedulerKind::RandomFair { fair_window: 3 },
    ]
}

fn encode(protocol: &UnisonProtocol, turns: &[Turn]) -> Vec<u32> {
    turns.iter().map(|&t| protocol.state_of(t).unwrap()).collect()
}

#[test]
fn clean_runs_never_trip_an_invariant_monitor() {
    let graphs = vec![
        Graph::path(4).unwrap(),
        Graph::cycle(5).unwrap(),
        Graph::complete(4).unwrap(),
        Graph::wheel(8).unwrap(),
        Graph::random_bounded_diameter(9, 3, 0.15, 5).unwrap(),
    ];
    for graph in &graphs {
        let d = graph.diameter().unwrap().max(1);
        let protocol = UnisonProtocol::new(d).unwrap();
        for scheduler in schedulers() {
            for seed in 1..=3 {
                let violations = monitor_run(
                    &protocol,
                    graph,
                    scheduler.clone(),
                    InitPolicy::RandomUniform,
                    seed,
                    300,
                );
                assert!(
                    violations.is_empty(),
                    "n={} {:?} seed {seed}: {:?}",
                    graph.node_count(),
                    scheduler,
                    violations
                );
            }
        }
    }
}

#[test]
fn crafted_worst_case_clock_gaps_recover_without_violations() {
    let a = Turn::Able;
    let f = Turn::Faulty;
    // Path, d = 3 (k = 11): endpoints a full half-cycle apart with faulty
    // turns in the middle.
    let p4 = Graph::path(4).unwrap();
    let clock3 = UnisonProtocol::new(3).unwrap();
    let spread = encode(&clock3, &[a(1), a(11), f(-4), a(-11)]);
    // Cycle, d = 2 (k = 8): both wrap extremes faulty next to settled ones.
    let c5 = Graph::cycle(5).unwrap();
    let clock2 = UnisonProtocol::new(2).unwrap();
    let extremes = encode(&clock2, &[f(8), f(-8), a(1), a(-1), f(2)]);
    for scheduler in schedulers() {
        for (graph, protocol, init) in
            [(&p4, &clock3, &spread), (&c5, &clock2, &extremes)]
        {
            let violations = monitor_run(
                protocol,
                graph,
                scheduler.clone(),
                InitPolicy::Explicit(init.clone()),
                9,
                400,
            );
            assert!(violations.is_empty(), "{:?}: {:?}", scheduler, violations);
        }
    }
}

#[test]
fn the_broken_able_guard_is_caught_and_logged() {
    let p2 = Graph::path(2).unwrap();
    let mutant = UnisonProtocol::without_good_guard(1).unwrap();
    let control = UnisonProtocol::new(1).unwrap();
    // One node mid-recovery next to an able one at the same level: the real
    // clock holds the able node back until recovery finishes, the mutant
    // ticks it forward and tears the protected edge apart.
    let init = encode(&control, &[Turn::Able(3), Turn::Faulty(3)]);

    let clean = monitor_run(
        &control,
        &p2,
        SchedulerKind::Synchronous,
        InitPolicy::Explicit(init.clone()),
        1,
        20,
    );
    assert!(clean.is_empty(), "control run must be silent: {clean:?}");

    let violations = monitor_run(
        &mutant,
        &p2,
        SchedulerKind::Synchronous,
        InitPolicy::Explicit(init),
        1,
        20,
    );
    assert!(!violations.is_empty(), "the mutant must trip a monitor");
    assert!(
        violations
            .iter()
            .any(|v| v.monitor == "protected-edge-persistence" && v.step == 1),
        "expected the torn protected edge to be reported: {violations:?}"
    );

    let mut log = Vec::new();
    write_violations(&violations, &mut log).unwrap();
    let log = String::from_utf8(log).unwrap();
    assert_eq!(log.lines().count(), violations.len());
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for field in ["monitor", "step", "nodes", "detail"] {
        assert!(first.get(field).is_some(), "missing {field} in {first}");
    }
}

#[test]
fn lockstep_from_the_initial_state_measures_as_round_zero() {
    let p3 = Graph::path(3).unwrap();
    let protocol = UnisonProtocol::new(1).unwrap();
    let trace = run_clock(
        &protocol,
        &p3,
        SchedulerKind::Synchronous,
        InitPolicy::AllInitial,
        1,
        60,
    );
    let checker = TaskChecker::Au {
        protocol: &protocol,
        diameter: p3.diameter().unwrap(),
        liveness: vec![1, 3],
        window: TaskChecker::au_default_window(&protocol),
    };
    let report = measure_stabilization(&trace, &p3, &protocol, &checker);
    assert_eq!(report.stabilization_round, Some(0), "{report:?}");
}

#[test]
fn adversarial_clocks_stabilize_and_the_meter_finds_the_round() {
    let cases = vec![
        (Graph::path(4).unwrap(), SchedulerKind::Synchronous, 1500),
        (Graph::cycle(5).unwrap(), SchedulerKind::Synchronous, 1500),
        (Graph::cycle(5).unwrap(), SchedulerKind::RoundRobin, 7500),
    ];
    for (graph, scheduler, steps) in cases {
        let d = graph.diameter().unwrap().max(1);
        let protocol = UnisonProtocol::new(d).unwrap();
        for seed in 1..=2 {
            let trace = run_clock(
                &protocol,
                &graph,
                scheduler.clone(),
                InitPolicy::RandomUniform,
                seed,
                steps,
            );
            let checker = TaskChecker::Au {
                protocol: &protocol,
                diameter: d,
                liveness: vec![1, 3],
                window: TaskChecker::au_default_window(&protocol),
            };
            let report = measure_stabilization(&trace, &graph, &protocol, &checker);
            let round = report.stabilization_round.unwrap_or_else(|| {
                panic!("n={} {:?} seed {seed}: {report:?}", graph.node_count(), scheduler)
            });
            let at_round = trace.config_at(trace.round_starts[round] as i64 - 1);
            assert_eq!(check_au_safety(&protocol, &graph, at_round), Ok(()));
        }
    }
}

#[test]
fn elections_measure_as_a_stable_single_leader() {
    for (graph, seed) in [
        (Graph::cycle(5).unwrap(), 3),
        (Graph::path(4).unwrap(), 4),
    ] {
        let d = graph.diameter().unwrap().max(1);
        let wrapped = WithRestart::new(LeProtocol::with_defaults(d).unwrap(), d).unwrap();
        let trace = run(RunSpec {
            protocol: &wrapped,
            graph: &graph,
            scheduler: SchedulerKind::Synchronous,
            seed,
            init: InitPolicy::RandomUniform,
            stop: StopCondition::Steps(2500),
        })
        .unwrap()
        .trace;
        let checker = TaskChecker::Le { window: TaskChecker::static_default_window(d) };
        let report = measure_stabilization(&trace, &graph, &wrapped, &checker);
        let round = report
            .stabilization_round
            .unwrap_or_else(|| panic!("n={} seed {seed}: {report:?}", graph.node_count()));
        let at_round = trace.config_at(trace.round_starts[round] as i64 - 1);
        let bits: Option<Vec<i64>> = at_round
            .iter()
            .map(|&s| flint_core::engine::Protocol::output(&wrapped, s))
            .collect();
        assert_eq!(check_le(&bits.unwrap()), Ok(()));
    }
}
