//! End-to-end checks of leader election: witness flooding must reach the far
//! end of the graph in one epoch, clean runs keep a surviving candidate and
//! halt simultaneously, wrapped runs settle on exactly one stable leader,
//! and the verification stage restarts broken leader counts.

use flint_core::engine::{run, InitPolicy, Protocol, RunSpec, SchedulerKind, StopCondition, Trace};
use flint_core::le::{Coin, LeProtocol, LeState};
use flint_core::restart::WithRestart;
use flint_core::topology::Graph;

fn cases() -> Vec<(&'static str, Graph)> {
    vec![
        ("k2", Graph::complete(2).unwrap()),
        ("p3", Graph::path(3).unwrap()),
        ("k4", Graph::complete(4).unwrap()),
        ("c5", Graph::cycle(5).unwrap()),
        ("rand8", Graph::random_bounded_diameter(8, 3, 0.2, 11).unwrap()),
    ]
}

fn run_bare(graph: &Graph, seed: u64, init: InitPolicy, steps: u64) -> (Trace, LeProtocol) {
    let d = graph.diameter().unwrap().max(1);
    let host = LeProtocol::with_defaults(d).unwrap();
    let outcome = run(RunSpec {
        protocol: &host,
        graph,
        scheduler: SchedulerKind::Synchronous,
        seed,
        init,
        stop: StopCondition::Steps(steps),
    })
    .unwrap();
    (outcome.trace, host)
}

fn run_wrapped(
    graph: &Graph,
    seed: u64,
    init: InitPolicy,
    steps: u64,
) -> (Trace, WithRestart<LeProtocol>) {
    let d = graph.diameter().unwrap().max(1);
    let wrapped = WithRestart::new(LeProtocol::with_defaults(d).unwrap(), d).unwrap();
    let outcome = run(RunSpec {
        protocol: &wrapped,
        graph,
        scheduler: SchedulerKind::Synchronous,
        seed,
        init,
        stop: StopCondition::Steps(steps),
    })
    .unwrap();
    (outcome.trace, wrapped)
}

/// Steps (after the initial configuration) at which some node sits in a
/// restart state.
fn sigma_steps(trace: &Trace, wrapped: &WithRestart<LeProtocol>) -> Vec<usize> {
    trace
        .steps
        .iter()
        .enumerate()
        .filter(|(_, rec)| rec.states.iter().any(|&s| wrapped.sigma_index(s).is_some()))
        .map(|(i, _)| i + 1)
        .collect()
}

/// The per-node output bits, provided every node currently has an output.
fn leader_bits(states: &[u32], proto: &dyn Protocol) -> Option<Vec<i64>> {
    states.iter().map(|&s| proto.output(s)).collect()
}

#[test]
fn witness_flooding_reaches_distance_d_exactly() {
    // A path with the flag held at one end: the far node sits at distance
    // exactly D, so a flood one hop short would make it halt spuriously.
    let graph = Graph::path(4).unwrap();
    let d = graph.diameter().unwrap();
    let host = LeProtocol::with_defaults(d).unwrap();
    let state = |flag: bool| {
        host.encode(LeState::Compute {
            round: 0,
            flag,
            cand: false,
            coin: Coin::None,
            wf: flag,
            wc: false,
        })
        .unwrap()
    };
    let flagged = InitPolicy::Explicit(vec![state(true), state(false), state(false), state(false)]);
    let (trace, host) = run_bare(&graph, 7, flagged, d as u64);
    let last = &trace.steps.last().unwrap().states;
    assert!(
        last.iter().all(|&s| !host.decode(s).unwrap().is_verify()),
        "a set flag anywhere must keep the whole graph computing"
    );

    let blank = InitPolicy::Explicit(vec![state(false); 4]);
    let (trace, host) = run_bare(&graph, 7, blank, d as u64);
    let last = &trace.steps.last().unwrap().states;
    assert!(
        last.iter().all(|&s| host.decode(s).unwrap().is_verify()),
        "an empty flag witness must halt every node at the wrap"
    );
}

#[test]
fn clean_runs_keep_a_candidate_and_halt_simultaneously() {
    for (name, graph) in cases() {
        for seed in [1, 2, 3] {
            let (trace, host) = run_bare(&graph, seed, InitPolicy::AllInitial, 400);
            let mut leader_set: Option<Vec<bool>> = None;
            for (t, rec) in trace.steps.iter().enumerate() {
                let states: Vec<LeState> =
                    rec.states.iter().map(|&s| host.decode(s).unwrap()).collect();
                let round = states[0].round();
                assert!(
                    states.iter().all(|s| s.round() == round),
                    "{name} seed {seed}: round skew at step {}",
                    t + 1
                );
                let verifying = states.iter().filter(|s| s.is_verify()).count();
                if verifying == 0 {
                    assert!(
                        states
                            .iter()
                            .any(|s| matches!(s, LeState::Compute { cand: true, .. })),
                        "{name} seed {seed}: no candidate left at step {}",
                        t + 1
                    );
                } else {
                    assert_eq!(
                        verifying,
                        states.len(),
                        "{name} seed {seed}: stage split at step {}",
                        t + 1
                    );
                    let leaders: Vec<bool> = states.iter().map(|s| s.is_leader()).collect();
                    assert!(leaders.iter().any(|&l| l), "{name} seed {seed}: nobody won");
                    match &leader_set {
                        None => leader_set = Some(leaders),
                        Some(prev) => assert_eq!(
                            prev,
                            &leaders,
                            "{name} seed {seed}: leader set changed at step {}",
                            t + 1
                        ),
                    }
                }
            }
            assert!(leader_set.is_some(), "{name} seed {seed}: never halted in 400 steps");
        }
    }
}

#[test]
fn elections_stabilize_to_exactly_one_stable_leader() {
    for (name, graph) in cases() {
        for init in [InitPolicy::AllInitial, InitPolicy::RandomUniform] {
            for seed in [1, 2, 3] {
                let label = format!("{name} seed {seed} init {init:?}");
                let (trace, wrapped) = run_wrapped(&graph, seed, init.clone(), 800);
                let last = trace.steps.len();
                let final_bits = leader_bits(&trace.steps[last - 1].states, &wrapped)
                    .unwrap_or_else(|| panic!("{label}: nodes still undecided at the end"));
                assert_eq!(
                    final_bits.iter().filter(|&&b| b == 1).count(),
                    1,
                    "{label}: want exactly one leader, got {final_bits:?}"
                );
                for rec in &trace.steps[last - 60..] {
                    assert_eq!(
                        leader_bits(&rec.states, &wrapped).as_ref(),
                        Some(&final_bits),
                        "{label}: outputs changed inside the final window"
                    );
                }
            }
        }
    }
}

#[test]
fn a_leaderless_network_restarts_within_one_epoch() {
    let graph = Graph::cycle(5).unwrap();
    let d = graph.diameter().unwrap();
    let host = LeProtocol::with_defaults(d).unwrap();
    let blank = host.encode(LeState::Verify { round: 0, leader: false, seen: 0 }).unwrap();
    let (trace, wrapped) =
        run_wrapped(&graph, 5, InitPolicy::Explicit(vec![blank; 5]), 800);
    let sigmas = sigma_steps(&trace, &wrapped);
    assert!(
        sigmas.first().is_some_and(|&t| t <= d as usize + 1),
        "silence must be caught at the epoch wrap, first restart at {:?}",
        sigmas.first()
    );
    let final_bits = leader_bits(&trace.steps[trace.steps.len() - 1].states, &wrapped).unwrap();
    assert_eq!(final_bits.iter().filter(|&&b| b == 1).count(), 1);
}

#[test]
fn duplicate_leaders_are_detected_within_five_epochs() {
    for (graph, far) in [(Graph::path(4).unwrap(), 3usize), (Graph::cycle(5).unwrap(), 2)] {
        let d = graph.diameter().unwrap();
        let host = LeProtocol::with_defaults(d).unwrap();
        let n = graph.node_count();
        // Both impostors hold the same identifier, so detection has to wait
        // for an epoch whose redraws differ.
        let mut states =
            vec![host.encode(LeState::Verify { round: 0, leader: false, seen: 0 }).unwrap(); n];
        for v in [0, far] {
            states[v] =
                host.encode(LeState::Verify { round: 0, leader: true, seen: 2 }).unwrap();
        }
        for seed in [1, 2, 3, 4, 5, 6] {
            let (trace, wrapped) =
                run_wrapped(&graph, seed, InitPolicy::Explicit(states.clone()), 800);
            let sigmas = sigma_steps(&trace, &wrapped);
            assert!(
                sigmas.first().is_some_and(|&t| t <= 5 * d as usize),
                "n={n} seed {seed}: duplicate leaders still undetected after 5 epochs"
            );
            let final_bits =
                leader_bits(&trace.steps[trace.steps.len() - 1].states, &wrapped).unwrap();
            assert_eq!(final_bits.iter().filter(|&&b| b == 1).count(), 1, "n={n} seed {seed}");
        }
    }
}

#[test]
fn verification_stays_quiet_under_a_single_leader() {
    // Leader at one end of a path: the far node only ever sees the
    // identifier through the sensed check at the epoch's last round.
    let graph = Graph::path(4).unwrap();
    let d = graph.diameter().unwrap();
    let host = LeProtocol::with_defaults(d).unwrap();
    let mut states =
        vec![host.encode(LeState::Verify { round: 0, leader: false, seen: 0 }).unwrap(); 4];
    states[0] = host.encode(LeState::Verify { round: 0, leader: true, seen: 1 }).unwrap();
    let (trace, wrapped) =
        run_wrapped(&graph, 9, InitPolicy::Explicit(states), 10 * d as u64);
    assert!(
        sigma_steps(&trace, &wrapped).is_empty(),
        "a consistent single leader must never trip the detectors"
    );
    for rec in &trace.steps {
        let bits = leader_bits(&rec.states, &wrapped).unwrap();
        assert_eq!(bits, vec![1, 0, 0, 0]);
    }
}
