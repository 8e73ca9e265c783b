//! The product construction must hide a true synchronous execution of the
//! wrapped protocol: byte-exact lockstep with a directly-run synchronous
//! twin when the clocks tick together, a clean round replay under an
//! asynchronous fair scheduler, and correct task outputs at the end.

use flint_core::engine::{
    run, InitPolicy, Protocol, RunSpec, SchedulerKind, StateId, StopCondition, Trace,
};
use flint_core::le::LeProtocol;
use flint_core::mis::{MisProtocol, MisState};
use flint_core::restart::WithRestart;
use flint_core::synchronizer::{replay_rounds, ProductState, Synchronized};
use flint_core::topology::Graph;
use flint_core::unison::{Turn, UnisonProtocol};

/// A one-state protocol: wrapping it must reduce the product to a bare
/// unison clock with constant padding.
#[derive(Debug, Clone)]
struct Unit;

impl Protocol for Unit {
    fn name(&self) -> String {
        "unit".into()
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({})
    }

    fn state_count(&self) -> StateId {
        1
    }

    fn initial_state(&self) -> StateId {
        0
    }

    fn transition(
        &self,
        _: StateId,
        _: &flint_core::engine::Signal,
    ) -> Result<flint_core::engine::Choice, flint_core::engine::ProtocolError> {
        Ok(flint_core::engine::Choice::Det(0))
    }

    fn output(&self, _: StateId) -> Option<i64> {
        Some(0)
    }

    fn state_name(&self, _: StateId) -> String {
        "u".into()
    }

    fn parse_state(
        &self,
        name: &str,
    ) -> Result<StateId, flint_core::engine::ProtocolError> {
        if name == "u" {
            Ok(0)
        } else {
            Err(flint_core::engine::ProtocolError::ParseState(name.into(), "want u".into()))
        }
    }
}

fn run_product<P: Protocol>(
    sync: &Synchronized<P>,
    graph: &Graph,
    scheduler: SchedulerKind,
    seed: u64,
    steps: u64,
) -> Trace {
    let q0 = sync.pi().initial_state();
    let init = sync
        .encode(ProductState { current: q0, previous: q0, clock: Turn::Able(1) })
        .unwrap();
    run(RunSpec {
        protocol: sync,
        graph,
        scheduler,
        seed,
        init: InitPolicy::Explicit(vec![init; graph.node_count()]),
        stop: StopCondition::Steps(steps),
    })
    .unwrap()
    .trace
}

#[test]
fn a_one_state_protocol_reduces_to_the_bare_clock() {
    let graph = Graph::random_bounded_diameter(6, 2, 0.3, 5).unwrap();
    let d = graph.diameter().unwrap();
    let sync = Synchronized::new(Unit, d).unwrap();
    let clock = UnisonProtocol::new(d).unwrap();
    for (seed, scheduler) in [
        (3, SchedulerKind::Synchronous),
        (4, SchedulerKind::RandomFair { fair_window: 3 }),
    ] {
        let product = run_product(&sync, &graph, scheduler.clone(), seed, 300);
        let bare = run(RunSpec {
            protocol: &clock,
            graph: &graph,
            scheduler,
            seed,
            init: InitPolicy::Explicit(vec![clock.initial_state(); graph.node_count()]),
            stop: StopCondition::Steps(300),
        })
        .unwrap()
        .trace;
        for (p_rec, b_rec) in product.steps.iter().zip(&bare.steps) {
            assert_eq!(p_rec.activated, b_rec.activated, "schedulers diverged");
            for (p, b) in p_rec.states.iter().zip(&b_rec.states) {
                assert_eq!(
                    sync.decode(*p).unwrap().clock,
                    clock.turn_of(*b).unwrap(),
                    "clock coordinate diverged from the bare clock"
                );
            }
        }
    }
}

fn assert_synchronous_lockstep<P: Protocol>(sync: &Synchronized<P>, graph: &Graph, seed: u64) {
    let steps = 200;
    let product = run_product(sync, graph, SchedulerKind::Synchronous, seed, steps);
    let pi = sync.pi();
    let direct = run(RunSpec {
        protocol: pi,
        graph,
        scheduler: SchedulerKind::Synchronous,
        seed,
        init: InitPolicy::Explicit(vec![pi.initial_state(); graph.node_count()]),
        stop: StopCondition::Steps(steps),
    })
    .unwrap()
    .trace;
    for (i, (p_rec, d_rec)) in product.steps.iter().zip(&direct.steps).enumerate() {
        for (v, (p, d)) in p_rec.states.iter().zip(&d_rec.states).enumerate() {
            let got = sync.decode(*p).unwrap().current;
            assert_eq!(
                got,
                *d,
                "step {}: node {v} diverged from the direct run ({} vs {})",
                i + 1,
                pi.state_name(got),
                pi.state_name(*d)
            );
        }
    }
}

#[test]
fn synchronous_lockstep_matches_direct_runs_exactly() {
    let graphs = vec![
        Graph::path(3).unwrap(),
        Graph::cycle(5).unwrap(),
        Graph::random_bounded_diameter(8, 3, 0.2, 11).unwrap(),
    ];
    for graph in &graphs {
        let d = graph.diameter().unwrap().max(1);
        for seed in [1, 2, 3] {
            let mis = Synchronized::new(
                WithRestart::new(MisProtocol::with_defaults(d).unwrap(), d).unwrap(),
                d,
            )
            .unwrap();
            assert_synchronous_lockstep(&mis, graph, seed);
            let le = Synchronized::new(
                WithRestart::new(LeProtocol::with_defaults(d).unwrap(), d).unwrap(),
                d,
            )
            .unwrap();
            assert_synchronous_lockstep(&le, graph, seed);
        }
    }
}

#[test]
fn asynchronous_replay_reconstructs_clean_rounds() {
    let graph = Graph::cycle(5).unwrap();
    let d = graph.diameter().unwrap();
    for seed in [1, 2] {
        let le = Synchronized::new(
            WithRestart::new(LeProtocol::with_defaults(d).unwrap(), d).unwrap(),
            d,
        )
        .unwrap();
        let trace =
            run_product(&le, &graph, SchedulerKind::RandomFair { fair_window: 3 }, seed, 2000);
        let replay = replay_rounds(&le, &graph, &trace).unwrap();
        assert!(replay.violations.is_empty(), "seed {seed}: {:?}", replay.violations);
        assert!(
            replay.configs.len() > 50,
            "seed {seed}: only {} rounds reconstructed",
            replay.configs.len()
        );
        assert!(replay.checked_transitions > 100);
    }

    let graph = Graph::path(3).unwrap();
    let d = graph.diameter().unwrap();
    let mis = Synchronized::new(
        WithRestart::new(MisProtocol::with_defaults(d).unwrap(), d).unwrap(),
        d,
    )
    .unwrap();
    let trace =
        run_product(&mis, &graph, SchedulerKind::RandomFair { fair_window: 3 }, 7, 2000);
    let replay = replay_rounds(&mis, &graph, &trace).unwrap();
    assert!(replay.violations.is_empty(), "{:?}", replay.violations);
    assert!(replay.configs.len() > 50);
}

#[test]
fn asynchronous_products_reach_correct_task_outputs() {
    // Leader election behind the clock on a cycle.
    let graph = Graph::cycle(5).unwrap();
    let d = graph.diameter().unwrap();
    let le = Synchronized::new(
        WithRestart::new(LeProtocol::with_defaults(d).unwrap(), d).unwrap(),
        d,
    )
    .unwrap();
    let trace = run_product(&le, &graph, SchedulerKind::RandomFair { fair_window: 3 }, 5, 4000);
    let outputs: Option<Vec<i64>> =
        trace.steps.last().unwrap().states.iter().map(|&s| le.output(s)).collect();
    let outputs = outputs.expect("all nodes should hold an output");
    assert_eq!(outputs.iter().filter(|&&b| b == 1).count(), 1, "got {outputs:?}");

    // MIS behind the clock on a path.
    let graph = Graph::path(4).unwrap();
    let d = graph.diameter().unwrap();
    let mis_host = MisProtocol::with_defaults(d).unwrap();
    let mis = Synchronized::new(
        WithRestart::new(MisProtocol::with_defaults(d).unwrap(), d).unwrap(),
        d,
    )
    .unwrap();
    let trace = run_product(&mis, &graph, SchedulerKind::RandomFair { fair_window: 3 }, 6, 4000);
    let final_states = &trace.steps.last().unwrap().states;
    let decided: Vec<MisState> = final_states
        .iter()
        .map(|&s| {
            let q = mis.decode(s).unwrap().current;
            mis_host.decode(q).expect("no node should sit in a restart state at the end")
        })
        .collect();
    let is_in = |v: usize| matches!(decided[v], MisState::In { .. });
    for v in 0..graph.node_count() {
        match decided[v] {
            MisState::In { .. } => {
                assert!(!graph.neighbors(v as u16).iter().any(|&u| is_in(u as usize)))
            }
            MisState::Out { .. } => {
                assert!(graph.neighbors(v as u16).iter().any(|&u| is_in(u as usize)))
            }
            MisState::Undecided { .. } => panic!("node {v} still undecided"),
        }
    }
}
