//! The simulation loop.
//!
//! One step: the scheduler picks an activation set, every activated node
//! reads the *pre-step* signal of its inclusive neighborhood, draws a next
//! state from its transition distribution, and all updates land
//! simultaneously. Randomness is consumed strictly through per-node draw
//! streams indexed by how many draws that node has made so far, so two runs
//! that make the same sequence of decisions per node consume identical
//! random words regardless of when those decisions happen.

use rand::Rng;

use crate::topology::Graph;

use super::trace::{GraphHeader, StepRecord};
use super::{
    Choice, Protocol, ProtocolError, RngStreams, SchedulerKind, SchedulerState, Signal, StateId,
    Trace,
};

/// How the initial configuration is chosen.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// Every node starts in the protocol's designated initial state.
    AllInitial,
    /// Adversarial self-stabilization init: each node's state is drawn
    /// uniformly from the full state space (via the `Init` stream).
    RandomUniform,
    /// Explicit configuration, one state per node.
    Explicit(Vec<StateId>),
}

/// When to stop stepping.
pub enum StopCondition<'a> {
    /// After exactly this many steps.
    Steps(u64),
    /// After this many complete rounds.
    Rounds(usize),
    /// As soon as `predicate` has held at every step boundary throughout the
    /// last `window_rounds` complete rounds, or after `max_rounds` rounds,
    /// whichever comes first.
    PredicateWindow {
        predicate: Box<dyn Fn(&[StateId]) -> bool + 'a>,
        window_rounds: usize,
        max_rounds: usize,
    },
}

/// Why the run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    StepsExhausted,
    RoundsReached,
    /// The predicate window was satisfied.
    PredicateHeld,
    /// A non-cycling scripted schedule ran out of steps.
    ScriptExhausted,
}

pub struct RunSpec<'a> {
    pub protocol: &'a dyn Protocol,
    pub graph: &'a Graph,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub init: InitPolicy,
    pub stop: StopCondition<'a>,
}

pub struct RunOutcome {
    pub trace: Trace,
    pub reason: StopReason,
}

/// Execute a run to completion. Errors indicate a protocol contract
/// violation (bad explicit state, empty candidate set, internal
/// contradiction), never a property failure — those are the monitors' job.
pub fn run(spec: RunSpec<'_>) -> Result<RunOutcome, ProtocolError> {
    let n = spec.graph.node_count();
    let streams = RngStreams::new(spec.seed);
    let state_count = spec.protocol.state_count();

    let mut config: Vec<StateId> = match &spec.init {
        InitPolicy::AllInitial => vec![spec.protocol.initial_state(); n],
        InitPolicy::RandomUniform => (0..n)
            .map(|v| streams.init(v as u32).gen_range(0..state_count))
            .collect(),
        InitPolicy::Explicit(states) => {
            if states.len() != n {
                return Err(ProtocolError::InvalidParameter(format!(
                    "explicit init has {} states for {} nodes",
                    states.len(),
                    n
                )));
            }
            for &s in states {
                if s >= state_count {
                    return Err(ProtocolError::StateOutOfRange(s, state_count));
                }
            }
            states.clone()
        }
    };

    let header = GraphHeader {
        protocol: spec.protocol.name(),
        params: spec.protocol.params(),
        n,
        edges: spec.graph.edges().to_vec(),
        seed: spec.seed,
        scheduler: serde_json::to_value(&spec.scheduler)
            .expect("scheduler kinds serialize infallibly"),
        init: config.clone(),
    };

    let mut scheduler = SchedulerState::new(spec.scheduler, n);
    let mut draw_count: Vec<u64> = vec![0; n];
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut rounds = RoundTracker::new(n);
    // Predicate history for window stopping: step (or -1 for init) of the
    // most recent boundary where the predicate failed.
    let mut last_pred_failure: i64 = -1;
    if let StopCondition::PredicateWindow { predicate, .. } = &spec.stop {
        if !predicate(&config) {
            last_pred_failure = 0; // init counts against round 0
        }
    }

    let mut t: u64 = 0;
    let reason = loop {
        match &spec.stop {
            StopCondition::Steps(max) => {
                if t >= *max {
                    break StopReason::StepsExhausted;
                }
            }
            StopCondition::Rounds(max) => {
                if rounds.completed() >= *max {
                    break StopReason::RoundsReached;
                }
            }
            StopCondition::PredicateWindow {
                window_rounds,
                max_rounds,
                ..
            } => {
                let done = rounds.completed();
                if done >= *window_rounds {
                    let window_start_step = rounds.starts()[done - *window_rounds] as i64;
                    if last_pred_failure < window_start_step {
                        break StopReason::PredicateHeld;
                    }
                }
                if done >= *max_rounds {
                    break StopReason::RoundsReached;
                }
            }
        }

        let Some(activated) = scheduler.activations(t, &streams) else {
            break StopReason::ScriptExhausted;
        };

        // Everyone reads the pre-step configuration.
        let mut updates: Vec<(usize, StateId)> = Vec::with_capacity(activated.len());
        let mut draws: Vec<(u16, u32)> = Vec::new();
        for &v in &activated {
            let v = v as usize;
            let mut sensed: Vec<StateId> = Vec::with_capacity(1 + spec.graph.neighbors(v as u16).len());
            sensed.push(config[v]);
            sensed.extend(spec.graph.neighbors(v as u16).iter().map(|&u| config[u as usize]));
            let signal = Signal::from_states(sensed);
            let choice = spec.protocol.transition(config[v], &signal)?;
            let next = pick(&choice, v, &mut draw_count[v], &streams, &mut draws, config[v])?;
            if next >= state_count {
                return Err(ProtocolError::StateOutOfRange(next, state_count));
            }
            updates.push((v, next));
        }
        for (v, next) in updates {
            config[v] = next;
        }

        rounds.record(&activated, t);
        if let StopCondition::PredicateWindow { predicate, .. } = &spec.stop {
            if !predicate(&config) {
                last_pred_failure = t as i64 + 1;
            }
        }
        steps.push(StepRecord {
            t,
            activated,
            states: config.clone(),
            draws,
        });
        t += 1;
    };

    let trace = Trace {
        header,
        steps,
        round_starts: rounds.into_starts(),
    };
    Ok(RunOutcome { trace, reason })
}

/// Select a candidate from `choice`, consuming one word of the node's draw
/// stream only when there is a real decision to make (two or more
/// candidates).
fn pick(
    choice: &Choice,
    v: usize,
    draw_count: &mut u64,
    streams: &RngStreams,
    draws: &mut Vec<(u16, u32)>,
    current: StateId,
) -> Result<StateId, ProtocolError> {
    match choice {
        Choice::Det(s) => Ok(*s),
        Choice::Uniform(cands) => match cands.len() {
            0 => Err(ProtocolError::EmptyChoice { state: current }),
            1 => Ok(cands[0]),
            len => {
                let mut rng = streams.node_draw(v as u32, *draw_count);
                *draw_count += 1;
                let idx = rng.gen_range(0..len);
                draws.push((v as u16, idx as u32));
                Ok(cands[idx])
            }
        },
        Choice::Weighted(cands) => match cands.len() {
            0 => Err(ProtocolError::EmptyChoice { state: current }),
            1 => Ok(cands[0].0),
            _ => {
                let total: f64 = cands.iter().map(|(_, w)| *w).sum();
                if !(total > 0.0) || cands.iter().any(|(_, w)| *w < 0.0) {
                    return Err(ProtocolError::InvalidParameter(format!(
                        "weighted choice from state {current} has invalid weights"
                    )));
                }
                let mut rng = streams.node_draw(v as u32, *draw_count);
                *draw_count += 1;
                let x: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut idx = cands.len() - 1;
                for (i, (_, w)) in cands.iter().enumerate() {
                    acc += w;
                    if x < acc {
                        idx = i;
                        break;
                    }
                }
                draws.push((v as u16, idx as u32));
                Ok(cands[idx].0)
            }
        },
    }
}

/// Incremental round-boundary tracking, mirroring `compute_round_starts`.
struct RoundTracker {
    n: usize,
    starts: Vec<u64>,
    seen: Vec<bool>,
    remaining: usize,
}

impl RoundTracker {
    fn new(n: usize) -> Self {
        Self {
            n,
            starts: vec![0],
            seen: vec![false; n],
            remaining: n,
        }
    }

    fn record(&mut self, activated: &[u16], t: u64) {
        for &v in activated {
            if !self.seen[v as usize] {
                self.seen[v as usize] = true;
                self.remaining -= 1;
            }
        }
        if self.remaining == 0 {
            self.starts.push(t + 1);
            self.seen.iter_mut().for_each(|s| *s = false);
            self.remaining = self.n;
        }
    }

    fn completed(&self) -> usize {
        self.starts.len() - 1
    }

    fn starts(&self) -> &[u64] {
        &self.starts
    }

    fn into_starts(self) -> Vec<u64> {
        self.starts
    }
}
