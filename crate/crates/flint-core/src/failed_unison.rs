//! The reset-based unison attempt and its live-lock counterexample.
//!
//! The protocol splits each node's turn into a main component `0..=cD`
//! (driving the clock) and a reset component `X0..=XcD` (meant to restart
//! the clock after a fault): ST1 advances the main turn when the sensed
//! neighborhood sits within `{ℓ, ℓ+1}`, ST2 drops to `X0` when the sensed
//! turns leave the window `{ℓ−1, ℓ, ℓ+1}` (with `XcD` also tolerated at
//! `ℓ = 0`, where the reset wave is about to finish), and ST3 climbs the
//! reset ladder one rung per activation, exiting at `XcD` back to main
//! turn `0`.
//!
//! The design is broken: [`run_livelock_check`] replays the wheel
//! configuration on which a fair schedule rotates the reset wave around the
//! rim forever — every node is activated once per block of eight steps, yet
//! no main turn ever advances, and after seven blocks (56 steps) the system
//! returns to its exact starting configuration.

use crate::engine::{
    run, Choice, InitPolicy, Protocol, ProtocolError, RunSpec, SchedulerKind, Signal, StateId,
    StopCondition,
};
use crate::topology::{Graph, NodeId};
use serde_json::json;

/// A turn of the reset-based protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailedTurn {
    Main(u32),
    Reset(u32),
}

impl FailedTurn {
    pub fn is_reset(&self) -> bool {
        matches!(self, FailedTurn::Reset(_))
    }
}

impl std::fmt::Display for FailedTurn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailedTurn::Main(l) => write!(f, "{l}"),
            FailedTurn::Reset(i) => write!(f, "X{i}"),
        }
    }
}

/// How an activation treated a node's turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailedStep {
    /// No rule was enabled.
    Held,
    /// ST1: main turn advanced.
    Advanced,
    /// ST2: sensed a fault, dropped to the bottom reset turn.
    EnteredReset,
    /// ST3 clause 1: climbed one reset rung.
    ClimbedReset,
    /// ST3 clause 2: left the top reset turn for main turn 0.
    ExitedReset,
}

impl std::fmt::Display for FailedStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailedStep::Held => "held",
            FailedStep::Advanced => "advanced",
            FailedStep::EnteredReset => "entered reset",
            FailedStep::ClimbedReset => "climbed reset",
            FailedStep::ExitedReset => "exited reset",
        })
    }
}

/// The reset-based unison protocol with main turns `0..=c·d`.
#[derive(Debug, Clone)]
pub struct FailedUnison {
    c: u32,
    d: u32,
}

impl FailedUnison {
    pub fn new(c: u32, d: u32) -> Result<Self, ProtocolError> {
        if c < 2 {
            return Err(ProtocolError::InvalidParameter(format!(
                "the turn-count constant c must be at least 2, got {c}"
            )));
        }
        if d == 0 {
            return Err(ProtocolError::InvalidParameter(
                "diameter bound d must be at least 1".into(),
            ));
        }
        Ok(Self { c, d })
    }

    /// Largest turn value; turns run `0..=cd` in both components.
    pub fn cd(&self) -> u32 {
        self.c * self.d
    }

    /// Size of the main-chain value cycle, `cD + 1`.
    pub fn span(&self) -> u32 {
        self.cd() + 1
    }

    pub fn encode(&self, t: FailedTurn) -> Result<StateId, ProtocolError> {
        match t {
            FailedTurn::Main(l) if l < self.span() => Ok(l),
            FailedTurn::Reset(i) if i < self.span() => Ok(self.span() + i),
            _ => Err(ProtocolError::InvalidParameter(format!("turn {t:?} out of range"))),
        }
    }

    pub fn decode(&self, state: StateId) -> Result<FailedTurn, ProtocolError> {
        if state < self.span() {
            Ok(FailedTurn::Main(state))
        } else if state < 2 * self.span() {
            Ok(FailedTurn::Reset(state - self.span()))
        } else {
            Err(ProtocolError::StateOutOfRange(state, self.state_count()))
        }
    }

    /// The successor turn and which rule produced it.
    pub fn turn_transition(
        &self,
        own: FailedTurn,
        sensed: &[FailedTurn],
    ) -> (FailedTurn, FailedStep) {
        let span = self.span();
        match own {
            FailedTurn::Main(l) => {
                let next = (l + 1) % span;
                let prev = (l + span - 1) % span;
                if sensed.iter().all(|&t| t == FailedTurn::Main(l) || t == FailedTurn::Main(next))
                {
                    return (FailedTurn::Main(next), FailedStep::Advanced);
                }
                let tolerated = |t: FailedTurn| match t {
                    FailedTurn::Main(m) => m == l || m == next || m == prev,
                    FailedTurn::Reset(i) => l == 0 && i == self.cd(),
                };
                if sensed.iter().any(|&t| !tolerated(t)) {
                    return (FailedTurn::Reset(0), FailedStep::EnteredReset);
                }
                (own, FailedStep::Held)
            }
            FailedTurn::Reset(i) => {
                if i < self.cd() {
                    if sensed.iter().all(|&t| matches!(t, FailedTurn::Reset(j) if j >= i)) {
                        return (FailedTurn::Reset(i + 1), FailedStep::ClimbedReset);
                    }
                } else if sensed
                    .iter()
                    .all(|&t| t == FailedTurn::Reset(self.cd()) || t == FailedTurn::Main(0))
                {
                    return (FailedTurn::Main(0), FailedStep::ExitedReset);
                }
                (own, FailedStep::Held)
            }
        }
    }

    fn sensed_turns(&self, signal: &Signal) -> Result<Vec<FailedTurn>, ProtocolError> {
        signal.iter().map(|s| self.decode(s)).collect()
    }
}

impl Protocol for FailedUnison {
    fn name(&self) -> String {
        "failed-unison".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "c": self.c, "d": self.d })
    }

    fn state_count(&self) -> StateId {
        2 * self.span()
    }

    fn initial_state(&self) -> StateId {
        0
    }

    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
        let own = self.decode(state)?;
        let sensed = self.sensed_turns(signal)?;
        let (next, _) = self.turn_transition(own, &sensed);
        Ok(Choice::Det(self.encode(next)?))
    }

    fn output(&self, state: StateId) -> Option<i64> {
        match self.decode(state) {
            Ok(FailedTurn::Main(l)) => Some(l as i64),
            _ => None,
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.decode(state) {
            Ok(FailedTurn::Main(l)) => l.to_string(),
            Ok(FailedTurn::Reset(i)) => format!("X{i}"),
            Err(_) => format!("?{state}"),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        let err = |msg: &str| ProtocolError::ParseState(name.into(), msg.into());
        let turn = if let Some(rest) = name.strip_prefix('X') {
            FailedTurn::Reset(rest.parse().map_err(|_| err("bad reset index"))?)
        } else {
            FailedTurn::Main(name.parse().map_err(|_| err("bad main turn"))?)
        };
        self.encode(turn).map_err(|_| err("turn out of range"))
    }
}

/// The wheel instance on which the reset wave rotates forever: hub plus a
/// seven-node rim, `c = 2`, `D = 2`, and the reset ladder draped around the
/// rim with the hub stuck at the top rung.
pub fn build_livelock_instance() -> (Graph, FailedUnison, Vec<StateId>) {
    let graph = Graph::wheel(8).expect("wheel(8) is well-formed");
    let proto = FailedUnison::new(2, 2).expect("c=2, d=2 are valid");
    let turns = [
        FailedTurn::Reset(4), // hub
        FailedTurn::Main(0),
        FailedTurn::Main(0),
        FailedTurn::Reset(0),
        FailedTurn::Reset(1),
        FailedTurn::Reset(2),
        FailedTurn::Reset(3),
        FailedTurn::Reset(4),
    ];
    let config = turns.iter().map(|&t| proto.encode(t).unwrap()).collect();
    (graph, proto, config)
}

/// One activation of the counterexample replay.
#[derive(Debug, Clone)]
pub struct LivelockStep {
    pub step: usize,
    pub node: NodeId,
    pub before: FailedTurn,
    pub after: FailedTurn,
    pub kind: FailedStep,
}

/// Outcome of the 56-step counterexample replay.
#[derive(Debug)]
pub struct LivelockReport {
    /// The first block of eight activations, for display.
    pub first_block: Vec<LivelockStep>,
    /// ST1 transitions seen anywhere in the 56 steps (the live-lock means
    /// this stays zero although the schedule is fair).
    pub advances_seen: usize,
    /// Configuration after every block matched the expected rim rotation.
    pub rotations_ok: bool,
    /// The 56th step reproduced the initial configuration exactly.
    pub orbit_closed: bool,
    pub failures: Vec<String>,
}

impl LivelockReport {
    pub fn is_livelock(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Rim successor: nodes 1..=7 form the cycle, the hub 0 is fixed.
fn rotate_node(v: usize) -> usize {
    if v == 0 {
        0
    } else {
        (v % 7) + 1
    }
}

/// Replays the counterexample: seven blocks of eight single-node
/// activations. Block 0 activates `v0..v7` in order; each later block is
/// the previous one pushed backwards around the rim, tracking the rotated
/// configuration, so one full revolution (56 steps) must close the orbit.
/// The 56-step activation script: seven blocks of eight single-node
/// activations, each block's rim order shifted backwards with the wave.
pub fn livelock_script() -> Vec<Vec<NodeId>> {
    let mut script: Vec<Vec<NodeId>> = Vec::new();
    for block in 0..7 {
        script.push(vec![0]);
        for i in 1..=7usize {
            // s^{-block}(v_i): the rim activation order shifted with the wave.
            let node = (i + 6 - block) % 7 + 1;
            script.push(vec![node as NodeId]);
        }
    }
    script
}

pub fn run_livelock_check() -> LivelockReport {
    let (graph, proto, init) = build_livelock_instance();
    let n = graph.node_count();
    let outcome = run(RunSpec {
        protocol: &proto,
        graph: &graph,
        scheduler: SchedulerKind::Scripted { script: livelock_script(), cycle: false },
        seed: 0,
        init: InitPolicy::Explicit(init.clone()),
        stop: StopCondition::Steps(56),
    })
    .expect("the counterexample replay is a valid run");
    let trace = outcome.trace;

    let mut failures = Vec::new();
    let mut first_block = Vec::new();
    let mut advances_seen = 0;
    for (ix, rec) in trace.steps.iter().enumerate() {
        let pre = trace.config_at(ix as i64 - 1);
        let [node] = rec.activated.as_slice() else {
            failures.push(format!("step {}: expected a single activation", ix + 1));
            continue;
        };
        let v = *node as usize;
        let mut sensed: Vec<FailedTurn> = graph
            .neighbors(*node)
            .iter()
            .map(|&u| proto.decode(pre[u as usize]).unwrap())
            .collect();
        let before = proto.decode(pre[v]).unwrap();
        sensed.push(before);
        let (next, kind) = proto.turn_transition(before, &sensed);
        let after = proto.decode(rec.states[v]).unwrap();
        if next != after {
            failures.push(format!(
                "step {}: engine moved node v{v} to {after:?}, rules say {next:?}",
                ix + 1
            ));
        }
        if kind == FailedStep::Advanced {
            advances_seen += 1;
        }
        if ix < 8 {
            first_block.push(LivelockStep { step: ix + 1, node: *node, before, after, kind });
        }
    }

    // The first block must replay the published classification exactly.
    let expected: [(NodeId, FailedTurn, FailedStep); 8] = [
        (0, FailedTurn::Reset(4), FailedStep::Held),
        (1, FailedTurn::Main(0), FailedStep::Held),
        (2, FailedTurn::Reset(0), FailedStep::EnteredReset),
        (3, FailedTurn::Reset(1), FailedStep::ClimbedReset),
        (4, FailedTurn::Reset(2), FailedStep::ClimbedReset),
        (5, FailedTurn::Reset(3), FailedStep::ClimbedReset),
        (6, FailedTurn::Reset(4), FailedStep::ClimbedReset),
        (7, FailedTurn::Main(0), FailedStep::ExitedReset),
    ];
    for (got, want) in first_block.iter().zip(&expected) {
        if (got.node, got.after, got.kind) != *want {
            failures.push(format!(
                "step {}: expected node v{} to end at {:?} via {:?}, got v{} at {:?} via {:?}",
                got.step, want.0, want.1, want.2, got.node, got.after, got.kind
            ));
        }
    }

    // After block b+1 every node holds what its (b+1)-fold rim successor
    // held initially; after the seventh block that is the exact start.
    let mut rotations_ok = true;
    for block in 0..7 {
        let config = trace.config_at((8 * (block + 1)) as i64 - 1);
        for v in 0..n {
            let mut src = v;
            for _ in 0..=block {
                src = rotate_node(src);
            }
            if config[v] != init[src] {
                rotations_ok = false;
                failures.push(format!(
                    "block {}: node v{v} should hold v{src}'s initial turn",
                    block + 1
                ));
            }
        }
    }
    let orbit_closed = trace.config_at(55) == &init[..];
    if !orbit_closed {
        failures.push("the 56-step orbit did not return to the initial configuration".into());
    }
    if advances_seen > 0 {
        failures.push(format!(
            "{advances_seen} main-turn advances happened; the live-lock should allow none"
        ));
    }

    LivelockReport { first_block, advances_seen, rotations_ok, orbit_closed, failures }
}
