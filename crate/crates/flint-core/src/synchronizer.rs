//! Asynchronous wrapper for synchronous protocols: the product construction
//! that pairs every node's protocol state with a unison clock.
//!
//! A node of the product protocol holds `(current, previous, clock)`. The
//! clock coordinate runs the unison transition on every activation; the
//! protocol coordinates move only when the clock performs an able-to-able
//! advance, and then exactly one simulated synchronous step: `current` is
//! redrawn from the wrapped protocol's transition over the *simulated
//! signal*, and the old `current` is kept as `previous` for neighbors that
//! have not advanced yet. The simulated signal of a node advancing from
//! clock ν to ν′ contains a protocol state `r` iff some sensed product
//! state has the form `(r, ·, ν)` — a neighbor still on the old tick — or
//! `(·, r, ν′)` — a neighbor that already advanced and archived its old
//! state in the `previous` slot.
//!
//! Randomness couples cleanly to a direct synchronous run of the wrapped
//! protocol: the clock is deterministic, so a node's i-th consumed draw in
//! the product run is its i-th consumed draw in the direct run, and the
//! per-draw stream indexing of the engine makes the two runs byte-equal
//! under a synchronous schedule ([`replay_rounds`] checks the general,
//! asynchronous case).

use crate::engine::{Choice, Protocol, ProtocolError, Signal, StateId, Trace};
use crate::topology::Graph;
use crate::unison::{Turn, UnisonProtocol};
use serde_json::json;

/// A decoded product state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductState {
    pub current: StateId,
    pub previous: StateId,
    pub clock: Turn,
}

/// The product protocol wrapping `pi` with a unison clock of diameter
/// bound `d`.
#[derive(Debug, Clone)]
pub struct Synchronized<P> {
    pi: P,
    clock: UnisonProtocol,
}

impl<P: Protocol> Synchronized<P> {
    pub fn new(pi: P, d: u32) -> Result<Self, ProtocolError> {
        let clock = UnisonProtocol::new(d)?;
        let npi = pi.state_count() as u64;
        let total = npi * npi * clock.state_count() as u64;
        if total > u32::MAX as u64 {
            return Err(ProtocolError::InvalidParameter(format!(
                "product state space {total} does not fit a state id"
            )));
        }
        Ok(Self { pi, clock })
    }

    pub fn pi(&self) -> &P {
        &self.pi
    }

    pub fn clock(&self) -> &UnisonProtocol {
        &self.clock
    }

    pub fn encode(&self, s: ProductState) -> Result<StateId, ProtocolError> {
        let npi = self.pi.state_count();
        if s.current >= npi || s.previous >= npi {
            return Err(ProtocolError::StateOutOfRange(s.current.max(s.previous), npi));
        }
        let turn = self.clock.state_of(s.clock)?;
        Ok((s.current * npi + s.previous) * self.clock.state_count() + turn)
    }

    pub fn decode(&self, state: StateId) -> Result<ProductState, ProtocolError> {
        if state >= self.state_count() {
            return Err(ProtocolError::StateOutOfRange(state, self.state_count()));
        }
        let nt = self.clock.state_count();
        let clock = self.clock.turn_of(state % nt)?;
        let rest = state / nt;
        let npi = self.pi.state_count();
        Ok(ProductState { current: rest / npi, previous: rest % npi, clock })
    }

    fn sensed_products(&self, signal: &Signal) -> Result<Vec<ProductState>, ProtocolError> {
        signal.iter().map(|s| self.decode(s)).collect()
    }

    /// The simulated signal of a node advancing from clock `nu` to
    /// `nu_next`: same-tick neighbors contribute their current state,
    /// already-advanced neighbors their archived one, anything else
    /// nothing.
    pub fn simulated_signal(&self, sensed: &[ProductState], nu: Turn, nu_next: Turn) -> Signal {
        let mut states = Vec::new();
        for s in sensed {
            if s.clock == nu {
                states.push(s.current);
            }
            if s.clock == nu_next {
                states.push(s.previous);
            }
        }
        Signal::from_states(states)
    }
}

impl<P: Protocol> Protocol for Synchronized<P> {
    fn name(&self) -> String {
        format!("sync:{}", self.pi.name())
    }

    fn params(&self) -> serde_json::Value {
        json!({
            "d": self.clock.d(),
            "k": self.clock.k(),
            "pi": { "name": self.pi.name(), "params": self.pi.params() },
        })
    }

    fn state_count(&self) -> StateId {
        self.pi.state_count() * self.pi.state_count() * self.clock.state_count()
    }

    fn initial_state(&self) -> StateId {
        let q0 = self.pi.initial_state();
        self.encode(ProductState { current: q0, previous: q0, clock: Turn::Able(1) })
            .expect("initial product state is in range")
    }

    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
        let own = self.decode(state)?;
        let sensed = self.sensed_products(signal)?;
        let clocks: Vec<Turn> = sensed.iter().map(|s| s.clock).collect();
        let next_clock = self.clock.turn_transition(own.clock, &clocks)?;
        let advanced = own.clock.is_able() && next_clock.is_able() && next_clock != own.clock;
        if !advanced {
            return Ok(Choice::Det(self.encode(ProductState { clock: next_clock, ..own })?));
        }
        let sim = self.simulated_signal(&sensed, own.clock, next_clock);
        let product = |q: StateId| {
            self.encode(ProductState { current: q, previous: own.current, clock: next_clock })
        };
        Ok(match self.pi.transition(own.current, &sim)? {
            Choice::Det(q) => Choice::Det(product(q)?),
            Choice::Uniform(qs) => {
                Choice::Uniform(qs.into_iter().map(product).collect::<Result<_, _>>()?)
            }
            Choice::Weighted(qs) => Choice::Weighted(
                qs.into_iter()
                    .map(|(q, w)| Ok((product(q)?, w)))
                    .collect::<Result<_, ProtocolError>>()?,
            ),
        })
    }

    fn output(&self, state: StateId) -> Option<i64> {
        let s = self.decode(state).ok()?;
        if s.clock.is_able() {
            self.pi.output(s.current)
        } else {
            None
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.decode(state) {
            Ok(s) => format!(
                "({};{};{})",
                self.pi.state_name(s.current),
                self.pi.state_name(s.previous),
                self.clock.state_name(self.clock.state_of(s.clock).unwrap())
            ),
            Err(_) => format!("?{state}"),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        let err = |msg: &str| ProtocolError::ParseState(name.into(), msg.into());
        let inner = name
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| err("expected (current;previous;turn)"))?;
        let parts: Vec<&str> = inner.split(';').collect();
        let [cur, prev, turn] = parts.as_slice() else {
            return Err(err("expected exactly three ;-separated components"));
        };
        let clock_state = self.clock.parse_state(turn)?;
        self.encode(ProductState {
            current: self.pi.parse_state(cur)?,
            previous: self.pi.parse_state(prev)?,
            clock: self.clock.turn_of(clock_state)?,
        })
    }
}

/// One reconstructed protocol step of one node: its state before and after
/// the clock advance, and the simulated signal the advance used.
#[derive(Debug, Clone)]
struct AdvanceEvent {
    before: StateId,
    after: StateId,
    signal: Signal,
    step: usize,
}

/// Result of replaying a product trace as a synchronous execution of the
/// wrapped protocol.
#[derive(Debug)]
pub struct RoundReplay {
    /// `configs[i][v]` is node v's wrapped-protocol state entering its i-th
    /// simulated round; rows stop at the slowest node's round count.
    pub configs: Vec<Vec<StateId>>,
    /// Simulated-vs-synchronous signal comparisons performed.
    pub checked_transitions: usize,
    pub violations: Vec<String>,
}

/// Rebuilds the synchronous execution hidden inside a product trace and
/// cross-checks it, round by round, against what the product nodes actually
/// did. For every node the clock-advance events yield its protocol-state
/// sequence; row i of those sequences is the round-i configuration, whose
/// true signals must equal the simulated signals reconstructed from the
/// product configurations at each advance — and every sampled next state
/// must lie in the wrapped transition's support. Assumes the clock
/// coordinate is already stabilized (able-to-able advances only).
pub fn replay_rounds<P: Protocol>(
    sync: &Synchronized<P>,
    graph: &Graph,
    trace: &Trace,
) -> Result<RoundReplay, ProtocolError> {
    let n = graph.node_count();
    let mut violations = Vec::new();
    let mut events: Vec<Vec<AdvanceEvent>> = vec![Vec::new(); n];
    let mut config = trace.config_at(-1).to_vec();
    for (ix, rec) in trace.steps.iter().enumerate() {
        let step = ix + 1;
        for &v in &rec.activated {
            let v = v as usize;
            let pre = sync.decode(config[v])?;
            let post = sync.decode(rec.states[v])?;
            let advanced =
                pre.clock.is_able() && post.clock.is_able() && post.clock != pre.clock;
            if !advanced {
                if post.current != pre.current || post.previous != pre.previous {
                    violations.push(format!(
                        "step {step}: node {v} moved protocol coordinates without a clock advance"
                    ));
                }
                continue;
            }
            if post.previous != pre.current {
                violations.push(format!(
                    "step {step}: node {v} failed to archive its pre-advance state"
                ));
            }
            let mut sensed = Vec::new();
            for &u in graph.neighbors(v as u16) {
                sensed.push(sync.decode(config[u as usize])?);
            }
            sensed.push(pre);
            events[v].push(AdvanceEvent {
                before: pre.current,
                after: post.current,
                signal: sync.simulated_signal(&sensed, pre.clock, post.clock),
                step,
            });
        }
        config = rec.states.clone();
    }

    for (v, evs) in events.iter().enumerate() {
        for pair in evs.windows(2) {
            if pair[1].before != pair[0].after {
                violations.push(format!(
                    "step {}: node {v} changed protocol state between advances",
                    pair[1].step
                ));
            }
        }
    }

    let rounds = events.iter().map(|e| e.len()).min().unwrap_or(0);
    let mut configs = Vec::with_capacity(rounds);
    let mut checked = 0;
    for i in 0..rounds {
        let row: Vec<StateId> = (0..n).map(|v| events[v][i].before).collect();
        for v in 0..n {
            let mut states: Vec<StateId> =
                graph.neighbors(v as u16).iter().map(|&u| row[u as usize]).collect();
            states.push(row[v]);
            let true_signal = Signal::from_states(states);
            let ev = &events[v][i];
            if ev.signal != true_signal {
                violations.push(format!(
                    "round {i}: node {v} advanced on a simulated signal differing from the \
                     synchronous one (step {})",
                    ev.step
                ));
            }
            if !sync.pi.transition(ev.before, &true_signal)?.candidates().contains(&ev.after) {
                violations.push(format!(
                    "round {i}: node {v} sampled a state outside the transition support (step {})",
                    ev.step
                ));
            }
            checked += 1;
        }
        configs.push(row);
    }

    Ok(RoundReplay { configs, checked_transitions: checked, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Test protocol: state follows the minimum of the sensed states, so
    /// the chosen next state exposes which simulated signal was used.
    #[derive(Debug, Clone)]
    struct MinFollower {
        m: StateId,
    }

    impl Protocol for MinFollower {
        fn name(&self) -> String {
            "min-follower".into()
        }

        fn params(&self) -> serde_json::Value {
            json!({ "m": self.m })
        }

        fn state_count(&self) -> StateId {
            self.m
        }

        fn initial_state(&self) -> StateId {
            0
        }

        fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
            Ok(Choice::Det(signal.iter().min().unwrap_or(state)))
        }

        fn output(&self, state: StateId) -> Option<i64> {
            Some(state as i64)
        }

        fn state_name(&self, state: StateId) -> String {
            state.to_string()
        }

        fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
            name.parse()
                .ok()
                .filter(|&s| s < self.m)
                .ok_or_else(|| ProtocolError::ParseState(name.into(), "bad state".into()))
        }
    }

    fn sync() -> Synchronized<MinFollower> {
        Synchronized::new(MinFollower { m: 10 }, 1).unwrap()
    }

    #[test]
    fn codec_round_trips_every_state() {
        let s = sync();
        // 10 × 10 × (4·5−2)
        assert_eq!(s.state_count(), 1800);
        for id in 0..s.state_count() {
            let p = s.decode(id).unwrap();
            assert_eq!(s.encode(p).unwrap(), id);
            assert_eq!(s.parse_state(&s.state_name(id)).unwrap(), id);
        }
        assert!(s.decode(s.state_count()).is_err());
    }

    #[test]
    fn simulated_signal_selects_by_clock() {
        let s = sync();
        let nu = Turn::Able(1);
        let nu_next = Turn::Able(2);
        let sensed = vec![
            // Same tick: current counts.
            ProductState { current: 4, previous: 9, clock: nu },
            // Already advanced: archived state counts.
            ProductState { current: 7, previous: 2, clock: nu_next },
            // Anything else contributes nothing.
            ProductState { current: 0, previous: 0, clock: Turn::Able(-1) },
            ProductState { current: 1, previous: 1, clock: Turn::Faulty(2) },
        ];
        let sim = s.simulated_signal(&sensed, nu, nu_next);
        assert_eq!(sim, Signal::from_states(vec![4, 2]));
    }

    #[test]
    fn advance_steps_the_protocol_on_the_simulated_signal() {
        let s = sync();
        let own = ProductState { current: 6, previous: 6, clock: Turn::Able(1) };
        // One neighbor on the same tick, one a tick ahead: the clock rule
        // allows the advance, and the simulated signal is {6, 4, 3}.
        let nbr_same = ProductState { current: 4, previous: 9, clock: Turn::Able(1) };
        let nbr_ahead = ProductState { current: 8, previous: 3, clock: Turn::Able(2) };
        let signal = Signal::from_states(vec![
            s.encode(own).unwrap(),
            s.encode(nbr_same).unwrap(),
            s.encode(nbr_ahead).unwrap(),
        ]);
        let next = s.transition(s.encode(own).unwrap(), &signal).unwrap();
        let want = ProductState { current: 3, previous: 6, clock: Turn::Able(2) };
        assert_eq!(next, Choice::Det(s.encode(want).unwrap()));
    }

    #[test]
    fn lagging_neighbor_freezes_the_protocol_coordinates() {
        let s = sync();
        let own = ProductState { current: 6, previous: 5, clock: Turn::Able(2) };
        let behind = ProductState { current: 0, previous: 0, clock: Turn::Able(1) };
        let signal =
            Signal::from_states(vec![s.encode(own).unwrap(), s.encode(behind).unwrap()]);
        let next = s.transition(s.encode(own).unwrap(), &signal).unwrap();
        // The clock holds (a neighbor lags), so everything stays put.
        assert_eq!(next, Choice::Det(s.encode(own).unwrap()));
    }

    #[test]
    fn output_requires_an_able_clock() {
        let s = sync();
        let able = ProductState { current: 3, previous: 0, clock: Turn::Able(2) };
        let faulty = ProductState { current: 3, previous: 0, clock: Turn::Faulty(2) };
        assert_eq!(s.output(s.encode(able).unwrap()), Some(3));
        assert_eq!(s.output(s.encode(faulty).unwrap()), None);
    }

    #[test]
    fn oversized_products_are_rejected() {
        let big = MinFollower { m: 20_000 };
        assert!(Synchronized::new(big, 2).is_err());
    }
}
