//! Restart: a chain of `2D + 1` states that funnels every node into a
//! simultaneous fresh start.
//!
//! The chain states `σ(0) … σ(2D)` act as a wave: any node whose sensed set
//! mixes chain and non-chain states falls back to the entry `σ(0)`; a node
//! sensing only chain states climbs to one past the *minimum* sensed index;
//! and once a node senses exactly `{σ(2D)}` it exits into the host
//! protocol's designated initial state. Under a synchronous schedule this
//! guarantees that if any node is in a chain state at `t₀`, all nodes exit
//! concurrently at some `t ≤ t₀ + 3D` — which is what gives the host a
//! coordinated, clean configuration to restart from.
//!
//! The module is meaningful under synchronous schedules (it serves
//! synchronous hosts; asynchrony is the synchronizer's job, one layer up).

use crate::engine::{Choice, Protocol, ProtocolError, Signal, StateId};

/// A synchronous protocol that can be wrapped with the restart chain: a
/// regular [`Protocol`] plus a local fault detector.
pub trait Host: Protocol {
    /// True when the sensed host-configuration is locally inconsistent and
    /// the node must trigger a restart. `signal` contains host states only.
    fn fault(&self, state: StateId, signal: &Signal) -> Result<bool, ProtocolError>;
}

/// The combined protocol: host states `0..host.state_count()` followed by
/// the chain states `σ(0) … σ(2D)`.
pub struct WithRestart<H: Host> {
    host: H,
    d: u32,
}

impl<H: Host> WithRestart<H> {
    pub fn new(host: H, d: u32) -> Result<Self, ProtocolError> {
        if d == 0 {
            return Err(ProtocolError::InvalidParameter(
                "diameter bound d must be at least 1".into(),
            ));
        }
        // The chain occupies the `R<i>` name space; a host state that
        // parses as one would make trace round-trips ambiguous.
        for s in 0..host.state_count() {
            let name = host.state_name(s);
            if let Some(rest) = name.strip_prefix('R') {
                if let Ok(i) = rest.parse::<u32>() {
                    if i <= 2 * d {
                        return Err(ProtocolError::InvalidParameter(format!(
                            "host state {name:?} collides with restart state R{i}"
                        )));
                    }
                }
            }
        }
        Ok(Self { host, d })
    }

    pub fn host(&self) -> &H {
        &self.host
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn chain_len(&self) -> u32 {
        2 * self.d + 1
    }

    /// State id of `σ(i)`.
    pub fn sigma(&self, i: u32) -> StateId {
        debug_assert!(i <= 2 * self.d);
        self.host.state_count() + i
    }

    /// Chain index of a state, or `None` for host states.
    pub fn sigma_index(&self, state: StateId) -> Option<u32> {
        (state >= self.host.state_count()).then(|| state - self.host.state_count())
    }
}

impl<H: Host> Protocol for WithRestart<H> {
    fn name(&self) -> String {
        format!("{}-restart", self.host.name())
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "host": self.host.params(), "d": self.d })
    }

    fn state_count(&self) -> StateId {
        self.host.state_count() + self.chain_len()
    }

    fn initial_state(&self) -> StateId {
        self.host.initial_state()
    }

    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
        if state >= self.state_count() {
            return Err(ProtocolError::StateOutOfRange(state, self.state_count()));
        }
        let mut min_sigma: Option<u32> = None;
        let mut host_states: Vec<StateId> = Vec::new();
        for s in signal.iter() {
            if s >= self.state_count() {
                return Err(ProtocolError::StateOutOfRange(s, self.state_count()));
            }
            match self.sigma_index(s) {
                Some(i) => min_sigma = Some(min_sigma.map_or(i, |m| m.min(i))),
                None => host_states.push(s),
            }
        }

        match (min_sigma, host_states.is_empty()) {
            // Sensed set mixes chain and host states: back to the entry.
            (Some(_), false) => Ok(Choice::Det(self.sigma(0))),
            // Chain states only.
            (Some(min), true) => {
                if min == 2 * self.d {
                    // Everyone sensed is at the exit: leave the chain.
                    Ok(Choice::Det(self.host.initial_state()))
                } else {
                    Ok(Choice::Det(self.sigma(min + 1)))
                }
            }
            // Host states only; the chain is invisible here and the node
            // behaves as the (fault-guarded) host.
            (None, _) => {
                let host_signal = Signal::from_states(host_states);
                if self.host.fault(state, &host_signal)? {
                    Ok(Choice::Det(self.sigma(0)))
                } else {
                    self.host.transition(state, &host_signal)
                }
            }
        }
    }

    fn output(&self, state: StateId) -> Option<i64> {
        match self.sigma_index(state) {
            Some(_) => None,
            None => self.host.output(state),
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.sigma_index(state) {
            Some(i) => format!("R{i}"),
            None => self.host.state_name(state),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        if let Some(rest) = name.strip_prefix('R') {
            if let Ok(i) = rest.parse::<u32>() {
                if i <= 2 * self.d {
                    return Ok(self.sigma(i));
                }
                return Err(ProtocolError::ParseState(
                    name.into(),
                    format!("chain index exceeds 2D = {}", 2 * self.d),
                ));
            }
        }
        self.host.parse_state(name)
    }
}

/// A one-state host that never faults: the restart chain in isolation.
pub struct NullHost;

impl Protocol for NullHost {
    fn name(&self) -> String {
        "null".into()
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

    fn transition(&self, state: StateId, _signal: &Signal) -> Result<Choice, ProtocolError> {
        if state != 0 {
            return Err(ProtocolError::StateOutOfRange(state, 1));
        }
        Ok(Choice::Det(0))
    }

    fn output(&self, _state: StateId) -> Option<i64> {
        Some(0)
    }

    fn state_name(&self, _state: StateId) -> String {
        "Q".into()
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        if name == "Q" {
            Ok(0)
        } else {
            Err(ProtocolError::ParseState(name.into(), "expected Q".into()))
        }
    }
}

impl Host for NullHost {
    fn fault(&self, _state: StateId, _signal: &Signal) -> Result<bool, ProtocolError> {
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(states: &[StateId]) -> Signal {
        Signal::from_states(states.to_vec())
    }

    #[test]
    fn mixed_sensing_goes_to_entry() {
        let p = WithRestart::new(NullHost, 2).unwrap();
        // Host state sensing σ(3): rule for mixed sets applies.
        let next = p.transition(0, &sig(&[0, p.sigma(3)])).unwrap();
        assert_eq!(next, Choice::Det(p.sigma(0)));
        // Chain state sensing a host state: same.
        let next = p.transition(p.sigma(4), &sig(&[p.sigma(4), 0])).unwrap();
        assert_eq!(next, Choice::Det(p.sigma(0)));
    }

    #[test]
    fn chain_climbs_from_min_index() {
        let p = WithRestart::new(NullHost, 2).unwrap();
        let next = p
            .transition(p.sigma(4), &sig(&[p.sigma(3), p.sigma(4)]))
            .unwrap();
        assert_eq!(next, Choice::Det(p.sigma(4)));
        let next = p
            .transition(p.sigma(1), &sig(&[p.sigma(1), p.sigma(4)]))
            .unwrap();
        assert_eq!(next, Choice::Det(p.sigma(2)));
    }

    #[test]
    fn exit_only_on_pure_exit_sensing() {
        let p = WithRestart::new(NullHost, 2).unwrap();
        let next = p.transition(p.sigma(4), &sig(&[p.sigma(4)])).unwrap();
        assert_eq!(next, Choice::Det(0));
        // σ(2D) sensed together with a lower index keeps climbing instead.
        let next = p
            .transition(p.sigma(4), &sig(&[p.sigma(2), p.sigma(4)]))
            .unwrap();
        assert_eq!(next, Choice::Det(p.sigma(3)));
    }

    #[test]
    fn quiet_host_never_enters_chain() {
        let p = WithRestart::new(NullHost, 1).unwrap();
        let next = p.transition(0, &sig(&[0])).unwrap();
        assert_eq!(next, Choice::Det(0));
    }

    #[test]
    fn names_round_trip() {
        let p = WithRestart::new(NullHost, 2).unwrap();
        for s in 0..p.state_count() {
            assert_eq!(p.parse_state(&p.state_name(s)).unwrap(), s);
        }
        assert!(p.parse_state("R5").is_err());
        assert!(p.parse_state("X0").is_err());
    }
}
