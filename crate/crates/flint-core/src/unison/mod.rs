//! Self-stabilizing asynchronous unison.
//!
//! Every node runs a clock over the `2k` levels (`k = 3D + 2`), ticking one
//! `φ`-step at a time. Each level `ℓ` has an *able* turn (the output state
//! announcing clock value `ℓ`) and, for `|ℓ| ≥ 2`, a *faulty* turn — a
//! non-output detour entered on detecting a clock discrepancy. Fault
//! recovery walks inwards along `ψ^{−1}` until the discrepancy is resolved,
//! closing clock gaps gradually instead of resetting.
//!
//! The protocol is deterministic; all its guards are functions of the node's
//! own turn and the sensed turn set.

mod levels;
pub mod predicates;

pub use levels::{Level, Levels};

use crate::engine::{Choice, Protocol, ProtocolError, Signal, StateId};

/// A protocol state: the turn tag plus its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Turn {
    Able(Level),
    Faulty(Level),
}

impl Turn {
    pub fn level(&self) -> Level {
        match *self {
            Turn::Able(l) | Turn::Faulty(l) => l,
        }
    }

    pub fn is_able(&self) -> bool {
        matches!(self, Turn::Able(_))
    }

    pub fn is_faulty(&self) -> bool {
        matches!(self, Turn::Faulty(_))
    }
}

/// The unison clock protocol for diameter bound `d`.
#[derive(Debug, Clone)]
pub struct UnisonProtocol {
    d: u32,
    levels: Levels,
    /// When false, the able-able rule skips its "good" guard. This exists
    /// solely to prove that the invariant monitors can catch a broken rule;
    /// see [`UnisonProtocol::without_good_guard`].
    good_guard: bool,
}

impl UnisonProtocol {
    /// `k = 3d + 2`; the state universe has `4k − 2` turns.
    pub fn new(d: u32) -> Result<Self, ProtocolError> {
        if d == 0 {
            return Err(ProtocolError::InvalidParameter(
                "diameter bound d must be at least 1".into(),
            ));
        }
        let k = 3 * d as i32 + 2;
        Ok(Self {
            d,
            levels: Levels::new(k)?,
            good_guard: true,
        })
    }

    /// Mutant used by the monitor sensitivity check: identical except that
    /// the able-able transition fires whenever `Λ ⊆ {ℓ, φ(ℓ)}`, without
    /// requiring the node to be good. With this guard gone, an able node can
    /// tick forward while a same-level neighbor recovers inwards, tearing a
    /// protected edge apart.
    pub fn without_good_guard(d: u32) -> Result<Self, ProtocolError> {
        let mut p = Self::new(d)?;
        p.good_guard = false;
        Ok(p)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> i32 {
        self.levels.k()
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    /// Dense encoding: the `2k` able turns in `φ`-cycle order, then the
    /// `2k − 2` faulty turns (positive magnitudes `2..=k`, then negative).
    pub fn state_of(&self, turn: Turn) -> Result<StateId, ProtocolError> {
        let k = self.levels.k();
        match turn {
            Turn::Able(l) => Ok(self.levels.cycle_index(l)? as StateId),
            Turn::Faulty(l) => {
                self.levels.check(l)?;
                if l.abs() < 2 {
                    return Err(ProtocolError::InvalidLevel(l, k));
                }
                let base = 2 * k as StateId;
                Ok(if l > 0 {
                    base + (l - 2) as StateId
                } else {
                    base + (k - 1) as StateId + (-l - 2) as StateId
                })
            }
        }
    }

    pub fn turn_of(&self, state: StateId) -> Result<Turn, ProtocolError> {
        let k = self.levels.k();
        let able = 2 * k as StateId;
        let faulty_half = (k - 1) as StateId;
        if state < able {
            Ok(Turn::Able(self.levels.from_cycle_index(state as i32)?))
        } else if state < able + faulty_half {
            Ok(Turn::Faulty((state - able) as i32 + 2))
        } else if state < able + 2 * faulty_half {
            Ok(Turn::Faulty(-((state - able - faulty_half) as i32 + 2)))
        } else {
            Err(ProtocolError::StateOutOfRange(state, able + 2 * faulty_half))
        }
    }

    /// Decode a signal into the sensed turn set.
    pub fn sensed_turns(&self, signal: &Signal) -> Result<Vec<Turn>, ProtocolError> {
        signal.iter().map(|s| self.turn_of(s)).collect()
    }

    /// The transition relation on decoded turns; `signal` must contain the
    /// node's own turn (signals are over inclusive neighborhoods).
    pub fn turn_transition(&self, own: Turn, sensed: &[Turn]) -> Result<Turn, ProtocolError> {
        let lv = &self.levels;
        let lambda = own.level();
        let mut sensed_levels: Vec<Level> = sensed.iter().map(|t| t.level()).collect();
        sensed_levels.sort_unstable();
        sensed_levels.dedup();

        let protected = sensed_levels
            .iter()
            .try_fold(true, |acc, &l| Ok::<_, ProtocolError>(acc && lv.adjacent(lambda, l)?))?;
        let senses_faulty = sensed.iter().any(Turn::is_faulty);
        let good = protected && !senses_faulty;

        match own {
            Turn::Able(l) => {
                let fwd = lv.forward(l)?;
                let aa_shape = sensed_levels.iter().all(|&x| x == l || x == fwd);
                let aa = aa_shape && (good || !self.good_guard);
                let af = l.abs() >= 2 && {
                    let inward = lv.outwards(l, -1)?;
                    !protected || sensed.contains(&Turn::Faulty(inward))
                };
                if self.good_guard && aa && af {
                    return Err(ProtocolError::Contradiction {
                        state: self.state_of(own)?,
                        detail: "able-able and able-faulty guards both hold".into(),
                    });
                }
                if aa {
                    Ok(Turn::Able(fwd))
                } else if af {
                    Ok(Turn::Faulty(l))
                } else {
                    Ok(own)
                }
            }
            Turn::Faulty(l) => {
                let outwards = lv.psi_gt(l)?;
                let fa = !sensed_levels.iter().any(|x| outwards.contains(x));
                if fa {
                    Ok(Turn::Able(lv.outwards(l, -1)?))
                } else {
                    Ok(own)
                }
            }
        }
    }
}

impl Protocol for UnisonProtocol {
    fn name(&self) -> String {
        if self.good_guard {
            "unison".into()
        } else {
            "unison-mutant".into()
        }
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "d": self.d, "k": self.levels.k(), "good_guard": self.good_guard })
    }

    fn state_count(&self) -> StateId {
        4 * self.levels.k() as StateId - 2
    }

    fn initial_state(&self) -> StateId {
        self.state_of(Turn::Able(1)).expect("able(1) always encodes")
    }

    fn transition(&self, state: StateId, signal: &Signal) -> Result<Choice, ProtocolError> {
        let own = self.turn_of(state)?;
        let sensed = self.sensed_turns(signal)?;
        let next = self.turn_transition(own, &sensed)?;
        Ok(Choice::Det(self.state_of(next)?))
    }

    fn output(&self, state: StateId) -> Option<i64> {
        match self.turn_of(state) {
            Ok(Turn::Able(l)) => Some(l as i64),
            _ => None,
        }
    }

    fn state_name(&self, state: StateId) -> String {
        match self.turn_of(state) {
            Ok(Turn::Able(l)) => format!("A{l:+}"),
            Ok(Turn::Faulty(l)) => format!("F{l:+}"),
            Err(_) => format!("?{state}"),
        }
    }

    fn parse_state(&self, name: &str) -> Result<StateId, ProtocolError> {
        let err = |msg: &str| ProtocolError::ParseState(name.into(), msg.into());
        let (able, rest) = if let Some(r) = name.strip_prefix('A') {
            (true, r)
        } else if let Some(r) = name.strip_prefix('F') {
            (false, r)
        } else {
            return Err(err("tag must be A or F"));
        };
        if !rest.starts_with(['+', '-']) {
            return Err(err("level must carry an explicit sign"));
        }
        let level: Level = rest
            .parse()
            .map_err(|_| err("expected a signed level after the tag"))?;
        let turn = if able { Turn::Able(level) } else { Turn::Faulty(level) };
        self.state_of(turn)
            .map_err(|_| err("level outside this protocol's range"))
    }
}
