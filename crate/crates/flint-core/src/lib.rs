//! Simulation and verification workbench for self-stabilizing protocols in
//! the stone-age model: anonymous nodes running randomized finite state
//! machines that sense only which states are present in their neighborhood.
//!
//! The crate is organized as a small engine ([`engine`]) over which the
//! individual protocols are written: an asynchronous unison clock
//! ([`unison`]), a restart wrapper ([`restart`]), maximal independent set
//! ([`mis`]), leader election ([`le`]), a synchronizer that runs a
//! synchronous protocol on top of the unison clock ([`synchronizer`]), and a
//! deliberately broken unison variant with a reproducible live-lock
//! ([`failed_unison`]). The [`verification`] module holds the property
//! checkers and step monitors used by both the test suite and the CLI, and
//! [`experiment`] drives seeded batches.

pub mod engine;
pub mod experiment;
pub mod failed_unison;
pub mod le;
pub mod mis;
pub mod restart;
pub mod synchronizer;
pub mod unison;
pub mod verification;
pub mod topology;
