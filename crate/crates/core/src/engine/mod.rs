//! Deterministic discrete-event kernel: event queue, node clocks and packet
//! transit.
//!
//! A run is single-threaded. Independent runs share nothing and can execute
//! in parallel.

mod clock;
mod queue;
mod transit;

use thiserror::Error;

use crate::time::SimTime;

pub use clock::{capture_timestamp, true_offset, LocalClock};
pub use queue::Scheduler;
pub use transit::{transmit, JitterModel, JitterSource, PacketEnvelope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("cannot schedule at {due}, simulation time is already {now}")]
    SchedulingInPast { due: SimTime, now: SimTime },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
}
