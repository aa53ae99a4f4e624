//! Deterministic discrete-event kernel.
//!
//! A [`Simulation`] owns the clock and a priority queue of pending events.
//! Events that share a fire time dequeue in the order they were scheduled,
//! so a run is fully determined by its inputs and the seeds handed to
//! [`RngStream`].

mod queue;
mod rng;
mod time;

pub use queue::{EventHandle, RunSummary, SimEvent, Simulation};
pub use rng::RngStream;
pub use time::SimTime;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("causality violation: cannot schedule at {requested} when clock is at {now}")]
    Causality { requested: SimTime, now: SimTime },
    #[error("invalid simulation time {0}: must be finite and non-negative")]
    InvalidTime(f64),
}
