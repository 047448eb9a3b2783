//! Event-driven simulation of the FIFO feedback queue.
//!
//! Ties between a service completion and an arrival are resolved in favour
//! of the completion: a fed-back customer rejoins the queue ahead of an
//! arrival that happens at the same instant.

mod busy;
mod harness;
mod tagged;

pub use busy::{
    regenerative_cycles, simulate_busy_period, simulate_cycle, BusyRecord, CycleOptions, CycleRecord, JumpAttribution,
};
pub use harness::{Accumulator, Harness, MeanAcc, RunStats};
pub use tagged::{simulate_tagged_first, simulate_tagged_forced, ForcedJump, TaggedOptions, TaggedTrace};

/// Default cap on events (services plus arrivals) in one replication.
pub const DEFAULT_EVENT_BUDGET: u64 = 100_000_000;
