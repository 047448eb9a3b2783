//! Sojourn of a tagged customer that arrives at time 0 to an empty system.
//!
//! Between two visits of the tagged customer to the server, exactly the
//! customers queued ahead of it are served once each, so the FIFO dynamics
//! reduce to a recursion on the queue length: the next queue consists of the
//! arrivals during the cycle plus those of the served customers that fed
//! back. Customer identities never matter, only counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::RandomStream;

use super::DEFAULT_EVENT_BUDGET;

#[derive(Clone, Copy, Debug)]
pub struct TaggedOptions {
    /// Keep every service time of every cycle (needed by decomposition counts).
    pub record_services: bool,
    /// Condition on the tagged customer making at least this many visits.
    pub min_visits: usize,
    pub event_budget: u64,
}

impl Default for TaggedOptions {
    fn default() -> Self {
        Self {
            record_services: false,
            min_visits: 1,
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

/// Replaces one service of the tagged customer's `cycle`-th visit by `size`.
/// `position` 0 is the tagged customer's own service; `i >= 1` is the `i`-th
/// customer served ahead of it in that cycle.
#[derive(Clone, Copy, Debug)]
pub struct ForcedJump {
    pub cycle: usize,
    pub position: usize,
    pub size: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaggedTrace {
    /// Number of visits to the server.
    pub k: usize,
    /// Duration of each visit cycle, from the previous completion to this one.
    pub cycles: Vec<f64>,
    /// Completion epoch of each visit.
    pub epochs: Vec<f64>,
    /// Customers queued ahead of the tagged customer at the start of each
    /// cycle (entries 0 to k-1; entry 0 is 0 on arrival to an empty system).
    pub queue: Vec<u64>,
    pub sojourn: f64,
    /// `services[c][0]` is the tagged customer's own service in cycle `c + 1`;
    /// `services[c][i]` the `i`-th service ahead of it.
    pub services: Option<Vec<Vec<f64>>>,
}

impl TaggedTrace {
    /// Total number of services the tagged customer waits through, its own included.
    pub fn total_services(&self) -> u64 {
        self.k as u64 + self.queue.iter().sum::<u64>()
    }

    /// Queue length at the start of the final visit.
    pub fn last_queue(&self) -> u64 {
        *self.queue.last().expect("trace has at least one cycle")
    }
}

pub fn simulate_tagged_first(
    params: &ModelParams,
    stream: &mut RandomStream,
    opts: &TaggedOptions,
) -> Result<TaggedTrace> {
    run(params, stream, opts, None)
}

/// Tagged trace with one service pinned to `jump.size`. The tagged customer is
/// conditioned to visit at least `max(jump.cycle, opts.min_visits)` times.
pub fn simulate_tagged_forced(
    params: &ModelParams,
    stream: &mut RandomStream,
    jump: ForcedJump,
    opts: &TaggedOptions,
) -> Result<TaggedTrace> {
    if jump.cycle == 0 {
        return Err(Error::invalid("cycle", "forced cycle index starts at 1"));
    }
    if !(jump.size > 0.0) {
        return Err(Error::invalid("size", "forced jump must be > 0"));
    }
    run(params, stream, opts, Some(jump))
}

fn run(
    params: &ModelParams,
    stream: &mut RandomStream,
    opts: &TaggedOptions,
    jump: Option<ForcedJump>,
) -> Result<TaggedTrace> {
    let p = params.feedback_p;
    let min_visits = opts.min_visits.max(jump.map_or(1, |j| j.cycle));

    let mut events: u64 = 0;
    let mut now = 0.0;
    let mut next_arrival = params.arrival.sample(stream);
    let mut ahead: u64 = 0;

    let mut trace = TaggedTrace {
        k: 0,
        cycles: Vec::new(),
        epochs: Vec::new(),
        queue: vec![0],
        sojourn: 0.0,
        services: opts.record_services.then(Vec::new),
    };

    loop {
        let visit = trace.k + 1;
        let forced_here = jump.filter(|j| j.cycle == visit);
        if let Some(j) = forced_here {
            if j.position as u64 > ahead {
                return Err(Error::ForcedIndexUnreachable {
                    cycle: j.cycle,
                    position: j.position,
                });
            }
        }
        let draw = |stream: &mut RandomStream, position: usize| match forced_here {
            Some(j) if j.position == position => j.size,
            _ => params.service.sample(stream),
        };

        let start = now;
        let mut cycle_len = 0.0;
        let mut cycle_services = opts.record_services.then(|| vec![0.0; ahead as usize + 1]);
        let mut returns: u64 = 0;
        for i in 1..=ahead {
            let s = draw(stream, i as usize);
            cycle_len += s;
            if let Some(v) = cycle_services.as_mut() {
                v[i as usize] = s;
            }
            if stream.bernoulli(p) {
                returns += 1;
            }
        }
        let own = draw(stream, 0);
        cycle_len += own;
        now = start + cycle_len;
        if let Some(v) = cycle_services.as_mut() {
            v[0] = own;
        }
        events += ahead + 1;

        let mut arrivals: u64 = 0;
        while next_arrival < now {
            arrivals += 1;
            next_arrival += params.arrival.sample(stream);
        }
        events += arrivals;
        if events > opts.event_budget {
            return Err(Error::EventBudgetExceeded {
                budget: opts.event_budget,
            });
        }

        trace.k = visit;
        trace.cycles.push(cycle_len);
        trace.epochs.push(now);
        if let (Some(all), Some(v)) = (trace.services.as_mut(), cycle_services) {
            all.push(v);
        }

        let stays = if visit < min_visits { true } else { stream.bernoulli(p) };
        if !stays {
            break;
        }
        ahead = arrivals + returns;
        trace.queue.push(ahead);
    }
    // epochs are running sums of the cycles, so this equals their sum exactly
    trace.sojourn = now;
    Ok(trace)
}
