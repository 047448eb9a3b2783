//! Busy periods and regenerative cycles.
//!
//! A busy period starts with one arrival to an empty system and ends when the
//! system next empties. The cycle extends it up to the next arrival, which
//! finds the system empty again; with renewal arrivals such arrivals are
//! regeneration points, so cycles are i.i.d.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DerivedConstants, ModelParams};
use crate::rng::RandomStream;

use super::DEFAULT_EVENT_BUDGET;

#[derive(Clone, Debug, Serialize)]
pub struct BusyRecord {
    /// Busy-period length.
    pub length: f64,
    /// Distinct customers served.
    pub customers: u64,
    /// Individual services performed.
    pub services: u64,
    /// Total service received by each customer, in arrival order.
    pub compounded: Vec<f64>,
    pub max_single_service: f64,
}

impl BusyRecord {
    pub fn max_compounded(&self) -> f64 {
        self.compounded.iter().copied().fold(0.0, f64::max)
    }
}

/// Largest threshold explained by a single big compounded service for one
/// customer: `reach = max_n (σ^H_{−n} / (1 − ρ) − n·a)` over the customers
/// that arrived `n >= 0` arrivals before it in the same cycle, so that some
/// earlier customer's compounded service exceeds `(x + n·a)(1 − ρ)` exactly
/// when `x < reach`. `offset` is the maximising `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpAttribution {
    pub reach: f64,
    pub offset: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleRecord {
    pub n_customers: u64,
    /// Sojourn of each customer, in arrival order.
    pub sojourns: Vec<f64>,
    /// Time from the cycle's first arrival to the first arrival after it.
    pub cycle_length: f64,
    pub busy_length: f64,
    pub attribution: Option<Vec<JumpAttribution>>,
}

#[derive(Clone, Copy, Debug)]
pub struct CycleOptions {
    /// `(a, 1 − ρ)` when per-customer jump attribution is wanted.
    pub attribution: Option<(f64, f64)>,
    pub event_budget: u64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            attribution: None,
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

impl CycleOptions {
    pub fn with_attribution(consts: &DerivedConstants) -> Self {
        Self {
            attribution: Some((consts.a, 1.0 - consts.rho)),
            ..Self::default()
        }
    }
}

struct Customer {
    arrival: f64,
    departure: f64,
    compounded: f64,
}

struct Period {
    customers: Vec<Customer>,
    length: f64,
    services: u64,
    max_single: f64,
    next_arrival: f64,
}

fn run_period(params: &ModelParams, stream: &mut RandomStream, budget: u64) -> Result<Period> {
    let p = params.feedback_p;
    let mut customers = vec![Customer {
        arrival: 0.0,
        departure: f64::NAN,
        compounded: 0.0,
    }];
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut now = 0.0;
    let mut next_arrival = params.arrival.sample(stream);
    let mut services: u64 = 0;
    let mut events: u64 = 0;
    let mut max_single: f64 = 0.0;

    while let Some(c) = queue.pop_front() {
        let s = params.service.sample(stream);
        now += s;
        services += 1;
        customers[c].compounded += s;
        max_single = max_single.max(s);
        while next_arrival < now {
            queue.push_back(customers.len());
            customers.push(Customer {
                arrival: next_arrival,
                departure: f64::NAN,
                compounded: 0.0,
            });
            next_arrival += params.arrival.sample(stream);
            events += 1;
        }
        if stream.bernoulli(p) {
            queue.push_back(c);
        } else {
            customers[c].departure = now;
        }
        events += 1;
        if events > budget {
            return Err(Error::EventBudgetExceeded { budget });
        }
    }
    Ok(Period {
        customers,
        length: now,
        services,
        max_single,
        next_arrival,
    })
}

pub fn simulate_busy_period(params: &ModelParams, stream: &mut RandomStream, budget: u64) -> Result<BusyRecord> {
    let period = run_period(params, stream, budget)?;
    Ok(BusyRecord {
        length: period.length,
        customers: period.customers.len() as u64,
        services: period.services,
        compounded: period.customers.iter().map(|c| c.compounded).collect(),
        max_single_service: period.max_single,
    })
}

pub fn simulate_cycle(params: &ModelParams, stream: &mut RandomStream, opts: &CycleOptions) -> Result<CycleRecord> {
    let period = run_period(params, stream, opts.event_budget)?;
    let attribution = opts.attribution.map(|(a, one_minus_rho)| {
        let mut out = Vec::with_capacity(period.customers.len());
        let mut best = JumpAttribution {
            reach: f64::NEG_INFINITY,
            offset: 0,
        };
        for c in &period.customers {
            let own = c.compounded / one_minus_rho;
            let carried = best.reach - a;
            best = if own >= carried {
                JumpAttribution { reach: own, offset: 0 }
            } else {
                JumpAttribution {
                    reach: carried,
                    offset: best.offset + 1,
                }
            };
            out.push(best);
        }
        out
    });
    Ok(CycleRecord {
        n_customers: period.customers.len() as u64,
        sojourns: period.customers.iter().map(|c| c.departure - c.arrival).collect(),
        cycle_length: period.next_arrival,
        busy_length: period.length,
        attribution,
    })
}

/// `n` consecutive cycles drawn from a single stream.
pub fn regenerative_cycles<'a>(
    params: &'a ModelParams,
    stream: &'a mut RandomStream,
    n: usize,
    opts: CycleOptions,
) -> impl Iterator<Item = Result<CycleRecord>> + 'a {
    (0..n).map(move |_| simulate_cycle(params, stream, &opts))
}
