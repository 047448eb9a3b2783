//! Simulator checks against closed forms of classical queues.

use tailq::sim::{
    regenerative_cycles, simulate_busy_period, simulate_tagged_first, CycleOptions, Harness, MeanAcc, TaggedOptions,
    DEFAULT_EVENT_BUDGET,
};
use tailq::{DistributionSpec, ModelParams, RandomStream};

fn model(arrival_rate: f64, service: DistributionSpec, p: f64) -> ModelParams {
    ModelParams::new(DistributionSpec::exponential(arrival_rate).unwrap(), service, p).unwrap()
}

fn m0() -> ModelParams {
    model(0.2, DistributionSpec::pareto(2.5, 0.6).unwrap(), 0.5)
}

fn assert_within(acc: &MeanAcc, target: f64, what: &str) {
    let z = (acc.mean() - target) / acc.std_error();
    assert!(
        z.abs() < 4.0,
        "{what}: {} ± {} vs {target}",
        acc.mean(),
        acc.std_error()
    );
}

#[test]
fn first_queue_length_is_lambda_b() {
    let params = m0();
    let opts = TaggedOptions {
        min_visits: 2,
        ..TaggedOptions::default()
    };
    let (acc, _) = Harness::new(1, 0)
        .run(1_000_000, MeanAcc::default, |acc, s| {
            acc.push(simulate_tagged_first(&params, s, &opts)?.queue[1] as f64);
            Ok(())
        })
        .unwrap();
    assert_within(&acc, 0.2, "E X_1");
}

#[test]
fn busy_period_customers_without_feedback() {
    // M/G/1: E τ = 1/(1 − ρ) = 1.25 at ρ = 0.2
    let params = model(0.2, DistributionSpec::pareto(2.5, 0.6).unwrap(), 0.0);
    let (acc, _) = Harness::new(2, 0)
        .run(1_000_000, MeanAcc::default, |acc, s| {
            acc.push(simulate_busy_period(&params, s, DEFAULT_EVENT_BUDGET)?.customers as f64);
            Ok(())
        })
        .unwrap();
    assert_within(&acc, 1.25, "E tau");
}

#[test]
fn mm1_mean_sojourn() {
    // M/M/1 with λ = 0.5, μ = 1: E U = 1/(μ − λ) = 2
    let params = model(0.5, DistributionSpec::exponential(1.0).unwrap(), 0.0);
    let mut stream = RandomStream::new(3, 0);
    let mut acc = MeanAcc::default();
    for cyc in regenerative_cycles(&params, &mut stream, 400_000, CycleOptions::default()) {
        cyc.unwrap().sojourns.iter().for_each(|&u| acc.push(u));
    }
    // customers within a cycle are correlated, so allow a generous band
    assert!((acc.mean() / 2.0 - 1.0).abs() < 0.02, "{}", acc.mean());
}

#[test]
fn mm1_with_feedback_mean_sojourn() {
    // exponential service with feedback: E U = (b/q)/(1 − ρ)
    let params = model(0.2, DistributionSpec::exponential(1.0).unwrap(), 0.5);
    let mut stream = RandomStream::new(4, 0);
    let mut acc = MeanAcc::default();
    for cyc in regenerative_cycles(&params, &mut stream, 300_000, CycleOptions::default()) {
        cyc.unwrap().sojourns.iter().for_each(|&u| acc.push(u));
    }
    let target = 2.0 / (1.0 - 0.4);
    assert!((acc.mean() / target - 1.0).abs() < 0.02, "{} vs {target}", acc.mean());
}

#[test]
fn replications_are_reproducible() {
    let params = m0();
    let run = |workers| {
        Harness::new(9, workers)
            .run(20_000, Vec::new, |acc: &mut Vec<f64>, s| {
                acc.push(simulate_tagged_first(&params, s, &TaggedOptions::default())?.sojourn);
                Ok(())
            })
            .unwrap()
            .0
    };
    let a = run(1);
    assert_eq!(a, run(2));
    let mut s = RandomStream::new(9, 777);
    assert_eq!(
        a[777],
        simulate_tagged_first(&params, &mut s, &TaggedOptions::default())
            .unwrap()
            .sojourn
    );
}
