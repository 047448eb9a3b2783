use proptest::prelude::*;

use super::*;
use crate::asymptotics::AsymptoteCurve;
use crate::dist::DistributionSpec;
use crate::model::ModelParams;
use crate::rng::RandomStream;
use crate::sim::{
    simulate_busy_period, simulate_cycle, simulate_tagged_first, CycleOptions, TaggedOptions, DEFAULT_EVENT_BUDGET,
};

fn params(arrival: &str, service: &str, p: f64) -> ModelParams {
    ModelParams::new(arrival.parse().unwrap(), service.parse().unwrap(), p).unwrap()
}

#[test]
fn counting_examples() {
    let est = estimate_tail([1.0, 2.0, 3.0], &[2.5]).unwrap();
    assert_eq!(est.hits, vec![1]);
    assert!((est.p_hat[0] - 1.0 / 3.0).abs() < 1e-15);
    let est = estimate_tail([4.0; 10], &[4.0]).unwrap();
    assert_eq!(est.p_hat, vec![0.0]);
    assert_eq!(
        estimate_tail([1.0, 5.0, 9.0, 5.0], &[0.0, 5.0, 8.0, 100.0])
            .unwrap()
            .hits,
        vec![4, 1, 1, 0]
    );
}

#[test]
fn counting_errors() {
    assert!(matches!(estimate_tail([1.0], &[]), Err(Error::EmptyGrid)));
    assert!(matches!(
        estimate_tail(std::iter::empty(), &[1.0]),
        Err(Error::EmptySample)
    ));
    assert!(matches!(estimate_tail([1.0], &[2.0, 1.0]), Err(Error::UnsortedGrid)));
    assert!(matches!(estimate_tail([1.0], &[1.0, 1.0]), Err(Error::UnsortedGrid)));
}

#[test]
fn wilson_interval_reference_values() {
    // 0 of 10: upper limit z²/(n + z²)
    let (lo, hi) = binomial_interval(0, 10, Z95);
    assert_eq!(lo, 0.0);
    assert!((hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
    // 5 of 10 is symmetric about 1/2
    let (lo, hi) = binomial_interval(5, 10, Z95);
    assert!((lo + hi - 1.0).abs() < 1e-12);
    assert!((hi - 0.7634).abs() < 1e-4);
    // normal branch
    let (lo, hi) = binomial_interval(100, 1000, Z95);
    let half = Z95 * (0.1f64 * 0.9 / 1000.0).sqrt();
    assert!((lo - (0.1 - half)).abs() < 1e-15 && (hi - (0.1 + half)).abs() < 1e-15);
}

#[test]
fn normal_quantiles() {
    assert!((normal_upper_quantile(0.025) - Z95).abs() < 1e-9);
    assert!((bonferroni_z(0.05, 1) - Z95).abs() < 1e-9);
    assert!((bonferroni_z(0.05, 12) - 2.8653).abs() < 1e-3);
}

#[test]
fn ratio_against_curve() {
    let est = estimate_tail([1.0, 2.0, 3.0, 4.0], &[0.5, 1.5, 2.5]).unwrap();
    let exact = est.p_hat.clone();
    let grid = est.x_grid.clone();
    let curve = AsymptoteCurve::new("table", "exact", "lookup", move |x| {
        exact[grid.iter().position(|&g| g == x).unwrap()]
    });
    let r = ratio_curve(&est, &curve).unwrap();
    assert!(r.ratio.unwrap().iter().all(|&v| v == 1.0));
    let zero = AsymptoteCurve::new("zero", "", "", |x| if x > 2.0 { 0.0 } else { 1.0 });
    assert!(matches!(ratio_curve(&est, &zero), Err(Error::ZeroPrediction { x }) if x == 2.5));
    let lenient = ratio_curve_lenient(&est, &zero);
    assert!(lenient.ratio.unwrap()[2].is_infinite());
}

#[test]
fn csv_columns() {
    let est = estimate_tail([1.0, 2.0], &[1.5]).unwrap();
    let mut buf = Vec::new();
    est.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,n,hits,p_hat,ci_low,ci_high,predicted,ratio");
    assert!(lines.next().unwrap().starts_with("1.5,2,1,0.5,"));
}

#[test]
fn wilson_coverage_on_pareto() {
    // exact tail at 6.0 is 0.1^{2.5}
    let g = DistributionSpec::pareto(2.5, 0.6).unwrap();
    let truth = g.tail(6.0);
    let harness = crate::sim::Harness::new(11, 0);
    let (covered, _) = harness
        .run(100, Vec::new, |acc: &mut Vec<bool>, stream| {
            let mut c = TailCounter::new(&[6.0]).unwrap();
            for _ in 0..1_000_000 {
                c.push(g.sample(stream));
            }
            let est = c.estimate().unwrap();
            acc.push(est.ci_low[0] <= truth && truth <= est.ci_high[0]);
            Ok(())
        })
        .unwrap();
    let hits = covered.iter().filter(|&&b| b).count();
    assert!(hits >= 93, "coverage {hits}/100");
}

#[test]
fn prefactor_estimates() {
    let opts = TaggedOptions::default();
    let p0 = params("exp(rate=0.2)", "pareto(2.5, 0.6)", 0.0);
    let mut stream = RandomStream::new(3, 0);
    let traces: Vec<_> = (0..1000)
        .map(|_| simulate_tagged_first(&p0, &mut stream, &opts).unwrap())
        .collect();
    assert_eq!(estimate_prefactor(&traces).unwrap(), (1.0, 0.0));

    let lonely = params("det(1e9)", "pareto(2.5, 0.6)", 0.5);
    let traces: Vec<_> = (0..1000)
        .map(|_| simulate_tagged_first(&lonely, &mut stream, &opts).unwrap())
        .collect();
    let (m, _) = estimate_prefactor(&traces).unwrap();
    assert!((m - 1.0).abs() < 1e-9);
    assert!(matches!(estimate_prefactor(&[]), Err(Error::EmptySample)));
}

#[test]
fn attribution_trivial_busy_period() {
    let p = params("det(1e9)", "det(1)", 0.0);
    let c = p.derive_constants().unwrap();
    let mut acc = AttributionCounter::new(&[0.5, 2.0], &c).unwrap();
    let mut stream = RandomStream::new(1, 0);
    for _ in 0..10 {
        acc.push_busy(&simulate_busy_period(&p, &mut stream, DEFAULT_EVENT_BUDGET).unwrap());
    }
    let rep = acc.report();
    assert_eq!(rep.rows[0].exceedances, 10);
    assert_eq!(rep.rows[0].fraction, Some(1.0));
    assert_eq!(rep.rows[1].exceedances, 0);
    assert_eq!(rep.rows[1].fraction, None);
    assert!(rep.offset_histogram.is_none());
}

#[test]
fn attribution_requires_cycle_attribution() {
    let p = params("exp(rate=0.2)", "pareto(2.5, 0.6)", 0.5);
    let c = p.derive_constants().unwrap();
    let mut acc = AttributionCounter::new(&[1.0], &c).unwrap();
    let mut stream = RandomStream::new(1, 0);
    let plain = simulate_cycle(&p, &mut stream, &CycleOptions::default()).unwrap();
    assert!(matches!(acc.push_cycle(&plain), Err(Error::MissingAttribution)));
    let rich = simulate_cycle(&p, &mut stream, &CycleOptions::with_attribution(&c)).unwrap();
    acc.push_cycle(&rich).unwrap();
    let rep = acc.report();
    let h = rep.offset_histogram.unwrap();
    assert_eq!(h[0].iter().sum::<u64>(), rep.rows[0].attributed);
    for r in &rep.rows {
        assert!(r.attributed <= r.exceedances);
    }
}

#[test]
fn regenerative_tail_matches_plain_count_point_estimate() {
    let p = params("exp(rate=0.2)", "pareto(2.5, 0.6)", 0.5);
    let grid = [1.0, 5.0, 20.0];
    let mut regen = RegenerativeTail::new(&grid).unwrap();
    let mut plain = TailCounter::new(&grid).unwrap();
    let mut stream = RandomStream::new(5, 0);
    for _ in 0..20_000 {
        let cyc = simulate_cycle(&p, &mut stream, &CycleOptions::default()).unwrap();
        regen.push(&cyc);
        cyc.sojourns.iter().for_each(|&s| plain.push(s));
    }
    let a = regen.estimate().unwrap();
    let b = plain.estimate().unwrap();
    assert_eq!(a.hits, b.hits);
    assert_eq!(a.n, b.n);
    for i in 0..grid.len() {
        // dependence within cycles can only widen the interval
        assert!(a.ci_low[i] <= b.ci_low[i] + 1e-15 && a.ci_high[i] >= b.ci_high[i] - 1e-15);
    }
}

#[test]
fn design_effect_counts_duplicated_customers() {
    let grid = [1.0];
    let mut single = RegenerativeTail::new(&grid).unwrap();
    let mut doubled = RegenerativeTail::new(&grid).unwrap();
    let mut stream = RandomStream::new(8, 0);
    for _ in 0..100_000 {
        let u = stream.uniform_open_closed() * 3.0;
        single.push_sojourns(&[u]);
        // two perfectly dependent customers carry one customer's information
        doubled.push_sojourns(&[u, u]);
    }
    let d1 = single.design_effects()[0].unwrap();
    let d2 = doubled.design_effects()[0].unwrap();
    assert!((d1 - 1.0).abs() < 1e-4, "{d1}");
    assert!((d2 - 2.0).abs() < 1e-3, "{d2}");
    let eff = doubled.effective_hits()[0];
    assert!((eff / single.effective_hits()[0] - 1.0).abs() < 1e-3);
}

#[test]
fn decomposition_needs_services() {
    let p = params("exp(rate=0.2)", "pareto(2.5, 0.6)", 0.5);
    let c = p.derive_constants().unwrap();
    let mut stream = RandomStream::new(2, 0);
    let lean = simulate_tagged_first(&p, &mut stream, &TaggedOptions::default()).unwrap();
    let mut acc = DecompositionCounter::new(10.0, &c, DecompositionGrid::default()).unwrap();
    assert!(matches!(acc.push(&lean), Err(Error::TraceTooLean)));
}

#[test]
fn decomposition_first_cell_and_structure() {
    let p = params("exp(rate=0.2)", "pareto(2.5, 0.6)", 0.5);
    let c = p.derive_constants().unwrap();
    let x = 8.0;
    let grid = DecompositionGrid {
        k_max: 3,
        l_max: 3,
        j_max: 8,
    };
    let opts = TaggedOptions {
        record_services: true,
        ..TaggedOptions::default()
    };
    let harness = crate::sim::Harness::new(9, 0);
    let (acc, _) = harness
        .run(
            400_000,
            || DecompositionCounter::new(x, &c, grid).unwrap(),
            |acc, stream| acc.push(&simulate_tagged_first(&p, stream, &opts)?),
        )
        .unwrap();
    let table = acc.table(&p).unwrap();
    assert!(table.cells.iter().all(|c| c.i <= c.j));
    assert!(table.covered <= table.exceedances);
    let first = table
        .cells
        .iter()
        .find(|c| (c.k, c.l, c.i, c.j) == (1, 0, 0, 0))
        .unwrap();
    // K = 1 and an empty queue: U is the one service, so U > x is exactly σ > x
    let expect = 400_000.0 * c.q * p.service.tail(x);
    let se = expect.sqrt();
    assert!(
        (first.empirical as f64 - expect).abs() < 4.0 * se,
        "{} vs {expect}",
        first.empirical
    );
    assert!((first.model - expect).abs() < 4.0 * se);
}

proptest! {
    #[test]
    fn estimate_is_permutation_invariant(mut v in prop::collection::vec(0.0f64..10.0, 1..200), seed in any::<u64>()) {
        let grid = [0.5, 2.0, 4.0, 9.5];
        let a = estimate_tail(v.iter().copied(), &grid).unwrap();
        let mut rng = RandomStream::new(seed, 0);
        for i in (1..v.len()).rev() {
            let j = (rng.uniform_open_closed() * (i + 1) as f64).ceil() as usize - 1;
            v.swap(i, j.min(i));
        }
        let b = estimate_tail(v.iter().copied(), &grid).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn merge_equals_concatenation(a in prop::collection::vec(0.0f64..10.0, 0..100), b in prop::collection::vec(0.0f64..10.0, 0..100)) {
        let grid = [1.0, 3.0, 7.0];
        let mut left = TailCounter::new(&grid).unwrap();
        a.iter().for_each(|&v| left.push(v));
        let mut right = TailCounter::new(&grid).unwrap();
        b.iter().for_each(|&v| right.push(v));
        left.merge(right);
        let mut all = TailCounter::new(&grid).unwrap();
        a.iter().chain(&b).for_each(|&v| all.push(v));
        prop_assert_eq!(left, all);
    }

    #[test]
    fn estimate_invariants(v in prop::collection::vec(0.0f64..10.0, 1..300)) {
        let est = estimate_tail(v, &[0.1, 1.0, 2.0, 5.0, 9.0]).unwrap();
        prop_assert!(est.hits.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..est.len() {
            prop_assert!(est.ci_low[i] <= est.p_hat[i] && est.p_hat[i] <= est.ci_high[i]);
        }
    }
}
