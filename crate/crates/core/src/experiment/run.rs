use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind, Regime};
use crate::asymptotics::{
    m_k, poisson_busy_customers, poisson_prefactor, poisson_queue_mean, poisson_visit_prefactors, AsymptoteCurve,
    SeriesTruncation,
};
use crate::error::{Error, Result};
use crate::estimate::{
    ratio_curve_lenient, write_json_sidecar, AttributionCounter, DecompositionCounter, RegenerativeTail, ReportMeta,
    TailCounter, TailEstimate,
};
use crate::model::{DerivedConstants, ModelParams};
use crate::sim::{
    simulate_busy_period, simulate_cycle, simulate_tagged_first, simulate_tagged_forced, Accumulator, CycleOptions,
    ForcedJump, Harness, MeanAcc, RunStats, TaggedOptions,
};

/// Replication indices reserved for each sub-run of an experiment.
const STREAM_BLOCK: u64 = 1 << 40;

/// One `--check` verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub stats: RunStats,
}

impl ReportFiles {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Outcome {
    main: Vec<u8>,
    extras: Vec<(&'static str, Vec<u8>)>,
    summary: serde_json::Value,
    checks: Vec<Check>,
    stats: RunStats,
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    params: ModelParams,
    c: DerivedConstants,
    grid: Vec<f64>,
    harness: Harness,
}

/// Runs `config` and writes `<out>/<kind>.csv`, `<out>/<kind>.json` and any
/// kind-specific extra tables. Reports depend only on the config (worker
/// count excluded) and the build.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportFiles> {
    let config = config.clone().resolve()?;
    let params = config.params()?;
    let c = params.stable_constants()?;
    let grid = config.grid.points(c.b)?;
    let ctx = Ctx {
        config: &config,
        params,
        c,
        grid,
        harness: Harness::new(config.seed, config.workers),
    };
    let outcome = match config.kind {
        ExperimentKind::ValidateMeans => validate_means(&ctx)?,
        ExperimentKind::BusyTail | ExperimentKind::CountTail => busy(&ctx)?,
        ExperimentKind::Psbj if config.options.regime == Regime::Busy => busy(&ctx)?,
        ExperimentKind::Psbj | ExperimentKind::StationaryTail => stationary(&ctx)?,
        ExperimentKind::SojournTail => sojourn(&ctx)?,
        ExperimentKind::FiniteTk => finite_tk(&ctx)?,
        ExperimentKind::Decomposition => decomposition(&ctx)?,
        ExperimentKind::FluidCheck => fluid_check(&ctx)?,
    };

    std::fs::create_dir_all(&config.out)?;
    let name = config.kind.name();
    let mut files = Vec::new();
    let main = config.out.join(format!("{name}.csv"));
    std::fs::write(&main, &outcome.main)?;
    files.push(main);
    for (suffix, bytes) in &outcome.extras {
        let path = config.out.join(format!("{name}.{suffix}.csv"));
        std::fs::write(&path, bytes)?;
        files.push(path);
    }
    let mut summary = outcome.summary;
    summary["completed"] = json!(outcome.stats.completed);
    summary["dropped"] = json!(outcome.stats.dropped);
    summary["checks"] = json!(outcome.checks);
    if let Some(w) = ctx.params.diagnostic_warning() {
        summary["warning"] = json!(w);
    }
    let meta = ReportMeta::new(name, config.seed, &config, summary);
    let sidecar = config.out.join(format!("{name}.json"));
    write_json_sidecar(&sidecar, &meta)?;
    files.push(sidecar);
    Ok(ReportFiles {
        files,
        checks: outcome.checks,
        stats: outcome.stats,
    })
}

/// Element-wise running means.
#[derive(Clone, Debug, Default)]
struct MeanVec(Vec<MeanAcc>);

impl MeanVec {
    fn new(n: usize) -> Self {
        Self(vec![MeanAcc::default(); n])
    }
}

impl Accumulator for MeanVec {
    fn merge(&mut self, other: Self) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            a.merge(b);
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct MaxAcc(f64);

impl Accumulator for MaxAcc {
    fn merge(&mut self, other: Self) {
        self.0 = self.0.max(other.0);
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Count(u64);

impl Accumulator for Count {
    fn merge(&mut self, other: Self) {
        self.0 += other.0;
    }
}

fn to_csv<F: FnOnce(&mut Vec<u8>) -> Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn add_stats(a: RunStats, b: RunStats) -> RunStats {
    RunStats {
        completed: a.completed + b.completed,
        dropped: a.dropped + b.dropped,
    }
}

/// Where a constant fed into an asymptote came from.
fn pick(option: Option<f64>, closed: Option<f64>, estimated: f64) -> (f64, &'static str) {
    match (option, closed) {
        (Some(v), _) => (v, "config"),
        (None, Some(v)) => (v, "poisson closed form"),
        (None, None) => (estimated, "estimated from this run"),
    }
}

fn ratio_check(ctx: &Ctx, name: &str, est: &TailEstimate) -> Check {
    let [lo, hi] = ctx.config.options.ratio_band;
    let target = ctx.config.options.check_probability;
    match est.index_nearest(target) {
        Some(i) => {
            let ratio = est.ratio.as_ref().map_or(f64::NAN, |r| r[i]);
            Check {
                name: name.to_owned(),
                passed: ratio >= lo && ratio <= hi,
                detail: format!(
                    "x = {}, p_hat = {:.4e}, ratio = {ratio:.4}, band [{lo}, {hi}]",
                    est.x_grid[i], est.p_hat[i]
                ),
            }
        }
        None => Check {
            name: name.to_owned(),
            passed: false,
            detail: "no grid point has any exceedance".into(),
        },
    }
}

fn curve_json(curve: &AsymptoteCurve) -> serde_json::Value {
    json!({
        "label": curve.label,
        "formula": curve.description,
        "validity": curve.validity_note,
    })
}

fn tagged_options(ctx: &Ctx) -> TaggedOptions {
    TaggedOptions {
        event_budget: ctx.config.options.event_budget,
        ..TaggedOptions::default()
    }
}

fn validate_means(ctx: &Ctx) -> Result<Outcome> {
    let k_max = ctx.config.options.mean_k_max.max(1);
    let n = ctx.config.replications;
    let p = &ctx.params;

    // queue means need the tagged customer to stay for k_max visits; its own
    // coins do not enter the queue dynamics
    let conditioned = TaggedOptions {
        min_visits: k_max + 1,
        ..tagged_options(ctx)
    };
    let (queue, s1) = ctx.harness.run_offset(
        0,
        n,
        || MeanVec::new(k_max),
        |acc, s| {
            let t = simulate_tagged_first(p, s, &conditioned)?;
            for k in 1..=k_max {
                acc.0[k - 1].push(t.queue[k] as f64);
            }
            Ok(())
        },
    )?;
    let plain = tagged_options(ctx);
    let ((pre, total), s2) = ctx.harness.run_offset(
        STREAM_BLOCK,
        n,
        || (MeanAcc::default(), MeanAcc::default()),
        |acc, s| {
            let t = simulate_tagged_first(p, s, &plain)?;
            acc.0.push(1.0 + t.last_queue() as f64);
            acc.1.push(t.total_services() as f64);
            Ok(())
        },
    )?;

    let poisson = p.has_poisson_arrivals();
    let lb = ctx.c.lambda * ctx.c.b;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let target = poisson.then(|| poisson_queue_mean(&ctx.c, k as u32, lb));
        rows.push((format!("E(X_{k})"), queue.0[k - 1], target));
    }
    rows.push(("E(1+X_(K-1))".into(), pre, poisson.then(|| poisson_prefactor(&ctx.c))));
    rows.push((
        "E(K+Y_(K-1))".into(),
        total,
        poisson.then(|| crate::asymptotics::mean_total_services(&ctx.c, 0.0, 0.0)),
    ));

    #[derive(Serialize)]
    struct Row<'a> {
        quantity: &'a str,
        n: u64,
        empirical: f64,
        std_error: f64,
        target: Option<f64>,
        z_score: Option<f64>,
        pass: Option<bool>,
    }
    let mut checks = Vec::new();
    let main = to_csv(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        for (name, acc, target) in &rows {
            let z = target.map(|t| (acc.mean() - t) / acc.std_error());
            let pass = z.map(|z| z.abs() <= 3.0);
            if let (Some(t), Some(pass)) = (target, pass) {
                checks.push(Check {
                    name: name.clone(),
                    passed: pass,
                    detail: format!("{:.6} ± {:.6} vs {t:.6}", acc.mean(), acc.std_error()),
                });
            }
            w.serialize(Row {
                quantity: name,
                n: acc.n,
                empirical: acc.mean(),
                std_error: acc.std_error(),
                target: *target,
                z_score: z,
                pass,
            })
            .map_err(crate::estimate::csv_error)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Outcome {
        main,
        extras: Vec::new(),
        summary: json!({ "targets": if poisson { "closed form" } else { "none (non-Poisson input)" } }),
        checks,
        stats: add_stats(s1, s2),
    })
}

fn busy(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let budget = ctx.config.options.event_budget;
    type Acc = (
        (TailCounter, TailCounter, AttributionCounter),
        (MeanAcc, MeanAcc),
        MaxAcc,
    );
    let ((tails, means, worst), stats): (Acc, _) = ctx.harness.run(
        ctx.config.replications,
        || {
            (
                (
                    TailCounter::new(&ctx.grid).unwrap(),
                    TailCounter::new(&ctx.grid).unwrap(),
                    AttributionCounter::new(&ctx.grid, &ctx.c).unwrap(),
                ),
                (MeanAcc::default(), MeanAcc::default()),
                MaxAcc::default(),
            )
        },
        |acc, s| {
            let rec = simulate_busy_period(p, s, budget)?;
            acc.0 .0.push(rec.length);
            acc.0 .1.push(rec.customers as f64);
            acc.0 .2.push_busy(&rec);
            acc.1 .0.push(rec.customers as f64);
            for &h in &rec.compounded {
                acc.1 .1.push(h);
            }
            let total: f64 = rec.compounded.iter().sum();
            acc.2 .0 = acc.2 .0.max((rec.length - total).abs() / rec.length.max(1.0));
            Ok(())
        },
    )?;
    let (length, count, attribution) = tails;
    let (customers, compounded) = means;
    let closed = p.has_poisson_arrivals().then(|| poisson_busy_customers(&ctx.c));
    let (e_tau_h, source) = pick(ctx.config.options.e_tau_h, closed, customers.mean());

    let busy_curve = AsymptoteCurve::busy_period(*p, e_tau_h)?;
    let count_curve = AsymptoteCurve::busy_count(*p, e_tau_h)?;
    let length_est = ratio_curve_lenient(&length.estimate()?, &busy_curve);
    let count_est = ratio_curve_lenient(&count.estimate()?, &count_curve);
    let report = attribution.report();

    let mut checks = vec![Check {
        name: "work conservation".into(),
        passed: worst.0 <= 1e-9,
        detail: format!("max relative |B - sum of services| = {:.3e}", worst.0),
    }];
    let kind = ctx.config.kind;
    let (main, extras) = match kind {
        ExperimentKind::CountTail => {
            checks.push(ratio_check(ctx, "count tail ratio", &count_est));
            (
                to_csv(|b| count_est.write_csv(b))?,
                vec![("length", to_csv(|b| length_est.write_csv(b))?)],
            )
        }
        ExperimentKind::Psbj => (
            to_csv(|b| report.write_csv(b))?,
            vec![
                ("length", to_csv(|b| length_est.write_csv(b))?),
                ("count", to_csv(|b| count_est.write_csv(b))?),
            ],
        ),
        _ => {
            checks.push(ratio_check(ctx, "busy-period tail ratio", &length_est));
            (
                to_csv(|b| length_est.write_csv(b))?,
                vec![
                    ("count", to_csv(|b| count_est.write_csv(b))?),
                    ("attribution", to_csv(|b| report.write_csv(b))?),
                ],
            )
        }
    };
    if matches!(kind, ExperimentKind::Psbj | ExperimentKind::BusyTail) {
        checks.push(psbj_check(&report, 0.9));
    }
    let sigma_h_target = ctx.c.b_h;
    checks.push(Check {
        name: "compounded service mean".into(),
        passed: (compounded.mean() - sigma_h_target).abs() <= 3.0 * compounded.std_error(),
        detail: format!(
            "{:.5} ± {:.5} vs b/q = {sigma_h_target:.5}",
            compounded.mean(),
            compounded.std_error()
        ),
    });
    Ok(Outcome {
        main,
        extras,
        summary: json!({
            "x_grid": ctx.grid,
            "e_tau_h": e_tau_h,
            "e_tau_h_source": source,
            "customers_per_period": { "mean": customers.mean(), "std_error": customers.std_error() },
            "compounded_service": { "mean": compounded.mean(), "std_error": compounded.std_error() },
            "max_relative_work_error": worst.0,
            "curves": [curve_json(&busy_curve), curve_json(&count_curve)],
        }),
        checks,
        stats,
    })
}

fn psbj_check(report: &crate::estimate::AttributionReport, threshold: f64) -> Check {
    match report.deepest_with(200) {
        Some(row) => Check {
            name: "single big jump attribution".into(),
            passed: row.fraction.unwrap_or(0.0) >= threshold,
            detail: format!(
                "x = {}, {} of {} exceedances attributed (threshold {threshold})",
                row.x, row.attributed, row.exceedances
            ),
        },
        None => Check {
            name: "single big jump attribution".into(),
            passed: false,
            detail: "no grid point with 200 exceedances".into(),
        },
    }
}

fn sojourn(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let opts = tagged_options(ctx);
    let ((tail, pre), stats) = ctx.harness.run(
        ctx.config.replications,
        || (TailCounter::new(&ctx.grid).unwrap(), MeanAcc::default()),
        |acc, s| {
            let t = simulate_tagged_first(p, s, &opts)?;
            acc.0.push(t.sojourn);
            acc.1.push(1.0 + t.last_queue() as f64);
            Ok(())
        },
    )?;
    let closed = p.has_poisson_arrivals().then(|| poisson_prefactor(&ctx.c));
    let (prefactor, source) = pick(ctx.config.options.prefactor, closed, pre.mean());
    let curve = AsymptoteCurve::first_customer_sojourn(*p, prefactor, SeriesTruncation::default())?;
    let est = ratio_curve_lenient(&tail.estimate()?, &curve);
    let checks = vec![ratio_check(ctx, "sojourn tail ratio", &est)];
    Ok(Outcome {
        main: to_csv(|b| est.write_csv(b))?,
        extras: Vec::new(),
        summary: json!({
            "x_grid": ctx.grid,
            "prefactor": prefactor,
            "prefactor_source": source,
            "prefactor_estimate": { "mean": pre.mean(), "std_error": pre.std_error() },
            "curve": curve_json(&curve),
        }),
        checks,
        stats,
    })
}

fn finite_tk(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let k = ctx.config.options.k.max(1);
    let opts = TaggedOptions {
        min_visits: k,
        ..tagged_options(ctx)
    };
    let ((tail, queue), stats) = ctx.harness.run(
        ctx.config.replications,
        || (TailCounter::new(&ctx.grid).unwrap(), MeanVec::new(k)),
        |acc, s| {
            let t = simulate_tagged_first(p, s, &opts)?;
            acc.0.push(t.epochs[k - 1]);
            for j in 0..k {
                acc.1 .0[j].push(1.0 + t.queue[j] as f64);
            }
            Ok(())
        },
    )?;
    let (prefactors, source) = if p.has_poisson_arrivals() {
        (poisson_visit_prefactors(&ctx.c, k), "poisson closed form")
    } else {
        (queue.0.iter().map(MeanAcc::mean).collect(), "estimated from this run")
    };
    let curve = AsymptoteCurve::finite_visit(*p, k, prefactors.clone())?;
    let est = ratio_curve_lenient(&tail.estimate()?, &curve);
    let checks = vec![ratio_check(ctx, &format!("T_{k} tail ratio"), &est)];
    Ok(Outcome {
        main: to_csv(|b| est.write_csv(b))?,
        extras: Vec::new(),
        summary: json!({
            "x_grid": ctx.grid,
            "k": k,
            "prefactors": prefactors,
            "prefactor_source": source,
            "curve": curve_json(&curve),
        }),
        checks,
        stats,
    })
}

fn stationary(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let opts = CycleOptions {
        event_budget: ctx.config.options.event_budget,
        ..CycleOptions::with_attribution(&ctx.c)
    };
    let ((tail, attribution), stats) = ctx.harness.run(
        ctx.config.replications,
        || {
            (
                RegenerativeTail::new(&ctx.grid).unwrap(),
                AttributionCounter::new(&ctx.grid, &ctx.c).unwrap(),
            )
        },
        |acc, s| {
            let cycle = simulate_cycle(p, s, &opts)?;
            acc.0.push(&cycle);
            acc.1.push_cycle(&cycle)
        },
    )?;
    let curve = AsymptoteCurve::stationary_sojourn(*p, SeriesTruncation::default())?;
    let est = ratio_curve_lenient(&tail.estimate()?, &curve);
    let report = attribution.report();
    let tail_csv = to_csv(|b| est.write_csv(b))?;
    let attr_csv = to_csv(|b| report.write_csv(b))?;
    let offsets_csv = to_csv(|b| report.write_offsets_csv(b))?;
    let mut checks = Vec::new();
    let (main, extras) = if ctx.config.kind == ExperimentKind::Psbj {
        checks.push(psbj_check(&report, 0.85));
        (attr_csv, vec![("offsets", offsets_csv), ("tail", tail_csv)])
    } else {
        checks.push(ratio_check(ctx, "stationary tail ratio", &est));
        (tail_csv, vec![("attribution", attr_csv), ("offsets", offsets_csv)])
    };
    Ok(Outcome {
        main,
        extras,
        summary: json!({
            "x_grid": ctx.grid,
            "cycles": tail.cycles(),
            "customers": tail.customers(),
            "curve": curve_json(&curve),
        }),
        checks,
        stats,
    })
}

fn decomposition(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let x = ctx.config.options.x.unwrap_or(20.0 * ctx.c.b);
    let grid = ctx.config.options.decomposition;
    let opts = TaggedOptions {
        record_services: true,
        ..tagged_options(ctx)
    };
    let (counter, stats) = ctx.harness.run(
        ctx.config.replications,
        || DecompositionCounter::new(x, &ctx.c, grid).unwrap(),
        |acc, s| acc.push(&simulate_tagged_first(p, s, &opts)?),
    )?;
    let table = counter.table(p)?;
    let coverage = table.coverage();
    let mut checks = vec![Check {
        name: "decomposition coverage".into(),
        passed: coverage.is_some_and(|c| c >= 0.85),
        detail: format!("{} of {} exceedances fall in a cell", table.covered, table.exceedances),
    }];
    let heavy: Vec<_> = table.cells.iter().filter(|c| c.empirical >= 100).collect();
    let bad = heavy
        .iter()
        .filter(|c| !(c.model > 0.0) || !(0.5..=2.0).contains(&(c.empirical as f64 / c.model)))
        .count();
    checks.push(Check {
        name: "decomposition cells".into(),
        passed: bad == 0 && !heavy.is_empty(),
        detail: format!("{} of {} cells with >= 100 hits outside [0.5, 2]", bad, heavy.len()),
    });
    let closed = p.has_poisson_arrivals().then(|| poisson_prefactor(&ctx.c));
    let predicted = closed.map(|pre| {
        crate::asymptotics::first_customer_sojourn_tail(p, pre, x, &SeriesTruncation::default()).unwrap_or(f64::NAN)
    });
    Ok(Outcome {
        main: to_csv(|b| table.write_csv(b))?,
        extras: Vec::new(),
        summary: json!({
            "x": x,
            "grid": grid,
            "n": table.n,
            "exceedances": table.exceedances,
            "covered": table.covered,
            "coverage": coverage,
            "empirical_cell_total": table.empirical_total(),
            "model_cell_total": table.model_total,
            "first_customer_asymptote_times_n": predicted.map(|v| v * table.n as f64),
        }),
        checks,
        stats,
    })
}

fn fluid_check(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.params;
    let o = &ctx.config.options;
    let k = o.k.max(1);
    let ells = o.ell_max;
    let y = o.y_over_b * ctx.c.b;
    let jump = ForcedJump {
        cycle: k,
        position: o.i,
        size: y,
    };
    let opts = TaggedOptions {
        min_visits: k + ells,
        ..tagged_options(ctx)
    };
    let ((means, unreachable), stats) = ctx.harness.run(
        ctx.config.replications,
        || (MeanVec::new(ells + 1), Count::default()),
        |acc, s| match simulate_tagged_forced(p, s, jump, &opts) {
            Ok(t) => {
                for l in 0..=ells {
                    acc.0 .0[l].push(t.epochs[k - 1 + l] / y);
                }
                Ok(())
            }
            Err(Error::ForcedIndexUnreachable { .. }) => {
                acc.1 .0 += 1;
                Ok(())
            }
            Err(e) => Err(e),
        },
    )?;

    #[derive(Serialize)]
    struct Row {
        ell: usize,
        n: u64,
        mean_epoch_over_y: f64,
        std_error: f64,
        target: f64,
        relative_error: f64,
    }
    let mut checks = Vec::new();
    let main = to_csv(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        for (l, acc) in means.0.iter().enumerate() {
            let target = 1.0 + m_k(&ctx.c, l as u32);
            let rel = acc.mean() / target - 1.0;
            checks.push(Check {
                name: format!("T_{}/y", k + l),
                passed: rel.abs() <= 0.05,
                detail: format!("{:.5} vs 1 + m_{l} = {target:.5}", acc.mean()),
            });
            w.serialize(Row {
                ell: l,
                n: acc.n,
                mean_epoch_over_y: acc.mean(),
                std_error: acc.std_error(),
                target,
                relative_error: rel,
            })
            .map_err(crate::estimate::csv_error)?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(Outcome {
        main,
        extras: Vec::new(),
        summary: json!({
            "y": y,
            "cycle": k,
            "position": o.i,
            "unreachable": unreachable.0,
        }),
        checks,
        stats,
    })
}
