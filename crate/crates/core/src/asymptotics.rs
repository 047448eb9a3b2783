//! Closed-form means and tail asymptotes of the feedback queue.
//!
//! Every tail function here is an asymptotic equivalent as `x → ∞`, not a
//! bound. Infinite geometric series are truncated once the remaining terms,
//! bounded by the largest possible term times the geometric remainder, fall
//! below `rel_tol` of the partial sum.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::{DerivedConstants, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesTruncation {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

/// `Σ_{k≥1} ratio^{k−1} term(k)` for `0 <= term(k) <= bound`.
pub(crate) fn geometric_sum(
    ratio: f64,
    bound: f64,
    trunc: &SeriesTruncation,
    term: impl Fn(usize) -> f64,
) -> (f64, usize) {
    let mut total = 0.0;
    let mut weight = 1.0;
    for k in 1..=trunc.max_terms.max(1) {
        total += weight * term(k);
        weight *= ratio;
        // weight is now ratio^k
        let remainder = if ratio < 1.0 {
            bound * weight / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if remainder <= trunc.rel_tol * total || remainder == 0.0 {
            return (total, k);
        }
    }
    (total, trunc.max_terms)
}

/// Fluid multiplier `λb(1 − r^k)/(1 − r)`: mean queue behind a customer after
/// `k` visits when it starts alone, and the extra sojourn per unit of a big
/// service accumulated over `k` further visits.
pub fn m_k(c: &DerivedConstants, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    // ratio first, so that m_1 is λb to the last bit
    c.lambda * c.b * ((1.0 - c.r.powi(k as i32)) / (1.0 - c.r))
}

/// Mean queue behind the tagged customer at its `k`-th completion under
/// Poisson input, given the mean `ex1` after the first.
pub fn poisson_queue_mean(c: &DerivedConstants, k: u32, ex1: f64) -> f64 {
    assert!(k >= 1, "queue means start at k = 1");
    let rk = c.r.powi(k as i32 - 1);
    (1.0 - rk) / (1.0 - c.r) * c.lambda * c.b + ex1 * rk
}

/// `E(1 + X_{K−1})` for a customer arriving to an empty system, Poisson input.
pub fn poisson_prefactor(c: &DerivedConstants) -> f64 {
    c.q * (1.0 + c.p) / (1.0 - c.r * c.p)
}

/// `E(K + Y_{K−1})`: the mean number of services the tagged customer sits
/// through, Poisson input, given the mean initial queue `ex0` and mean
/// initial workload `eu0`.
pub fn mean_total_services(c: &DerivedConstants, ex0: f64, eu0: f64) -> f64 {
    let lb = c.lambda * c.b;
    let ex1 = c.lambda * (c.b + eu0) + c.p * ex0;
    1.0 / c.q
        + ex0
        + lb * c.p / ((1.0 - c.r) * c.q)
        + ((1.0 - c.r) * ex1 - lb) / ((1.0 - c.r) * (1.0 - c.p * c.r)) * c.p
}

/// Sojourn tail of a customer arriving to an empty system:
/// `(1/q) · prefactor · Σ_{k≥1} q p^{k−1} Ḡ(x / (1 + m_{k−1}))`.
///
/// `prefactor` is `E(1 + X_{K−1})`; [`poisson_prefactor`] gives it for
/// Poisson input, otherwise it has to be estimated by simulation.
pub fn first_customer_sojourn_tail(
    params: &ModelParams,
    prefactor: f64,
    x: f64,
    trunc: &SeriesTruncation,
) -> Result<f64> {
    let c = params.stable_constants()?;
    let g = &params.service;
    let bound = g.tail(x / (1.0 + c.m_inf));
    let (s, _) = geometric_sum(c.p, bound, trunc, |k| g.tail(x / (1.0 + m_k(&c, k as u32 - 1))));
    Ok(prefactor * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RvConstants {
    /// `Σ_{k≥0} q p^k (1 + m_k)^{shape}`: `P((1 + m_{K−1})σ > x) ~ scaling · Ḡ(x)`.
    pub scaling: f64,
    /// Constant `C` of `P(U > x) ~ C·L(x)/x^{shape}` under Poisson input.
    pub poisson_c: f64,
    pub shape: f64,
}

pub fn sojourn_rv_constant(params: &ModelParams) -> Result<RvConstants> {
    sojourn_rv_constant_with(params, &SeriesTruncation::default())
}

pub fn sojourn_rv_constant_with(params: &ModelParams, trunc: &SeriesTruncation) -> Result<RvConstants> {
    let c = params.stable_constants()?;
    let shape = params
        .service
        .rv_exponent()
        .ok_or_else(|| Error::RvRequired(params.service.to_string()))?;
    let lb = c.lambda * c.b;
    // (1 − (p + r^k λb)) = (1 + m_k)(1 − r)
    let raw = |k: usize| (1.0 - (c.p + c.r.powi(k as i32 - 1) * lb)).powf(shape);
    let bound = (1.0 - c.p).powf(shape);
    let (s, _) = geometric_sum(c.p, bound, trunc, raw);
    let one_minus_r_pow = (1.0 - c.r).powf(shape);
    Ok(RvConstants {
        scaling: c.q * s / one_minus_r_pow,
        poisson_c: c.q * (1.0 + c.p) / (one_minus_r_pow * (1.0 - c.r * c.p)) * s,
        shape,
    })
}

/// Tail of the `k`-th completion epoch,
/// `Σ_{ℓ=0}^{k−1} prefactors[k−ℓ−1] · Ḡ(x / (1 + m_ℓ))`, with
/// `prefactors[j] = E(1 + X_j)`. With an exceptional first service `η`, the
/// `ℓ = k−1` term becomes `P(η > x / (1 + m_{k−1}))`.
pub fn finite_visit_tail(
    params: &ModelParams,
    k: usize,
    prefactors: &[f64],
    x: f64,
    exceptional: Option<&DistributionSpec>,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "visit index starts at 1"));
    }
    if prefactors.len() < k {
        return Err(Error::invalid(
            "prefactors",
            format!("need {k} entries, got {}", prefactors.len()),
        ));
    }
    let c = params.stable_constants()?;
    let g = &params.service;
    let mut total = 0.0;
    for l in 0..k {
        let scaled = x / (1.0 + m_k(&c, l as u32));
        total += match exceptional {
            Some(eta) if l == k - 1 => eta.tail(scaled),
            _ => prefactors[k - l - 1] * g.tail(scaled),
        };
    }
    Ok(total)
}

/// Prefactors `E(1 + X_j)`, `j = 0..k`, for Poisson input from an empty system.
pub fn poisson_visit_prefactors(c: &DerivedConstants, k: usize) -> Vec<f64> {
    (0..k).map(|j| 1.0 + m_k(c, j as u32)).collect()
}

/// Sojourn tail of a customer arriving to the stationary queue:
/// `(q/(a−b)) Σ_{k≥1} p^{k−1} [Ḡ_I(x_k) + b(1−q)/(aq−b) · Ḡ_I(x_k·a/b)]`
/// with `x_k = x(1−r)/(1−r^k)`.
pub fn stationary_sojourn_tail(params: &ModelParams, x: f64, trunc: &SeriesTruncation) -> Result<f64> {
    let c = params.stable_constants()?;
    let g = &params.service;
    let coeff = c.b * (1.0 - c.q) / (c.a * c.q - c.b);
    let x_k = |k: usize| x * (1.0 - c.r) / (1.0 - c.r.powi(k as i32));
    let term = |k: usize| {
        let xk = x_k(k);
        g.raw_integrated_tail(xk).min(1.0) + coeff * g.raw_integrated_tail(xk * c.a / c.b).min(1.0)
    };
    let x_inf = x * (1.0 - c.r);
    let bound = g.raw_integrated_tail(x_inf).min(1.0) + coeff * g.raw_integrated_tail(x_inf * c.a / c.b).min(1.0);
    let (s, _) = geometric_sum(c.p, bound, trunc, term);
    Ok(c.q / (c.a - c.b) * s)
}

/// Regularly varying form of [`stationary_sojourn_tail`]:
/// `L(x)/x^α · q(1−r)^{−α}/(α(a−b)) · (1 + b(1−q)/(aq−b)·(b/a)^α) · Σ_{k≥1} p^{k−1}(1−r^k)^α`
/// with `α = shape − 1`.
pub fn stationary_sojourn_tail_rv(params: &ModelParams, x: f64, trunc: &SeriesTruncation) -> Result<f64> {
    let c = params.stable_constants()?;
    let shape = params
        .service
        .rv_exponent()
        .ok_or_else(|| Error::RvRequired(params.service.to_string()))?;
    let alpha = shape - 1.0;
    let l = params.service.slowly_varying(x).expect("regularly varying law");
    let coeff = c.b * (1.0 - c.q) / (c.a * c.q - c.b);
    let (s, _) = geometric_sum(c.p, 1.0, trunc, |k| (1.0 - c.r.powi(k as i32)).powf(alpha));
    Ok(
        l / x.powf(alpha) * c.q * (1.0 - c.r).powf(-alpha) / (alpha * (c.a - c.b))
            * (1.0 + coeff * (c.b / c.a).powf(alpha))
            * s,
    )
}

/// Tail of a compounded service `σ^H`, replaced by its subexponential
/// equivalent `Ḡ(y)/q`.
fn compounded_tail(params: &ModelParams, c: &DerivedConstants, y: f64) -> f64 {
    (params.service.tail(y) / c.q).min(1.0)
}

/// Busy-period tail `E(τ^H) · H̄(x(1 − ρ))`.
pub fn busy_period_tail(params: &ModelParams, e_tau_h: f64, x: f64) -> Result<f64> {
    let c = params.stable_constants()?;
    Ok(e_tau_h * compounded_tail(params, &c, x * (1.0 - c.rho)))
}

/// Tail of the number of customers in a busy period, `E(τ^H) · H̄(x(a − b/q))`.
pub fn busy_count_tail(params: &ModelParams, e_tau_h: f64, x: f64) -> Result<f64> {
    let c = params.stable_constants()?;
    Ok(e_tau_h * compounded_tail(params, &c, x * (c.a - c.b_h)))
}

/// `E(τ^H) = 1/(1 − ρ)` for Poisson input.
pub fn poisson_busy_customers(c: &DerivedConstants) -> f64 {
    1.0 / (1.0 - c.rho)
}

/// Stationary sojourn tail of the queue without feedback whose services are
/// the compounded services: `λ/(q(1 − ρ)) · Ḡ_I(x)`.
pub fn no_feedback_stationary_tail(params: &ModelParams, x: f64) -> Result<f64> {
    let c = params.stable_constants()?;
    Ok(c.lambda / (c.q * (1.0 - c.rho)) * params.service.integrated_tail(x)?)
}

/// Tail of the maximum of a random walk with increment mean `−m` whose
/// increments have (positive part) law `increments`: `F̄_I(x) / m`.
pub fn rw_max_tail(m: f64, increments: &DistributionSpec, x: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::invalid("m", "drift must be negative (m > 0)"));
    }
    Ok(increments.integrated_tail(x)? / m)
}

/// A predicted tail curve `x ↦ P(· > x)`.
#[derive(Clone)]
pub struct AsymptoteCurve {
    pub label: String,
    pub validity_note: String,
    /// Formula and parameters, for report headers.
    pub description: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for AsymptoteCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsymptoteCurve")
            .field("label", &self.label)
            .field("validity_note", &self.validity_note)
            .finish()
    }
}

const ASYMPTOTIC: &str = "asymptotic as x -> inf; not a bound";
const KESTEN: &str = "asymptotic as x -> inf; not a bound; Kesten substitution H(y) = G(y)/q";

impl AsymptoteCurve {
    pub fn new(
        label: impl Into<String>,
        validity_note: impl Into<String>,
        description: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            validity_note: validity_note.into(),
            description: description.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn first_customer_sojourn(params: ModelParams, prefactor: f64, trunc: SeriesTruncation) -> Result<Self> {
        params.stable_constants()?;
        Ok(Self::new(
            "first-customer sojourn",
            ASYMPTOTIC,
            format!(
                "(1/q) E(1+X_(K-1)) P((1+m_(K-1)) sigma > x); E(1+X_(K-1)) = {prefactor}; {}",
                describe(&params)
            ),
            move |x| first_customer_sojourn_tail(&params, prefactor, x, &trunc).unwrap_or(f64::NAN),
        ))
    }

    pub fn first_customer_sojourn_rv(params: ModelParams, prefactor: f64) -> Result<Self> {
        let rv = sojourn_rv_constant(&params)?;
        let q = params.stable_constants()?.q;
        let constant = prefactor / q * rv.scaling;
        Ok(Self::new(
            "first-customer sojourn, regularly varying form",
            ASYMPTOTIC,
            format!("C L(x) / x^{}; C = {constant}; {}", rv.shape, describe(&params)),
            move |x| constant * params.service.slowly_varying(x).unwrap() / x.powf(rv.shape),
        ))
    }

    pub fn finite_visit(params: ModelParams, k: usize, prefactors: Vec<f64>) -> Result<Self> {
        params.stable_constants()?;
        if prefactors.len() < k || k == 0 {
            return Err(Error::invalid("prefactors", format!("need {k} entries")));
        }
        Ok(Self::new(
            format!("completion epoch T_{k}"),
            ASYMPTOTIC,
            format!(
                "sum_l E(1+X_(k-l-1)) G(x/(1+m_l)); prefactors = {prefactors:?}; {}",
                describe(&params)
            ),
            move |x| finite_visit_tail(&params, k, &prefactors, x, None).unwrap_or(f64::NAN),
        ))
    }

    pub fn stationary_sojourn(params: ModelParams, trunc: SeriesTruncation) -> Result<Self> {
        params.stable_constants()?;
        Ok(Self::new(
            "stationary sojourn",
            ASYMPTOTIC,
            format!(
                "(q/(a-b)) sum_k p^(k-1) [G_I(x_k) + b(1-q)/(aq-b) G_I(x_k a/b)], x_k = x(1-r)/(1-r^k); {}",
                describe(&params)
            ),
            move |x| stationary_sojourn_tail(&params, x, &trunc).unwrap_or(f64::NAN),
        ))
    }

    pub fn busy_period(params: ModelParams, e_tau_h: f64) -> Result<Self> {
        params.stable_constants()?;
        Ok(Self::new(
            "busy period",
            KESTEN,
            format!("E(tau_H) H(x(1-rho)); E(tau_H) = {e_tau_h}; {}", describe(&params)),
            move |x| busy_period_tail(&params, e_tau_h, x).unwrap_or(f64::NAN),
        ))
    }

    pub fn busy_count(params: ModelParams, e_tau_h: f64) -> Result<Self> {
        params.stable_constants()?;
        Ok(Self::new(
            "customers per busy period",
            KESTEN,
            format!("E(tau_H) H(x(a-b_H)); E(tau_H) = {e_tau_h}; {}", describe(&params)),
            move |x| busy_count_tail(&params, e_tau_h, x).unwrap_or(f64::NAN),
        ))
    }

    /// Writes `x,predicted` rows preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, out: &mut W, grid: &[f64]) -> std::io::Result<()> {
        writeln!(out, "# curve: {}", self.label)?;
        writeln!(out, "# formula: {}", self.description)?;
        writeln!(out, "# validity: {}", self.validity_note)?;
        writeln!(out, "x,predicted")?;
        for &x in grid {
            writeln!(out, "{x},{:e}", self.eval(x))?;
        }
        Ok(())
    }
}

fn describe(params: &ModelParams) -> String {
    format!(
        "arrival = {}, service = {}, feedback_p = {}",
        params.arrival, params.service, params.feedback_p
    )
}
