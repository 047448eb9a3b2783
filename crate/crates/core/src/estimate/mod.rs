//! Monte-Carlo tail estimation and the diagnostics built on it.
//!
//! All thresholds use strict exceedance, `value > x`.

mod attribution;
mod decomposition;
mod regenerative;
mod report;

pub use attribution::{AttributionCounter, AttributionReport, AttributionRow};
pub use decomposition::{DecompositionCell, DecompositionCounter, DecompositionGrid, DecompositionTable};
pub use regenerative::RegenerativeTail;
pub use report::{build_describe, write_json_sidecar, ReportMeta};

use serde::Serialize;

use crate::asymptotics::AsymptoteCurve;
use crate::error::{Error, Result};
use crate::sim::{Accumulator, MeanAcc, TaggedTrace};

/// Two-sided standard normal quantile at 95%.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Exceedance counts over a fixed threshold grid. Mergeable, so shards of a
/// parallel run can be reduced in any grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct TailCounter {
    grid: Vec<f64>,
    // bucket[i] counts values in (grid[i-1], grid[i]]; bucket[len] counts values above the last point
    buckets: Vec<u64>,
    n: u64,
}

impl TailCounter {
    pub fn new(grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        Ok(Self {
            grid: grid.to_vec(),
            buckets: vec![0; grid.len() + 1],
            n: 0,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, value: f64) {
        // number of thresholds strictly below value
        let idx = self.grid.partition_point(|&x| x < value);
        self.buckets[idx] += 1;
        self.n += 1;
    }

    /// `hits[i] = #{value > grid[i]}`.
    pub fn hits(&self) -> Vec<u64> {
        let mut hits = vec![0; self.grid.len()];
        let mut above = 0;
        for i in (0..self.grid.len()).rev() {
            above += self.buckets[i + 1];
            hits[i] = above;
        }
        hits
    }

    pub fn estimate(&self) -> Result<TailEstimate> {
        TailEstimate::from_counts(self.grid.clone(), self.n, self.hits())
    }
}

impl Accumulator for TailCounter {
    fn merge(&mut self, other: Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.buckets.iter_mut().zip(other.buckets) {
            *a += b;
        }
        self.n += other.n;
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::UnsortedGrid);
    }
    Ok(())
}

/// Empirical tail `P(V > x)` on a threshold grid, with per-threshold
/// confidence intervals and an optional comparison curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub x_grid: Vec<f64>,
    pub n: u64,
    pub hits: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Two-sided normal quantile the intervals were built with.
    pub z: f64,
    pub predicted: Option<Vec<f64>>,
    pub ratio: Option<Vec<f64>>,
    pub ratio_ci_low: Option<Vec<f64>>,
    pub ratio_ci_high: Option<Vec<f64>>,
}

impl TailEstimate {
    pub fn from_counts(x_grid: Vec<f64>, n: u64, hits: Vec<u64>) -> Result<Self> {
        Self::from_counts_z(x_grid, n, hits, Z95)
    }

    pub fn from_counts_z(x_grid: Vec<f64>, n: u64, hits: Vec<u64>, z: f64) -> Result<Self> {
        check_grid(&x_grid)?;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        assert_eq!(x_grid.len(), hits.len());
        let p_hat: Vec<f64> = hits.iter().map(|&h| h as f64 / n as f64).collect();
        let (ci_low, ci_high) = hits.iter().map(|&h| binomial_interval(h, n, z)).unzip();
        Ok(Self {
            x_grid,
            n,
            hits,
            p_hat,
            ci_low,
            ci_high,
            z,
            predicted: None,
            ratio: None,
            ratio_ci_low: None,
            ratio_ci_high: None,
        })
    }

    /// Rebuilds the intervals at another normal quantile, e.g. a
    /// Bonferroni-adjusted one for simultaneous statements over the grid.
    pub fn with_z(&self, z: f64) -> Self {
        let mut out = self.clone();
        let (lo, hi) = self.hits.iter().map(|&h| binomial_interval(h, self.n, z)).unzip();
        out.ci_low = lo;
        out.ci_high = hi;
        out.z = z;
        if let Some(pred) = &self.predicted {
            out.set_prediction(pred.clone());
        }
        out
    }

    fn set_prediction(&mut self, predicted: Vec<f64>) {
        let div = |v: &[f64]| v.iter().zip(&predicted).map(|(a, p)| a / p).collect::<Vec<_>>();
        self.ratio = Some(div(&self.p_hat));
        self.ratio_ci_low = Some(div(&self.ci_low));
        self.ratio_ci_high = Some(div(&self.ci_high));
        self.predicted = Some(predicted);
    }

    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    /// Index of the grid point whose estimate is closest to `target` on a log
    /// scale, among points with at least one hit.
    pub fn index_nearest(&self, target: f64) -> Option<usize> {
        (0..self.len()).filter(|&i| self.hits[i] > 0).min_by(|&i, &j| {
            let d = |k: usize| (self.p_hat[k].ln() - target.ln()).abs();
            d(i).total_cmp(&d(j))
        })
    }

    /// Writes `x,n,hits,p_hat,ci_low,ci_high,predicted,ratio`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            x: f64,
            n: u64,
            hits: u64,
            p_hat: f64,
            ci_low: f64,
            ci_high: f64,
            predicted: Option<f64>,
            ratio: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(Row {
                x: self.x_grid[i],
                n: self.n,
                hits: self.hits[i],
                p_hat: self.p_hat[i],
                ci_low: self.ci_low[i],
                ci_high: self.ci_high[i],
                predicted: self.predicted.as_ref().map(|v| v[i]),
                ratio: self.ratio.as_ref().map(|v| v[i]),
            })
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Wilson score interval; the plain normal interval once there are more than
/// 50 hits.
pub fn binomial_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    scaled_binomial_interval(hits as f64, n as f64, z)
}

/// [`binomial_interval`] for fractional counts, as produced by dividing
/// counts by a design effect.
pub(crate) fn scaled_binomial_interval(hits: f64, nf: f64, z: f64) -> (f64, f64) {
    let p = hits / nf;
    if hits > 50.0 {
        let half = z * (p * (1.0 - p) / nf).sqrt();
        return ((p - half).max(0.0), (p + half).min(1.0));
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Normal quantile for a two-sided Bonferroni interval over `m` statements
/// at overall level `1 − alpha`.
pub fn bonferroni_z(alpha: f64, m: usize) -> f64 {
    let tail = alpha / (2.0 * m.max(1) as f64);
    normal_upper_quantile(tail)
}

/// `z` with `P(N(0,1) > z) = tail`, by bisection on `erfc`.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    assert!(tail > 0.0 && tail < 0.5);
    let f = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2) - tail;
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Counts `values` against `x_grid`.
pub fn estimate_tail<I: IntoIterator<Item = f64>>(values: I, x_grid: &[f64]) -> Result<TailEstimate> {
    let mut counter = TailCounter::new(x_grid)?;
    for v in values {
        counter.push(v);
    }
    counter.estimate()
}

/// Sample mean and standard error of `1 + X_{K−1}` over first-customer traces.
pub fn estimate_prefactor<'a, I: IntoIterator<Item = &'a TaggedTrace>>(traces: I) -> Result<(f64, f64)> {
    let mut acc = MeanAcc::default();
    for t in traces {
        acc.push(1.0 + t.last_queue() as f64);
    }
    if acc.n == 0 {
        return Err(Error::EmptySample);
    }
    Ok((acc.mean(), acc.std_error()))
}

/// Fills the comparison columns from `curve`.
pub fn ratio_curve(est: &TailEstimate, curve: &AsymptoteCurve) -> Result<TailEstimate> {
    let predicted: Vec<f64> = est.x_grid.iter().map(|&x| curve.eval(x)).collect();
    if let Some(i) = predicted.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroPrediction { x: est.x_grid[i] });
    }
    let mut out = est.clone();
    out.set_prediction(predicted);
    Ok(out)
}

/// As [`ratio_curve`], but thresholds where the curve vanishes get an
/// infinite (or NaN, for `0/0`) ratio instead of failing.
pub fn ratio_curve_lenient(est: &TailEstimate, curve: &AsymptoteCurve) -> TailEstimate {
    let predicted = est.x_grid.iter().map(|&x| curve.eval(x)).collect();
    let mut out = est.clone();
    out.set_prediction(predicted);
    out
}

#[cfg(test)]
mod tests;
