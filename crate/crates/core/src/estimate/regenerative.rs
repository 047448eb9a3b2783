use crate::error::Result;
use crate::sim::{Accumulator, CycleRecord};

use super::{check_grid, scaled_binomial_interval, TailEstimate, Z95};

/// Customer-average tail over regenerative cycles, `Σ_c Y_c(x) / Σ_c N_c`,
/// where `Y_c(x)` counts customers of cycle `c` whose sojourn exceeds `x`.
///
/// Sojourns within one cycle are dependent, so the interval comes from the
/// ratio-estimator variance over cycles; it is reported as a Wilson interval
/// on counts deflated by the resulting design effect.
#[derive(Clone, Debug, PartialEq)]
pub struct RegenerativeTail {
    grid: Vec<f64>,
    cycles: u64,
    customers: u64,
    sum_n2: f64,
    sum_y: Vec<u64>,
    sum_y2: Vec<f64>,
    sum_yn: Vec<f64>,
    scratch: Vec<u64>,
}

impl RegenerativeTail {
    pub fn new(grid: &[f64]) -> Result<Self> {
        check_grid(grid)?;
        let m = grid.len();
        Ok(Self {
            grid: grid.to_vec(),
            cycles: 0,
            customers: 0,
            sum_n2: 0.0,
            sum_y: vec![0; m],
            sum_y2: vec![0.0; m],
            sum_yn: vec![0.0; m],
            scratch: vec![0; m + 1],
        })
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn customers(&self) -> u64 {
        self.customers
    }

    pub fn push(&mut self, cycle: &CycleRecord) {
        self.push_sojourns(&cycle.sojourns);
    }

    pub fn push_sojourns(&mut self, sojourns: &[f64]) {
        let n = sojourns.len() as f64;
        self.cycles += 1;
        self.customers += sojourns.len() as u64;
        self.sum_n2 += n * n;
        let top = sojourns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(top > self.grid[0]) {
            return;
        }
        self.scratch.iter_mut().for_each(|b| *b = 0);
        for &s in sojourns {
            self.scratch[self.grid.partition_point(|&x| x < s)] += 1;
        }
        let mut above = 0;
        for i in (0..self.grid.len()).rev() {
            above += self.scratch[i + 1];
            if above > 0 {
                let y = above as f64;
                self.sum_y[i] += above;
                self.sum_y2[i] += y * y;
                self.sum_yn[i] += y * n;
            }
        }
    }

    pub fn estimate(&self) -> Result<TailEstimate> {
        self.estimate_z(Z95)
    }

    pub fn estimate_z(&self, z: f64) -> Result<TailEstimate> {
        let mut est = TailEstimate::from_counts_z(self.grid.clone(), self.customers, self.sum_y.clone(), z)?;
        let nf = self.customers as f64;
        for (i, deff) in self.design_effects().into_iter().enumerate() {
            if let Some(deff) = deff {
                let (lo, hi) = scaled_binomial_interval(self.sum_y[i] as f64 / deff, nf / deff, z);
                est.ci_low[i] = lo;
                est.ci_high[i] = hi;
            }
        }
        Ok(est)
    }

    /// Variance inflation of each threshold's estimate over independent
    /// sampling of customers (at least 1), or `None` where it is undefined.
    pub fn design_effects(&self) -> Vec<Option<f64>> {
        let c = self.cycles as f64;
        let nf = self.customers as f64;
        let mean_n = nf / c;
        (0..self.grid.len())
            .map(|i| {
                let p = self.sum_y[i] as f64 / nf;
                if self.sum_y[i] == 0 || p >= 1.0 || self.cycles < 2 {
                    return None;
                }
                // Var(Y − pN) per cycle, then delta method for the ratio
                let s2 = (self.sum_y2[i] - 2.0 * p * self.sum_yn[i] + p * p * self.sum_n2) / (c - 1.0);
                let var = s2.max(0.0) / (c * mean_n * mean_n);
                Some((var * nf / (p * (1.0 - p))).max(1.0))
            })
            .collect()
    }

    /// Exceedance counts deflated by the design effect: the number of
    /// independent exceedances carrying the same information.
    pub fn effective_hits(&self) -> Vec<f64> {
        self.sum_y
            .iter()
            .zip(self.design_effects())
            .map(|(&y, d)| y as f64 / d.unwrap_or(1.0))
            .collect()
    }
}

impl Accumulator for RegenerativeTail {
    fn merge(&mut self, other: Self) {
        debug_assert_eq!(self.grid, other.grid);
        self.cycles += other.cycles;
        self.customers += other.customers;
        self.sum_n2 += other.sum_n2;
        for i in 0..self.grid.len() {
            self.sum_y[i] += other.sum_y[i];
            self.sum_y2[i] += other.sum_y2[i];
            self.sum_yn[i] += other.sum_yn[i];
        }
    }
}
