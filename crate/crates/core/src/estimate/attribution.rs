use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DerivedConstants;
use crate::sim::{Accumulator, BusyRecord, CycleRecord};

use super::{check_grid, csv_error};

/// Offsets at or beyond this share the last histogram bin.
pub const OFFSET_BINS: usize = 64;

/// Counts how often a large value is explained by one big service.
///
/// Busy periods: `B > x` is attributed when some single service exceeds
/// `x(1 − ρ)` (a compounded-service count is kept alongside). Stationary
/// cycles: a sojourn `> x` is attributed when a customer `n` arrivals
/// earlier in the cycle (`n = 0` is the customer itself) has a compounded
/// service above `(x + n·a)(1 − ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionCounter {
    grid: Vec<f64>,
    one_minus_rho: f64,
    exceedances: Vec<u64>,
    attributed: Vec<u64>,
    attributed_compounded: Vec<u64>,
    offsets: Vec<Vec<u64>>,
    stationary: bool,
}

impl AttributionCounter {
    pub fn new(grid: &[f64], consts: &DerivedConstants) -> Result<Self> {
        check_grid(grid)?;
        let m = grid.len();
        Ok(Self {
            grid: grid.to_vec(),
            one_minus_rho: 1.0 - consts.rho,
            exceedances: vec![0; m],
            attributed: vec![0; m],
            attributed_compounded: vec![0; m],
            offsets: vec![vec![0; OFFSET_BINS]; m],
            stationary: false,
        })
    }

    pub fn push_busy(&mut self, rec: &BusyRecord) {
        let big = rec.max_single_service;
        let big_h = rec.max_compounded();
        for (i, &x) in self.grid.iter().enumerate() {
            if !(rec.length > x) {
                break;
            }
            self.exceedances[i] += 1;
            let cut = x * self.one_minus_rho;
            if big > cut {
                self.attributed[i] += 1;
            }
            if big_h > cut {
                self.attributed_compounded[i] += 1;
            }
        }
    }

    pub fn push_cycle(&mut self, rec: &CycleRecord) -> Result<()> {
        let attr = rec.attribution.as_ref().ok_or(Error::MissingAttribution)?;
        self.stationary = true;
        for (&s, a) in rec.sojourns.iter().zip(attr) {
            for (i, &x) in self.grid.iter().enumerate() {
                if !(s > x) {
                    break;
                }
                self.exceedances[i] += 1;
                if a.reach > x {
                    self.attributed[i] += 1;
                    self.attributed_compounded[i] += 1;
                    self.offsets[i][(a.offset as usize).min(OFFSET_BINS - 1)] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn report(&self) -> AttributionReport {
        let rows = (0..self.grid.len())
            .map(|i| {
                let e = self.exceedances[i];
                let frac = |k: u64| (e > 0).then(|| k as f64 / e as f64);
                AttributionRow {
                    x: self.grid[i],
                    exceedances: e,
                    attributed: self.attributed[i],
                    fraction: frac(self.attributed[i]),
                    attributed_compounded: self.attributed_compounded[i],
                    fraction_compounded: frac(self.attributed_compounded[i]),
                }
            })
            .collect();
        AttributionReport {
            rows,
            offset_histogram: self.stationary.then(|| self.offsets.clone()),
        }
    }
}

impl Accumulator for AttributionCounter {
    fn merge(&mut self, other: Self) {
        let add = |a: &mut Vec<u64>, b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.exceedances, &other.exceedances);
        add(&mut self.attributed, &other.attributed);
        add(&mut self.attributed_compounded, &other.attributed_compounded);
        for (a, b) in self.offsets.iter_mut().zip(&other.offsets) {
            add(a, b);
        }
        self.stationary |= other.stationary;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttributionRow {
    pub x: f64,
    pub exceedances: u64,
    pub attributed: u64,
    /// `None` when there were no exceedances.
    pub fraction: Option<f64>,
    pub attributed_compounded: u64,
    pub fraction_compounded: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttributionReport {
    pub rows: Vec<AttributionRow>,
    /// Per threshold, attributed exceedances by offset `n` of the big
    /// customer (last bin collects `n >= OFFSET_BINS − 1`). Stationary only.
    pub offset_histogram: Option<Vec<Vec<u64>>>,
}

impl AttributionReport {
    /// Deepest threshold with at least `min_exceedances`.
    pub fn deepest_with(&self, min_exceedances: u64) -> Option<&AttributionRow> {
        self.rows.iter().rev().find(|r| r.exceedances >= min_exceedances)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `x,offset,count` for the nonzero histogram bins.
    pub fn write_offsets_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "offset", "count"]).map_err(csv_error)?;
        if let Some(h) = &self.offset_histogram {
            for (row, bins) in self.rows.iter().zip(h) {
                for (n, &c) in bins.iter().enumerate().filter(|(_, c)| **c > 0) {
                    w.write_record([row.x.to_string(), n.to_string(), c.to_string()])
                        .map_err(csv_error)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
