use serde::Serialize;

use crate::asymptotics::m_k;
use crate::error::{Error, Result};
use crate::model::{DerivedConstants, ModelParams};
use crate::sim::{Accumulator, TaggedTrace};

use super::csv_error;

/// Bounds of the decomposition grid: visit `k ∈ 1..=k_max`, remaining
/// visits `ℓ ∈ 0..=l_max`, queue `j ∈ 0..=j_max`, position `i ∈ 0..=j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct DecompositionGrid {
    pub k_max: usize,
    pub l_max: usize,
    pub j_max: usize,
}

impl Default for DecompositionGrid {
    fn default() -> Self {
        Self {
            k_max: 6,
            l_max: 6,
            j_max: 30,
        }
    }
}

/// Splits first-customer sojourn exceedances `U > x` by where the big
/// service sits: the trace makes `K = k + ℓ` visits, finds `j` customers
/// ahead at visit `k`, and service `i` of that visit (`i = 0` is the tagged
/// customer's own) exceeds `x(1 − ρ)`.
///
/// Each cell is compared with `n · P(K = k+ℓ, X_{k−1} = j) · Ḡ(x/(1 + m_ℓ))`,
/// the joint probability estimated from the same traces.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionCounter {
    x: f64,
    cut: f64,
    grid: DecompositionGrid,
    n: u64,
    exceedances: u64,
    covered: u64,
    // [k-1][l][j]
    joint: Vec<u64>,
    // [k-1][l][j][i]
    cells: Vec<u64>,
}

impl DecompositionCounter {
    pub fn new(x: f64, consts: &DerivedConstants, grid: DecompositionGrid) -> Result<Self> {
        if !(x > 0.0) {
            return Err(Error::invalid("x", "threshold must be > 0"));
        }
        if grid.k_max == 0 {
            return Err(Error::invalid("k_max", "must be at least 1"));
        }
        let joint = grid.k_max * (grid.l_max + 1) * (grid.j_max + 1);
        Ok(Self {
            x,
            cut: x * (1.0 - consts.rho),
            grid,
            n: 0,
            exceedances: 0,
            covered: 0,
            joint: vec![0; joint],
            cells: vec![0; joint * (grid.j_max + 1)],
        })
    }

    fn joint_index(&self, k: usize, l: usize, j: usize) -> usize {
        ((k - 1) * (self.grid.l_max + 1) + l) * (self.grid.j_max + 1) + j
    }

    pub fn push(&mut self, trace: &TaggedTrace) -> Result<()> {
        let services = trace.services.as_ref().ok_or(Error::TraceTooLean)?;
        self.n += 1;
        let exceeds = trace.sojourn > self.x;
        self.exceedances += exceeds as u64;
        let mut covered = false;
        let big_k = trace.k;
        for k in 1..=big_k.min(self.grid.k_max) {
            let l = big_k - k;
            let j = trace.queue[k - 1] as usize;
            if l > self.grid.l_max || j > self.grid.j_max {
                continue;
            }
            let idx = self.joint_index(k, l, j);
            self.joint[idx] += 1;
            if !exceeds {
                continue;
            }
            for (i, &s) in services[k - 1].iter().enumerate() {
                if s > self.cut {
                    self.cells[idx * (self.grid.j_max + 1) + i] += 1;
                    covered = true;
                }
            }
        }
        self.covered += covered as u64;
        Ok(())
    }

    pub fn table(&self, params: &ModelParams) -> Result<DecompositionTable> {
        let c = params.stable_constants()?;
        let mut cells = Vec::new();
        let mut model_total = 0.0;
        for k in 1..=self.grid.k_max {
            for l in 0..=self.grid.l_max {
                let tail = params.service.tail(self.x / (1.0 + m_k(&c, l as u32)));
                for j in 0..=self.grid.j_max {
                    let idx = self.joint_index(k, l, j);
                    let joint = self.joint[idx];
                    let model = joint as f64 * tail;
                    for i in 0..=j {
                        let empirical = self.cells[idx * (self.grid.j_max + 1) + i];
                        model_total += model;
                        if empirical > 0 || joint > 0 {
                            cells.push(DecompositionCell {
                                k,
                                l,
                                i,
                                j,
                                empirical,
                                model,
                            });
                        }
                    }
                }
            }
        }
        Ok(DecompositionTable {
            x: self.x,
            grid: self.grid,
            n: self.n,
            exceedances: self.exceedances,
            covered: self.covered,
            cells,
            model_total,
        })
    }
}

impl Accumulator for DecompositionCounter {
    fn merge(&mut self, other: Self) {
        self.n += other.n;
        self.exceedances += other.exceedances;
        self.covered += other.covered;
        self.joint.iter_mut().zip(&other.joint).for_each(|(a, b)| *a += b);
        self.cells.iter_mut().zip(&other.cells).for_each(|(a, b)| *a += b);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecompositionCell {
    pub k: usize,
    pub l: usize,
    pub i: usize,
    pub j: usize,
    /// Traces with `U > x` whose service `(k, i)` exceeds `x(1 − ρ)`.
    pub empirical: u64,
    /// Expected count `n · g_{k,ℓ,i,j}(x)`.
    pub model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionTable {
    pub x: f64,
    pub grid: DecompositionGrid,
    pub n: u64,
    pub exceedances: u64,
    /// Exceedances falling in at least one cell.
    pub covered: u64,
    /// Cells with a nonzero empirical or joint count, `i <= j` only.
    pub cells: Vec<DecompositionCell>,
    pub model_total: f64,
}

impl DecompositionTable {
    pub fn coverage(&self) -> Option<f64> {
        (self.exceedances > 0).then(|| self.covered as f64 / self.exceedances as f64)
    }

    pub fn empirical_total(&self) -> u64 {
        self.cells.iter().map(|c| c.empirical).sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.cells {
            w.serialize(c).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}
