//! Deterministic parallel fan-out of independent replications.
//!
//! Replication `j` always draws from stream `(seed, j)`. Replications are
//! grouped into fixed-size batches; each batch folds into its own
//! accumulator and the batch accumulators are merged in batch order, so the
//! result does not depend on the number of workers.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub trait Accumulator: Send {
    fn merge(&mut self, other: Self);
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub completed: u64,
    pub dropped: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct Harness {
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub batch_size: u64,
    /// Largest tolerated fraction of replications dropped for exceeding the
    /// event budget.
    pub max_drop_fraction: f64,
}

impl Harness {
    pub fn new(seed: u64, workers: usize) -> Self {
        Self {
            seed,
            workers,
            batch_size: 2048,
            max_drop_fraction: 1e-3,
        }
    }

    /// Runs replications `0..n`, feeding each into `step` with its own stream.
    /// `step` returning [`Error::EventBudgetExceeded`] drops that replication;
    /// any other error aborts the run.
    pub fn run<A, I, F>(&self, n: u64, init: I, step: F) -> Result<(A, RunStats)>
    where
        A: Accumulator,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &mut RandomStream) -> Result<()> + Sync,
    {
        self.run_offset(0, n, init, step)
    }

    /// As [`Harness::run`] over replication indices `first..first + n`.
    pub fn run_offset<A, I, F>(&self, first: u64, n: u64, init: I, step: F) -> Result<(A, RunStats)>
    where
        A: Accumulator,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, &mut RandomStream) -> Result<()> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config {
                key: "workers".into(),
                message: e.to_string(),
            })?;
        let batch = self.batch_size.max(1);
        let n_batches = n.div_ceil(batch);
        // bounded number of live batch accumulators
        const GROUP: u64 = 256;

        let mut total = init();
        let mut stats = RunStats::default();
        let mut group_start = 0;
        while group_start < n_batches {
            let group_end = (group_start + GROUP).min(n_batches);
            let parts: Vec<Result<(A, RunStats)>> = pool.install(|| {
                (group_start..group_end)
                    .into_par_iter()
                    .map(|b| {
                        let mut acc = init();
                        let mut st = RunStats::default();
                        let lo = b * batch;
                        let hi = ((b + 1) * batch).min(n);
                        for j in lo..hi {
                            let mut stream = RandomStream::new(self.seed, first + j);
                            match step(&mut acc, &mut stream) {
                                Ok(()) => st.completed += 1,
                                Err(Error::EventBudgetExceeded { .. }) => st.dropped += 1,
                                Err(e) => return Err(e),
                            }
                        }
                        Ok((acc, st))
                    })
                    .collect()
            });
            for part in parts {
                let (acc, st) = part?;
                total.merge(acc);
                stats.completed += st.completed;
                stats.dropped += st.dropped;
            }
            group_start = group_end;
        }
        if n > 0 && stats.dropped as f64 > self.max_drop_fraction * n as f64 {
            return Err(Error::TooManyDropped {
                dropped: stats.dropped,
                total: n,
            });
        }
        Ok((total, stats))
    }
}

/// Running mean of a scalar with the sum of squares kept for its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanAcc {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn std_error(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq / n - m * m).max(0.0) / (n - 1.0).max(1.0)).sqrt()
    }
}

impl Accumulator for MeanAcc {
    fn merge(&mut self, o: Self) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
}

impl<T: Send> Accumulator for Vec<T> {
    fn merge(&mut self, other: Self) {
        self.extend(other);
    }
}

impl<A: Accumulator, B: Accumulator> Accumulator for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<A: Accumulator, B: Accumulator, C: Accumulator> Accumulator for (A, B, C) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
        self.2.merge(other.2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_does_not_change_result() {
        let run = |workers| {
            Harness::new(17, workers)
                .run(10_000, MeanAcc::default, |acc, s| {
                    acc.push(s.uniform_open_closed().ln());
                    Ok(())
                })
                .unwrap()
        };
        let (a, sa) = run(1);
        let (b, sb) = run(4);
        assert_eq!(sa, sb);
        assert_eq!(a.sum.to_bits(), b.sum.to_bits());
        assert_eq!(a.sum_sq.to_bits(), b.sum_sq.to_bits());
        assert!((a.mean() + 1.0).abs() < 4.0 * a.std_error());
    }

    #[test]
    fn order_is_replication_order() {
        let (v, _) = Harness::new(1, 3)
            .run(5000, Vec::new, |acc: &mut Vec<f64>, s| {
                acc.push(s.uniform_open_closed());
                Ok(())
            })
            .unwrap();
        for (j, x) in v.iter().enumerate() {
            assert_eq!(*x, RandomStream::new(1, j as u64).uniform_open_closed());
        }
    }

    #[test]
    fn drops_are_counted_and_bounded() {
        let h = Harness::new(1, 2);
        let (_, st) = h
            .run(10_000, MeanAcc::default, |acc, s| {
                if s.uniform_open_closed() < 5e-4 {
                    return Err(Error::EventBudgetExceeded { budget: 1 });
                }
                acc.push(1.0);
                Ok(())
            })
            .unwrap();
        assert_eq!(st.completed + st.dropped, 10_000);
        let err = h
            .run(10_000, MeanAcc::default, |_, s| {
                if s.uniform_open_closed() < 0.01 {
                    return Err(Error::EventBudgetExceeded { budget: 1 });
                }
                Ok(())
            })
            .unwrap_err();
        assert!(matches!(err, Error::TooManyDropped { .. }));
    }
}
