//! Monte Carlo plumbing: parallel path simulation and per-time series
//! statistics with standard-error bands.

use rayon::prelude::*;

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::integrator::{run_path, RunSetup, Trajectory};
use crate::noise::CovarianceSpec;
use crate::scalar::Real;
use crate::spectral::{compensated_sum, SpectralField};

/// Simulate `n_paths` independent paths of the same configuration.
///
/// Path `i` uses the increment stream `(seed, path_index = i)`, so the
/// result is independent of how many paths run or in which order the
/// worker pool finishes them.  Guard trips do not abort the ensemble:
/// the affected trajectory carries its blow-up record and the caller
/// decides how to treat it.
pub fn run_ensemble<T: Real>(
    params: &ModelParams<T>,
    cov: Option<&CovarianceSpec<T>>,
    setup: &RunSetup<T>,
    u0: &SpectralField<T>,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<Trajectory<T>>> {
    if n_paths == 0 {
        return Err(Error::BadEnsemble("n_paths must be >= 1".into()));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(params, cov, setup, u0, seed, i))
        .collect()
}

/// Per-time mean, sample variance, and standard error of a scalar series
/// over an ensemble of paths.
#[derive(Debug, Clone)]
pub struct SeriesStats<T> {
    pub times: Vec<T>,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    pub std_error: Vec<T>,
    pub paths: usize,
}

impl<T: Real> SeriesStats<T> {
    /// Reduce row-major per-path series (`rows[path][time]`).
    ///
    /// The fold runs in row order; callers pass rows sorted by path index
    /// to keep reductions reproducible.  A single row yields zero-width
    /// (disabled) bands.
    pub fn from_rows(times: Vec<T>, rows: &[Vec<T>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::BadEnsemble("no paths".into()));
        }
        let len = times.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != len {
                return Err(Error::BadEnsemble(format!(
                    "path {i} has {} samples, expected {len}",
                    row.len()
                )));
            }
        }
        let n = T::from_f64_lit(rows.len() as f64);
        let mut mean = Vec::with_capacity(len);
        let mut variance = Vec::with_capacity(len);
        let mut std_error = Vec::with_capacity(len);
        for j in 0..len {
            let mu = compensated_sum(rows.iter().map(|r| r[j])) / n;
            let var = if rows.len() < 2 {
                T::zero()
            } else {
                compensated_sum(rows.iter().map(|r| {
                    let d = r[j] - mu;
                    d * d
                })) / (n - T::one())
            };
            mean.push(mu);
            variance.push(var);
            std_error.push((var / n).sqrt());
        }
        Ok(Self {
            times,
            mean,
            variance,
            std_error,
            paths: rows.len(),
        })
    }

    /// Half-width of the three-standard-error confidence band at time
    /// index `j`.
    pub fn band(&self, j: usize) -> T {
        T::from_f64_lit(3.0) * self.std_error[j]
    }
}

/// Statistics of the `m`-th power of the mass series over an ensemble.
///
/// All trajectories must share one time grid and have completed; filter
/// out guard-tripped paths first.
pub fn mass_moment_stats<T: Real>(trajs: &[Trajectory<T>], m: u32) -> Result<SeriesStats<T>> {
    if m == 0 {
        return Err(Error::BadMomentOrder(0));
    }
    if trajs.is_empty() {
        return Err(Error::BadEnsemble("no paths".into()));
    }
    let times = trajs[0].times().to_vec();
    for (i, t) in trajs.iter().enumerate() {
        if t.times().len() != times.len() {
            return Err(Error::BadEnsemble(format!(
                "path {i} has {} samples, expected {} (incomplete run?)",
                t.times().len(),
                times.len()
            )));
        }
    }
    let rows: Vec<Vec<T>> = trajs
        .iter()
        .map(|t| t.masses().iter().map(|&x| x.powi(m as i32)).collect())
        .collect();
    SeriesStats::from_rows(times, &rows)
}
