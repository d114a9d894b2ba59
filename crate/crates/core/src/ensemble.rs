//! Parallel ensembles of independent trajectories and their Monte Carlo
//! moments. Paths are keyed by id, so results do not depend on the worker
//! count or the order in which paths finish.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Solver, SolverConfig, TrajectoryRecord};

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    /// Summation runs in the given order, so callers fix the order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, std_error: f64::NAN, samples: 0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, std_error, samples: n }
    }
}

/// Moments over the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub paths: usize,
    pub p: f64,
    /// `E sup_t ‖B‖^p_{H^s}`
    pub sup_hs_p: Estimate,
    /// `E ∫ ‖B‖^{p-2}_{H^s} ‖B‖²_{H^{s+α/2}} dt`
    pub dissipation_integral: Estimate,
    /// Sample times shared by every path that did not stop early.
    pub times: Vec<f64>,
    /// `E ‖B(t)‖²_{L²}` at each sample time.
    pub energy: Vec<Estimate>,
    /// `E (‖B(t)‖²_{L²} − ‖B(0)‖²_{L²})` at each sample time.
    pub energy_change: Vec<Estimate>,
    pub blown_up: usize,
    pub sigma_r_hits: usize,
}

pub fn aggregate(records: &[TrajectoryRecord], p: f64) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(Error::InsufficientSamples("an ensemble needs at least one path".into()));
    }
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.path_id);
    let sup: Vec<f64> = sorted.iter().map(|r| r.sup_hs_p).collect();
    let dis: Vec<f64> = sorted.iter().map(|r| r.dissipation_integral).collect();
    let len = sorted.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let times: Vec<f64> = sorted[0].records[..len].iter().map(|d| d.t).collect();
    let mut energy = Vec::with_capacity(len);
    let mut energy_change = Vec::with_capacity(len);
    for i in 0..len {
        let e: Vec<f64> = sorted.iter().map(|r| r.records[i].l2.powi(2)).collect();
        let d: Vec<f64> = sorted.iter().map(|r| r.records[i].l2.powi(2) - r.records[0].l2.powi(2)).collect();
        energy.push(Estimate::from_samples(&e));
        energy_change.push(Estimate::from_samples(&d));
    }
    Ok(Aggregate {
        paths: sorted.len(),
        p,
        sup_hs_p: Estimate::from_samples(&sup),
        dissipation_integral: Estimate::from_samples(&dis),
        times,
        energy,
        energy_change,
        blown_up: sorted.iter().filter(|r| r.final_state.blown_up).count(),
        sigma_r_hits: sorted.iter().filter(|r| r.final_state.sigma_r_hit.is_some()).count(),
    })
}

/// Run paths `0..paths` on a pool of `workers` threads. Records come back
/// sorted by path id.
pub fn run_ensemble(config: &SolverConfig, paths: usize, workers: usize) -> Result<Vec<TrajectoryRecord>> {
    let solver = Solver::new(config)?;
    run_ensemble_with(&solver, paths, workers)
}

pub fn run_ensemble_with(solver: &Solver, paths: usize, workers: usize) -> Result<Vec<TrajectoryRecord>> {
    if paths == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut out: Vec<TrajectoryRecord> =
        pool.install(|| (0..paths as u64).into_par_iter().map(|id| solver.run(id)).collect::<Result<_>>())?;
    out.sort_by_key(|r| r.path_id);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SolverConfig {
        SolverConfig { n: 3, dt: 0.01, t_final: 0.05, diagnostics_interval: 1, ..Default::default() }
    }

    #[test]
    fn single_path_aggregate_is_the_path() {
        let recs = run_ensemble(&small(), 1, 1).unwrap();
        let agg = aggregate(&recs, 2.0).unwrap();
        assert_eq!(agg.sup_hs_p.mean, recs[0].sup_hs_p);
        assert_eq!(agg.sup_hs_p.std_error, 0.0);
        assert_eq!(agg.dissipation_integral.mean, recs[0].dissipation_integral);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_ensemble(&small(), 6, 1).unwrap();
        let b = run_ensemble(&small(), 6, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(aggregate(&a, 2.0).unwrap(), aggregate(&b, 2.0).unwrap());
        let mut rev = b.clone();
        rev.reverse();
        assert_eq!(aggregate(&rev, 2.0).unwrap(), aggregate(&a, 2.0).unwrap());
    }

    #[test]
    fn estimate_of_constant_samples() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]);
        assert_eq!((e.mean, e.std_error, e.samples), (2.0, 0.0, 3));
        assert!(Estimate::from_samples(&[]).mean.is_nan());
        assert!(run_ensemble(&small(), 0, 1).is_err());
    }
}
