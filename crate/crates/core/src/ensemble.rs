//! Parallel ensembles of trajectories with reproducible per-trajectory seeds.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::{fit_log_slope, integrate_me, matched_master_equation};
use crate::stepper::{TrajectoryConfig, TrajectoryRecord, TrajectoryRunner};

/// Seed of trajectory `index`: the SplitMix64 output function applied to
/// `master + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub trajectory: TrajectoryConfig,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub me_reference: bool,
    pub keep_records: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    /// Unbiased standard error of the mean; zero for a single trajectory.
    pub stderr: Vec<Vec<f64>>,
    pub mean_innovation: Vec<f64>,
    pub mean_innovation2: Option<Vec<f64>>,
    pub me_reference: Option<Vec<Vec<f64>>>,
    pub max_me_deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOutput {
    pub stats: EnsembleStats,
    pub records: Vec<TrajectoryRecord>,
    pub outcome_labels: Vec<String>,
}

/// Trajectories simulated per parallel batch before folding into the statistics.
const BATCH: usize = 256;

struct Accumulator {
    count: f64,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
    innov: [Vec<f64>; 2],
}

impl Accumulator {
    fn new(n_obs: usize, n_rec: usize) -> Self {
        Accumulator {
            count: 0.0,
            mean: vec![vec![0.0; n_rec]; n_obs],
            m2: vec![vec![0.0; n_rec]; n_obs],
            innov: [vec![0.0; n_rec], vec![0.0; n_rec]],
        }
    }

    fn add(&mut self, rec: &TrajectoryRecord) {
        self.count += 1.0;
        for (o, series) in rec.observables.iter().enumerate() {
            for (t, &x) in series.iter().enumerate() {
                let d = x - self.mean[o][t];
                self.mean[o][t] += d / self.count;
                self.m2[o][t] += d * (x - self.mean[o][t]);
            }
        }
        for (t, inn) in rec.innovations.iter().enumerate() {
            if let Some(v) = inn {
                self.innov[0][t] += v[0];
                self.innov[1][t] += v[1];
            }
        }
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleOutput> {
    if cfg.n_traj < 1 {
        return Err(Error::param("ensemble.n_traj", "must be at least 1"));
    }
    let runner = TrajectoryRunner::new(&cfg.trajectory)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    let n_obs = cfg.trajectory.observables.len();
    let n_rec = runner.record_at().len();
    let mut acc = Accumulator::new(n_obs, n_rec);
    let mut records = Vec::new();
    let mut start = 0;
    while start < cfg.n_traj {
        let end = (start + BATCH).min(cfg.n_traj);
        let batch: Vec<Result<TrajectoryRecord>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| runner.run(trajectory_seed(cfg.master_seed, i as u64)))
                .collect()
        });
        for rec in batch {
            let rec = rec?;
            acc.add(&rec);
            if cfg.keep_records {
                records.push(rec);
            }
        }
        start = end;
    }

    let n = cfg.n_traj as f64;
    let stderr = acc
        .m2
        .iter()
        .map(|row| {
            row.iter()
                .map(|&m2| if cfg.n_traj > 1 { (m2 / (n - 1.0)).sqrt() / n.sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    let pair = runner.kraus().has_pair_values();
    let [i0, i1] = acc.innov;
    let mut stats = EnsembleStats {
        n_traj: cfg.n_traj,
        steps: runner.record_at().to_vec(),
        times: runner.record_at().iter().map(|&k| k as f64 * cfg.trajectory.dt).collect(),
        names: cfg.trajectory.observables.iter().map(|o| o.name.clone()).collect(),
        mean: acc.mean,
        stderr,
        mean_innovation: i0.iter().map(|x| x / n).collect(),
        mean_innovation2: pair.then(|| i1.iter().map(|x| x / n).collect()),
        me_reference: None,
        max_me_deviation: None,
    };
    if cfg.me_reference {
        let reference = me_reference_series(&cfg.trajectory, runner.record_at())?;
        let dev = stats
            .mean
            .iter()
            .zip(&reference)
            .flat_map(|(m, r)| m.iter().zip(r).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        stats.me_reference = Some(reference);
        stats.max_me_deviation = Some(dev);
    }
    Ok(EnsembleOutput { stats, records, outcome_labels: runner.kraus().labels() })
}

/// Observable expectations under the matched master equation at the given steps.
pub fn me_reference_series(cfg: &TrajectoryConfig, steps: &[usize]) -> Result<Vec<Vec<f64>>> {
    let me = matched_master_equation(&cfg.system, &cfg.scheme, cfg.dt)?;
    let t_final = cfg.steps as f64 * cfg.dt;
    let sol = integrate_me(&cfg.rho0, &me, t_final, cfg.dt)?;
    cfg.observables
        .iter()
        .map(|o| steps.iter().map(|&k| o.expectation(sol.states[k].matrix())).collect())
        .collect()
}

/// Per-trajectory mean conditional spread (see [`TrajectoryRunner::mean_fluctuation`]).
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationReport {
    pub per_trajectory: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

pub fn fluctuation_study(cfg: &EnsembleConfig) -> Result<FluctuationReport> {
    if cfg.n_traj < 1 {
        return Err(Error::param("ensemble.n_traj", "must be at least 1"));
    }
    let runner = TrajectoryRunner::new(&cfg.trajectory)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    let per_trajectory = pool.install(|| {
        (0..cfg.n_traj)
            .into_par_iter()
            .map(|i| runner.mean_fluctuation(trajectory_seed(cfg.master_seed, i as u64)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let n = per_trajectory.len() as f64;
    let mean = per_trajectory.iter().sum::<f64>() / n;
    let stderr = if per_trajectory.len() > 1 {
        (per_trajectory.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(FluctuationReport { per_trajectory, mean, stderr })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub counts: Vec<usize>,
    pub deviations: Vec<f64>,
    /// Log-log slope of deviation against trajectory count; `None` when the
    /// deviation is zero at every count.
    pub slope: Option<f64>,
}

pub fn convergence_study(cfg: &EnsembleConfig, counts: &[usize]) -> Result<ConvergenceReport> {
    let mut deviations = Vec::with_capacity(counts.len());
    for &n in counts {
        let c = EnsembleConfig { n_traj: n, me_reference: true, keep_records: false, ..cfg.clone() };
        deviations.push(run_ensemble(&c)?.stats.max_me_deviation.unwrap_or(0.0));
    }
    let slope = if deviations.iter().all(|&d| d > 1e-12) && counts.len() >= 2 {
        let xs: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
        Some(fit_log_slope(&xs, &deviations))
    } else {
        None
    };
    Ok(ConvergenceReport { counts: counts.to_vec(), deviations, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_and_are_stable() {
        let a = trajectory_seed(42, 0);
        assert_eq!(a, trajectory_seed(42, 0));
        assert_ne!(a, trajectory_seed(42, 1));
        assert_ne!(a, trajectory_seed(43, 0));
    }
}
