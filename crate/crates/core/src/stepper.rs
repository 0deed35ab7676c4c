//! Sampling single steps and whole conditional trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::schemes::{KrausSet, SchemeConfig, SystemModel};

/// Total outcome probability below which a step is abandoned.
pub const MIN_TOTAL_PROBABILITY: f64 = 1e-12;
/// Completeness defect above which outcome probabilities are renormalized.
pub const RENORMALIZE_PROBABILITIES_ABOVE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: DensityMatrix,
    pub outcome: usize,
    pub probability: f64,
    pub innovation: [f64; 2],
    pub log_likelihood_increment: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub outcome: usize,
    /// `tr(rho E_j)` before any renormalization.
    pub probability: f64,
    pub innovation: [f64; 2],
    pub log_likelihood_increment: f64,
}

#[derive(Clone, Debug)]
struct Prepared {
    branches: Vec<CMat>,
    branches_dag: Vec<CMat>,
    povm: CMat,
    value: [f64; 2],
}

/// Kraus operators prepared for repeated sampling. The external Hamiltonian
/// propagator is folded into every branch, so it acts after the measurement.
#[derive(Clone, Debug)]
pub struct Stepper {
    prepared: Vec<Prepared>,
    probs: Vec<f64>,
    tmp: CMat,
    acc: CMat,
}

impl Stepper {
    pub fn new(kraus: &KrausSet, h_ext: Option<&CMat>, dt: f64) -> Result<Self> {
        let dim = kraus.dim();
        let u_h = match h_ext {
            Some(h) => {
                linalg::require_same_dim("system.h_ext", h, dim)?;
                Some(linalg::unitary_evolution(h, dt)?)
            }
            None => None,
        };
        let prepared = kraus
            .outcomes
            .iter()
            .map(|o| {
                let branches: Vec<CMat> = o
                    .branches
                    .iter()
                    .map(|k| match &u_h {
                        Some(u) => u * k,
                        None => k.clone(),
                    })
                    .collect();
                let branches_dag = branches.iter().map(|k| k.adjoint()).collect();
                Prepared { branches, branches_dag, povm: o.povm.clone(), value: o.value.components() }
            })
            .collect();
        Ok(Stepper {
            prepared,
            probs: vec![0.0; kraus.outcomes.len()],
            tmp: linalg::zeros(dim),
            acc: linalg::zeros(dim),
        })
    }

    /// Uses `dt = delta_tau / gamma` for the Hamiltonian part.
    pub fn for_system(kraus: &KrausSet, sys: &SystemModel) -> Result<Self> {
        let dt = if sys.h_ext.is_some() {
            if !(sys.gamma > 0.0) {
                return Err(Error::param("system.gamma", "must be positive to time the Hamiltonian"));
            }
            kraus.delta_tau / sys.gamma
        } else {
            0.0
        };
        Self::new(kraus, sys.h_ext.as_ref(), dt)
    }

    pub fn dim(&self) -> usize {
        self.tmp.nrows()
    }

    /// Samples an outcome with the uniform variate `draw` and updates `rho` in place.
    pub fn step(&mut self, rho: &mut CMat, draw: f64) -> Result<StepInfo> {
        let mut total = 0.0;
        let mut weight_sum = 0.0;
        for (p, o) in self.probs.iter_mut().zip(&self.prepared) {
            *p = linalg::trace_product(rho, &o.povm).re;
            total += *p;
            weight_sum += p.max(0.0);
        }
        if !(total >= MIN_TOTAL_PROBABILITY) || !(weight_sum >= MIN_TOTAL_PROBABILITY) {
            return Err(Error::AllOutcomesZero(total));
        }
        let norm = if (weight_sum - 1.0).abs() > RENORMALIZE_PROBABILITIES_ABOVE {
            1.0 / weight_sum
        } else {
            1.0
        };

        let mut chosen = None;
        let mut last_positive = 0;
        let mut cum = 0.0;
        let mut mean = [0.0; 2];
        for (j, (&p, o)) in self.probs.iter().zip(&self.prepared).enumerate() {
            let w = p.max(0.0) * norm;
            if w > 0.0 {
                last_positive = j;
            }
            cum += w;
            if chosen.is_none() && draw < cum && w > 0.0 {
                chosen = Some(j);
            }
            mean[0] += w * o.value[0];
            mean[1] += w * o.value[1];
        }
        let j = chosen.unwrap_or(last_positive);
        let p_hat = self.probs[j].max(0.0) * norm;

        let o = &self.prepared[j];
        self.acc.fill(C64::new(0.0, 0.0));
        let one = C64::new(1.0, 0.0);
        for (k, kd) in o.branches.iter().zip(&o.branches_dag) {
            k.mul_to(rho, &mut self.tmp);
            self.acc.gemm(one, &self.tmp, kd, one);
        }
        let tr = self.acc.trace().re;
        if !(tr > 1e-300) {
            return Err(Error::ZeroTrace(tr));
        }
        let n = rho.nrows();
        let s = 0.5 / tr;
        for i in 0..n {
            for l in 0..n {
                rho[(i, l)] = (self.acc[(i, l)] + self.acc[(l, i)].conj()) * s;
            }
        }
        Ok(StepInfo {
            outcome: j,
            probability: self.probs[j],
            innovation: [o.value[0] - mean[0], o.value[1] - mean[1]],
            log_likelihood_increment: p_hat.ln(),
        })
    }

    /// Spread of the conditional updates available from `rho`:
    /// `sum_j p_j ||rho_j - rho_bar||_F^2` with `rho_bar = sum_j p_j rho_j`.
    /// Outcomes of zero probability contribute nothing.
    pub fn conditional_spread(&self, rho: &CMat) -> Result<f64> {
        let n = rho.nrows();
        let mut posts = Vec::with_capacity(self.prepared.len());
        let mut total = 0.0;
        for o in &self.prepared {
            let mut acc = linalg::zeros(n);
            for (k, kd) in o.branches.iter().zip(&o.branches_dag) {
                acc += k * rho * kd;
            }
            let p = acc.trace().re.max(0.0);
            total += p;
            posts.push((p, acc));
        }
        if !(total >= MIN_TOTAL_PROBABILITY) {
            return Err(Error::AllOutcomesZero(total));
        }
        let mean = posts.iter().fold(linalg::zeros(n), |m, (_, a)| m + a) / C64::new(total, 0.0);
        Ok(posts
            .iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(p, a)| p / total * linalg::frobenius_norm(&(a / C64::new(*p, 0.0) - &mean)).powi(2))
            .sum())
    }

    /// Outcome-averaged update, renormalized.
    pub fn unconditional(&self, rho: &CMat) -> Result<DensityMatrix> {
        let mut acc = linalg::zeros(rho.nrows());
        for o in &self.prepared {
            for (k, kd) in o.branches.iter().zip(&o.branches_dag) {
                acc += k * rho * kd;
            }
        }
        Ok(crate::density::renormalize(&acc)?.0)
    }
}

pub fn conditional_step(rho: &DensityMatrix, kraus: &KrausSet, sys: &SystemModel, draw: f64) -> Result<StepResult> {
    check_dims(rho, kraus)?;
    let mut stepper = Stepper::for_system(kraus, sys)?;
    let mut m = rho.matrix().clone();
    let info = stepper.step(&mut m, draw)?;
    Ok(StepResult {
        state: DensityMatrix::from_raw(m),
        outcome: info.outcome,
        probability: info.probability,
        innovation: info.innovation,
        log_likelihood_increment: info.log_likelihood_increment,
    })
}

pub fn unconditional_step(rho: &DensityMatrix, kraus: &KrausSet, sys: &SystemModel) -> Result<DensityMatrix> {
    check_dims(rho, kraus)?;
    Stepper::for_system(kraus, sys)?.unconditional(rho.matrix())
}

fn check_dims(rho: &DensityMatrix, kraus: &KrausSet) -> Result<()> {
    if rho.dim() != kraus.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} but Kraus dimension {}",
            rho.dim(),
            kraus.dim()
        )));
    }
    Ok(())
}

/// A named Hermitian operator whose expectation is recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub name: String,
    pub op: CMat,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: CMat) -> Result<Self> {
        let name = name.into();
        linalg::require_square(&name, &op)?;
        let d = linalg::hermiticity_defect(&op);
        if d > 1e-10 {
            return Err(Error::param(name, format!("observable is not Hermitian (defect {d:e})")));
        }
        Ok(Observable { name, op })
    }

    pub fn expectation(&self, rho: &CMat) -> Result<f64> {
        let v = linalg::trace_product(rho, &self.op);
        if v.im.abs() > 1e-9 {
            return Err(Error::ComplexObservable { name: self.name.clone(), imag: v.im });
        }
        Ok(v.re)
    }
}

/// `sx`, `sy`, `sz`.
pub fn pauli_observables() -> Vec<Observable> {
    vec![
        Observable { name: "sx".into(), op: linalg::sigma_x() },
        Observable { name: "sy".into(), op: linalg::sigma_y() },
        Observable { name: "sz".into(), op: linalg::sigma_z() },
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub system: SystemModel,
    pub scheme: SchemeConfig,
    pub rho0: DensityMatrix,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub record_states: bool,
    pub observables: Vec<Observable>,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        if self.record_every < 1 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be finite and positive"));
        }
        if !(self.system.gamma > 0.0) {
            return Err(Error::param("system.gamma", "must be positive for trajectories"));
        }
        if self.rho0.dim() != self.system.dim() {
            return Err(Error::DimensionMismatch("initial state and system operator differ in dimension".into()));
        }
        for o in &self.observables {
            linalg::require_same_dim(&o.name, &o.op, self.system.dim())?;
        }
        Ok(())
    }

    pub fn delta_tau(&self) -> f64 {
        self.system.gamma * self.dt
    }
}

/// Step indices at which a trajectory is recorded: 0, every `record_every`
/// steps, and the final step.
pub fn record_steps(steps: usize, record_every: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=steps).step_by(record_every.max(1)).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

/// One conditional trajectory sampled at the recorded steps. The outcome and
/// innovation at a recorded step belong to the step that ended there.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub outcomes: Vec<Option<usize>>,
    pub innovations: Vec<Option<[f64; 2]>>,
    pub observables: Vec<Vec<f64>>,
    /// Accumulated log-likelihood at each recorded step.
    pub log_likelihoods: Vec<f64>,
    pub log_likelihood: f64,
    /// Every step whose outcome was a detector click (counting schemes only).
    pub clicks: Vec<usize>,
    pub final_state: DensityMatrix,
    pub states: Option<Vec<DensityMatrix>>,
}

/// Builds the Kraus set once and samples trajectories from it.
#[derive(Clone, Debug)]
pub struct TrajectoryRunner {
    cfg: TrajectoryConfig,
    kraus: KrausSet,
    stepper: Stepper,
    record_at: Vec<usize>,
}

impl TrajectoryRunner {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let kraus = cfg.scheme.build(&cfg.system, cfg.dt)?;
        if kraus.dim() != cfg.system.dim() {
            return Err(Error::DimensionMismatch("scheme dimension differs from system".into()));
        }
        let stepper = Stepper::new(&kraus, cfg.system.h_ext.as_ref(), cfg.dt)?;
        Ok(TrajectoryRunner {
            cfg: cfg.clone(),
            record_at: record_steps(cfg.steps, cfg.record_every),
            kraus,
            stepper,
        })
    }

    pub fn kraus(&self) -> &KrausSet {
        &self.kraus
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.cfg
    }

    pub fn record_at(&self) -> &[usize] {
        &self.record_at
    }

    pub fn run(&self, seed: u64) -> Result<TrajectoryRecord> {
        let cfg = &self.cfg;
        let mut stepper = self.stepper.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = cfg.rho0.matrix().clone();
        let n_rec = self.record_at.len();
        let mut rec = TrajectoryRecord {
            steps: self.record_at.clone(),
            times: self.record_at.iter().map(|&k| k as f64 * cfg.dt).collect(),
            outcomes: Vec::with_capacity(n_rec),
            innovations: Vec::with_capacity(n_rec),
            observables: vec![Vec::with_capacity(n_rec); cfg.observables.len()],
            log_likelihoods: Vec::with_capacity(n_rec),
            log_likelihood: 0.0,
            clicks: Vec::new(),
            final_state: cfg.rho0.clone(),
            states: cfg.record_states.then(|| Vec::with_capacity(n_rec)),
        };
        let record = |rec: &mut TrajectoryRecord, rho: &CMat, last: Option<StepInfo>| -> Result<()> {
            rec.outcomes.push(last.map(|s| s.outcome));
            rec.innovations.push(last.map(|s| s.innovation));
            rec.log_likelihoods.push(rec.log_likelihood);
            for (series, o) in rec.observables.iter_mut().zip(&cfg.observables) {
                series.push(o.expectation(rho)?);
            }
            if let Some(states) = rec.states.as_mut() {
                states.push(DensityMatrix::from_raw(rho.clone()));
            }
            Ok(())
        };
        record(&mut rec, &rho, None)?;
        let click = self.kraus.click_outcome();
        let mut next = 1;
        for k in 1..=cfg.steps {
            let draw: f64 = rng.random();
            let info = stepper.step(&mut rho, draw).map_err(|e| e.at_step(k))?;
            rec.log_likelihood += info.log_likelihood_increment;
            if click == Some(info.outcome) {
                rec.clicks.push(k);
            }
            if next < n_rec && self.record_at[next] == k {
                record(&mut rec, &rho, Some(info)).map_err(|e| e.at_step(k))?;
                next += 1;
            }
        }
        rec.final_state = DensityMatrix::from_raw(rho);
        Ok(rec)
    }
}

impl TrajectoryRunner {
    /// Mean over the steps of one trajectory of the conditional spread divided
    /// by `delta_tau`. Draws the same outcomes as [`TrajectoryRunner::run`].
    pub fn mean_fluctuation(&self, seed: u64) -> Result<f64> {
        let mut stepper = self.stepper.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = self.cfg.rho0.matrix().clone();
        let mut sum = 0.0;
        for k in 1..=self.cfg.steps {
            sum += stepper.conditional_spread(&rho).map_err(|e| e.at_step(k))?;
            let draw: f64 = rng.random();
            stepper.step(&mut rho, draw).map_err(|e| e.at_step(k))?;
        }
        Ok(sum / (self.cfg.steps as f64 * self.kraus.delta_tau))
    }
}

pub fn simulate_trajectory(cfg: &TrajectoryConfig, seed: u64) -> Result<TrajectoryRecord> {
    TrajectoryRunner::new(cfg)?.run(seed)
}
