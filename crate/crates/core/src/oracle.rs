//! Reference dynamics: the Gaussian-bath master equation, its RK4 solution,
//! probe bath statistics and consistency checks of the Kraus schemes.

use crate::density::{renormalize, superop_d, DensityMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, C64, I};
use crate::schemes::{self, derive_squeeze, SchemeConfig, SystemModel};
use crate::stepper;

/// Gaussian bath master equation for coupling `sqrt(gamma) c`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMEParams {
    pub c: CMat,
    pub gamma: f64,
    pub beta: C64,
    pub n: f64,
    pub m: C64,
}

impl GaussianMEParams {
    pub fn vacuum(c: CMat, gamma: f64) -> Self {
        GaussianMEParams { c, gamma, beta: C64::new(0.0, 0.0), n: 0.0, m: C64::new(0.0, 0.0) }
    }
}

fn double_commutator(x: &CMat, rho: &CMat) -> CMat {
    linalg::commutator(x, &linalg::commutator(x, rho))
}

/// `[b* L - b L^dag, rho] + (N+1) D[L] rho + N D[L^dag] rho
///  + M*/2 [L,[L,rho]] + M/2 [L^dag,[L^dag,rho]]` with `L = sqrt(gamma) c`.
pub fn gaussian_me_rhs(rho: &CMat, p: &GaussianMEParams) -> CMat {
    let l = &p.c * re(p.gamma.sqrt());
    let ld = l.adjoint();
    let drive = &l * p.beta.conj() - &ld * p.beta;
    linalg::commutator(&drive, rho)
        + superop_d(&l, rho) * re(p.n + 1.0)
        + superop_d(&ld, rho) * re(p.n)
        + double_commutator(&l, rho) * (p.m.conj() * 0.5)
        + double_commutator(&ld, rho) * (p.m * 0.5)
}

/// Master equation with an optional Gaussian part, extra Lindblad
/// dissipators `(rate, L)` and a Hamiltonian.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MasterEquation {
    pub gaussian: Option<GaussianMEParams>,
    pub dissipators: Vec<(f64, CMat)>,
    pub hamiltonian: Option<CMat>,
}

impl MasterEquation {
    pub fn rhs(&self, rho: &CMat) -> CMat {
        let mut out = linalg::zeros(rho.nrows());
        if let Some(h) = &self.hamiltonian {
            out -= linalg::commutator(h, rho) * I;
        }
        if let Some(g) = &self.gaussian {
            out += gaussian_me_rhs(rho, g);
        }
        for (rate, l) in &self.dissipators {
            out += superop_d(l, rho) * re(*rate);
        }
        out
    }

    /// Fastest rate in the generator; sets the default integration step.
    pub fn gamma_eff(&self) -> f64 {
        let mut g: f64 = 0.0;
        if let Some(p) = &self.gaussian {
            let cn = linalg::spectral_norm(&p.c);
            g = g.max(p.gamma * (2.0 * p.n + 1.0 + 2.0 * p.m.norm()) * cn * cn);
            g = g.max(p.gamma.sqrt() * p.beta.norm() * cn);
        }
        for (rate, l) in &self.dissipators {
            let ln = linalg::spectral_norm(l);
            g = g.max(rate.abs() * ln * ln);
        }
        if let Some(h) = &self.hamiltonian {
            g = g.max(linalg::spectral_norm(h));
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest trace deviation removed by renormalization.
    pub max_trace_drift: f64,
}

impl MeSolution {
    pub fn expectations(&self, op: &CMat) -> Vec<f64> {
        self.states.iter().map(|s| s.expectation(op).re).collect()
    }
}

/// Local error above which an RK4 substep is refined.
pub const RK4_LOCAL_TOL: f64 = 1e-6;

fn rk4(me: &MasterEquation, rho: &CMat, h: f64) -> CMat {
    let k1 = me.rhs(rho);
    let k2 = me.rhs(&(rho + &k1 * re(0.5 * h)));
    let k3 = me.rhs(&(rho + &k2 * re(0.5 * h)));
    let k4 = me.rhs(&(rho + &k3 * re(h)));
    rho + (k1 + (k2 + k3) * re(2.0) + k4) * re(h / 6.0)
}

/// Integrates from `rho0` and returns states at `t = k dt`, `k = 0..=round(t_final/dt)`.
/// Internal RK4 substeps are at most `1e-3 / gamma_eff` long, are checked
/// against two half steps, and the trace is renormalized after each one.
// a rejected substep doubles `substeps` and restarts the interval
#[allow(clippy::mut_range_bound)]
pub fn integrate_me(rho0: &DensityMatrix, me: &MasterEquation, t_final: f64, dt: f64) -> Result<MeSolution> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", "must be finite and positive"));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::param("t_final", "must be finite and non-negative"));
    }
    let n_out = (t_final / dt).round() as usize;
    let ge = me.gamma_eff();
    let h_max = if ge > 0.0 { 1e-3 / ge } else { dt };
    let mut substeps = ((dt / h_max).ceil() as usize).max(1);

    let mut rho = rho0.matrix().clone();
    let mut states = Vec::with_capacity(n_out + 1);
    let mut times = Vec::with_capacity(n_out + 1);
    states.push(rho0.clone());
    times.push(0.0);
    let mut drift: f64 = 0.0;
    for k in 1..=n_out {
        let mut refinements = 0;
        'interval: loop {
            let h = dt / substeps as f64;
            let mut trial = rho.clone();
            let mut trial_drift: f64 = 0.0;
            for _ in 0..substeps {
                let full = rk4(me, &trial, h);
                let half = rk4(me, &rk4(me, &trial, 0.5 * h), 0.5 * h);
                let err = linalg::max_abs(&(&full - &half)) / 15.0;
                if err > RK4_LOCAL_TOL {
                    refinements += 1;
                    if refinements > 20 {
                        return Err(Error::StepRejected(err));
                    }
                    substeps *= 2;
                    continue 'interval;
                }
                trial_drift = trial_drift.max((half.trace().re - 1.0).abs());
                trial = renormalize(&half)?.0.into_matrix();
            }
            rho = trial;
            drift = drift.max(trial_drift);
            break;
        }
        states.push(DensityMatrix::from_raw(rho.clone()));
        times.push(k as f64 * dt);
    }
    Ok(MeSolution { times, states, max_trace_drift: drift })
}

/// First and second moments of a probe increment `dA = sqrt(dtau) a`,
/// each divided by `dtau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathStats {
    pub alpha: C64,
    pub n: f64,
    pub m: C64,
    pub commutator: f64,
}

pub fn bath_stats(a: &CMat, probe_state: &CMat, dtau: f64) -> Result<BathStats> {
    linalg::require_square("a", a)?;
    linalg::require_same_dim("probe_state", probe_state, a.nrows())?;
    if !(dtau > 0.0) {
        return Err(Error::param("delta_tau", "must be positive"));
    }
    let da = a * re(dtau.sqrt());
    let dad = da.adjoint();
    let ex = |op: &CMat| linalg::trace_product(probe_state, op) / dtau;
    Ok(BathStats {
        alpha: ex(&da),
        n: ex(&(&dad * &da)).re,
        m: ex(&(&da * &da)),
        commutator: ex(&linalg::commutator(&da, &dad)).re,
    })
}

/// The master equation whose per-step evolution a scheme reproduces.
/// `dt` only matters for custom circuits, whose mean field is read off the probe.
pub fn matched_master_equation(sys: &SystemModel, scheme: &SchemeConfig, dt: f64) -> Result<MasterEquation> {
    let g = sys.gamma;
    let c = sys.c.clone();
    let zero = C64::new(0.0, 0.0);
    let gaussian = |beta: C64, n: f64, m: C64, gamma: f64| GaussianMEParams { c: c.clone(), gamma, beta, n, m };
    let mut me = MasterEquation { hamiltonian: sys.h_ext.clone(), ..Default::default() };
    match scheme {
        SchemeConfig::VacuumPhotocount | SchemeConfig::VacuumHomodyne { .. } | SchemeConfig::VacuumHeterodyne => {
            me.gaussian = Some(gaussian(zero, 0.0, zero, g));
        }
        SchemeConfig::CoherentPhotocount { alpha } => {
            me.gaussian = Some(gaussian(alpha * g.sqrt(), 0.0, zero, g));
        }
        SchemeConfig::ThermalHomodyne { n_th, .. } => {
            me.gaussian = Some(gaussian(zero, *n_th, zero, g));
        }
        SchemeConfig::SqueezedThermalHomodyne { bath } => {
            let sd = derive_squeeze(bath, &sys.c)?;
            me.gaussian = Some(gaussian(bath.alpha * g.sqrt(), sd.n, sd.m, g));
        }
        SchemeConfig::PoissonStrong { theta, lambda } => {
            me.dissipators.push((lambda * (1.0 - theta.cos()) / 2.0, linalg::sigma_z()));
        }
        SchemeConfig::InefficientHomodyne { eta } => {
            me.gaussian = Some(gaussian(zero, 0.0, zero, g * eta));
        }
        SchemeConfig::CustomCircuit(cc) => {
            let st = bath_stats(&cc.probe_op, &cc.probe_state.density(), g * dt)?;
            if (st.commutator - 1.0).abs() > 1e-9 {
                log::warn!("custom probe has <[dA, dA^dag]>/dtau = {}; reference assumes 1", st.commutator);
            }
            me.gaussian = Some(gaussian(st.alpha * g.sqrt(), st.n, st.m, g));
        }
    }
    Ok(me)
}

/// `|| (A(rho) - rho) - dt * L(rho) ||_F` for one unconditional step of
/// length `dtau = gamma dt`.
pub fn unconditional_residual(sys: &SystemModel, scheme: &SchemeConfig, rho: &DensityMatrix, dtau: f64) -> Result<f64> {
    let dt = dtau / sys.gamma;
    let kraus = scheme.build(sys, dt)?;
    let next = stepper::unconditional_step(rho, &kraus, sys)?;
    let me = matched_master_equation(sys, scheme, dt)?;
    let diff = next.matrix() - rho.matrix() - me.rhs(rho.matrix()) * re(dt);
    Ok(linalg::frobenius_norm(&diff))
}

/// Residuals below this are treated as round-off.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Log-log slope of residual against step; `None` when every residual is
    /// at round-off level.
    pub exponent: Option<f64>,
}

impl ScalingReport {
    pub fn new(steps: Vec<f64>, residuals: Vec<f64>) -> Self {
        let pts: Vec<(f64, f64)> = steps
            .iter()
            .zip(&residuals)
            .filter(|(_, &r)| r > ROUNDOFF_FLOOR)
            .map(|(&s, &r)| (s, r))
            .collect();
        let exponent = if pts.len() >= 2 {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            Some(fit_log_slope(&xs, &ys))
        } else {
            None
        };
        ScalingReport { steps, residuals, exponent }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn unconditional_consistency(
    sys: &SystemModel,
    scheme: &SchemeConfig,
    rho: &DensityMatrix,
    dtaus: &[f64],
) -> Result<ScalingReport> {
    let residuals = dtaus
        .iter()
        .map(|&d| unconditional_residual(sys, scheme, rho, d))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScalingReport::new(dtaus.to_vec(), residuals))
}

/// Completeness defect `||sum E - 1||` over a ladder of steps.
pub fn completeness_scaling(sys: &SystemModel, scheme: &SchemeConfig, dtaus: &[f64]) -> Result<ScalingReport> {
    let residuals = dtaus
        .iter()
        .map(|&d| Ok(scheme.build(sys, d / sys.gamma)?.completeness_defect()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScalingReport::new(dtaus.to_vec(), residuals))
}

/// Distance between closed-form Kraus operators and those of the exact circuit.
pub fn circuit_deviation_scaling(sys: &SystemModel, scheme: &SchemeConfig, dtaus: &[f64]) -> Result<ScalingReport> {
    let residuals = dtaus
        .iter()
        .map(|&d| {
            let analytic = scheme.build(sys, d / sys.gamma)?;
            let circuit = scheme.build_circuit(sys, d, true)?;
            schemes::kraus_distance(&analytic, &circuit)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScalingReport::new(dtaus.to_vec(), residuals))
}

/// Largest difference between the closed-form heterodyne Kraus operators and
/// those of the two-probe beamsplitter circuit with the second-order unitary.
pub fn heterodyne_circuit_equivalence(sys: &SystemModel, dtau: f64) -> Result<f64> {
    let analytic = schemes::kraus_vacuum_heterodyne(sys, dtau)?;
    let circuit = schemes::heterodyne_circuit(&sys.c, dtau, false)?;
    schemes::kraus_distance(&analytic, &circuit)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_decay_rhs() {
        let p = GaussianMEParams::vacuum(sigma_minus(), 1.0);
        let r = gaussian_me_rhs(DensityMatrix::excited().matrix(), &p);
        assert!(max_abs(&(r - diag_real(&[-1.0, 1.0]))) < 1e-15);
    }

    #[test]
    fn thermal_rhs_on_mixed_state() {
        for n in [0.0, 0.5, 3.0] {
            let p = GaussianMEParams { n, ..GaussianMEParams::vacuum(sigma_minus(), 1.0) };
            let r = gaussian_me_rhs(DensityMatrix::maximally_mixed(2).matrix(), &p);
            assert!(max_abs(&(r - diag_real(&[-0.5, 0.5]))) < 1e-14);
        }
    }

    #[test]
    fn rabi_oscillation() {
        let me = MasterEquation { hamiltonian: Some(sigma_x()), ..Default::default() };
        let sol = integrate_me(&DensityMatrix::excited(), &me, 1.0, 0.01).unwrap();
        let sz = sol.expectations(&sigma_z());
        for (t, z) in sol.times.iter().zip(&sz) {
            assert_relative_eq!(*z, (2.0 * t).cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn vacuum_bath_stats() {
        let st = bath_stats(&sigma_minus(), &projector(&ket_g()), 1e-3).unwrap();
        assert!(st.alpha.norm() < 1e-15 && st.n.abs() < 1e-15 && st.m.norm() < 1e-15);
        assert_relative_eq!(st.commutator, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1e-2, 1e-3, 1e-4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert_relative_eq!(fit_log_slope(&xs, &ys), 1.5, epsilon = 1e-12);
    }
}
