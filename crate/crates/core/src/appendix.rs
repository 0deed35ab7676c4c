//! Which probe models admit a homodyne unraveling of a squeezed bath.
//!
//! A probe model fixes a probe operator `a`, a probe state and a two-outcome
//! measurement. Expanding each Kraus branch as
//! `alpha + sqrt(dtau)(beta0 c + beta1 c^dag) + dtau(gamma0 c^2 + gamma1 c c^dag + gamma2 c^dag c + gamma3 c^dag^2)`
//! and requiring that the conditional update reproduce the squeezed-bath
//! homodyne equation gives conditions on the coefficients in terms of the
//! bath moments `N` and `M`. The checks here are written so that they are
//! invariant under unitary mixing of the branches of one outcome, which makes
//! them applicable to any number of branches.

use std::f64::consts::FRAC_PI_4;

use crate::density::superop_d;
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat, CVec, C64, I};
use crate::schemes::{derive_squeeze, squeezed_probe_operator, thermal_probe_state, BathParams, ProbeState};

/// Verdict tolerance for the constraint residuals.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Eigenvalues closer than this count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeModel {
    pub name: String,
    pub a: CMat,
    pub state: ProbeState,
    /// Probe vectors of the `+` and `-` outcomes; empty when the model only
    /// serves for bath statistics.
    pub outcomes: Vec<Vec<CVec>>,
}

impl ProbeModel {
    /// Eigenvalues of `a + a^dag`, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&(&self.a + self.a.adjoint()))
    }

    pub fn is_degenerate(&self) -> bool {
        self.spectrum().windows(2).any(|w| (w[0] - w[1]).abs() < DEGENERACY_TOL)
    }

    pub fn probe_density(&self) -> CMat {
        self.state.density()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchCoefficients {
    pub alpha: C64,
    pub beta0: C64,
    pub beta1: C64,
    /// Coefficients of `c^2`, `c c^dag`, `c^dag c`, `c^dag^2`.
    pub gamma: [C64; 4],
}

/// Branch coefficients for the `+` (index 0) and `-` (index 1) outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausCoefficients {
    pub outcomes: [Vec<BranchCoefficients>; 2],
}

pub fn kraus_coefficients(model: &ProbeModel) -> Result<KrausCoefficients> {
    if model.outcomes.len() != 2 {
        return Err(Error::param("model.outcomes", "need exactly two outcomes"));
    }
    let a = &model.a;
    let ad = a.adjoint();
    let ops = [
        linalg::identity(a.nrows()),
        ad.clone(),
        a.clone(),
        &ad * &ad,
        &ad * a,
        a * &ad,
        a * a,
    ];
    let mut out: [Vec<BranchCoefficients>; 2] = [Vec::new(), Vec::new()];
    for (s, vectors) in model.outcomes.iter().enumerate() {
        for v in vectors {
            for (w, psi) in model.state.components() {
                let b: Vec<C64> = ops.iter().map(|op| (v.adjoint() * op * psi)[(0, 0)] * w.sqrt()).collect();
                let mut bc = BranchCoefficients {
                    alpha: b[0],
                    beta0: b[1],
                    beta1: -b[2],
                    gamma: [b[3] * 0.5, b[4] * -0.5, b[5] * -0.5, b[6] * 0.5],
                };
                if bc.alpha.norm() > 1e-12 {
                    let ph = (-I * bc.alpha.arg()).exp();
                    bc.alpha *= ph;
                    bc.beta0 *= ph;
                    bc.beta1 *= ph;
                    for g in &mut bc.gamma {
                        *g *= ph;
                    }
                }
                out[s].push(bc);
            }
        }
    }
    Ok(KrausCoefficients { outcomes: out })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    /// Named residuals entering the verdict.
    pub residuals: Vec<(String, f64)>,
    /// Second-order coefficient residuals, reported but not part of the verdict.
    pub gamma_residuals: Vec<(String, f64)>,
    /// Mixing angle of each outcome's zeroth-order amplitudes.
    pub phi: [f64; 2],
    pub max_residual: f64,
    pub pass: bool,
}

pub fn check_homodyne_constraints(coeffs: &KrausCoefficients, n: f64, m: C64) -> ConstraintReport {
    let lp = 2.0 * n + 2.0 * m.re + 1.0;
    let target0 = (n + m.conj() + 1.0) / (2.0 * lp).sqrt();
    let target1 = (n + m) / (2.0 * lp).sqrt();
    let mut residuals = Vec::new();
    let mut gamma_residuals = Vec::new();
    let mut phi = [0.0; 2];
    for (idx, branches) in coeffs.outcomes.iter().enumerate() {
        let sign = if idx == 0 { 1.0 } else { -1.0 };
        let tag = if idx == 0 { "+" } else { "-" };
        let a_norm = branches.iter().map(|b| b.alpha.norm_sqr()).sum::<f64>().sqrt();
        let rest = branches.iter().skip(1).map(|b| b.alpha.norm_sqr()).sum::<f64>().sqrt();
        phi[idx] = rest.atan2(branches.first().map_or(0.0, |b| b.alpha.norm()));
        let proj = |f: &dyn Fn(&BranchCoefficients) -> C64| -> C64 {
            if a_norm == 0.0 {
                return C64::new(0.0, 0.0);
            }
            branches.iter().map(|b| b.alpha.conj() / a_norm * f(b)).sum()
        };
        let b0sq: f64 = branches.iter().map(|b| b.beta0.norm_sqr()).sum();
        let b1sq: f64 = branches.iter().map(|b| b.beta1.norm_sqr()).sum();
        let cross: C64 = branches.iter().map(|b| b.beta1 * b.beta0.conj()).sum();
        residuals.push((format!("alpha_norm[{tag}]"), (a_norm * a_norm - 0.5).abs()));
        residuals.push((format!("beta0_sq[{tag}]"), (b0sq - (n + 1.0) / 2.0).abs()));
        residuals.push((format!("beta1_sq[{tag}]"), (b1sq - n / 2.0).abs()));
        residuals.push((format!("cross[{tag}]"), (cross + m * 0.5).norm()));
        residuals.push((format!("proj_beta0[{tag}]"), (proj(&|b| b.beta0) - target0 * sign).norm()));
        residuals.push((format!("proj_beta1[{tag}]"), (proj(&|b| b.beta1) + target1 * sign).norm()));

        let s = (phi[idx] + FRAC_PI_4).sin();
        let targets = [-m.conj() / (4.0 * s), re(-n / (4.0 * s)), re(-(n + 1.0) / (4.0 * s)), -m / (4.0 * s)];
        for (k, b) in branches.iter().enumerate() {
            for (g, (val, want)) in b.gamma.iter().zip(&targets).enumerate() {
                gamma_residuals.push((format!("gamma{g}[{tag},{k}]"), (val - want).norm()));
            }
        }
    }
    let max_residual = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    ConstraintReport {
        pass: max_residual < CONSTRAINT_TOL,
        residuals,
        gamma_residuals,
        phi,
        max_residual,
    }
}

fn check_moments(n: f64, m: C64) -> Result<()> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::param("N", "must be finite and positive"));
    }
    if m.norm_sqr() > n * (n + 1.0) + 1e-12 {
        return Err(Error::param("M", "|M|^2 exceeds N(N+1)"));
    }
    Ok(())
}

/// Groups of nearly equal eigenvalues (indices into the descending list).
fn degenerate_groups(vals: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (vals[g[0]] - v).abs() < DEGENERACY_TOL => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Two-qubit probe in `|gg>` with `a = x (1 (x) s-) + y (s+ (x) 1) + z (s- (x) 1)`,
/// measured in the eigenbasis of `a + a^dag`. Eigenvalue `t x + s |y + z|`
/// is assigned to outcome `s` and branch `t`. Inside a degenerate eigenspace
/// the first basis vector is aligned with the probe state.
pub fn araki_woods_model(n: f64, m: C64) -> Result<ProbeModel> {
    check_moments(n, m)?;
    // pure baths sit exactly on |M|^2 = N(N+1); keep round-off from splitting the spectrum
    let x2 = n + 1.0 - m.norm_sqr() / n;
    let x = if x2 <= 1e-12 * (n + 1.0) { 0.0 } else { x2.sqrt() };
    let y = n.sqrt();
    let z = m / n.sqrt();
    let id = linalg::identity(2);
    let sm = linalg::sigma_minus();
    let sp = linalg::sigma_plus();
    let a = linalg::kron(&id, &sm) * re(x) + linalg::kron(&sp, &id) * re(y) + linalg::kron(&sm, &id) * z;
    let phi = linalg::ket_tensor(&linalg::ket_g(), &linalg::ket_g());

    let (vals, mut vecs) = linalg::hermitian_eigen(&(&a + a.adjoint()));
    for group in degenerate_groups(&vals) {
        if group.len() < 2 {
            continue;
        }
        let mut basis: Vec<CVec> = Vec::new();
        let proj: CVec = group
            .iter()
            .map(|&k| {
                let v = vecs.column(k).into_owned();
                let amp = (v.adjoint() * &phi)[(0, 0)];
                v * amp
            })
            .fold(CVec::zeros(4), |acc, v| acc + v);
        if proj.norm() > 1e-12 {
            basis.push(&proj / re(proj.norm()));
        }
        for &k in &group {
            let mut v = vecs.column(k).into_owned();
            for b in &basis {
                let amp = (b.adjoint() * &v)[(0, 0)];
                v -= b * amp;
            }
            if v.norm() > 1e-8 && basis.len() < group.len() {
                basis.push(&v / re(v.norm()));
            }
        }
        for (&k, b) in group.iter().zip(&basis) {
            vecs.set_column(k, b);
        }
    }

    let yz = (z + y).norm();
    let mut labels: Vec<((usize, usize), f64)> = Vec::new();
    for (si, s) in [(0, 1.0), (1, -1.0)] {
        for (ti, t) in [(0, 1.0), (1, -1.0)] {
            labels.push(((si, ti), t * x + s * yz));
        }
    }
    // stable sort keeps the branch-`+` label first within ties
    labels.sort_by(|p, q| q.1.total_cmp(&p.1));
    let mut outcomes = vec![vec![CVec::zeros(4), CVec::zeros(4)], vec![CVec::zeros(4), CVec::zeros(4)]];
    for (k, ((si, ti), _)) in labels.iter().enumerate() {
        outcomes[*si][*ti] = vecs.column(k).into_owned();
    }
    Ok(ProbeModel {
        name: "araki_woods".into(),
        a,
        state: ProbeState::pure(phi)?,
        outcomes,
    })
}

/// Two probe qubits in a two-excitation squeezed state, coupled symmetrically.
/// The doubly degenerate null space of `a + a^dag` is split between the outcomes.
pub fn two_qubit_squeezed_model(n: f64, m: C64) -> Result<ProbeModel> {
    check_moments(n, m)?;
    let id = linalg::identity(2);
    let sm = linalg::sigma_minus();
    let a = (linalg::kron(&id, &sm) + linalg::kron(&sm, &id)) * re(((2.0 * n + 1.0) / 2.0).sqrt());
    let s = 1.0 / (2.0 * n + 1.0);
    let mut rho = linalg::zeros(4);
    rho[(0, 0)] = re(n * s);
    rho[(0, 3)] = m * s;
    rho[(3, 0)] = m.conj() * s;
    rho[(3, 3)] = re((n + 1.0) * s);
    let p = |sg: f64| linalg::phi_state(sg, 0.0);
    let outcomes = vec![
        vec![linalg::ket_tensor(&p(1.0), &p(1.0)), linalg::ket_tensor(&p(1.0), &p(-1.0))],
        vec![linalg::ket_tensor(&p(-1.0), &p(-1.0)), linalg::ket_tensor(&p(-1.0), &p(1.0))],
    ];
    Ok(ProbeModel {
        name: "two_qubit_squeezed".into(),
        a,
        state: ProbeState::from_density(&rho)?,
        outcomes,
    })
}

/// Single qutrit probe with `a = sqrt(2N+1)(|0><1| + |1><2|)`. Basis order is
/// `|2>, |1>, |0>`. Used for bath statistics only.
pub fn qutrit_model(n: f64, m: C64) -> Result<ProbeModel> {
    check_moments(n, m)?;
    let mut a = linalg::zeros(3);
    let k = re((2.0 * n + 1.0).sqrt());
    a[(2, 1)] = k;
    a[(1, 0)] = k;
    let s = 1.0 / (2.0 * n + 1.0);
    let mut rho = linalg::zeros(3);
    rho[(0, 0)] = re(n * s);
    rho[(0, 2)] = m * s;
    rho[(2, 0)] = m.conj() * s;
    rho[(2, 2)] = re((n + 1.0) * s);
    Ok(ProbeModel {
        name: "qutrit".into(),
        a,
        state: ProbeState::from_density(&rho)?,
        outcomes: Vec::new(),
    })
}

/// Single probe qubit in a thermal mixture, coupled through the squeezed
/// probe operator and measured at the squeezing phase.
pub fn squeezed_qubit_model(n_th: f64, r: f64, mu: f64) -> Result<ProbeModel> {
    let bath = BathParams::squeezed(n_th, r, mu);
    let sd = derive_squeeze(&bath, &linalg::sigma_minus())?;
    let a = squeezed_probe_operator(r, mu) * re((2.0 * n_th + 1.0).sqrt());
    Ok(ProbeModel {
        name: "squeezed_qubit".into(),
        a,
        state: thermal_probe_state(n_th)?,
        outcomes: vec![vec![linalg::phi_state(1.0, sd.phi_sq)], vec![linalg::phi_state(-1.0, sd.phi_sq)]],
    })
}

/// Vacuum probe written as a two-component mixture with an empty second component.
pub fn vacuum_mixed_model() -> Result<ProbeModel> {
    Ok(ProbeModel {
        name: "vacuum".into(),
        a: linalg::sigma_minus(),
        state: ProbeState::mixed(vec![(1.0, linalg::ket_g()), (0.0, linalg::ket_e())])?,
        outcomes: vec![vec![linalg::phi_state(1.0, 0.0)], vec![linalg::phi_state(-1.0, 0.0)]],
    })
}

/// Residuals of the identities relating the squeezing transformation
/// `c_sq = c cosh r + e^{2i mu} c^dag sinh r` to the bath moments `N`, `M`,
/// evaluated on the operator `rho`.
pub fn appendix_a_identities(c: &CMat, r: f64, mu: f64, n_th: f64, rho: &CMat) -> Result<Vec<(String, f64)>> {
    let bath = BathParams::squeezed(n_th, r, mu);
    let sd = derive_squeeze(&bath, c)?;
    let (n, m, nt) = (sd.n, sd.m, n_th);
    let s = 2.0 * nt + 1.0;
    let (sh, ch) = (r.sinh(), r.cosh());
    let e2 = (I * (2.0 * mu)).exp();
    let cd = c.adjoint();
    let csq = &sd.c_sq;
    let csqd = csq.adjoint();
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut push = |name: &str, v: f64| out.push((name.to_string(), v));

    push("cosh2", (ch * ch - (n + nt + 1.0) / s).abs());
    push("sinh2", (sh * sh - (n - nt) / s).abs());
    push("cross", (e2 * (sh * ch) + m / s).norm());
    let l_direct = 1.0 + 2.0 * sh * sh - 2.0 * (2.0 * mu).cos() * sh * ch;
    push("L", (l_direct - (2.0 * n + 2.0 * m.re + 1.0) / s).abs());
    push("L_prime", (s * l_direct - (2.0 * n + 2.0 * m.re + 1.0)).abs());
    push("phase_unit", ((re(ch) - e2.conj() * sh) / l_direct.sqrt()).norm() - 1.0);

    let ph = (I * sd.phi_sq).exp();
    let lhs = csq * ph;
    let mid = (c * (re(ch * ch) - e2.conj() * (sh * ch)) + &cd * (e2 * (sh * ch) - sh * sh)) / re(l_direct.sqrt());
    let rhs = (c * (n + nt + m.conj() + 1.0) - &cd * (n - nt + m)) / re(s.sqrt() * sd.l_prime.sqrt());
    push("phased_c_sq_mid", linalg::max_abs(&(&lhs - &mid)));
    push("phased_c_sq", linalg::max_abs(&(&lhs - &rhs)));

    // c_sq rho c_sq^dag
    let lhs = csq * rho * &csqd;
    let mid = c * rho * &cd * re(ch * ch)
        + &cd * rho * c * re(sh * sh)
        + c * rho * c * (e2.conj() * (sh * ch))
        + &cd * rho * &cd * (e2 * (sh * ch));
    let rhs = (c * rho * &cd * re(n + nt + 1.0) + &cd * rho * c * re(n - nt) - c * rho * c * m.conj() - &cd * rho * &cd * m)
        / re(s);
    push("sandwich_mid", linalg::max_abs(&(&lhs - &mid)));
    push("sandwich", linalg::max_abs(&(&lhs - &rhs)));

    // c_sq^dag c_sq
    let lhs = &csqd * csq;
    let rhs = (&cd * c * re(n + nt + 1.0) + c * &cd * re(n - nt) - c * c * m.conj() - &cd * &cd * m) / re(s);
    push("number", linalg::max_abs(&(&lhs - &rhs)));

    // D[c_sq]
    let dc = |x: &CMat| linalg::commutator(x, &linalg::commutator(x, rho));
    let lhs = superop_d(csq, rho);
    let rhs = (superop_d(c, rho) * re(n + nt + 1.0)
        + superop_d(&cd, rho) * re(n - nt)
        + dc(c) * (m.conj() * 0.5)
        + dc(&cd) * (m * 0.5))
        / re(s);
    push("dissipator", linalg::max_abs(&(&lhs - &rhs)));

    // c_sq^dag rho c_sq
    let lhs = &csqd * rho * csq;
    let rhs = (&cd * rho * c * re(n + nt + 1.0) + c * rho * &cd * re(n - nt) - c * rho * c * m.conj() - &cd * rho * &cd * m)
        / re(s);
    push("sandwich_dag", linalg::max_abs(&(&lhs - &rhs)));

    // c_sq c_sq^dag
    let lhs = csq * &csqd;
    let rhs = (c * &cd * re(n + nt + 1.0) + &cd * c * re(n - nt) - c * c * m.conj() - &cd * &cd * m) / re(s);
    push("number_dag", linalg::max_abs(&(&lhs - &rhs)));

    // D[c_sq^dag]
    let lhs = superop_d(&csqd, rho);
    let rhs = (superop_d(&cd, rho) * re(n + nt + 1.0)
        + superop_d(c, rho) * re(n - nt)
        + dc(c) * (m.conj() * 0.5)
        + dc(&cd) * (m * 0.5))
        / re(s);
    push("dissipator_dag", linalg::max_abs(&(&lhs - &rhs)));

    for (_, v) in out.iter_mut() {
        *v = v.abs();
    }
    Ok(out)
}
