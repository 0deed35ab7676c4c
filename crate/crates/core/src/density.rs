//! Density matrices, the measurement superoperators and state health checks.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};

/// Tolerance on `|rho - rho^dag|` accepted for a density matrix.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on `|tr rho - 1|` accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Default tolerance on negative eigenvalues.
pub const POSITIVITY_TOL: f64 = 1e-7;

/// A Hermitian, unit-trace matrix. Positivity is not enforced on
/// construction; use [`check_density`] to inspect it.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        linalg::require_square("density matrix", &m).map_err(|e| Error::InvalidState(e.to_string()))?;
        let h = linalg::hermiticity_defect(&m);
        if h > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {h:e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps a matrix already known to be a valid state.
    pub(crate) fn from_raw(m: CMat) -> Self {
        DensityMatrix(m)
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi / C64::new(n, 0.0);
        Ok(DensityMatrix(linalg::projector(&v)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(linalg::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn ground() -> Self {
        DensityMatrix(linalg::projector(&linalg::ket_g()))
    }

    pub fn excited() -> Self {
        DensityMatrix(linalg::projector(&linalg::ket_e()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// `tr(rho O)`.
    pub fn expectation(&self, o: &CMat) -> C64 {
        linalg::trace_product(&self.0, o)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.0, &self.0).re
    }
}

/// `D[X] rho = X rho X^dag - (X^dag X rho + rho X^dag X) / 2`.
pub fn superop_d(x: &CMat, rho: &CMat) -> CMat {
    let xd = x.adjoint();
    let xdx = &xd * x;
    x * rho * &xd - (&xdx * rho + rho * &xdx).scale(0.5)
}

/// `H[X] rho = X rho + rho X^dag - rho tr(rho (X + X^dag))`.
pub fn superop_h(x: &CMat, rho: &CMat) -> CMat {
    let xd = x.adjoint();
    let mean = linalg::trace_product(rho, &(x + &xd));
    x * rho + rho * &xd - rho * mean
}

/// `G[X] rho = X rho X^dag / tr(rho X^dag X) - rho`.
pub fn superop_g(x: &CMat, rho: &CMat) -> Result<CMat> {
    let xd = x.adjoint();
    let num = x * rho * &xd;
    let tr = num.trace().re;
    if tr <= 1e-14 {
        return Err(Error::JumpImpossible(tr));
    }
    Ok(num.scale(1.0 / tr) - rho)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HealthReport {
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub passes: bool,
}

/// Checks trace, Hermiticity and positivity of `rho`.
pub fn check_density(rho: &CMat, pos_tol: f64) -> HealthReport {
    let trace_defect = (rho.trace() - C64::new(1.0, 0.0)).norm();
    let hermiticity_defect = linalg::hermiticity_defect(rho);
    let min_eigenvalue = if rho.is_square() && linalg::is_finite(rho) {
        linalg::hermitian_eigenvalues(rho)
            .last()
            .copied()
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let passes = trace_defect <= TRACE_TOL
        && hermiticity_defect <= HERMITICITY_TOL
        && min_eigenvalue >= -pos_tol;
    HealthReport {
        trace_defect,
        hermiticity_defect,
        min_eigenvalue,
        passes,
    }
}

/// Divides a positive operator by its trace. Returns the state and the trace.
pub fn renormalize(m: &CMat) -> Result<(DensityMatrix, f64)> {
    let tr = m.trace().re;
    if !(tr > 1e-300) {
        return Err(Error::ZeroTrace(tr));
    }
    let mut out = linalg::hermitian_part(m);
    out.scale_mut(1.0 / tr);
    Ok((DensityMatrix(out), tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use approx::assert_relative_eq;

    #[test]
    fn decay_superoperator_on_excited_state() {
        let d = superop_d(&sigma_minus(), DensityMatrix::excited().matrix());
        let want = diag_real(&[-1.0, 1.0]);
        assert!(max_abs(&(d - want)) < 1e-15);
    }

    #[test]
    fn measurement_superoperator_vanishes_on_eigenstate() {
        let plus = DensityMatrix::pure(&phi_state(1.0, 0.0)).unwrap();
        let h = superop_h(&sigma_x(), plus.matrix());
        assert!(max_abs(&h) < 1e-15);
    }

    #[test]
    fn jump_from_ground_is_impossible() {
        let r = superop_g(&sigma_minus(), DensityMatrix::ground().matrix());
        assert!(matches!(r, Err(Error::JumpImpossible(_))));
        let j = superop_g(&sigma_minus(), DensityMatrix::excited().matrix()).unwrap();
        let want = diag_real(&[-1.0, 1.0]);
        assert!(max_abs(&(j - want)) < 1e-15);
    }

    #[test]
    fn health_flags_negative_eigenvalue() {
        let bad = diag_real(&[1.001, -0.001]);
        let rep = check_density(&bad, POSITIVITY_TOL);
        assert!(!rep.passes);
        assert_relative_eq!(rep.min_eigenvalue, -0.001, epsilon = 1e-12);
        let ok = check_density(DensityMatrix::maximally_mixed(3).matrix(), POSITIVITY_TOL);
        assert!(ok.passes);
    }

    #[test]
    fn renormalize_scaled_state() {
        let m = DensityMatrix::excited().into_matrix().scale(0.25);
        let (rho, k) = renormalize(&m).unwrap();
        assert_relative_eq!(k, 0.25);
        assert!(max_abs(&(rho.into_matrix() - projector(&ket_e()))) < 1e-15);
        assert!(matches!(renormalize(&zeros(2)), Err(Error::ZeroTrace(_))));
    }

    #[test]
    fn rejects_bad_trace() {
        assert!(DensityMatrix::new(diag_real(&[0.5, 0.4])).is_err());
        assert!(DensityMatrix::new(from_real_rows(2, 2, &[0.5, 0.1, 0.2, 0.5])).is_err());
    }
}
