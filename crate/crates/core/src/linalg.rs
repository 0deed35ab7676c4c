//! Small dense complex matrices and the standard two-level operators.
//!
//! Basis convention for a single qubit: index 0 is the excited state `|e>`,
//! index 1 the ground state `|g>`. Tensor products put the system on the left
//! and probes on the right.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Index of `|e>` in the qubit basis.
pub const EXCITED: usize = 0;
/// Index of `|g>` in the qubit basis.
pub const GROUND: usize = 1;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Builds a matrix from row-major entries.
pub fn from_rows(n_rows: usize, n_cols: usize, entries: &[C64]) -> CMat {
    CMat::from_row_slice(n_rows, n_cols, entries)
}

/// Builds a real matrix from row-major entries.
pub fn from_real_rows(n_rows: usize, n_cols: usize, entries: &[f64]) -> CMat {
    let v: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
    CMat::from_row_slice(n_rows, n_cols, &v)
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    let mut m = zeros(n);
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = re(x);
    }
    m
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut s = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest entry of `|a - a^dag|`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

/// Largest entry of `|u^dag u - 1|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(a + a^dag) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
/// Column `k` of the returned matrix is the eigenvector of eigenvalue `k`.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = zeros(n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    hermitian_eigen(a).0
}

/// Operator 2-norm.
pub fn spectral_norm(a: &CMat) -> f64 {
    let ata = a.adjoint() * a;
    hermitian_eigenvalues(&ata)
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt()
}

/// `exp(-i h t)` for Hermitian `h`, via its eigen-decomposition.
pub fn unitary_evolution(h: &CMat, t: f64) -> Result<CMat> {
    let defect = hermiticity_defect(h);
    if defect > 1e-10 {
        return Err(Error::param("hamiltonian", format!("not Hermitian (defect {defect:e})")));
    }
    let (vals, vecs) = hermitian_eigen(h);
    let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&l| (-I * l * t).exp()));
    Ok(&vecs * CMat::from_diagonal(&phases) * vecs.adjoint())
}

/// `exp(g)` for anti-Hermitian `g`.
pub fn exp_anti_hermitian(g: &CMat) -> Result<CMat> {
    let h = g * I;
    unitary_evolution(&h, 1.0)
}

/// General matrix exponential (scaling and squaring with Pade approximants).
pub fn expm(a: &CMat) -> CMat {
    a.clone().exp()
}

pub fn ket(dim: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[i] = ONE;
    v
}

pub fn ket_e() -> CVec {
    ket(2, EXCITED)
}

pub fn ket_g() -> CVec {
    ket(2, GROUND)
}

/// `(|g> + sign e^{-i phase} |e>) / sqrt 2`.
pub fn phi_state(sign: f64, phase: f64) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVec::zeros(2);
    v[GROUND] = re(s);
    v[EXCITED] = (-I * phase).exp() * sign * s;
    v
}

pub fn ket_tensor(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

/// `|v><v|`.
pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn sigma_minus() -> CMat {
    let mut m = zeros(2);
    m[(GROUND, EXCITED)] = ONE;
    m
}

pub fn sigma_plus() -> CMat {
    let mut m = zeros(2);
    m[(EXCITED, GROUND)] = ONE;
    m
}

pub fn sigma_x() -> CMat {
    from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn sigma_y() -> CMat {
    from_rows(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMat {
    diag_real(&[1.0, -1.0])
}

pub(crate) fn require_square(name: &str, a: &CMat) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::param(name, "contains non-finite entries"));
    }
    Ok(())
}

pub(crate) fn require_same_dim(name: &str, a: &CMat, dim: usize) -> Result<()> {
    require_square(name, a)?;
    if a.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{name} has dimension {}, expected {dim}",
            a.nrows()
        )));
    }
    Ok(())
}
