//! Hand-worked values. Expected matrices are written out entry by entry in
//! the `(e, g)` basis rather than rebuilt from library helpers.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

use approx::assert_abs_diff_eq;
use qtraj::appendix;
use qtraj::density::{superop_d, superop_g, superop_h};
use qtraj::linalg::{self, CMat, C64};
use qtraj::oracle::{self, bath_stats, GaussianMEParams};
use qtraj::schemes::{self, derive_squeeze};
use qtraj::stepper::{conditional_step, unconditional_step};
use qtraj::{BathParams, DensityMatrix, SystemModel};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn m2(a: [[C64; 2]; 2]) -> CMat {
    CMat::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn r2(a: [[f64; 2]; 2]) -> CMat {
    m2([[c(a[0][0], 0.0), c(a[0][1], 0.0)], [c(a[1][0], 0.0), c(a[1][1], 0.0)]])
}

fn assert_close(a: &CMat, b: &CMat, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let d = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(d <= tol, "matrices differ by {d:e}\n{a}\n{b}");
}

// |g><e|: lowers e (index 0) to g (index 1)
fn lower() -> CMat {
    r2([[0.0, 0.0], [1.0, 0.0]])
}

fn excited() -> DensityMatrix {
    DensityMatrix::new(r2([[1.0, 0.0], [0.0, 0.0]])).unwrap()
}

fn x_plus() -> DensityMatrix {
    DensityMatrix::new(r2([[0.5, 0.5], [0.5, 0.5]])).unwrap()
}

fn decay() -> SystemModel {
    SystemModel::new(lower(), 1.0).unwrap()
}

fn dephasing() -> SystemModel {
    SystemModel::new(r2([[1.0, 0.0], [0.0, -1.0]]), 1.0).unwrap()
}

#[test]
fn decay_dissipator_on_excited_state() {
    assert_close(&superop_d(&lower(), excited().matrix()), &r2([[-1.0, 0.0], [0.0, 1.0]]), 1e-15);
}

#[test]
fn dephasing_dissipator_flips_coherence() {
    // sz rho sz - rho for rho = (1 + sx)/2 is -sx
    let z = r2([[1.0, 0.0], [0.0, -1.0]]);
    assert_close(&superop_d(&z, x_plus().matrix()), &r2([[0.0, -1.0], [-1.0, 0.0]]), 1e-15);
}

#[test]
fn jump_superoperator_on_x_eigenstate() {
    let g = superop_g(&lower(), x_plus().matrix()).unwrap();
    assert_close(&g, &r2([[-0.5, -0.5], [-0.5, 0.5]]), 1e-15);
    assert_abs_diff_eq!(g.trace().re, 0.0, epsilon = 1e-15);
}

#[test]
fn measurement_superoperator_on_x_eigenstate() {
    // c rho + rho c^dag - rho <c + c^dag> with <c + c^dag> = 1
    let h = superop_h(&lower(), x_plus().matrix());
    assert_close(&h, &r2([[-0.5, 0.0], [0.0, 0.5]]), 1e-15);
}

#[test]
fn photocount_kraus_operators() {
    let k = schemes::kraus_vacuum_photocount(&decay(), 0.01).unwrap();
    let by = |l: &str| k.outcomes.iter().find(|o| o.label == l).unwrap();
    assert_close(&by("e").branches[0], &r2([[0.0, 0.0], [0.1, 0.0]]), 1e-15);
    assert_close(&by("g").branches[0], &r2([[0.995, 0.0], [0.0, 1.0]]), 1e-15);
    let p_e = (by("e").povm.clone() * excited().matrix()).trace().re;
    assert_abs_diff_eq!(p_e, 0.01, epsilon = 1e-15);
    // the POVM sum is diag(1.000025, 1): defect dtau^2 / 4
    assert_abs_diff_eq!(k.completeness_defect(), 2.5e-5, epsilon = 1e-15);
}

#[test]
fn homodyne_kraus_operators() {
    let k = schemes::kraus_vacuum_homodyne(&decay(), 0.01, 0.0).unwrap();
    for (o, s) in k.outcomes.iter().zip([1.0, -1.0]) {
        let want = r2([[0.995, 0.0], [0.1 * s, 1.0]]) * c(FRAC_1_SQRT_2, 0.0);
        assert_close(&o.branches[0], &want, 1e-15);
    }
    // mean record on |e><e| vanishes for every quadrature
    for phi in [0.0, 0.7, 2.0] {
        let k = schemes::kraus_vacuum_homodyne(&decay(), 0.01, phi).unwrap();
        let p: Vec<f64> = k.outcomes.iter().map(|o| (&o.povm * excited().matrix()).trace().re).collect();
        assert_abs_diff_eq!(p[0] - p[1], 0.0, epsilon = 1e-15);
    }
}

#[test]
fn heterodyne_kraus_operator_plus_plus() {
    let k = schemes::kraus_vacuum_heterodyne(&decay(), 0.04).unwrap();
    let pp = k.outcomes.iter().find(|o| o.label == "++").unwrap();
    let w = c(FRAC_1_SQRT_2, FRAC_1_SQRT_2) * 0.2;
    let want = m2([[c(0.98, 0.0), c(0.0, 0.0)], [w, c(1.0, 0.0)]]) * c(0.5, 0.0);
    assert_close(&pp.branches[0], &want, 1e-15);
}

#[test]
fn heterodyne_x_marginal() {
    let d: f64 = 1e-3;
    let k = schemes::kraus_vacuum_heterodyne(&decay(), d).unwrap();
    let p = |l: &str| {
        let o = k.outcomes.iter().find(|o| o.label == l).unwrap();
        (&o.povm * x_plus().matrix()).trace().re
    };
    let diff = p("++") + p("+-") - p("-+") - p("--");
    assert_abs_diff_eq!(diff, d.sqrt() / SQRT_2, epsilon = 1e-15);
}

#[test]
fn coherent_click_probability() {
    // (1 - dtau/2)^2 dtau |(1 + s-)|e>|^2 = 0.995^2 * 0.02
    let k = schemes::kraus_coherent_photocount(&decay(), 0.01, c(1.0, 0.0)).unwrap();
    let e = k.outcomes.iter().find(|o| o.label == "e").unwrap();
    assert_abs_diff_eq!((&e.povm * excited().matrix()).trace().re, 0.0198005, epsilon = 1e-15);
    // no system coupling: clicks at rate |alpha|^2 whatever the state
    let free = SystemModel::new(r2([[0.0, 0.0], [0.0, 0.0]]), 1.0).unwrap();
    let k = schemes::kraus_coherent_photocount(&free, 0.01, c(1.0, 0.0)).unwrap();
    let e = k.outcomes.iter().find(|o| o.label == "e").unwrap();
    assert_abs_diff_eq!((&e.povm * x_plus().matrix()).trace().re, 0.995f64.powi(2) * 0.01, epsilon = 1e-15);
}

#[test]
fn thermal_probe_weights() {
    let st = schemes::thermal_probe_state(1.0).unwrap();
    let mut w: Vec<f64> = st.components().iter().map(|(p, _)| *p).collect();
    w.sort_by(f64::total_cmp);
    assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn squeezed_bath_parameters() {
    let sd = derive_squeeze(&BathParams::squeezed(0.0, 1f64.asinh(), 0.0), &lower()).unwrap();
    let l = 3.0 - 2.0 * SQRT_2;
    assert_abs_diff_eq!(sd.n, 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(sd.m.re, -SQRT_2, epsilon = 1e-14);
    assert_abs_diff_eq!(sd.m.im, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(sd.l, l, epsilon = 1e-14);
    assert_abs_diff_eq!(sd.l_prime, l, epsilon = 1e-14);
    assert_abs_diff_eq!(l, 0.171572875253809_9, epsilon = 1e-15);
    assert_abs_diff_eq!(sd.phi_sq, 0.0, epsilon = 1e-14);

    let sd = derive_squeeze(&BathParams::squeezed(1.0, 0.0, 0.0), &lower()).unwrap();
    assert_abs_diff_eq!(sd.n, 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(sd.m.norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(sd.l, 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(sd.l_prime, 3.0, epsilon = 1e-15);
}

#[test]
fn exact_unitary_is_probe_rotation() {
    // generator (pi/4) sz (x) (s+ - s-), whose square is -(pi/4)^2
    let u = schemes::interaction_unitary_exact(&r2([[1.0, 0.0], [0.0, -1.0]]), &lower(), FRAC_PI_4.powi(2)).unwrap();
    let (co, si) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    // cos(pi/4) 1 + i sin(pi/4) sz (x) sy, with sy = [[0, -i], [i, 0]]
    #[rustfmt::skip]
    let want = CMat::from_row_slice(4, 4, &[
        c(co, 0.0), c(si, 0.0),  c(0.0, 0.0), c(0.0, 0.0),
        c(-si, 0.0), c(co, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(co, 0.0), c(-si, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(si, 0.0), c(co, 0.0),
    ]);
    assert_close(&u, &want, 1e-14);
}

#[test]
fn truncated_unitary_second_order_term() {
    // with a = s-, the quadratic term is -dtau/2 (c c^dag (x) |e><e| + c^dag c (x) |g><g|)
    let d = 0.01;
    let cc = r2([[0.3, 0.1], [-0.2, 0.5]]);
    let u = schemes::interaction_unitary_truncated(&cc, &lower(), d).unwrap();
    let pe = r2([[1.0, 0.0], [0.0, 0.0]]);
    let pg = r2([[0.0, 0.0], [0.0, 1.0]]);
    let lin = (linalg::kron(&cc, &lower().adjoint()) - linalg::kron(&cc.adjoint(), &lower())) * c(d.sqrt(), 0.0);
    let quad = (linalg::kron(&(&cc * cc.adjoint()), &pe) + linalg::kron(&(cc.adjoint() * &cc), &pg)) * c(-0.5 * d, 0.0);
    let want = CMat::identity(4, 4) + lin + quad;
    assert_close(&u, &want, 1e-15);
}

#[test]
fn poisson_kraus_operators() {
    let k = schemes::kraus_poisson_strong(FRAC_PI_2, 0.1).unwrap();
    for (o, s) in k.outcomes.iter().zip([1.0, -1.0]) {
        assert_close(&o.branches[0], &r2([[0.670820393249937, 0.0], [0.0, 0.670820393249937]]), 1e-15);
        let g = if s > 0.0 { [[0.316227766016838, 0.0], [0.0, 0.0]] } else { [[0.0, 0.0], [0.0, 0.316227766016838]] };
        assert_close(&o.branches[1], &r2(g), 1e-15);
    }
    assert!(k.completeness_defect() <= 1e-15);
}

#[test]
fn poisson_coarse_grained_update() {
    // (1 - p)/2 rho + p P rho P with P = (1 + sz)/2 on the +x state
    let k = schemes::kraus_poisson_strong(FRAC_PI_2, 0.1).unwrap();
    let got = k.outcomes[0].apply(x_plus().matrix());
    assert_close(&got, &r2([[0.275, 0.225], [0.225, 0.225]]), 1e-15);
}

#[test]
fn inefficient_kraus_operators() {
    let k = schemes::kraus_inefficient_homodyne(&dephasing(), 0.01, 0.5).unwrap();
    for (o, s) in k.outcomes.iter().zip([1.0, -1.0]) {
        let want = r2([[0.5 * (1.0 + 0.1 * s - 0.005), 0.0], [0.0, 0.5 * (1.0 - 0.1 * s - 0.005)]]);
        assert_close(&o.branches[0], &want, 1e-15);
        assert_close(&o.branches[1], &r2([[0.5, 0.0], [0.0, 0.5]]), 1e-15);
    }
}

#[test]
fn photocount_jump_step() {
    let k = schemes::kraus_vacuum_photocount(&decay(), 0.01).unwrap();
    let st = conditional_step(&excited(), &k, &decay(), 0.005).unwrap();
    assert_eq!(k.outcomes[st.outcome].label, "e");
    assert_close(st.state.matrix(), &r2([[0.0, 0.0], [0.0, 1.0]]), 1e-15);
    assert_abs_diff_eq!(st.probability, 0.01, epsilon = 1e-15);
    // the POVM sums to 1.000025 on |e><e|; the mean record uses the
    // renormalized probabilities, so 0.99 holds up to dtau^2
    assert_abs_diff_eq!(st.innovation[0], 1.0 - 0.01 / 1.000025, epsilon = 1e-15);
    assert_abs_diff_eq!(st.innovation[0], 0.99, epsilon = 1e-4);
}

#[test]
fn homodyne_step_on_excited_state() {
    let k = schemes::kraus_vacuum_homodyne(&decay(), 0.01, 0.0).unwrap();
    for (draw, sign) in [(0.25, 1.0), (0.75, -1.0)] {
        let st = conditional_step(&excited(), &k, &decay(), draw).unwrap();
        // (0.995^2 + 0.01) / 2
        assert_abs_diff_eq!(st.probability, 0.5000125, epsilon = 1e-15);
        assert_abs_diff_eq!(st.innovation[0], 0.1 * sign, epsilon = 1e-15);
    }
}

#[test]
fn photocount_unconditional_step() {
    let k = schemes::kraus_vacuum_photocount(&decay(), 0.01).unwrap();
    let next = unconditional_step(&excited(), &k, &decay()).unwrap();
    let want = r2([[0.990025, 0.0], [0.0, 0.01]]) * c(1.0 / 1.000025, 0.0);
    assert_close(next.matrix(), &want, 1e-15);
}

#[test]
fn vacuum_master_equation_rhs() {
    let p = GaussianMEParams::vacuum(lower(), 1.0);
    let rhs = oracle::gaussian_me_rhs(excited().matrix(), &p);
    assert_close(&rhs, &r2([[-1.0, 0.0], [0.0, 1.0]]), 1e-15);
    // d<sz>/dt = -2
    assert_abs_diff_eq!(rhs[(0, 0)].re - rhs[(1, 1)].re, -2.0, epsilon = 1e-15);
}

#[test]
fn thermal_master_equation_rhs_on_mixed_state() {
    // (N + 1) D[s-] + N D[s+] on 1/2: diag(-1/2, 1/2) (N + 1) + diag(1/2, -1/2) N
    let n = 0.7;
    let p = GaussianMEParams { c: lower(), gamma: 1.0, beta: c(0.0, 0.0), n, m: c(0.0, 0.0) };
    let rhs = oracle::gaussian_me_rhs(&r2([[0.5, 0.0], [0.0, 0.5]]), &p);
    assert_close(&rhs, &r2([[-0.5, 0.0], [0.0, 0.5]]), 1e-15);
}

#[test]
fn probe_moments() {
    let pg = r2([[0.0, 0.0], [0.0, 1.0]]);
    let st = bath_stats(&lower(), &pg, 0.01).unwrap();
    assert_abs_diff_eq!(st.alpha.norm() + st.n + st.m.norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(st.commutator, 1.0, epsilon = 1e-14);

    // sqrt(3) s- on the n_th = 1 thermal mixture
    let a = lower() * c(3f64.sqrt(), 0.0);
    let th = r2([[1.0 / 3.0, 0.0], [0.0, 2.0 / 3.0]]);
    let st = bath_stats(&a, &th, 0.01).unwrap();
    assert_abs_diff_eq!(st.n, 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(st.m.norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(st.commutator, 1.0, epsilon = 1e-14);

    // s- cosh r - s+ sinh r with sinh r = 1
    let a = r2([[0.0, -1.0], [SQRT_2, 0.0]]);
    let st = bath_stats(&a, &pg, 0.01).unwrap();
    assert_abs_diff_eq!(st.n, 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(st.m.re, -SQRT_2, epsilon = 1e-14);
    assert_abs_diff_eq!(st.commutator, 1.0, epsilon = 1e-14);
}

#[test]
fn araki_woods_spectra() {
    let model = appendix::araki_woods_model(1.0, c(1.0, 0.0)).unwrap();
    let mut sp = model.spectrum();
    sp.sort_by(f64::total_cmp);
    for (got, want) in sp.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
    }
    assert!(!model.is_degenerate());
    // pure case x = 0: the two middle eigenvalues merge
    assert!(appendix::araki_woods_model(1.0, c(SQRT_2, 0.0)).unwrap().is_degenerate());
}

#[test]
fn two_qubit_state_and_spectrum() {
    let model = appendix::two_qubit_squeezed_model(1.0, c(0.5, 0.0)).unwrap();
    let rho = model.probe_density();
    let mut want = CMat::zeros(4, 4);
    want[(0, 0)] = c(1.0 / 3.0, 0.0);
    want[(0, 3)] = c(0.5 / 3.0, 0.0);
    want[(3, 0)] = c(0.5 / 3.0, 0.0);
    want[(3, 3)] = c(2.0 / 3.0, 0.0);
    assert_close(&rho, &want, 1e-14);
    let mut distinct: Vec<f64> = Vec::new();
    for x in model.spectrum() {
        if distinct.iter().all(|d| (d - x).abs() > 1e-9) {
            distinct.push(x);
        }
    }
    assert_eq!(distinct.len(), 3, "{:?}", model.spectrum());
}

#[test]
fn araki_woods_mismatch_at_unit_moments() {
    let n = 1.0;
    let m = c(1.0, 0.0);
    let report = appendix::check_homodyne_constraints(
        &appendix::kraus_coefficients(&appendix::araki_woods_model(n, m).unwrap()).unwrap(),
        n,
        m,
    );
    assert!(!report.pass);
    // frozen from the first run; the verdict is what matters
    assert_abs_diff_eq!(report.max_residual, 0.242, epsilon = 5e-4);
}
