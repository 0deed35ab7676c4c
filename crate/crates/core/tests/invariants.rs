use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use qtraj::appendix;
use qtraj::ensemble::{convergence_study, run_ensemble, trajectory_seed, EnsembleConfig};
use qtraj::linalg::{self, CMat, C64};
use qtraj::schemes::{self, kraus_distance, KrausSet};
use qtraj::stepper::{conditional_step, pauli_observables, unconditional_step, TrajectoryConfig, TrajectoryRunner};
use qtraj::{BathParams, DensityMatrix, SchemeConfig, SystemModel};

fn cmat(entries: &[(f64, f64)], n: usize) -> CMat {
    let v: Vec<C64> = entries.iter().map(|&(a, b)| C64::new(a, b)).collect();
    CMat::from_row_slice(n, n, &v)
}

/// Coupling operator with spectral norm at most 1.
fn coupling() -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4).prop_map(|e| {
        let m = cmat(&e, 2);
        let s = linalg::spectral_norm(&m).max(1.0);
        m / C64::new(s, 0.0)
    })
}

fn density(n: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |e| {
        let a = cmat(&e, n);
        let m = &a * a.adjoint() + CMat::identity(n, n) * C64::new(1e-3, 0.0);
        let t = m.trace();
        m / t
    })
}

fn scheme() -> impl Strategy<Value = SchemeConfig> {
    prop_oneof![
        Just(SchemeConfig::VacuumPhotocount),
        (0.0..2.0 * PI).prop_map(|phi| SchemeConfig::VacuumHomodyne { phi }),
        Just(SchemeConfig::VacuumHeterodyne),
        ((-1.0..1.0f64), (-1.0..1.0f64)).prop_map(|(a, b)| SchemeConfig::CoherentPhotocount { alpha: C64::new(a, b) }),
        ((0.0..1.5f64), (0.0..2.0 * PI)).prop_map(|(n_th, phi)| SchemeConfig::ThermalHomodyne { n_th, phi }),
        ((0.0..1.0f64), (0.0..1.0f64), (0.0..PI), (-0.5..0.5f64)).prop_map(|(n_th, r, mu, a)| {
            SchemeConfig::SqueezedThermalHomodyne { bath: BathParams { alpha: C64::new(a, -a / 2.0), n_th, r, mu } }
        }),
        (0.0..1.0f64).prop_map(|lambda| SchemeConfig::PoissonStrong { theta: FRAC_PI_2, lambda }),
        (0.05..1.0f64).prop_map(|eta| SchemeConfig::InefficientHomodyne { eta }),
    ]
}

fn n_th_of(s: &SchemeConfig) -> f64 {
    match s {
        SchemeConfig::ThermalHomodyne { n_th, .. } => *n_th,
        SchemeConfig::SqueezedThermalHomodyne { bath } => bath.n_th,
        _ => 0.0,
    }
}

/// Largest step the scheme tolerates with margin: thermal and squeezed baths
/// enhance the effective coupling.
fn step_cap(s: &SchemeConfig) -> f64 {
    match s {
        SchemeConfig::SqueezedThermalHomodyne { bath } => {
            let e = (2.0 * bath.n_th + 1.0) * (2.0 * bath.r).exp();
            0.02 / e
        }
        _ => 0.02 / (2.0 * n_th_of(s) + 1.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn povm_elements_are_positive_and_complete(c in coupling(), s in scheme(), frac in 0.01..1.0f64) {
        let sys = SystemModel::new(c, 1.0).unwrap();
        let dtau = frac * step_cap(&s);
        let k = s.build(&sys, dtau).unwrap();
        for o in &k.outcomes {
            prop_assert!(linalg::hermiticity_defect(&o.povm) < 1e-14);
            let min = linalg::hermitian_eigenvalues(&o.povm).into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-12, "{} has eigenvalue {min}", o.label);
        }
        let alpha2 = match &s {
            SchemeConfig::CoherentPhotocount { alpha } => alpha.norm_sqr(),
            SchemeConfig::SqueezedThermalHomodyne { bath } => bath.alpha.norm_sqr(),
            _ => 0.0,
        };
        let scale = (1.0 + alpha2).powi(2) * (2.0 * n_th_of(&s) + 1.0).powi(2);
        let bound = 10.0 * scale * dtau * dtau;
        prop_assert!(k.completeness_defect() <= bound.max(1e-14), "{} defect {}", s.id(), k.completeness_defect());
    }

    #[test]
    fn conditional_states_are_normalized(c in coupling(), s in scheme(), rho in density(2), draw in 0.0..1.0f64) {
        let sys = SystemModel::new(c, 1.0).unwrap().with_hamiltonian(linalg::sigma_x()).unwrap();
        let k = s.build(&sys, 0.5 * step_cap(&s)).unwrap();
        let rho = DensityMatrix::new(rho).unwrap();
        let st = conditional_step(&rho, &k, &sys, draw).unwrap();
        prop_assert!((st.state.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::hermiticity_defect(st.state.matrix()) < 1e-14);
        prop_assert!(st.probability > 0.0);
    }

    #[test]
    fn unconditional_step_averages_conditional_ones(c in coupling(), s in scheme(), rho in density(2)) {
        let sys = SystemModel::new(c, 1.0).unwrap().with_hamiltonian(linalg::sigma_y()).unwrap();
        let k = s.build(&sys, 0.5 * step_cap(&s)).unwrap();
        let rho = DensityMatrix::new(rho).unwrap();
        let avg = unconditional_step(&rho, &k, &sys).unwrap();
        let mut total = 0.0;
        let mut acc = CMat::zeros(2, 2);
        // one draw per outcome: aim at the middle of its probability slot
        let probs: Vec<f64> = k.outcomes.iter().map(|o| linalg::trace_product(rho.matrix(), &o.povm).re.max(0.0)).collect();
        let sum: f64 = probs.iter().sum();
        let mut cum = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let st = conditional_step(&rho, &k, &sys, (cum + 0.5 * p) / sum).unwrap();
            prop_assert_eq!(st.outcome, j);
            acc += st.state.matrix() * C64::new(p, 0.0);
            total += p;
            cum += p;
        }
        let mean = acc / C64::new(total, 0.0);
        prop_assert!(linalg::max_abs(&(mean - avg.matrix())) <= 1e-13);
    }

    #[test]
    fn appendix_a_identities_hold(
        c in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 9),
        rho in density(3),
        r in 0.0..1.5f64,
        mu in 0.0..PI,
        n_th in 0.0..2.0f64,
    ) {
        for (name, v) in appendix::appendix_a_identities(&cmat(&c, 3), r, mu, n_th, &rho).unwrap() {
            prop_assert!(v < 1e-12, "{name}: {v:e}");
        }
    }

    #[test]
    fn araki_woods_pure_baths_pass(n in 0.05..5.0f64, phase in 0.0..2.0 * PI) {
        let m = C64::from_polar((n * (n + 1.0)).sqrt(), phase);
        let model = appendix::araki_woods_model(n, m).unwrap();
        let report = appendix::check_homodyne_constraints(&appendix::kraus_coefficients(&model).unwrap(), n, m);
        prop_assert!(report.pass, "max residual {}", report.max_residual);
        prop_assert!(report.max_residual < 1e-9);
        prop_assert!(model.is_degenerate());
    }

    #[test]
    fn araki_woods_mixed_baths_fail(n in 0.05..5.0f64, frac in 0.0..0.9f64, phase in 0.0..2.0 * PI) {
        let m = C64::from_polar((frac * n * (n + 1.0)).sqrt(), phase);
        let model = appendix::araki_woods_model(n, m).unwrap();
        let report = appendix::check_homodyne_constraints(&appendix::kraus_coefficients(&model).unwrap(), n, m);
        prop_assert!(!report.pass, "max residual {}", report.max_residual);
        prop_assert!(!model.is_degenerate());
    }

    #[test]
    fn bath_moments_of_squeezed_probe(n_th in 0.0..2.0f64, r in 0.0..1.5f64, mu in 0.0..PI) {
        let model = appendix::squeezed_qubit_model(n_th, r, mu).unwrap();
        let sd = schemes::derive_squeeze(&BathParams::squeezed(n_th, r, mu), &linalg::sigma_minus()).unwrap();
        let st = qtraj::oracle::bath_stats(&model.a, &model.probe_density(), 1e-3).unwrap();
        prop_assert!((st.n - sd.n).abs() < 1e-12);
        prop_assert!((st.m - sd.m).norm() < 1e-12);
        prop_assert!((st.commutator - 1.0).abs() < 1e-12);
        prop_assert!(sd.m.norm_sqr() <= sd.n * (sd.n + 1.0) + 1e-12);
    }
}

fn rabi(scheme: SchemeConfig, steps: usize) -> TrajectoryConfig {
    TrajectoryConfig {
        system: SystemModel::new(linalg::sigma_minus(), 1.0).unwrap().with_hamiltonian(linalg::sigma_x()).unwrap(),
        scheme,
        rho0: DensityMatrix::ground(),
        dt: 0.01,
        steps,
        record_every: 5,
        record_states: false,
        observables: pauli_observables(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectories_are_seed_deterministic(seed in any::<u64>(), s in scheme()) {
        let runner = TrajectoryRunner::new(&rabi(s, 60)).unwrap();
        let a = runner.run(seed).unwrap();
        let b = runner.run(seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn single_member_ensemble_is_the_trajectory(master in any::<u64>()) {
        let cfg = rabi(SchemeConfig::VacuumHomodyne { phi: 0.0 }, 80);
        let out = run_ensemble(&EnsembleConfig {
            trajectory: cfg.clone(),
            n_traj: 1,
            master_seed: master,
            threads: 1,
            me_reference: false,
            keep_records: true,
        })
        .unwrap();
        let direct = TrajectoryRunner::new(&cfg).unwrap().run(trajectory_seed(master, 0)).unwrap();
        prop_assert_eq!(&out.records[0], &direct);
        prop_assert_eq!(&out.stats.mean, &direct.observables);
    }
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let base = EnsembleConfig {
        trajectory: rabi(SchemeConfig::ThermalHomodyne { n_th: 0.5, phi: 0.3 }, 150),
        n_traj: 300,
        master_seed: 77,
        threads: 1,
        me_reference: true,
        keep_records: true,
    };
    let one = run_ensemble(&base).unwrap();
    let three = run_ensemble(&EnsembleConfig { threads: 3, ..base }).unwrap();
    assert_eq!(one.stats, three.stats);
    assert_eq!(one.records, three.records);
}

/// Largest difference between two Kraus sets as measurement channels: the
/// POVM elements and the coarse-grained update of a fixed probe state.
fn channel_distance(a: &KrausSet, b: &KrausSet) -> f64 {
    assert_eq!(a.labels(), b.labels());
    let rho = CMat::from_row_slice(2, 2, &[C64::new(0.6, 0.0), C64::new(0.2, -0.1), C64::new(0.2, 0.1), C64::new(0.4, 0.0)]);
    a.outcomes
        .iter()
        .zip(&b.outcomes)
        .map(|(x, y)| linalg::max_abs(&(&x.povm - &y.povm)).max(linalg::max_abs(&(x.apply(&rho) - y.apply(&rho)))))
        .fold(0.0, f64::max)
}

#[test]
fn reductions_to_simpler_schemes() {
    let sys = SystemModel::new(linalg::sigma_minus(), 1.0).unwrap();
    let d = 0.01;
    let build = |s: SchemeConfig| s.build(&sys, d).unwrap();
    let homodyne = build(SchemeConfig::VacuumHomodyne { phi: 0.0 });
    assert!(channel_distance(&build(SchemeConfig::InefficientHomodyne { eta: 1.0 }), &homodyne) < 1e-15);
    let vac_sq = build(SchemeConfig::SqueezedThermalHomodyne { bath: BathParams::vacuum() });
    assert!(channel_distance(&vac_sq, &homodyne) < 1e-15);
    let th = build(SchemeConfig::ThermalHomodyne { n_th: 0.5, phi: 0.0 });
    let sq = build(SchemeConfig::SqueezedThermalHomodyne { bath: BathParams::squeezed(0.5, 0.0, 0.0) });
    assert!(channel_distance(&th, &sq) < 1e-15);
    let coh = build(SchemeConfig::CoherentPhotocount { alpha: C64::new(0.0, 0.0) });
    assert!(kraus_distance(&coh, &build(SchemeConfig::VacuumPhotocount)).unwrap() < 1e-15);
}

#[test]
fn ensemble_mean_converges_as_inverse_square_root() {
    for scheme in [SchemeConfig::VacuumHomodyne { phi: 0.0 }, SchemeConfig::VacuumPhotocount] {
        let cfg = EnsembleConfig {
            trajectory: rabi(scheme.clone(), 300),
            n_traj: 1,
            master_seed: 5,
            threads: 0,
            me_reference: true,
            keep_records: false,
        };
        let r = convergence_study(&cfg, &[64, 256, 1024]).unwrap();
        let slope = r.slope.expect("nonzero deviations");
        assert!((slope + 0.5).abs() <= 0.2, "{}: deviations {:?} slope {slope}", scheme.id(), r.deviations);
    }
}
