//! Measurement schemes: per-step Kraus operators built from a system coupled
//! to a single qubit probe, either in closed form or by projecting an explicit
//! interaction circuit onto probe measurement outcomes.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::linalg::{self, cx, re, CMat, CVec, C64, I};

/// Effective step above which a warning is logged.
pub const SOFT_STEP_LIMIT: f64 = 0.1;
/// Effective step above which construction fails.
pub const HARD_STEP_LIMIT: f64 = 0.5;

/// System operator `c`, coupling rate `gamma` and an optional external
/// Hamiltonian (in units of angular frequency).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub c: CMat,
    pub gamma: f64,
    pub h_ext: Option<CMat>,
}

impl SystemModel {
    pub fn new(c: CMat, gamma: f64) -> Result<Self> {
        linalg::require_square("system.c", &c)?;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("system.gamma", "must be finite and non-negative"));
        }
        Ok(SystemModel { c, gamma, h_ext: None })
    }

    pub fn with_hamiltonian(mut self, h: CMat) -> Result<Self> {
        linalg::require_same_dim("system.h_ext", &h, self.dim())?;
        let d = linalg::hermiticity_defect(&h);
        if d > 1e-10 {
            return Err(Error::param("system.h_ext", format!("not Hermitian (defect {d:e})")));
        }
        self.h_ext = Some(h);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Probe bath: mean field `alpha`, thermal occupation and squeezing `(r, mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    pub alpha: C64,
    pub n_th: f64,
    pub r: f64,
    pub mu: f64,
}

impl BathParams {
    pub fn vacuum() -> Self {
        BathParams { alpha: C64::new(0.0, 0.0), n_th: 0.0, r: 0.0, mu: 0.0 }
    }

    pub fn squeezed(n_th: f64, r: f64, mu: f64) -> Self {
        BathParams { alpha: C64::new(0.0, 0.0), n_th, r, mu }
    }

    fn validate(&self) -> Result<()> {
        if !(self.n_th >= 0.0) || !self.n_th.is_finite() {
            return Err(Error::param("bath.n_th", "must be finite and non-negative"));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::param("bath.r", "must be finite and non-negative"));
        }
        if !self.mu.is_finite() || !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::param("bath", "non-finite parameter"));
        }
        Ok(())
    }
}

/// Quantities derived from a squeezed thermal bath.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezeDerived {
    pub n: f64,
    pub m: C64,
    pub l: f64,
    pub l_prime: f64,
    pub phi_sq: f64,
    pub c_sq: CMat,
}

pub fn derive_squeeze(bath: &BathParams, c: &CMat) -> Result<SqueezeDerived> {
    bath.validate()?;
    let (sh, ch) = (bath.r.sinh(), bath.r.cosh());
    let nt = bath.n_th;
    let e2 = (I * (2.0 * bath.mu)).exp();
    let n = (2.0 * nt + 1.0) * sh * sh + nt;
    let m = -e2 * ((2.0 * nt + 1.0) * sh * ch);
    if m.norm_sqr() > n * (n + 1.0) + 1e-12 {
        return Err(Error::param("bath", "|M|^2 exceeds N(N+1)"));
    }
    let l = 1.0 + 2.0 * sh * sh - 2.0 * (2.0 * bath.mu).cos() * sh * ch;
    let l_prime = (2.0 * nt + 1.0) * l;
    let phi_sq = (re(ch) - e2.conj() * sh).arg();
    let c_sq = c * re(ch) + c.adjoint() * (e2 * sh);
    Ok(SqueezeDerived { n, m, l, l_prime, phi_sq, c_sq })
}

/// Raw measurement record increment attached to an outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutcomeValue {
    Scalar(f64),
    Pair(f64, f64),
}

impl OutcomeValue {
    pub fn components(&self) -> [f64; 2] {
        match *self {
            OutcomeValue::Scalar(x) => [x, 0.0],
            OutcomeValue::Pair(x, y) => [x, y],
        }
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, OutcomeValue::Pair(..))
    }
}

/// One measurement outcome. The conditional update sums over `branches`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeChannel {
    pub label: String,
    pub branches: Vec<CMat>,
    pub value: OutcomeValue,
    pub povm: CMat,
}

impl OutcomeChannel {
    pub fn new(label: impl Into<String>, branches: Vec<CMat>, value: OutcomeValue) -> Self {
        let n = branches[0].nrows();
        let mut povm = linalg::zeros(n);
        for k in &branches {
            povm += k.adjoint() * k;
        }
        OutcomeChannel { label: label.into(), branches, value, povm }
    }

    /// Unnormalized conditional state `sum_k K rho K^dag`.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = linalg::zeros(rho.nrows());
        for k in &self.branches {
            out += k * rho * k.adjoint();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    VacuumPhotocount,
    VacuumHomodyne,
    VacuumHeterodyne,
    CoherentPhotocount,
    ThermalHomodyne,
    SqueezedThermalHomodyne,
    PoissonStrong,
    InefficientHomodyne,
    CustomCircuit,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 9] = [
        SchemeTag::VacuumPhotocount,
        SchemeTag::VacuumHomodyne,
        SchemeTag::VacuumHeterodyne,
        SchemeTag::CoherentPhotocount,
        SchemeTag::ThermalHomodyne,
        SchemeTag::SqueezedThermalHomodyne,
        SchemeTag::PoissonStrong,
        SchemeTag::InefficientHomodyne,
        SchemeTag::CustomCircuit,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            SchemeTag::VacuumPhotocount => "vacuum_photocount",
            SchemeTag::VacuumHomodyne => "vacuum_homodyne",
            SchemeTag::VacuumHeterodyne => "vacuum_heterodyne",
            SchemeTag::CoherentPhotocount => "coherent_photocount",
            SchemeTag::ThermalHomodyne => "thermal_homodyne",
            SchemeTag::SqueezedThermalHomodyne => "squeezed_thermal_homodyne",
            SchemeTag::PoissonStrong => "poisson_strong",
            SchemeTag::InefficientHomodyne => "inefficient_homodyne",
            SchemeTag::CustomCircuit => "custom_circuit",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.id() == id)
    }

    pub fn description(&self) -> &'static str {
        match self {
            SchemeTag::VacuumPhotocount => "photon counting of a vacuum probe",
            SchemeTag::VacuumHomodyne => "homodyne detection of a vacuum probe at quadrature phase phi",
            SchemeTag::VacuumHeterodyne => "heterodyne detection via a probe beamsplitter",
            SchemeTag::CoherentPhotocount => "photon counting of a coherent probe with amplitude alpha",
            SchemeTag::ThermalHomodyne => "homodyne detection of a thermal probe with occupation n_th",
            SchemeTag::SqueezedThermalHomodyne => "homodyne detection of a squeezed thermal probe",
            SchemeTag::PoissonStrong => "rare strong measurements with sigma_z coupling",
            SchemeTag::InefficientHomodyne => "homodyne detection with efficiency eta",
            SchemeTag::CustomCircuit => "user-defined probe, probe state and measurement basis",
        }
    }
}

/// Kraus operators for one time step, grouped by outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    pub outcomes: Vec<OutcomeChannel>,
    pub scheme: SchemeTag,
    pub delta_tau: f64,
}

impl KrausSet {
    pub fn dim(&self) -> usize {
        self.outcomes[0].povm.nrows()
    }

    pub fn povm_sum(&self) -> CMat {
        let mut s = linalg::zeros(self.dim());
        for o in &self.outcomes {
            s += &o.povm;
        }
        s
    }

    /// Operator norm of `sum_j E_j - 1`.
    pub fn completeness_defect(&self) -> f64 {
        linalg::spectral_norm(&(self.povm_sum() - linalg::identity(self.dim())))
    }

    /// `sum_j sum_k K rho K^dag`, not renormalized.
    pub fn apply_unconditional(&self, rho: &CMat) -> CMat {
        let mut out = linalg::zeros(rho.nrows());
        for o in &self.outcomes {
            out += o.apply(rho);
        }
        out
    }

    pub fn labels(&self) -> Vec<String> {
        self.outcomes.iter().map(|o| o.label.clone()).collect()
    }

    pub fn has_pair_values(&self) -> bool {
        self.outcomes.iter().any(|o| o.value.is_pair())
    }

    /// Index of the detector-click outcome `e` of a counting scheme.
    pub fn click_outcome(&self) -> Option<usize> {
        match self.scheme {
            SchemeTag::VacuumPhotocount | SchemeTag::CoherentPhotocount => {
                self.outcomes.iter().position(|o| o.label == "e")
            }
            _ => None,
        }
    }
}

fn check_step(dtau: f64, enhancement: f64) -> Result<()> {
    if !(dtau > 0.0) || !dtau.is_finite() {
        return Err(Error::param("delta_tau", "must be finite and positive"));
    }
    let eff = dtau * enhancement;
    if eff > HARD_STEP_LIMIT {
        return Err(Error::param(
            "delta_tau",
            format!("effective step {eff} exceeds {HARD_STEP_LIMIT}"),
        ));
    }
    if eff > SOFT_STEP_LIMIT {
        log::warn!("effective step {eff} exceeds {SOFT_STEP_LIMIT}; expansion may be inaccurate");
    }
    Ok(())
}

fn sign_label(s: f64) -> &'static str {
    if s > 0.0 {
        "+"
    } else {
        "-"
    }
}

pub fn kraus_vacuum_photocount(sys: &SystemModel, dtau: f64) -> Result<KrausSet> {
    check_step(dtau, 1.0)?;
    let c = &sys.c;
    let id = linalg::identity(sys.dim());
    let cdc = c.adjoint() * c;
    let k_e = c * re(dtau.sqrt());
    let k_g = id - cdc * re(0.5 * dtau);
    Ok(KrausSet {
        outcomes: vec![
            OutcomeChannel::new("e", vec![k_e], OutcomeValue::Scalar(1.0)),
            OutcomeChannel::new("g", vec![k_g], OutcomeValue::Scalar(0.0)),
        ],
        scheme: SchemeTag::VacuumPhotocount,
        delta_tau: dtau,
    })
}

pub fn kraus_vacuum_homodyne(sys: &SystemModel, dtau: f64, phi: f64) -> Result<KrausSet> {
    check_step(dtau, 1.0)?;
    let c = &sys.c;
    let id = linalg::identity(sys.dim());
    let cdc = c.adjoint() * c;
    let ph = (I * phi).exp();
    let sq = dtau.sqrt();
    let outcomes = [1.0, -1.0]
        .iter()
        .map(|&s| {
            let k = (&id + c * (ph * s * sq) - &cdc * re(0.5 * dtau)) * re(FRAC_1_SQRT_2);
            OutcomeChannel::new(sign_label(s), vec![k], OutcomeValue::Scalar(s * sq))
        })
        .collect();
    Ok(KrausSet { outcomes, scheme: SchemeTag::VacuumHomodyne, delta_tau: dtau })
}

pub fn kraus_vacuum_heterodyne(sys: &SystemModel, dtau: f64) -> Result<KrausSet> {
    check_step(dtau, 1.0)?;
    let c = &sys.c;
    let id = linalg::identity(sys.dim());
    let cdc = c.adjoint() * c;
    let sq = dtau.sqrt();
    let mut outcomes = Vec::with_capacity(4);
    for s in [1.0, -1.0] {
        for t in [1.0, -1.0] {
            let coef = (I * (s * t * FRAC_PI_4)).exp() * s;
            let k = (&id + c * (coef * sq) - &cdc * re(0.5 * dtau)) * re(0.5);
            let label = format!("{}{}", sign_label(s), sign_label(t));
            outcomes.push(OutcomeChannel::new(label, vec![k], OutcomeValue::Pair(s * sq, t * sq)));
        }
    }
    Ok(KrausSet { outcomes, scheme: SchemeTag::VacuumHeterodyne, delta_tau: dtau })
}

pub fn kraus_coherent_photocount(sys: &SystemModel, dtau: f64, alpha: C64) -> Result<KrausSet> {
    check_step(dtau, alpha.norm_sqr().max(1.0))?;
    let c = &sys.c;
    let id = linalg::identity(sys.dim());
    let cd = c.adjoint();
    let cdc = &cd * c;
    let p = 1.0 - 0.5 * alpha.norm_sqr() * dtau;
    let k_g = (&id - (&cd * alpha + &cdc * re(0.5)) * re(dtau)) * re(p);
    let k_e = (&id * alpha + c) * re(p * dtau.sqrt());
    Ok(KrausSet {
        outcomes: vec![
            OutcomeChannel::new("e", vec![k_e], OutcomeValue::Scalar(1.0)),
            OutcomeChannel::new("g", vec![k_g], OutcomeValue::Scalar(0.0)),
        ],
        scheme: SchemeTag::CoherentPhotocount,
        delta_tau: dtau,
    })
}

/// Homodyne Kraus operators for a probe prepared in a thermal mixture of
/// `|g>` and `|e>` with occupation `n`, coupled through `c` and measured at
/// phase `phase`. `drive` is added inside every branch (mean-field term).
fn thermal_form(c: &CMat, dtau: f64, n: f64, phase: f64, drive: Option<&CMat>) -> Vec<OutcomeChannel> {
    let dim = c.nrows();
    let id = linalg::identity(dim);
    let cd = c.adjoint();
    let cdc = &cd * c;
    let ccd = c * &cd;
    let s = 2.0 * n + 1.0;
    let dts = s * dtau;
    let sq = dts.sqrt();
    let ph = (I * phase).exp();
    let wg = ((n + 1.0) / s).sqrt() * FRAC_1_SQRT_2;
    let we = (n / s).sqrt() * FRAC_1_SQRT_2;
    let zero = linalg::zeros(dim);
    let drive = drive.unwrap_or(&zero);
    [1.0, -1.0]
        .iter()
        .map(|&sg| {
            let k_g = (&id + c * (ph * sg * sq) - &cdc * re(0.5 * dts) + drive) * re(wg);
            let k_e = (&id - &cd * (ph.conj() * sg * sq) - &ccd * re(0.5 * dts) + drive) * (ph * sg * we);
            OutcomeChannel::new(sign_label(sg), vec![k_g, k_e], OutcomeValue::Scalar(sg * dtau.sqrt()))
        })
        .collect()
}

pub fn kraus_thermal_homodyne(sys: &SystemModel, dtau: f64, n_th: f64, phi: f64) -> Result<KrausSet> {
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::param("n_th", "must be finite and non-negative"));
    }
    check_step(dtau, 2.0 * n_th + 1.0)?;
    Ok(KrausSet {
        outcomes: thermal_form(&sys.c, dtau, n_th, phi, None),
        scheme: SchemeTag::ThermalHomodyne,
        delta_tau: dtau,
    })
}

pub fn kraus_squeezed_thermal_homodyne(sys: &SystemModel, dtau: f64, bath: &BathParams) -> Result<KrausSet> {
    let sd = derive_squeeze(bath, &sys.c)?;
    check_step(dtau, 2.0 * bath.n_th + 1.0)?;
    let c = &sys.c;
    let drive = (c * bath.alpha.conj() - c.adjoint() * bath.alpha) * re(dtau);
    Ok(KrausSet {
        outcomes: thermal_form(&sd.c_sq, dtau, bath.n_th, sd.phi_sq, Some(&drive)),
        scheme: SchemeTag::SqueezedThermalHomodyne,
        delta_tau: dtau,
    })
}

/// Strong measurements occurring with probability `lambda_dt` per step.
/// The system operator is fixed to `sigma_z`; `theta` is the rotation angle
/// of the conditional probe interaction.
pub fn kraus_poisson_strong(theta: f64, lambda_dt: f64) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&lambda_dt) {
        return Err(Error::param("lambda_dt", "must lie in [0, 1]"));
    }
    if !theta.is_finite() {
        return Err(Error::param("theta", "must be finite"));
    }
    if theta != FRAC_PI_2 {
        return poisson_strong_circuit(theta, lambda_dt);
    }
    let id = linalg::identity(2);
    let z = linalg::sigma_z();
    let outcomes = [1.0, -1.0]
        .iter()
        .map(|&s| {
            let k_e = &id * re(((1.0 - lambda_dt) / 2.0).sqrt());
            let k_g = (&id + &z * re(s)) * re(0.5 * lambda_dt.sqrt());
            OutcomeChannel::new(sign_label(s), vec![k_e, k_g], OutcomeValue::Scalar(s))
        })
        .collect();
    Ok(KrausSet { outcomes, scheme: SchemeTag::PoissonStrong, delta_tau: lambda_dt })
}

/// The controlled-interaction circuit behind [`kraus_poisson_strong`]:
/// system, probe and a classical-randomness ancilla in `sqrt(1-p)|e> + sqrt(p)|g>`.
pub fn poisson_strong_circuit(theta: f64, lambda_dt: f64) -> Result<KrausSet> {
    let id2 = linalg::identity(2);
    let zy = linalg::kron(&linalg::sigma_z(), &linalg::sigma_y());
    let v = linalg::identity(4) * re((theta / 2.0).cos()) + zy * (I * (theta / 2.0).sin());
    let pe = linalg::projector(&linalg::ket_e());
    let pg = linalg::projector(&linalg::ket_g());
    let cv = linalg::kron(&linalg::kron(&id2, &id2), &pe) + linalg::kron(&v, &pg);
    let chi = linalg::ket_e() * re((1.0 - lambda_dt).sqrt()) + linalg::ket_g() * re(lambda_dt.sqrt());
    let probe = ProbeState::pure(linalg::ket_tensor(&linalg::ket_g(), &chi))?;
    let outcomes: Vec<ProbeOutcome> = [1.0, -1.0]
        .iter()
        .map(|&s| ProbeOutcome {
            label: sign_label(s).into(),
            vectors: vec![
                linalg::ket_tensor(&linalg::phi_state(s, 0.0), &linalg::ket_e()),
                linalg::ket_tensor(&linalg::phi_state(s, 0.0), &linalg::ket_g()),
            ],
            value: OutcomeValue::Scalar(s),
        })
        .collect();
    kraus_from_circuit(&cv, &probe, &outcomes, lambda_dt, SchemeTag::PoissonStrong)
}

pub fn kraus_inefficient_homodyne(sys: &SystemModel, dtau: f64, eta: f64) -> Result<KrausSet> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::param("eta", "must lie in (0, 1]"));
    }
    check_step(dtau, 1.0)?;
    let c = &sys.c;
    let id = linalg::identity(sys.dim());
    let cdc = c.adjoint() * c;
    let sq = dtau.sqrt();
    let outcomes = [1.0, -1.0]
        .iter()
        .map(|&s| {
            let k_g = (&id + c * re(s * sq) - &cdc * re(0.5 * dtau)) * re((eta / 2.0).sqrt());
            let k_e = &id * re(((1.0 - eta) / 2.0).sqrt());
            OutcomeChannel::new(sign_label(s), vec![k_g, k_e], OutcomeValue::Scalar(s * sq))
        })
        .collect();
    Ok(KrausSet { outcomes, scheme: SchemeTag::InefficientHomodyne, delta_tau: dtau })
}

fn interaction_generator(c: &CMat, a: &CMat, dtau: f64) -> CMat {
    (linalg::kron(c, &a.adjoint()) - linalg::kron(&c.adjoint(), a)) * re(dtau.sqrt())
}

/// `exp(sqrt(dtau) (c (x) a^dag - c^dag (x) a))`.
pub fn interaction_unitary_exact(c: &CMat, a: &CMat, dtau: f64) -> Result<CMat> {
    linalg::require_square("c", c)?;
    linalg::require_square("a", a)?;
    linalg::exp_anti_hermitian(&interaction_generator(c, a, dtau))
}

/// Second-order expansion `1 + X + X^2 / 2` of the interaction unitary.
pub fn interaction_unitary_truncated(c: &CMat, a: &CMat, dtau: f64) -> Result<CMat> {
    linalg::require_square("c", c)?;
    linalg::require_square("a", a)?;
    let x = interaction_generator(c, a, dtau);
    let n = x.nrows();
    Ok(linalg::identity(n) + &x + (&x * &x) * re(0.5))
}

/// A probe state given as a convex mixture of normalized vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeState {
    components: Vec<(f64, CVec)>,
}

impl ProbeState {
    pub fn pure(v: CVec) -> Result<Self> {
        Self::mixed(vec![(1.0, v)])
    }

    pub fn mixed(components: Vec<(f64, CVec)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::param("probe_state", "no components"));
        }
        let dim = components[0].1.len();
        let mut total = 0.0;
        for (w, v) in &components {
            if v.len() != dim {
                return Err(Error::DimensionMismatch("probe state components differ in dimension".into()));
            }
            if !(*w >= 0.0) {
                return Err(Error::param("probe_state", "negative weight"));
            }
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::param("probe_state", "component vector is not normalized"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::param("probe_state", format!("weights sum to {total}")));
        }
        Ok(ProbeState { components })
    }

    /// Decomposes a density matrix into its eigen-ensemble (largest weight first).
    pub fn from_density(m: &CMat) -> Result<Self> {
        let rho = crate::density::DensityMatrix::new(m.clone())?;
        let (vals, vecs) = linalg::hermitian_eigen(rho.matrix());
        if vals.iter().any(|&l| l < -1e-10) {
            return Err(Error::param("probe_state", "not positive semidefinite"));
        }
        let mut comps: Vec<(f64, CVec)> = vals
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-14)
            .map(|(k, &l)| (l, vecs.column(k).into_owned()))
            .collect();
        let total: f64 = comps.iter().map(|c| c.0).sum();
        for c in &mut comps {
            c.0 /= total;
        }
        Self::mixed(comps)
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.len()
    }

    pub fn components(&self) -> &[(f64, CVec)] {
        &self.components
    }

    pub fn density(&self) -> CMat {
        let mut m = linalg::zeros(self.dim());
        for (w, v) in &self.components {
            m += linalg::projector(v) * re(*w);
        }
        m
    }
}

/// A probe measurement outcome, coarse-grained over one or more probe vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub label: String,
    pub vectors: Vec<CVec>,
    pub value: OutcomeValue,
}

/// `<o| U |k>` as a system operator, with the probe factor on the right.
pub fn partial_matrix_element(u: &CMat, bra: &CVec, ket: &CVec) -> CMat {
    let pd = bra.len();
    let sd = u.nrows() / pd;
    let mut k = linalg::zeros(sd);
    for a in 0..sd {
        for b in 0..sd {
            let mut s = C64::new(0.0, 0.0);
            for p in 0..pd {
                let op = bra[p].conj();
                if op == C64::new(0.0, 0.0) {
                    continue;
                }
                for q in 0..pd {
                    s += op * u[(a * pd + p, b * pd + q)] * ket[q];
                }
            }
            k[(a, b)] = s;
        }
    }
    k
}

/// Kraus operators `sqrt(lambda_k) <o_j| U |k>` of a system-probe circuit.
pub fn kraus_from_circuit(
    u: &CMat,
    probe: &ProbeState,
    outcomes: &[ProbeOutcome],
    delta_tau: f64,
    scheme: SchemeTag,
) -> Result<KrausSet> {
    let pd = probe.dim();
    linalg::require_square("unitary", u)?;
    if !u.nrows().is_multiple_of(pd) {
        return Err(Error::DimensionMismatch(format!(
            "unitary dimension {} is not a multiple of probe dimension {pd}",
            u.nrows()
        )));
    }
    let defect = linalg::unitarity_defect(u);
    if defect > 1e-10 {
        return Err(Error::NonUnitary(defect));
    }
    project_circuit(u, probe, outcomes, delta_tau, scheme)
}

/// As [`kraus_from_circuit`] but without the unitarity check, for truncated
/// expansions of the interaction.
pub fn project_circuit(
    u: &CMat,
    probe: &ProbeState,
    outcomes: &[ProbeOutcome],
    delta_tau: f64,
    scheme: SchemeTag,
) -> Result<KrausSet> {
    let pd = probe.dim();
    if !u.is_square() || !u.nrows().is_multiple_of(pd) {
        return Err(Error::DimensionMismatch("circuit and probe dimensions are incompatible".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::param("outcomes", "no outcomes"));
    }
    let mut closure = linalg::zeros(pd);
    for o in outcomes {
        if o.vectors.is_empty() {
            return Err(Error::param("outcomes", format!("outcome `{}` has no vectors", o.label)));
        }
        for v in &o.vectors {
            if v.len() != pd {
                return Err(Error::DimensionMismatch("measurement vector dimension".into()));
            }
            closure += linalg::projector(v);
        }
    }
    let incompleteness = linalg::max_abs(&(closure - linalg::identity(pd)));
    if incompleteness > 1e-10 {
        return Err(Error::IncompleteMeasurement(incompleteness));
    }
    let channels = outcomes
        .iter()
        .map(|o| {
            let mut branches = Vec::new();
            for v in &o.vectors {
                for (w, psi) in probe.components() {
                    branches.push(partial_matrix_element(u, v, psi) * re(w.sqrt()));
                }
            }
            OutcomeChannel::new(o.label.clone(), branches, o.value)
        })
        .collect();
    Ok(KrausSet { outcomes: channels, scheme, delta_tau })
}

/// Probe beamsplitter `exp[i(eta s- (x) s+ + eta* s+ (x) s-)]` with `eta = -i pi/4`.
pub fn beamsplitter() -> CMat {
    let eta = cx(0.0, -FRAC_PI_4);
    let sm = linalg::sigma_minus();
    let sp = linalg::sigma_plus();
    let x = linalg::kron(&sm, &sp) * eta + linalg::kron(&sp, &sm) * eta.conj();
    linalg::unitary_evolution(&(-x), 1.0).expect("generator is Hermitian")
}

/// The beamsplitter written out on the two-probe basis.
pub fn beamsplitter_explicit() -> CMat {
    let (e, g) = (linalg::ket_e(), linalg::ket_g());
    let ee = linalg::ket_tensor(&e, &e);
    let eg = linalg::ket_tensor(&e, &g);
    let ge = linalg::ket_tensor(&g, &e);
    let gg = linalg::ket_tensor(&g, &g);
    let s = re(FRAC_1_SQRT_2);
    &gg * gg.adjoint()
        + &ee * ee.adjoint()
        + (&ge * ge.adjoint() + &eg * eg.adjoint() + &ge * eg.adjoint() - &eg * ge.adjoint()) * s
}

/// The beamsplitter as a product of two Pauli-pair rotations.
pub fn beamsplitter_factored() -> CMat {
    let (x, y) = (linalg::sigma_x(), linalg::sigma_y());
    let xy = linalg::kron(&x, &y);
    let yx = linalg::kron(&y, &x);
    let a = linalg::unitary_evolution(&xy, -std::f64::consts::PI / 8.0).expect("Hermitian");
    let b = linalg::unitary_evolution(&yx, std::f64::consts::PI / 8.0).expect("Hermitian");
    a * b
}

/// The single-probe operator of a squeezed bath, `s- cosh r - e^{2i mu} s+ sinh r`.
pub fn squeezed_probe_operator(r: f64, mu: f64) -> CMat {
    linalg::sigma_minus() * re(r.cosh()) - linalg::sigma_plus() * ((I * (2.0 * mu)).exp() * r.sinh())
}

/// Thermal probe mixture `((n+1)|g><g| + n|e><e|) / (2n+1)`.
pub fn thermal_probe_state(n: f64) -> Result<ProbeState> {
    let s = 2.0 * n + 1.0;
    ProbeState::mixed(vec![((n + 1.0) / s, linalg::ket_g()), (n / s, linalg::ket_e())])
}

fn pm_outcomes(phase: f64, dtau: f64) -> Vec<ProbeOutcome> {
    [1.0, -1.0]
        .iter()
        .map(|&s| ProbeOutcome {
            label: sign_label(s).into(),
            vectors: vec![linalg::phi_state(s, phase)],
            value: OutcomeValue::Scalar(s * dtau.sqrt()),
        })
        .collect()
}

fn count_outcomes() -> Vec<ProbeOutcome> {
    vec![
        ProbeOutcome { label: "e".into(), vectors: vec![linalg::ket_e()], value: OutcomeValue::Scalar(1.0) },
        ProbeOutcome { label: "g".into(), vectors: vec![linalg::ket_g()], value: OutcomeValue::Scalar(0.0) },
    ]
}

/// Two-probe heterodyne circuit: the system couples to the first probe, then
/// a beamsplitter mixes the probes before they are measured in the
/// `phi_{+-}` and `phi_{+-i}` bases.
pub fn heterodyne_circuit(c: &CMat, dtau: f64, exact: bool) -> Result<KrausSet> {
    let sm = linalg::sigma_minus();
    let ui = if exact {
        interaction_unitary_exact(c, &sm, dtau)?
    } else {
        interaction_unitary_truncated(c, &sm, dtau)?
    };
    let sd = c.nrows();
    let total = linalg::kron(&linalg::identity(sd), &beamsplitter()) * linalg::kron(&ui, &linalg::identity(2));
    let probe = ProbeState::pure(linalg::ket_tensor(&linalg::ket_g(), &linalg::ket_g()))?;
    let sq = dtau.sqrt();
    let mut outcomes = Vec::new();
    for s in [1.0, -1.0] {
        for t in [1.0, -1.0] {
            let v = linalg::ket_tensor(&linalg::phi_state(s, 0.0), &linalg::phi_state(t, FRAC_PI_2));
            outcomes.push(ProbeOutcome {
                label: format!("{}{}", sign_label(s), sign_label(t)),
                vectors: vec![v],
                value: OutcomeValue::Pair(s * sq, t * sq),
            });
        }
    }
    project_circuit(&total, &probe, &outcomes, dtau, SchemeTag::VacuumHeterodyne)
}

/// User-defined probe coupling, measured through the exact interaction unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomCircuit {
    pub probe_op: CMat,
    pub probe_state: ProbeState,
    pub outcomes: Vec<ProbeOutcome>,
}

/// Scheme selection with its parameters. Rates are in the same units as `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeConfig {
    VacuumPhotocount,
    VacuumHomodyne { phi: f64 },
    VacuumHeterodyne,
    CoherentPhotocount { alpha: C64 },
    ThermalHomodyne { n_th: f64, phi: f64 },
    SqueezedThermalHomodyne { bath: BathParams },
    PoissonStrong { theta: f64, lambda: f64 },
    InefficientHomodyne { eta: f64 },
    CustomCircuit(CustomCircuit),
}

impl SchemeConfig {
    pub fn tag(&self) -> SchemeTag {
        match self {
            SchemeConfig::VacuumPhotocount => SchemeTag::VacuumPhotocount,
            SchemeConfig::VacuumHomodyne { .. } => SchemeTag::VacuumHomodyne,
            SchemeConfig::VacuumHeterodyne => SchemeTag::VacuumHeterodyne,
            SchemeConfig::CoherentPhotocount { .. } => SchemeTag::CoherentPhotocount,
            SchemeConfig::ThermalHomodyne { .. } => SchemeTag::ThermalHomodyne,
            SchemeConfig::SqueezedThermalHomodyne { .. } => SchemeTag::SqueezedThermalHomodyne,
            SchemeConfig::PoissonStrong { .. } => SchemeTag::PoissonStrong,
            SchemeConfig::InefficientHomodyne { .. } => SchemeTag::InefficientHomodyne,
            SchemeConfig::CustomCircuit(_) => SchemeTag::CustomCircuit,
        }
    }

    pub fn id(&self) -> &'static str {
        self.tag().id()
    }

    /// Kraus operators for a step of physical duration `dt` (`delta_tau = gamma dt`).
    pub fn build(&self, sys: &SystemModel, dt: f64) -> Result<KrausSet> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", "must be finite and positive"));
        }
        let dtau = sys.gamma * dt;
        match self {
            SchemeConfig::VacuumPhotocount => kraus_vacuum_photocount(sys, dtau),
            SchemeConfig::VacuumHomodyne { phi } => kraus_vacuum_homodyne(sys, dtau, *phi),
            SchemeConfig::VacuumHeterodyne => kraus_vacuum_heterodyne(sys, dtau),
            SchemeConfig::CoherentPhotocount { alpha } => kraus_coherent_photocount(sys, dtau, *alpha),
            SchemeConfig::ThermalHomodyne { n_th, phi } => kraus_thermal_homodyne(sys, dtau, *n_th, *phi),
            SchemeConfig::SqueezedThermalHomodyne { bath } => kraus_squeezed_thermal_homodyne(sys, dtau, bath),
            SchemeConfig::PoissonStrong { theta, lambda } => {
                if sys.dim() != 2 {
                    return Err(Error::DimensionMismatch("poisson_strong requires a qubit system".into()));
                }
                if !(*lambda >= 0.0) {
                    return Err(Error::param("scheme.lambda", "must be non-negative"));
                }
                let mut k = kraus_poisson_strong(*theta, lambda * dt)?;
                k.delta_tau = dtau;
                Ok(k)
            }
            SchemeConfig::InefficientHomodyne { eta } => kraus_inefficient_homodyne(sys, dtau, *eta),
            SchemeConfig::CustomCircuit(cc) => {
                check_step(dtau, 1.0)?;
                if cc.probe_op.nrows() != cc.probe_state.dim() {
                    return Err(Error::DimensionMismatch("probe operator and probe state differ in dimension".into()));
                }
                let u = interaction_unitary_exact(&sys.c, &cc.probe_op, dtau)?;
                kraus_from_circuit(&u, &cc.probe_state, &cc.outcomes, dtau, SchemeTag::CustomCircuit)
            }
        }
    }

    /// The same scheme obtained by projecting an explicit probe circuit,
    /// with either the exact or the second-order interaction unitary.
    pub fn build_circuit(&self, sys: &SystemModel, dtau: f64, exact: bool) -> Result<KrausSet> {
        let unitary = |a: &CMat| {
            if exact {
                interaction_unitary_exact(&sys.c, a, dtau)
            } else {
                interaction_unitary_truncated(&sys.c, a, dtau)
            }
        };
        let sm = linalg::sigma_minus();
        let tag = self.tag();
        let g = || ProbeState::pure(linalg::ket_g());
        match self {
            SchemeConfig::VacuumPhotocount => project_circuit(&unitary(&sm)?, &g()?, &count_outcomes(), dtau, tag),
            SchemeConfig::VacuumHomodyne { phi } => {
                project_circuit(&unitary(&sm)?, &g()?, &pm_outcomes(*phi, dtau), dtau, tag)
            }
            SchemeConfig::VacuumHeterodyne => heterodyne_circuit(&sys.c, dtau, exact),
            SchemeConfig::CoherentPhotocount { alpha } => {
                let v = linalg::ket_g() * re(1.0 - 0.5 * alpha.norm_sqr() * dtau)
                    + linalg::ket_e() * (alpha * dtau.sqrt());
                let v = &v / re(v.norm());
                project_circuit(&unitary(&sm)?, &ProbeState::pure(v)?, &count_outcomes(), dtau, tag)
            }
            SchemeConfig::ThermalHomodyne { n_th, phi } => {
                let a = &sm * re((2.0 * n_th + 1.0).sqrt());
                project_circuit(&unitary(&a)?, &thermal_probe_state(*n_th)?, &pm_outcomes(*phi, dtau), dtau, tag)
            }
            SchemeConfig::SqueezedThermalHomodyne { bath } => {
                let sd = derive_squeeze(bath, &sys.c)?;
                let a = squeezed_probe_operator(bath.r, bath.mu) * re((2.0 * bath.n_th + 1.0).sqrt())
                    + linalg::identity(2) * (bath.alpha * dtau.sqrt());
                project_circuit(
                    &unitary(&a)?,
                    &thermal_probe_state(bath.n_th)?,
                    &pm_outcomes(sd.phi_sq, dtau),
                    dtau,
                    tag,
                )
            }
            SchemeConfig::PoissonStrong { theta, lambda } => poisson_strong_circuit(*theta, lambda * dtau / sys.gamma),
            SchemeConfig::InefficientHomodyne { eta } => {
                let ui = unitary(&sm)?;
                let sd = sys.dim();
                let pe = linalg::projector(&linalg::ket_e());
                let pg = linalg::projector(&linalg::ket_g());
                let cu = linalg::kron(&linalg::identity(2 * sd), &pe) + linalg::kron(&ui, &pg);
                let chi = linalg::ket_e() * re((1.0 - eta).sqrt()) + linalg::ket_g() * re(eta.sqrt());
                let probe = ProbeState::pure(linalg::ket_tensor(&linalg::ket_g(), &chi))?;
                let outcomes: Vec<ProbeOutcome> = [1.0, -1.0]
                    .iter()
                    .map(|&s| ProbeOutcome {
                        label: sign_label(s).into(),
                        vectors: vec![
                            linalg::ket_tensor(&linalg::phi_state(s, 0.0), &linalg::ket_g()),
                            linalg::ket_tensor(&linalg::phi_state(s, 0.0), &linalg::ket_e()),
                        ],
                        value: OutcomeValue::Scalar(s * dtau.sqrt()),
                    })
                    .collect();
                project_circuit(&cu, &probe, &outcomes, dtau, tag)
            }
            SchemeConfig::CustomCircuit(cc) => {
                project_circuit(&unitary(&cc.probe_op)?, &cc.probe_state, &cc.outcomes, dtau, tag)
            }
        }
    }
}

/// Largest entry-wise difference between corresponding Kraus branches.
pub fn kraus_distance(a: &KrausSet, b: &KrausSet) -> Result<f64> {
    if a.outcomes.len() != b.outcomes.len() {
        return Err(Error::DimensionMismatch("different number of outcomes".into()));
    }
    let mut d: f64 = 0.0;
    for (oa, ob) in a.outcomes.iter().zip(&b.outcomes) {
        if oa.branches.len() != ob.branches.len() {
            return Err(Error::DimensionMismatch(format!("outcome `{}` branch count differs", oa.label)));
        }
        for (ka, kb) in oa.branches.iter().zip(&ob.branches) {
            d = d.max(linalg::max_abs(&(ka - kb)));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::*;
    use approx::assert_relative_eq;

    fn decay() -> SystemModel {
        SystemModel::new(sigma_minus(), 1.0).unwrap()
    }

    #[test]
    fn photocount_jump_probability() {
        let k = kraus_vacuum_photocount(&decay(), 0.01).unwrap();
        let rho = projector(&ket_e());
        let p_e = trace_product(&rho, &k.outcomes[0].povm).re;
        assert_relative_eq!(p_e, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn coherent_jump_probability() {
        let k = kraus_coherent_photocount(&decay(), 0.01, ONE).unwrap();
        let rho = projector(&ket_e());
        let p_e = trace_product(&rho, &k.outcomes[0].povm).re;
        assert!((p_e - 0.02).abs() < 5.0 * 0.01 * 0.01);
    }

    #[test]
    fn homodyne_povm_mean() {
        let dtau = 1e-3;
        let k = kraus_vacuum_homodyne(&decay(), dtau, 0.0).unwrap();
        let e = &k.outcomes[0].povm;
        let want = (identity(2) + sigma_x() * re(dtau.sqrt())) * re(0.5);
        // the two differ only by the O(dtau^2) completeness term
        assert!(max_abs(&(e - want)) < dtau * dtau);
    }

    #[test]
    fn thermal_zero_occupation_has_empty_branch() {
        let k = kraus_thermal_homodyne(&decay(), 1e-3, 0.0, 0.3).unwrap();
        for o in &k.outcomes {
            assert_eq!(o.branches.len(), 2);
            assert_eq!(max_abs(&o.branches[1]), 0.0);
        }
        let v = kraus_vacuum_homodyne(&decay(), 1e-3, 0.3).unwrap();
        for (a, b) in k.outcomes.iter().zip(&v.outcomes) {
            assert!(max_abs(&(&a.branches[0] - &b.branches[0])) < 1e-15);
        }
    }

    #[test]
    fn squeeze_example() {
        let r = 1f64.asinh();
        let sd = derive_squeeze(&BathParams::squeezed(0.0, r, 0.0), &sigma_minus()).unwrap();
        assert_relative_eq!(sd.n, 1.0, epsilon = 1e-14);
        assert_relative_eq!(sd.m.re, -2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sd.l, 3.0 - 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sd.l_prime, sd.l, epsilon = 1e-15);
        assert!(sd.phi_sq.abs() < 1e-14);
    }

    #[test]
    fn exact_unitary_closed_form() {
        let dtau = (std::f64::consts::PI / 4.0).powi(2);
        let u = interaction_unitary_exact(&sigma_z(), &sigma_minus(), dtau).unwrap();
        let s = FRAC_1_SQRT_2;
        let want = identity(4) * re(s) + kron(&sigma_z(), &sigma_y()) * cx(0.0, s);
        assert!(max_abs(&(u - want)) < 1e-14);
    }

    #[test]
    fn non_unitary_circuit_rejected() {
        let u = identity(4) * re(1.1);
        let probe = ProbeState::pure(ket_g()).unwrap();
        let r = kraus_from_circuit(&u, &probe, &count_outcomes(), 0.01, SchemeTag::CustomCircuit);
        assert!(matches!(r, Err(Error::NonUnitary(_))));
    }

    #[test]
    fn incomplete_measurement_rejected() {
        let u = identity(4);
        let probe = ProbeState::pure(ket_g()).unwrap();
        let mut outs = count_outcomes();
        outs.pop();
        let r = kraus_from_circuit(&u, &probe, &outs, 0.01, SchemeTag::CustomCircuit);
        assert!(matches!(r, Err(Error::IncompleteMeasurement(_))));
    }

    #[test]
    fn step_limits() {
        assert!(kraus_vacuum_photocount(&decay(), 0.6).is_err());
        assert!(kraus_vacuum_photocount(&decay(), 0.0).is_err());
        assert!(kraus_thermal_homodyne(&decay(), 0.2, 1.0, 0.0).is_err());
        assert!(kraus_poisson_strong(FRAC_PI_2, 1.5).is_err());
        assert!(kraus_inefficient_homodyne(&decay(), 0.01, 0.0).is_err());
    }

    #[test]
    fn beamsplitter_forms_agree() {
        let a = beamsplitter();
        assert!(max_abs(&(&a - beamsplitter_explicit())) < 1e-14);
        assert!(max_abs(&(&a - beamsplitter_factored())) < 1e-14);
        let zz = kron(&sigma_z(), &sigma_z());
        let id = identity(4);
        let closed = (&id + &zz) * re(0.5)
            + (&id - &zz + kron(&sigma_x(), &sigma_y()) * I - kron(&sigma_y(), &sigma_x()) * I)
                * re(1.0 / (2.0 * 2f64.sqrt()));
        assert!(max_abs(&(&a - closed)) < 1e-14);
    }

    #[test]
    fn scheme_ids_round_trip() {
        for t in SchemeTag::ALL {
            assert_eq!(SchemeTag::from_id(t.id()), Some(t));
        }
    }
}
