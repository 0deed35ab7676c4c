//! JSON run configuration.
//!
//! Complex numbers are `[re, im]` pairs (a bare number is read as real).
//! Matrices are row-major: either `dim` rows of `dim` entries, or one flat
//! list of `dim * dim` entries. Small qubit operators may be named instead:
//! `"sigma_minus"`, `"sigma_plus"`, `"sigma_x"`, `"sigma_y"`, `"sigma_z"`,
//! `"identity"`.

use std::fmt;
use std::path::{Path, PathBuf};

use qtraj::density::POSITIVITY_TOL;
use qtraj::linalg::{self, CMat, CVec, C64};
use qtraj::schemes::{CustomCircuit, ProbeOutcome, ProbeState};
use qtraj::stepper::{Observable, TrajectoryConfig};
use qtraj::{check_density, BathParams, DensityMatrix, OutcomeValue, SchemeConfig, SchemeTag, SystemModel};
use serde_json::{Map, Value};

/// A configuration problem, tied to the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub master_equation: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub trajectory: TrajectoryConfig,
    pub trajectories: usize,
    pub seed: u64,
    pub outputs: Outputs,
    /// The parsed document, echoed into the JSON summary.
    pub raw: Value,
}

/// Reads and validates a config file. Output paths are resolved against the
/// directory holding the file.
pub fn load(path: &Path) -> CResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&text, &base)
}

pub fn parse(text: &str, base_dir: &Path) -> CResult<RunConfig> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("<document>", e.to_string()))?;
    let root = object(&raw, "<document>")?;

    let system = object(required(root, "system", "")?, "system")?;
    let dim = count(required(system, "dim", "system")?, "system.dim")?;
    if dim < 1 {
        return Err(ConfigError::new("system.dim", "must be at least 1"));
    }
    let c = matrix(required(system, "coupling", "system")?, dim, "system.coupling")?;
    let gamma = match system.get("gamma") {
        Some(v) => number(v, "system.gamma")?,
        None => 1.0,
    };
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(ConfigError::new("system.gamma", "must be positive"));
    }
    let mut sys = SystemModel::new(c, gamma).map_err(|e| ConfigError::new("system.coupling", e.to_string()))?;
    if let Some(h) = system.get("hamiltonian").filter(|v| !v.is_null()) {
        let h = matrix(h, dim, "system.hamiltonian")?;
        sys = sys.with_hamiltonian(h).map_err(|e| ConfigError::new("system.hamiltonian", e.to_string()))?;
    }
    let rho0 = initial_state(required(system, "initial_state", "system")?, dim, "system.initial_state")?;

    let empty = Map::new();
    let bath = match root.get("bath") {
        Some(v) if !v.is_null() => object(v, "bath")?,
        _ => &empty,
    };
    let scheme_obj = object(required(root, "scheme", "")?, "scheme")?;
    let scheme = scheme(scheme_obj, bath, dim)?;

    let run = object(required(root, "run", "")?, "run")?;
    let dt = number(required(run, "dt", "run")?, "run.dt")?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(ConfigError::new("run.dt", "must be finite and positive"));
    }
    let steps = count(required(run, "steps", "run")?, "run.steps")?;
    if steps < 1 {
        return Err(ConfigError::new("run.steps", "must be at least 1"));
    }
    let trajectories = match run.get("trajectories") {
        Some(v) => count(v, "run.trajectories")?,
        None => 1,
    };
    if trajectories < 1 {
        return Err(ConfigError::new("run.trajectories", "must be at least 1"));
    }
    let seed = match run.get("seed") {
        Some(v) => v.as_u64().ok_or_else(|| ConfigError::new("run.seed", "must be a non-negative integer"))?,
        None => 0,
    };
    let record_every = match run.get("record_every") {
        Some(v) => count(v, "run.record_every")?,
        None => 1,
    };
    if record_every < 1 {
        return Err(ConfigError::new("run.record_every", "must be at least 1"));
    }
    let record_states = match run.get("record_states") {
        Some(v) => v.as_bool().ok_or_else(|| ConfigError::new("run.record_states", "must be a boolean"))?,
        None => false,
    };

    let observables = match root.get("observables") {
        Some(v) if !v.is_null() => observables(v, dim)?,
        _ if dim == 2 => qtraj::stepper::pauli_observables(),
        _ => Vec::new(),
    };

    let outputs = match root.get("outputs") {
        Some(v) if !v.is_null() => outputs(object(v, "outputs")?, base_dir)?,
        _ => Outputs::default(),
    };

    let trajectory = TrajectoryConfig {
        system: sys,
        scheme,
        rho0,
        dt,
        steps,
        record_every,
        record_states,
        observables,
    };
    // Scheme-level limits (step size, parameter ranges) are checked by building once.
    qtraj::stepper::TrajectoryRunner::new(&trajectory).map_err(|e| core_field_error(&e))?;

    Ok(RunConfig { trajectory, trajectories, seed, outputs, raw })
}

/// Maps a library validation error onto the config field it came from.
fn core_field_error(e: &qtraj::Error) -> ConfigError {
    let field = match e {
        qtraj::Error::InvalidParameter { name, .. } => match name.as_str() {
            "dt" | "delta_tau" => "run.dt".to_string(),
            "steps" | "record_every" => format!("run.{name}"),
            "bath" => "bath".to_string(),
            "n_th" | "alpha" | "r" | "mu" => format!("bath.{name}"),
            "lambda_dt" => "scheme.lambda".to_string(),
            "hamiltonian" => "system.hamiltonian".to_string(),
            n if n.contains('.') => n.to_string(),
            n => format!("scheme.{n}"),
        },
        qtraj::Error::DimensionMismatch(_) => "system.dim".to_string(),
        _ => "scheme".to_string(),
    };
    ConfigError::new(field, e.to_string())
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, parent: &str) -> CResult<&'a Value> {
    obj.get(key).filter(|v| !v.is_null()).ok_or_else(|| ConfigError::new(join(parent, key), "is required"))
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

fn object<'a>(v: &'a Value, field: &str) -> CResult<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| ConfigError::new(field, "must be an object"))
}

fn number(v: &Value, field: &str) -> CResult<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(ConfigError::new(field, "must be a finite number")),
    }
}

fn count(v: &Value, field: &str) -> CResult<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| ConfigError::new(field, "must be a non-negative integer"))
}

fn complex(v: &Value, field: &str) -> CResult<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => match (a.as_f64(), b.as_f64()) {
            (Some(re), Some(im)) if re.is_finite() && im.is_finite() => Ok(C64::new(re, im)),
            _ => Err(ConfigError::new(field, "complex entries must be [re, im] with finite numbers")),
        },
        _ => Err(ConfigError::new(field, "expected a number or an [re, im] pair")),
    }
}

fn named_operator(name: &str, dim: usize, field: &str) -> CResult<CMat> {
    let m = match name {
        "identity" => return Ok(linalg::identity(dim)),
        "sigma_minus" => linalg::sigma_minus(),
        "sigma_plus" => linalg::sigma_plus(),
        "sigma_x" => linalg::sigma_x(),
        "sigma_y" => linalg::sigma_y(),
        "sigma_z" => linalg::sigma_z(),
        _ => return Err(ConfigError::new(field, format!("unknown operator name `{name}`"))),
    };
    if dim != 2 {
        return Err(ConfigError::new(field, format!("`{name}` is a qubit operator but dim is {dim}")));
    }
    Ok(m)
}

/// A `dim x dim` matrix: named operator, nested rows or flat row-major list.
pub fn matrix(v: &Value, dim: usize, field: &str) -> CResult<CMat> {
    if let Some(name) = v.as_str() {
        return named_operator(name, dim, field);
    }
    let arr = v.as_array().ok_or_else(|| ConfigError::new(field, "must be a matrix or an operator name"))?;
    let mut entries = Vec::with_capacity(dim * dim);
    if arr.len() == dim && arr.iter().all(|r| r.as_array().is_some_and(|r| r.len() == dim)) {
        for (i, row) in arr.iter().enumerate() {
            for (j, x) in row.as_array().unwrap().iter().enumerate() {
                entries.push(complex(x, &format!("{field}[{i}][{j}]"))?);
            }
        }
    } else if arr.len() == dim * dim {
        for (k, x) in arr.iter().enumerate() {
            entries.push(complex(x, &format!("{field}[{k}]"))?);
        }
    } else {
        return Err(ConfigError::new(
            field,
            format!("expected {dim} rows of {dim} entries or {} row-major entries", dim * dim),
        ));
    }
    Ok(linalg::from_rows(dim, dim, &entries))
}

fn vector(v: &Value, dim: usize, field: &str) -> CResult<CVec> {
    let arr = v.as_array().ok_or_else(|| ConfigError::new(field, "must be a list of amplitudes"))?;
    if arr.len() != dim {
        return Err(ConfigError::new(field, format!("expected {dim} amplitudes, got {}", arr.len())));
    }
    let mut out = CVec::zeros(dim);
    for (k, x) in arr.iter().enumerate() {
        out[k] = complex(x, &format!("{field}[{k}]"))?;
    }
    Ok(out)
}

/// `"ground"`, `"excited"`, `"maximally_mixed"`, `{"ket": [...]}` or
/// `{"density": matrix}`.
pub fn initial_state(v: &Value, dim: usize, field: &str) -> CResult<DensityMatrix> {
    let fail = |e: qtraj::Error| ConfigError::new(field, e.to_string());
    if let Some(name) = v.as_str() {
        return match name {
            "ground" | "excited" if dim != 2 => {
                Err(ConfigError::new(field, format!("`{name}` needs a qubit system (dim 2)")))
            }
            "ground" => Ok(DensityMatrix::ground()),
            "excited" => Ok(DensityMatrix::excited()),
            "maximally_mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
            _ => Err(ConfigError::new(field, format!("unknown state name `{name}`"))),
        };
    }
    let obj = object(v, field)?;
    if let Some(k) = obj.get("ket") {
        let psi = vector(k, dim, &format!("{field}.ket"))?;
        if (psi.norm() - 1.0).abs() > 1e-9 {
            return Err(ConfigError::new(field, format!("ket has norm {}, expected 1", psi.norm())));
        }
        return DensityMatrix::pure(&psi).map_err(fail);
    }
    if let Some(d) = obj.get("density") {
        let m = matrix(d, dim, &format!("{field}.density"))?;
        let rho = DensityMatrix::new(m).map_err(fail)?;
        let health = check_density(rho.matrix(), POSITIVITY_TOL);
        if !health.passes {
            return Err(ConfigError::new(
                field,
                format!("not positive semidefinite (min eigenvalue {:e})", health.min_eigenvalue),
            ));
        }
        return Ok(rho);
    }
    Err(ConfigError::new(field, "expected a state name, {\"ket\": ...} or {\"density\": ...}"))
}

fn opt_number(obj: &Map<String, Value>, key: &str, parent: &str, default: f64) -> CResult<f64> {
    match obj.get(key) {
        Some(v) if !v.is_null() => number(v, &join(parent, key)),
        _ => Ok(default),
    }
}

fn req_number(obj: &Map<String, Value>, key: &str, parent: &str) -> CResult<f64> {
    number(required(obj, key, parent)?, &join(parent, key))
}

fn scheme(obj: &Map<String, Value>, bath: &Map<String, Value>, dim: usize) -> CResult<SchemeConfig> {
    let id = required(obj, "type", "scheme")?
        .as_str()
        .ok_or_else(|| ConfigError::new("scheme.type", "must be a string"))?;
    let tag = SchemeTag::from_id(id).ok_or_else(|| {
        let known: Vec<&str> = SchemeTag::ALL.iter().map(|t| t.id()).collect();
        ConfigError::new("scheme.type", format!("unknown scheme `{id}` (known: {})", known.join(", ")))
    })?;
    let bath_alpha = |required_here: bool| -> CResult<C64> {
        match bath.get("alpha") {
            Some(v) if !v.is_null() => complex(v, "bath.alpha"),
            _ if required_here => Err(ConfigError::new("bath.alpha", "is required")),
            _ => Ok(C64::new(0.0, 0.0)),
        }
    };
    let non_negative = |x: f64, field: &str| -> CResult<f64> {
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(ConfigError::new(field, "must be non-negative"))
        }
    };
    Ok(match tag {
        SchemeTag::VacuumPhotocount => SchemeConfig::VacuumPhotocount,
        SchemeTag::VacuumHomodyne => SchemeConfig::VacuumHomodyne { phi: opt_number(obj, "phi", "scheme", 0.0)? },
        SchemeTag::VacuumHeterodyne => SchemeConfig::VacuumHeterodyne,
        SchemeTag::CoherentPhotocount => SchemeConfig::CoherentPhotocount { alpha: bath_alpha(true)? },
        SchemeTag::ThermalHomodyne => SchemeConfig::ThermalHomodyne {
            n_th: non_negative(req_number(bath, "n_th", "bath")?, "bath.n_th")?,
            phi: opt_number(obj, "phi", "scheme", 0.0)?,
        },
        SchemeTag::SqueezedThermalHomodyne => SchemeConfig::SqueezedThermalHomodyne {
            bath: BathParams {
                alpha: bath_alpha(false)?,
                n_th: non_negative(opt_number(bath, "n_th", "bath", 0.0)?, "bath.n_th")?,
                r: req_number(bath, "r", "bath")?,
                mu: opt_number(bath, "mu", "bath", 0.0)?,
            },
        },
        SchemeTag::PoissonStrong => SchemeConfig::PoissonStrong {
            theta: opt_number(obj, "theta", "scheme", std::f64::consts::FRAC_PI_2)?,
            lambda: non_negative(req_number(obj, "lambda", "scheme")?, "scheme.lambda")?,
        },
        SchemeTag::InefficientHomodyne => {
            let eta = req_number(obj, "eta", "scheme")?;
            if !(0.0..=1.0).contains(&eta) {
                return Err(ConfigError::new("scheme.eta", "must lie in [0, 1]"));
            }
            SchemeConfig::InefficientHomodyne { eta }
        }
        SchemeTag::CustomCircuit => SchemeConfig::CustomCircuit(custom_circuit(obj, dim)?),
    })
}

/// `probe_dim`, `probe_operator` (matrix), `probe_state` (as for the initial
/// state) and `outcomes: [{label, vectors: [ket, ...], value}]`.
fn custom_circuit(obj: &Map<String, Value>, _system_dim: usize) -> CResult<CustomCircuit> {
    let pd = count(required(obj, "probe_dim", "scheme")?, "scheme.probe_dim")?;
    if pd < 2 {
        return Err(ConfigError::new("scheme.probe_dim", "must be at least 2"));
    }
    let probe_op = matrix(required(obj, "probe_operator", "scheme")?, pd, "scheme.probe_operator")?;
    let state = initial_state(required(obj, "probe_state", "scheme")?, pd, "scheme.probe_state")?;
    let probe_state =
        ProbeState::from_density(state.matrix()).map_err(|e| ConfigError::new("scheme.probe_state", e.to_string()))?;
    let list = required(obj, "outcomes", "scheme")?
        .as_array()
        .ok_or_else(|| ConfigError::new("scheme.outcomes", "must be a list"))?;
    if list.is_empty() {
        return Err(ConfigError::new("scheme.outcomes", "must not be empty"));
    }
    let mut outcomes = Vec::with_capacity(list.len());
    for (i, o) in list.iter().enumerate() {
        let f = format!("scheme.outcomes[{i}]");
        let o = object(o, &f)?;
        let label = required(o, "label", &f)?
            .as_str()
            .ok_or_else(|| ConfigError::new(format!("{f}.label"), "must be a string"))?;
        if label.is_empty() || label.contains([',', '"', '\n', '\r']) {
            return Err(ConfigError::new(format!("{f}.label"), "must be non-empty without commas, quotes or newlines"));
        }
        let vecs = required(o, "vectors", &f)?
            .as_array()
            .ok_or_else(|| ConfigError::new(format!("{f}.vectors"), "must be a list of kets"))?;
        let vectors = vecs
            .iter()
            .enumerate()
            .map(|(k, v)| vector(v, pd, &format!("{f}.vectors[{k}]")))
            .collect::<CResult<Vec<_>>>()?;
        let value = match o.get("value") {
            None | Some(Value::Null) => OutcomeValue::Scalar(0.0),
            Some(v) if v.is_number() => OutcomeValue::Scalar(number(v, &format!("{f}.value"))?),
            Some(v) => match v.as_array().map(Vec::as_slice) {
                Some([a, b]) => {
                    OutcomeValue::Pair(number(a, &format!("{f}.value[0]"))?, number(b, &format!("{f}.value[1]"))?)
                }
                _ => return Err(ConfigError::new(format!("{f}.value"), "must be a number or a pair")),
            },
        };
        outcomes.push(ProbeOutcome { label: label.to_string(), vectors, value });
    }
    Ok(CustomCircuit { probe_op, probe_state, outcomes })
}

fn observables(v: &Value, dim: usize) -> CResult<Vec<Observable>> {
    let list = v.as_array().ok_or_else(|| ConfigError::new("observables", "must be a list"))?;
    let mut out: Vec<Observable> = Vec::with_capacity(list.len());
    for (i, o) in list.iter().enumerate() {
        let f = format!("observables[{i}]");
        let o = object(o, &f)?;
        let name = required(o, "name", &f)?
            .as_str()
            .ok_or_else(|| ConfigError::new(format!("{f}.name"), "must be a string"))?;
        let reserved = ["traj", "step", "t", "outcome", "innovation", "innovation2", "loglik"];
        if name.is_empty() || name.contains([',', '"', '\n', '\r']) || reserved.contains(&name) {
            return Err(ConfigError::new(format!("{f}.name"), "must be a plain, unreserved column name"));
        }
        if out.iter().any(|x| x.name == name) {
            return Err(ConfigError::new(format!("{f}.name"), format!("duplicate observable `{name}`")));
        }
        let m = matrix(required(o, "matrix", &f)?, dim, &format!("{f}.matrix"))?;
        out.push(Observable::new(name, m).map_err(|e| ConfigError::new(format!("{f}.matrix"), e.to_string()))?);
    }
    Ok(out)
}

fn outputs(obj: &Map<String, Value>, base: &Path) -> CResult<Outputs> {
    let path = |key: &str| -> CResult<Option<PathBuf>> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(base.join(s))),
            Some(_) => Err(ConfigError::new(format!("outputs.{key}"), "must be a non-empty path string")),
        }
    };
    Ok(Outputs {
        csv: path("csv")?,
        json: path("json")?,
        svg: path("svg")?,
        master_equation: match obj.get("master_equation") {
            None | Some(Value::Null) => false,
            Some(v) => v
                .as_bool()
                .ok_or_else(|| ConfigError::new("outputs.master_equation", "must be a boolean"))?,
        },
    })
}

/// Parameters each scheme reads from the config.
pub fn scheme_params(tag: SchemeTag) -> &'static str {
    match tag {
        SchemeTag::VacuumPhotocount | SchemeTag::VacuumHeterodyne => "-",
        SchemeTag::VacuumHomodyne => "scheme.phi (default 0)",
        SchemeTag::CoherentPhotocount => "bath.alpha",
        SchemeTag::ThermalHomodyne => "bath.n_th, scheme.phi (default 0)",
        SchemeTag::SqueezedThermalHomodyne => "bath.r, bath.mu (0), bath.n_th (0), bath.alpha (0)",
        SchemeTag::PoissonStrong => "scheme.lambda, scheme.theta (default pi/2); qubit only",
        SchemeTag::InefficientHomodyne => "scheme.eta",
        SchemeTag::CustomCircuit => "scheme.probe_dim, scheme.probe_operator, scheme.probe_state, scheme.outcomes",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({
            "system": {"dim": 2, "initial_state": "excited", "coupling": "sigma_minus", "gamma": 1.0},
            "scheme": {"type": "vacuum_photocount"},
            "run": {"dt": 0.01, "steps": 10, "trajectories": 2, "seed": 1}
        })
    }

    fn parse_value(v: &Value) -> CResult<RunConfig> {
        parse(&v.to_string(), Path::new("."))
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_value(&base()).unwrap();
        assert_eq!(cfg.trajectory.steps, 10);
        assert_eq!(cfg.trajectory.observables.len(), 3);
        assert!(cfg.outputs.csv.is_none());
    }

    #[test]
    fn bad_trace_names_the_field() {
        let mut v = base();
        v["system"]["initial_state"] = serde_json::json!({"density": [[0.9, 0], [0, 0]]});
        let e = parse_value(&v).unwrap_err();
        assert_eq!(e.field, "system.initial_state");
    }

    #[test]
    fn missing_bath_parameter() {
        let mut v = base();
        v["scheme"] = serde_json::json!({"type": "thermal_homodyne"});
        assert_eq!(parse_value(&v).unwrap_err().field, "bath.n_th");
    }

    #[test]
    fn flat_and_nested_matrices_agree() {
        let nested = matrix(&serde_json::json!([[[0, 0], [1, 0]], [[1, 0], [0, 0]]]), 2, "m").unwrap();
        let flat = matrix(&serde_json::json!([0, 1, 1, 0]), 2, "m").unwrap();
        assert_eq!(nested, flat);
        assert_eq!(flat, linalg::sigma_x());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let mut v = base();
        v["run"]["dt"] = serde_json::json!(0.9);
        assert_eq!(parse_value(&v).unwrap_err().field, "run.dt");
    }
}
