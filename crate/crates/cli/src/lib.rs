//! Command-line front end: `run <config>`, `verify <suite>`, `schemes`.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid
//! configuration or arguments, 3 runtime failure.

pub mod config;
pub mod output;
pub mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use qtraj::density::POSITIVITY_TOL;
use qtraj::ensemble::{run_ensemble, EnsembleConfig, EnsembleOutput};
use qtraj::{check_density, SchemeTag, C64};
use serde_json::json;

pub use config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable capping the worker count (0 = automatic).
pub const THREADS_ENV: &str = "QTRAJ_THREADS";

#[derive(Parser, Debug)]
#[command(name = "qtraj", version, about = "Qubit-probe quantum trajectory simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the ensemble described by a JSON config and write its outputs.
    Run { config: PathBuf },
    /// Run an invariant suite and print its residual table.
    Verify {
        suite: Suite,
        /// Probe model for `appendix-b`.
        #[arg(long, value_enum, default_value = "araki-woods")]
        model: Model,
        /// Thermal moment N for `appendix-b`.
        #[arg(long, default_value_t = 1.0)]
        n: f64,
        /// Real part of the squeezing moment M for `appendix-b`.
        #[arg(long = "m-re", default_value_t = 1.0, allow_hyphen_values = true)]
        m_re: f64,
        /// Imaginary part of M for `appendix-b`.
        #[arg(long = "m-im", default_value_t = 0.0, allow_hyphen_values = true)]
        m_im: f64,
    },
    /// List scheme identifiers and the parameters each one reads.
    Schemes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Povm,
    Unconditional,
    HeterodyneCircuit,
    BathStats,
    AppendixA,
    AppendixB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    ArakiWoods,
    TwoQubit,
    Qutrit,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_INVALID,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// What a completed run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub output: EnsembleOutput,
    pub csv: Option<String>,
    pub json: Option<serde_json::Value>,
    pub svg: Option<String>,
    pub warnings: Vec<String>,
}

/// Worker count from `QTRAJ_THREADS`; unset or unparsable means automatic.
pub fn threads_from_env() -> usize {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("ignoring {THREADS_ENV}={v:?}: not a non-negative integer");
            0
        }),
        Err(_) => 0,
    }
}

/// Loads `path`, runs the ensemble on `threads` workers and writes the declared outputs.
pub fn cmd_run(path: &Path, threads: usize) -> Result<RunSummary, RunError> {
    let cfg = config::load(path).map_err(RunError::Config)?;
    execute(&cfg, threads)
}

/// Runs a parsed config and writes its outputs.
pub fn execute(cfg: &RunConfig, threads: usize) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let ens = EnsembleConfig {
        trajectory: cfg.trajectory.clone(),
        n_traj: cfg.trajectories,
        master_seed: cfg.seed,
        threads,
        me_reference: cfg.outputs.master_equation,
        keep_records: true,
    };
    let out = run_ensemble(&ens).map_err(|e| RunError::Runtime(e.to_string()))?;

    let mut warnings = Vec::new();
    for (i, rec) in out.records.iter().enumerate() {
        let states = rec.states.iter().flatten().chain(std::iter::once(&rec.final_state));
        let worst = states
            .map(|s| check_density(s.matrix(), POSITIVITY_TOL).min_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        if worst < -POSITIVITY_TOL {
            warnings.push(format!("trajectory {i}: state eigenvalue {worst:e} below -{POSITIVITY_TOL:e}"));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let csv = cfg.outputs.csv.as_ref().map(|_| output::render_csv(&out));
    let svg = cfg.outputs.svg.as_ref().map(|_| {
        let title = format!("{} ({} trajectories)", cfg.trajectory.scheme.id(), cfg.trajectories);
        output::render_svg(&out.stats, &out.records, cfg.trajectory.dt, &title)
    });
    let json = cfg.outputs.json.as_ref().map(|_| {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let metadata = json!({
            "code_version": env!("CARGO_PKG_VERSION"),
            "scheme": cfg.trajectory.scheme.id(),
            "delta_tau": cfg.trajectory.delta_tau(),
            "timestamp_unix": now,
            "wall_time_s": started.elapsed().as_secs_f64(),
            "config": cfg.raw,
        });
        output::render_json(&out.stats, &out.outcome_labels, metadata, &warnings)
    });

    let write = |p: &Option<PathBuf>, bytes: Option<&[u8]>| -> Result<(), RunError> {
        if let (Some(p), Some(b)) = (p, bytes) {
            output::write_atomic(p, b).map_err(|e| RunError::Runtime(format!("writing {}: {e}", p.display())))?;
        }
        Ok(())
    };
    write(&cfg.outputs.csv, csv.as_deref().map(str::as_bytes))?;
    write(&cfg.outputs.svg, svg.as_deref().map(str::as_bytes))?;
    let json_text = json.as_ref().map(|j| format!("{}\n", serde_json::to_string_pretty(j).unwrap_or_default()));
    write(&cfg.outputs.json, json_text.as_deref().map(str::as_bytes))?;

    Ok(RunSummary { output: out, csv, json, svg, warnings })
}

pub fn run_suite(suite: Suite, model: Model, n: f64, m: C64) -> qtraj::Result<verify::SuiteReport> {
    match suite {
        Suite::Povm => verify::povm_suite(),
        Suite::Unconditional => verify::unconditional_suite(),
        Suite::HeterodyneCircuit => verify::heterodyne_circuit_suite(),
        Suite::BathStats => verify::bath_stats_suite(),
        Suite::AppendixA => verify::appendix_a_suite(),
        Suite::AppendixB => {
            let kind = match model {
                Model::ArakiWoods => verify::ModelKind::ArakiWoods,
                Model::TwoQubit => verify::ModelKind::TwoQubit,
                Model::Qutrit => verify::ModelKind::Qutrit,
            };
            verify::appendix_b_suite(kind, n, m)
        }
    }
}

fn schemes_table() -> String {
    let mut s = String::new();
    for tag in SchemeTag::ALL {
        s.push_str(&format!("{:<27} {}\n{:<27}   params: {}\n", tag.id(), tag.description(), "", config::scheme_params(tag)));
    }
    s
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { config } => match cmd_run(&config, threads_from_env()) {
            Ok(summary) => {
                let st = &summary.output.stats;
                println!("ran {} trajectories of {} recorded steps", st.n_traj, st.steps.len());
                if let Some(d) = st.max_me_deviation {
                    println!("max |ensemble mean - master equation| = {d:e}");
                }
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::Verify { suite, model, n, m_re, m_im } => match run_suite(suite, model, n, C64::new(m_re, m_im)) {
            Ok(report) => {
                print!("{}", report.render());
                if report.pass() {
                    EXIT_OK
                } else {
                    eprintln!("failed checks: {}", report.failures().join(", "));
                    EXIT_VERIFY_FAILED
                }
            }
            Err(e @ qtraj::Error::InvalidParameter { .. }) => {
                eprintln!("error: {e}");
                EXIT_INVALID
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            }
        },
        Command::Schemes => {
            print!("{}", schemes_table());
            EXIT_OK
        }
    }
}
