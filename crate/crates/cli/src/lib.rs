//! Command-line driver: resolves an experiment, runs it and writes the
//! configuration echo, the certificate time series, VTK snapshots and an
//! invariant summary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use log::info;
use thiserror::Error;

use nematic_core::experiments::{experiment_catalogue, ExperimentConfig};
use nematic_core::io::{echo_config, load_config, validate_config, write_vtk, TimeseriesWriter};
use nematic_core::mesh::{check_mesh_admissibility, TriMesh};
use nematic_core::scheme::{run_from, StepError};
use nematic_core::state::{check_invariants, initialize_state, DiscreteState, InitError, InvariantFlags, StepCertificate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

pub const CONFIG_ECHO: &str = "config.txt";
pub const TIMESERIES: &str = "timeseries.csv";
pub const SUMMARY: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Parser)]
#[command(name = "nematic", version, about = "Finite-element simulator for nematic electrolytes")]
pub struct Args {
    /// Configuration file in the key = value format.
    #[arg(long, value_name = "PATH", conflicts_with = "experiment", required_unless_present = "experiment")]
    pub config: Option<PathBuf>,
    /// Catalogue experiment run with its preset.
    #[arg(long, value_name = "NAME")]
    pub experiment: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cells per side of the mesh.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, value_enum)]
    pub stabilization: Option<Switch>,
    /// Evaluate the energy law and the M-matrix audits every step.
    #[arg(long, value_enum)]
    pub certify: Option<Switch>,
    /// VTK snapshot interval in steps; 0 writes the first and last state.
    #[arg(long, value_name = "STEPS")]
    pub vtk_every: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Resolves the configuration from the file or preset plus overrides.
pub fn resolve(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, &args.experiment) {
        (Some(path), _) => load_config(path).map_err(|e| CliError::Validation(e.to_string()))?,
        (None, Some(name)) => experiment_catalogue(name).map_err(|e| CliError::Validation(e.to_string()))?,
        (None, None) => return Err(CliError::Validation("one of --config or --experiment is required".into())),
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(n) = args.n {
        cfg.n_per_side = n;
    }
    if let Some(k) = args.dt {
        cfg.params.k = k;
    }
    if let Some(t) = args.tmax {
        cfg.params.t_final = t;
    }
    if let Some(s) = args.stabilization {
        cfg.params.stabilization_on = s.on();
    }
    if let Some(c) = args.certify {
        cfg.solver.certify = c.on();
    }
    if let Some(v) = args.vtk_every {
        cfg.vtk_every = v;
    }
    validate_config(&cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(cfg)
}

/// Extremes of the certified quantities over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_energy_residual: f64,
    pub max_norm_violation: f64,
    pub n_plus_range: (f64, f64),
    pub n_minus_range: (f64, f64),
    pub max_charge_change: f64,
    pub max_divergence: f64,
    pub m_matrix_failures: usize,
    pub max_fixed_point_iters: usize,
    /// Whether the charge bounds are asserted or only monitored.
    pub bounds_asserted: bool,
    pub violations: Vec<String>,
}

impl RunSummary {
    fn new(s0: &DiscreteState, energy: f64, bounds_asserted: bool) -> Self {
        let r = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        RunSummary {
            steps: 0,
            t_final: s0.t,
            energy_initial: energy,
            energy_final: energy,
            max_energy_residual: 0.0,
            max_norm_violation: s0.director.max_norm_deviation().0,
            n_plus_range: r(&s0.n_plus.values),
            n_minus_range: r(&s0.n_minus.values),
            max_charge_change: 0.0,
            max_divergence: 0.0,
            m_matrix_failures: 0,
            max_fixed_point_iters: 0,
            bounds_asserted,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, c: &StepCertificate) {
        self.steps = c.step;
        self.t_final = c.t;
        self.energy_final = c.energy_after;
        self.max_energy_residual = self.max_energy_residual.max(c.energy_residual().abs());
        self.max_norm_violation = self.max_norm_violation.max(c.max_norm_violation);
        self.n_plus_range = (self.n_plus_range.0.min(c.n_plus_range.0), self.n_plus_range.1.max(c.n_plus_range.1));
        self.n_minus_range = (self.n_minus_range.0.min(c.n_minus_range.0), self.n_minus_range.1.max(c.n_minus_range.1));
        self.max_charge_change = self
            .max_charge_change
            .max(c.charge_mass_change.0.abs())
            .max(c.charge_mass_change.1.abs());
        self.max_divergence = self.max_divergence.max(c.divergence_norm);
        let (p, m) = c.m_matrix_pass();
        self.m_matrix_failures += [p, m].iter().filter(|a| **a == Some(false)).count();
        self.max_fixed_point_iters = self.max_fixed_point_iters.max(c.fixed_point_iters);
    }

    pub fn render(&self) -> String {
        let mut o = String::new();
        let mode = if self.bounds_asserted { "asserted" } else { "monitored" };
        writeln!(o, "steps = {}", self.steps).unwrap();
        writeln!(o, "t_final = {:.6e}", self.t_final).unwrap();
        writeln!(o, "energy_initial = {:.16e}", self.energy_initial).unwrap();
        writeln!(o, "energy_final = {:.16e}", self.energy_final).unwrap();
        writeln!(o, "max_energy_residual = {:.3e}", self.max_energy_residual).unwrap();
        writeln!(o, "max_norm_violation = {:.3e}", self.max_norm_violation).unwrap();
        writeln!(o, "n_plus_range = [{:.16e}, {:.16e}] ({mode})", self.n_plus_range.0, self.n_plus_range.1).unwrap();
        writeln!(o, "n_minus_range = [{:.16e}, {:.16e}] ({mode})", self.n_minus_range.0, self.n_minus_range.1).unwrap();
        writeln!(o, "max_charge_change = {:.3e}", self.max_charge_change).unwrap();
        writeln!(o, "max_divergence = {:.3e}", self.max_divergence).unwrap();
        writeln!(o, "m_matrix_failures = {}", self.m_matrix_failures).unwrap();
        writeln!(o, "max_fixed_point_iters = {}", self.max_fixed_point_iters).unwrap();
        if self.violations.is_empty() {
            writeln!(o, "violations = none").unwrap();
        }
        for v in &self.violations {
            writeln!(o, "violation = {v}").unwrap();
        }
        o
    }
}

fn snapshot(dir: &Path, state: &DiscreteState, mesh: &TriMesh) -> Result<(), CliError> {
    let path = dir.join(format!("state_{:05}.vtk", state.step_index));
    write_vtk(state, mesh, &path).map_err(io_err(&path))
}

/// Runs a resolved experiment, writing every output into `cfg.out_dir`.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let mesh = cfg.build_mesh().map_err(|e| CliError::Validation(e.to_string()))?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let echo = dir.join(CONFIG_ECHO);
    fs::write(&echo, echo_config(cfg)).map_err(io_err(&echo))?;

    let s0 = initialize_state(&mesh, &cfg.params, &cfg.initial_data()).map_err(|e| match e {
        InitError::Solve(_) => CliError::Solver(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    })?;
    let csv_path = dir.join(TIMESERIES);
    let file = File::create(&csv_path).map_err(io_err(&csv_path))?;
    let mut series = TimeseriesWriter::new(BufWriter::new(file)).map_err(io_err(&csv_path))?;
    series.initial(&s0, &mesh, &cfg.params).map_err(io_err(&csv_path))?;
    snapshot(dir, &s0, &mesh)?;

    let admissible = check_mesh_admissibility(&mesh).admissible;
    let step_rule = cfg.params.k <= mesh.h.powf(cfg.dim as f64 / 2.0);
    let bounds_asserted = cfg.params.stabilization_on && admissible && step_rule;
    let e0 = nematic_core::certificates::total_energy(&s0, &mesh, &cfg.params).total;
    let (mass_plus, mass_minus) = s0.charge_masses(&mesh);
    let mut summary = RunSummary::new(&s0, e0, bounds_asserted);

    let n_steps = cfg.params.n_steps();
    info!("running {} for {n_steps} steps on {} nodes", cfg.experiment, mesh.n_nodes());
    let mut pending: Option<CliError> = None;
    let mut last_written = 0;
    let result = run_from(s0, &mesh, &cfg.params, &cfg.solver, n_steps, |s, c| {
        summary.record(c);
        if pending.is_some() {
            return;
        }
        if let Err(e) = series.push(c) {
            pending = Some(io_err(&csv_path)(e));
            return;
        }
        if cfg.vtk_every > 0 && c.step % cfg.vtk_every == 0 {
            match snapshot(dir, s, &mesh) {
                Ok(()) => last_written = c.step,
                Err(e) => pending = Some(e),
            }
        }
    });
    if let Some(e) = pending {
        return Err(e);
    }
    let last = match result {
        Ok(s) => s,
        Err((step, e)) => {
            let kind = match e {
                StepError::FixedPointDiverged { .. } | StepError::NewtonDiverged { .. } => "did not converge",
                _ => "failed",
            };
            return Err(CliError::Solver(format!("step {step} {kind}: {e}")));
        }
    };
    if last.step_index != last_written {
        snapshot(dir, &last, &mesh)?;
    }
    let flags = InvariantFlags {
        max_principle: bounds_asserted,
        ..InvariantFlags::default()
    };
    let report = check_invariants(&last, &mesh, &flags);
    summary.violations = report.violations.iter().map(|v| format!("{v:?}")).collect();
    if summary.max_charge_change > flags.charge_tol * mass_plus.max(mass_minus) {
        summary
            .violations
            .push(format!("ChargeMassDrift({:.3e})", summary.max_charge_change));
    }
    let path = dir.join(SUMMARY);
    fs::write(&path, summary.render()).map_err(io_err(&path))?;
    Ok(summary)
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve(&args).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(summary) => {
            print!("{}", summary.render());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
