//! Line-oriented `key = value` configuration with sections.
//!
//! ```text
//! experiment = defect_flow      # required, before any section
//!
//! [mesh]
//! n = 16                        # required
//! dim = 2
//! pattern = crisscross          # crisscross | union_jack | tet_split
//!
//! [physics]
//! nu = 1.0
//! A = 1.0
//! eps_perp = 0.0
//! eps_a = 0.0
//! lambda_npp = 0.0
//! mu_phi = 0.25
//! nu_el = 0.25
//! alpha = 1.0
//! beta = 0.5
//! stabilization = off           # on | off
//! truncation = off              # off | <C2>
//! applied_field = none          # none | constant ex ey ez | oscillating ax ay az omega
//! director_bc = neumann         # neumann | dirichlet
//!
//! [time]
//! k = 0.0005
//! T = 0.1
//!
//! [solver]
//! tol_fp = 1e-9
//! max_outer_iters = 200
//! newton_tol = 1e-12
//! newton_max_iters = 30
//! order = potential, charges, director, velocity
//! freeze = none                 # none | comma list of sub-solves
//! certify = on
//!
//! [output]
//! dir = out
//! vtk_every = 0                 # 0: first and last state only
//!
//! [initial]
//! velocity = zero               # zero | rotation <speed>
//! director = two_defects        # two_defects | dx dy dz
//! director_fallback = 0 0 1     # none | dx dy dz
//! n_plus = gauss 1 25 0.2 0 0   # <value> | gauss <amplitude> <rate> <x0> <y0> <z0>
//! n_minus = 0.0
//! ```
//!
//! Keys not given take the values of the experiment preset. `#` starts a
//! comment. Floating values are echoed in shortest round-trip form, so an
//! echoed file reloads to an identical configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::experiments::{
    experiment_catalogue, DirectorSpec, ExperimentConfig, ScalarSpec, VelocitySpec,
};
use crate::fem::DirectorBc;
use crate::mesh::Pattern;
use crate::scheme::{Freeze, SubSolve};
use crate::state::AppliedField;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// The offending key for validation errors.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } => Some(key),
            _ => None,
        }
    }
}

const SECTIONS: [&str; 6] = ["mesh", "physics", "time", "solver", "output", "initial"];

struct Entry {
    value: String,
    line: usize,
}

fn parse_entries(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut section = String::new();
    let mut entries = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("unterminated section header `{l}`"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::invalid(name, "unknown section"));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{l}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(ConfigError::Parse {
                line,
                message: format!("malformed key `{k}`"),
            });
        }
        let full = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        if entries.contains_key(&full) {
            return Err(ConfigError::invalid(&full, format!("repeated on line {line}")));
        }
        entries.insert(full, Entry { value: v.to_string(), line });
    }
    Ok(entries)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::invalid(key, format!("`{v}` is not a valid number")))
}

fn floats(key: &str, v: &str, count: usize) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != count {
        return Err(ConfigError::invalid(key, format!("expected {count} numbers")));
    }
    parts.iter().map(|p| num(key, p)).collect()
}

fn vec3(key: &str, v: &str) -> Result<Vec3, ConfigError> {
    let f = floats(key, v, 3)?;
    Ok(Vec3::new(f[0], f[1], f[2]))
}

fn switch(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(ConfigError::invalid(key, "expected on or off")),
    }
}

fn sub_solve(key: &str, v: &str) -> Result<SubSolve, ConfigError> {
    match v.trim() {
        "potential" => Ok(SubSolve::Potential),
        "charges" => Ok(SubSolve::Charges),
        "director" => Ok(SubSolve::Director),
        "velocity" => Ok(SubSolve::Velocity),
        other => Err(ConfigError::invalid(key, format!("unknown sub-solve `{other}`"))),
    }
}

fn sub_solve_name(s: SubSolve) -> &'static str {
    match s {
        SubSolve::Potential => "potential",
        SubSolve::Charges => "charges",
        SubSolve::Director => "director",
        SubSolve::Velocity => "velocity",
    }
}

fn scalar_spec(key: &str, v: &str) -> Result<ScalarSpec, ConfigError> {
    if let Some(rest) = v.strip_prefix("gauss") {
        let f = floats(key, rest, 5)?;
        return Ok(ScalarSpec::Gaussian {
            amplitude: f[0],
            rate: f[1],
            center: [f[2], f[3], f[4]],
        });
    }
    Ok(ScalarSpec::Constant(num(key, v)?))
}

fn applied_field(key: &str, v: &str) -> Result<AppliedField, ConfigError> {
    if v == "none" {
        return Ok(AppliedField::None);
    }
    if let Some(rest) = v.strip_prefix("constant") {
        return Ok(AppliedField::Constant(vec3(key, rest)?));
    }
    if let Some(rest) = v.strip_prefix("oscillating") {
        let f = floats(key, rest, 4)?;
        return Ok(AppliedField::Oscillating {
            amplitude: Vec3::new(f[0], f[1], f[2]),
            omega: f[3],
        });
    }
    Err(ConfigError::invalid(key, "expected none, constant or oscillating"))
}

fn apply(cfg: &mut ExperimentConfig, key: &str, v: &str) -> Result<(), ConfigError> {
    let p = &mut cfg.params;
    let s = &mut cfg.solver;
    let init = &mut cfg.initial;
    match key {
        "mesh.n" => {
            cfg.n_per_side = num(key, v)?;
            if cfg.n_per_side == 0 {
                return Err(ConfigError::invalid(key, "mesh must have at least one cell"));
            }
        }
        "mesh.pattern" => cfg.pattern = v.parse().map_err(|e| ConfigError::invalid(key, format!("{e}")))?,
        "physics.nu" => p.nu = num(key, v)?,
        "physics.A" => p.elastic = num(key, v)?,
        "physics.eps_perp" => p.eps_perp = num(key, v)?,
        "physics.eps_a" => p.eps_a = num(key, v)?,
        "physics.lambda_npp" => p.lambda_npp = num(key, v)?,
        "physics.mu_phi" => p.mu_phi = num(key, v)?,
        "physics.nu_el" => p.nu_el = num(key, v)?,
        "physics.alpha" => p.alpha = num(key, v)?,
        "physics.beta" => p.beta = num(key, v)?,
        "physics.stabilization" => p.stabilization_on = switch(key, v)?,
        "physics.truncation" => p.truncation = if v == "off" { None } else { Some(num(key, v)?) },
        "physics.applied_field" => p.applied_field = applied_field(key, v)?,
        "physics.director_bc" => {
            p.director_bc = match v {
                "neumann" => DirectorBc::Neumann,
                "dirichlet" => DirectorBc::Dirichlet,
                _ => return Err(ConfigError::invalid(key, "expected neumann or dirichlet")),
            }
        }
        "time.k" => p.k = num(key, v)?,
        "time.T" => p.t_final = num(key, v)?,
        "solver.tol_fp" => s.tol_fp = num(key, v)?,
        "solver.max_outer_iters" => s.max_outer_iters = num(key, v)?,
        "solver.newton_tol" => s.newton_tol = num(key, v)?,
        "solver.newton_max_iters" => s.newton_max_iters = num(key, v)?,
        "solver.order" => {
            let items: Vec<&str> = v.split(',').collect();
            if items.len() != 4 {
                return Err(ConfigError::invalid(key, "expected four sub-solves"));
            }
            for (slot, item) in s.order.iter_mut().zip(items) {
                *slot = sub_solve(key, item)?;
            }
        }
        "solver.freeze" => {
            s.freeze = Freeze::default();
            if v != "none" {
                for item in v.split(',') {
                    match sub_solve(key, item)? {
                        SubSolve::Potential => s.freeze.potential = true,
                        SubSolve::Charges => s.freeze.charges = true,
                        SubSolve::Director => s.freeze.director = true,
                        SubSolve::Velocity => s.freeze.velocity = true,
                    }
                }
            }
        }
        "solver.certify" => s.certify = switch(key, v)?,
        "output.dir" => cfg.out_dir = PathBuf::from(v),
        "output.vtk_every" => cfg.vtk_every = num(key, v)?,
        "initial.velocity" => {
            init.velocity = if v == "zero" {
                VelocitySpec::Zero
            } else if let Some(rest) = v.strip_prefix("rotation") {
                VelocitySpec::Rotation(num(key, rest.trim())?)
            } else {
                return Err(ConfigError::invalid(key, "expected zero or rotation <speed>"));
            }
        }
        "initial.director" => {
            init.director = if v == "two_defects" {
                DirectorSpec::TwoDefects
            } else {
                DirectorSpec::Constant(vec3(key, v)?)
            }
        }
        "initial.director_fallback" => {
            init.director_fallback = if v == "none" { None } else { Some(vec3(key, v)?) }
        }
        "initial.n_plus" => init.n_plus = scalar_spec(key, v)?,
        "initial.n_minus" => init.n_minus = scalar_spec(key, v)?,
        _ => return Err(ConfigError::invalid(key, "unknown key")),
    }
    Ok(())
}

/// Parses a configuration text, filling unspecified keys from the preset.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries = parse_entries(text)?;
    let name = entries
        .remove("experiment")
        .ok_or_else(|| ConfigError::invalid("experiment", "missing"))?;
    let mut cfg =
        experiment_catalogue(&name.value).map_err(|e| ConfigError::invalid("experiment", e.to_string()))?;
    if let Some(d) = entries.remove("mesh.dim") {
        let dim: usize = num("mesh.dim", &d.value)?;
        if dim != 2 && dim != 3 {
            return Err(ConfigError::invalid("mesh.dim", "must be 2 or 3"));
        }
        cfg.set_dim(dim);
    }
    if !entries.contains_key("mesh.n") {
        return Err(ConfigError::invalid("mesh.n", "missing"));
    }
    let mut ordered: Vec<(String, Entry)> = entries.into_iter().collect();
    ordered.sort_by_key(|(_, e)| e.line);
    for (k, e) in ordered {
        apply(&mut cfg, &k, &e.value)?;
    }
    validate_config(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Checks a resolved configuration; returns the parameter warnings.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<Vec<String>, ConfigError> {
    if cfg.n_per_side == 0 {
        return Err(ConfigError::invalid("mesh.n", "mesh must have at least one cell"));
    }
    if cfg.dim == 2 && cfg.pattern == Pattern::TetSplit || cfg.dim == 3 && cfg.pattern != Pattern::TetSplit {
        return Err(ConfigError::invalid("mesh.pattern", "pattern does not fit the dimension"));
    }
    cfg.solver
        .validate()
        .map_err(|m| ConfigError::invalid("solver", m))?;
    // Longest edge of the structured simplices.
    let side = 1.0 / cfg.n_per_side as f64;
    let h = match cfg.pattern {
        Pattern::Crisscross => side,
        Pattern::UnionJack => side * 2f64.sqrt(),
        Pattern::TetSplit => side * 3f64.sqrt(),
    };
    cfg.params.validate(cfg.dim, h).map_err(|e| {
        let crate::state::ParamError::Invalid { name, .. } = &e;
        ConfigError::invalid(name, e.to_string())
    })
}

/// Fully resolved configuration in the format read by [`parse_config`].
pub fn echo_config(cfg: &ExperimentConfig) -> String {
    let p = &cfg.params;
    let s = &cfg.solver;
    let mut o = String::new();
    let onoff = |b: bool| if b { "on" } else { "off" };
    let v3 = |v: &Vec3| format!("{:?} {:?} {:?}", v.x, v.y, v.z);
    writeln!(o, "experiment = {}", cfg.experiment).unwrap();
    writeln!(o, "\n[mesh]\ndim = {}\nn = {}\npattern = {}", cfg.dim, cfg.n_per_side, cfg.pattern.name()).unwrap();
    writeln!(o, "\n[physics]").unwrap();
    for (k, v) in [
        ("nu", p.nu),
        ("A", p.elastic),
        ("eps_perp", p.eps_perp),
        ("eps_a", p.eps_a),
        ("lambda_npp", p.lambda_npp),
        ("mu_phi", p.mu_phi),
        ("nu_el", p.nu_el),
        ("alpha", p.alpha),
        ("beta", p.beta),
    ] {
        writeln!(o, "{k} = {v:?}").unwrap();
    }
    writeln!(o, "stabilization = {}", onoff(p.stabilization_on)).unwrap();
    match p.truncation {
        None => writeln!(o, "truncation = off").unwrap(),
        Some(c) => writeln!(o, "truncation = {c:?}").unwrap(),
    }
    match &p.applied_field {
        AppliedField::None => writeln!(o, "applied_field = none").unwrap(),
        AppliedField::Constant(e) => writeln!(o, "applied_field = constant {}", v3(e)).unwrap(),
        AppliedField::Oscillating { amplitude, omega } => {
            writeln!(o, "applied_field = oscillating {} {omega:?}", v3(amplitude)).unwrap()
        }
    }
    let bc = match p.director_bc {
        DirectorBc::Neumann => "neumann",
        DirectorBc::Dirichlet => "dirichlet",
    };
    writeln!(o, "director_bc = {bc}").unwrap();
    writeln!(o, "\n[time]\nk = {:?}\nT = {:?}", p.k, p.t_final).unwrap();
    writeln!(o, "\n[solver]").unwrap();
    writeln!(o, "tol_fp = {:?}\nmax_outer_iters = {}", s.tol_fp, s.max_outer_iters).unwrap();
    writeln!(o, "newton_tol = {:?}\nnewton_max_iters = {}", s.newton_tol, s.newton_max_iters).unwrap();
    let order: Vec<&str> = s.order.iter().map(|&x| sub_solve_name(x)).collect();
    writeln!(o, "order = {}", order.join(", ")).unwrap();
    let f = s.freeze;
    let frozen: Vec<&str> = [
        (f.potential, "potential"),
        (f.charges, "charges"),
        (f.director, "director"),
        (f.velocity, "velocity"),
    ]
    .iter()
    .filter(|(b, _)| *b)
    .map(|(_, n)| *n)
    .collect();
    let frozen = if frozen.is_empty() { "none".to_string() } else { frozen.join(", ") };
    writeln!(o, "freeze = {frozen}\ncertify = {}", onoff(s.certify)).unwrap();
    writeln!(o, "\n[output]\ndir = {}\nvtk_every = {}", cfg.out_dir.display(), cfg.vtk_every).unwrap();
    let i = &cfg.initial;
    writeln!(o, "\n[initial]\nvelocity = {}\ndirector = {}", i.velocity, i.director).unwrap();
    match i.director_fallback {
        None => writeln!(o, "director_fallback = none").unwrap(),
        Some(d) => writeln!(o, "director_fallback = {}", v3(&d)).unwrap(),
    }
    writeln!(o, "n_plus = {}\nn_minus = {}", i.n_plus, i.n_minus).unwrap();
    o
}
