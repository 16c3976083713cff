//! Catalogue of experiment presets and the resolved experiment configuration.
//!
//! All presets live on `(-1/2, 1/2)^d`. Constants not listed in a preset
//! take the defaults of [`PhysParams::defaults`].

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::fem::DirectorBc;
use crate::mesh::{build_structured_mesh, BoxDomain, MeshError, Pattern, TriMesh};
use crate::scheme::{FixedPointConfig, Freeze};
use crate::state::{default_stabilization_exponents, AppliedField, InitialData, PhysParams};
use crate::Vec3;

pub const CATALOGUE: [&str; 7] = [
    "defect_flow",
    "velocity_flow",
    "dipole_static",
    "anisotropic_diffusion",
    "applied_field",
    "oscillating_field",
    "custom",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("unknown experiment `{name}`; known: {known}", name = .0, known = CATALOGUE.join(", "))]
    UnknownExperiment(String),
}

/// Scalar initial datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarSpec {
    Constant(f64),
    /// `amplitude * exp(-rate |x - center|^2)`.
    Gaussian { amplitude: f64, rate: f64, center: [f64; 3] },
}

impl ScalarSpec {
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match *self {
            ScalarSpec::Constant(c) => c,
            ScalarSpec::Gaussian { amplitude, rate, center } => {
                let r2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
                amplitude * (-rate * r2).exp()
            }
        }
    }
}

impl fmt::Display for ScalarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarSpec::Constant(c) => write!(f, "{c:?}"),
            ScalarSpec::Gaussian { amplitude, rate, center } => write!(
                f,
                "gauss {amplitude:?} {rate:?} {:?} {:?} {:?}",
                center[0], center[1], center[2]
            ),
        }
    }
}

/// Velocity initial datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocitySpec {
    Zero,
    /// `speed * (-y, x, 0)`.
    Rotation(f64),
}

impl fmt::Display for VelocitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VelocitySpec::Zero => write!(f, "zero"),
            VelocitySpec::Rotation(s) => write!(f, "rotation {s:?}"),
        }
    }
}

/// Director initial datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirectorSpec {
    /// Constant vector, normalized at the nodes.
    Constant(Vec3),
    /// `(4x^2 + 4y^2 - 1/4, 2y, 0)` with two point defects.
    TwoDefects,
}

impl fmt::Display for DirectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectorSpec::Constant(d) => write!(f, "{:?} {:?} {:?}", d.x, d.y, d.z),
            DirectorSpec::TwoDefects => write!(f, "two_defects"),
        }
    }
}

/// Initial data in serializable form.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub velocity: VelocitySpec,
    pub director: DirectorSpec,
    pub director_fallback: Option<Vec3>,
    pub n_plus: ScalarSpec,
    pub n_minus: ScalarSpec,
}

impl InitialSpec {
    pub fn to_initial_data(&self) -> InitialData {
        let velocity = match self.velocity {
            VelocitySpec::Zero => None,
            VelocitySpec::Rotation(s) => {
                Some(Arc::new(move |x: &[f64; 3]| Vec3::new(-s * x[1], s * x[0], 0.0)) as crate::state::VectorFn)
            }
        };
        let director: crate::state::VectorFn = match self.director {
            DirectorSpec::Constant(d) => Arc::new(move |_| d),
            DirectorSpec::TwoDefects => Arc::new(|x: &[f64; 3]| {
                Vec3::new(4.0 * x[0] * x[0] + 4.0 * x[1] * x[1] - 0.25, 2.0 * x[1], 0.0)
            }),
        };
        let (np, nm) = (self.n_plus, self.n_minus);
        InitialData {
            velocity,
            director,
            director_fallback: self.director_fallback,
            n_plus: Arc::new(move |x| np.eval(x)),
            n_minus: Arc::new(move |x| nm.eval(x)),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub dim: usize,
    pub n_per_side: usize,
    pub pattern: Pattern,
    pub params: PhysParams,
    pub solver: FixedPointConfig,
    pub initial: InitialSpec,
    pub out_dir: PathBuf,
    /// Write a VTK snapshot every this many steps; 0 writes only the ends.
    pub vtk_every: usize,
}

impl ExperimentConfig {
    pub fn domain(&self) -> BoxDomain {
        BoxDomain::centered_unit(self.dim)
    }

    pub fn build_mesh(&self) -> Result<TriMesh, MeshError> {
        build_structured_mesh(self.n_per_side, &self.domain(), self.pattern)
    }

    pub fn initial_data(&self) -> InitialData {
        self.initial.to_initial_data()
    }

    /// Switches the dimension, resetting the dimension-dependent defaults.
    pub fn set_dim(&mut self, dim: usize) {
        if dim != self.dim {
            self.dim = dim;
            self.pattern = Pattern::default_for(dim);
            let (a, b) = default_stabilization_exponents(dim);
            self.params.alpha = a;
            self.params.beta = b;
        }
    }
}

/// Cells per side: `2^level` in 2-D, the reduced resolution 8 in 3-D.
pub fn default_resolution(dim: usize, level: u32) -> usize {
    if dim == 3 {
        8
    } else {
        1 << level
    }
}

fn charge_pair(amplitude: f64, rate: f64) -> (ScalarSpec, ScalarSpec) {
    (
        ScalarSpec::Gaussian { amplitude, rate, center: [0.2, 0.0, 0.0] },
        ScalarSpec::Gaussian { amplitude, rate, center: [-0.2, 0.0, 0.0] },
    )
}

/// Preset for `name` at its native dimension.
pub fn experiment_catalogue(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let rest = InitialSpec {
        velocity: VelocitySpec::Zero,
        director: DirectorSpec::Constant(Vec3::z()),
        director_fallback: None,
        n_plus: ScalarSpec::Constant(0.0),
        n_minus: ScalarSpec::Constant(0.0),
    };
    let defects = InitialSpec {
        director: DirectorSpec::TwoDefects,
        director_fallback: Some(Vec3::z()),
        ..rest.clone()
    };
    let (dim, level, params, freeze, initial) = match name {
        "defect_flow" => {
            let mut p = PhysParams::defaults(2);
            p.elastic = 1.0;
            p.nu = 1.0;
            p.nu_el = 0.25;
            p.lambda_npp = 0.0;
            p.eps_a = 0.0;
            p.eps_perp = 0.0;
            p.k = 5e-4;
            p.t_final = 0.1;
            (2, 4, p, Freeze::default(), defects)
        }
        "velocity_flow" => {
            let mut p = PhysParams::defaults(2);
            p.elastic = 0.1;
            p.nu = 1.0;
            p.nu_el = 1.0;
            p.lambda_npp = 0.0;
            p.eps_a = 0.0;
            p.eps_perp = 0.0;
            p.k = 5e-4;
            p.t_final = 0.25;
            let init = InitialSpec {
                velocity: VelocitySpec::Rotation(10.0),
                ..defects
            };
            (2, 4, p, Freeze::default(), init)
        }
        "dipole_static" => {
            let mut p = PhysParams::defaults(3);
            p.elastic = 0.1;
            p.lambda_npp = 100.0;
            p.nu_el = 1.0;
            p.mu_phi = 0.25;
            p.eps_perp = 0.1;
            p.eps_a = 100.0;
            p.k = 5e-4;
            p.t_final = 5e-4;
            let (np, nm) = charge_pair(1.0, 50.0);
            let freeze = Freeze {
                charges: true,
                director: true,
                ..Freeze::default()
            };
            (3, 5, p, freeze, InitialSpec { n_plus: np, n_minus: nm, ..rest })
        }
        "anisotropic_diffusion" => {
            let mut p = PhysParams::defaults(3);
            p.elastic = 0.1;
            p.lambda_npp = 100.0;
            p.nu_el = 1.0;
            p.mu_phi = 0.125;
            p.eps_perp = 0.1;
            p.eps_a = 100.0;
            p.k = 2.5e-4;
            p.t_final = 0.045;
            let (np, nm) = charge_pair(1.0, 25.0);
            let init = InitialSpec {
                director: DirectorSpec::Constant(Vec3::new(0.0, 1.0, 1.0) / 2f64.sqrt()),
                n_plus: np,
                n_minus: nm,
                ..rest
            };
            (3, 4, p, Freeze::default(), init)
        }
        "applied_field" | "oscillating_field" => {
            let mut p = PhysParams::defaults(3);
            p.elastic = 0.1;
            p.lambda_npp = 1000.0;
            p.nu_el = 1.0;
            p.mu_phi = 1.0;
            p.eps_perp = 0.1;
            p.eps_a = 10.0;
            p.k = 1e-3;
            let d0 = if name == "applied_field" {
                p.applied_field = AppliedField::Constant(Vec3::new(0.4, 0.0, 0.0));
                p.t_final = 0.03;
                Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt()
            } else {
                p.applied_field = AppliedField::Oscillating {
                    amplitude: Vec3::x(),
                    omega: AppliedField::catalogue_omega(),
                };
                p.t_final = 0.15;
                Vec3::new(1.0, 0.0, 1.0) / 2f64.sqrt()
            };
            let init = InitialSpec {
                director: DirectorSpec::Constant(d0),
                n_plus: ScalarSpec::Constant(0.5),
                n_minus: ScalarSpec::Constant(0.5),
                ..rest
            };
            (3, 4, p, Freeze::default(), init)
        }
        "custom" => (2, 4, PhysParams::defaults(2), Freeze::default(), rest),
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    };
    let params = PhysParams {
        director_bc: DirectorBc::Neumann,
        ..params
    };
    Ok(ExperimentConfig {
        experiment: name.to_string(),
        dim,
        n_per_side: default_resolution(dim, level),
        pattern: Pattern::default_for(dim),
        params,
        solver: FixedPointConfig {
            freeze,
            ..FixedPointConfig::default()
        },
        initial,
        out_dir: PathBuf::from("out"),
        vtk_every: 0,
    })
}
