//! Finite element spaces and operator assembly.
//!
//! Scalars (potential, charges, pressure) and the director components are
//! continuous P1; the velocity is the MINI element (P1 plus one cubic bubble
//! per element and component). All sparse matrices are stored with rows
//! indexed by test functions and columns by trial functions.

mod director;
mod scalar;
mod velocity;

pub use director::{
    discrete_laplacian, director_torque, lumped_l2_project_gradient, nodal_cross_sq_norm,
};
pub use scalar::{
    assemble_consistent_mass, assemble_convection_charge, assemble_drift_charge,
    assemble_isotropic_stiffness, assemble_stiffness_aniso, element_gradients, epsilon_of_d,
    mass_lumped_inner, truncation_phi_gamma, weighted_dirichlet_energy, NodalDot, Truncation,
};
pub use velocity::{
    divergence_residual, electric_force, elastic_force, velocity_at, velocity_products, CondensedMini, MiniSystem,
    MomentumCoefficients, VelocityLayout,
};

use thiserror::Error;

use crate::mesh::TriMesh;
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("operand lengths {0} and {1} do not match")]
    DimensionMismatch(usize, usize),
}

/// Function space of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarSpace {
    Free,
    /// Normalized to zero lumped mean.
    MeanZero,
}

/// P1 scalar field given by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub space: ScalarSpace,
}

impl ScalarField {
    pub fn zeros(n: usize, space: ScalarSpace) -> Self {
        ScalarField {
            values: vec![0.0; n],
            space,
        }
    }

    /// Lumped mean `sum m_z y(z) / |Omega|`.
    pub fn lumped_mean(&self, mesh: &TriMesh) -> f64 {
        let s: f64 = self.values.iter().zip(&mesh.lumped_mass).map(|(y, m)| y * m).sum();
        s / mesh.volume()
    }
}

/// Boundary condition of the director.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectorBc {
    /// Natural (do-nothing) condition; every node evolves.
    Neumann,
    /// Boundary nodes keep their initial values.
    Dirichlet,
}

/// P1 director field with three components at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    pub values: Vec<Vec3>,
    pub bc: DirectorBc,
}

impl DirectorField {
    pub fn uniform(n: usize, d: Vec3, bc: DirectorBc) -> Self {
        DirectorField {
            values: vec![d; n],
            bc,
        }
    }

    /// `max_z ||d(z)| - 1|` and the node attaining it.
    pub fn max_norm_deviation(&self) -> (f64, usize) {
        self.values
            .iter()
            .enumerate()
            .map(|(z, d)| ((d.norm() - 1.0).abs(), z))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
    }
}

/// MINI velocity: nodal P1 part and one bubble coefficient per element.
///
/// Only the first `dim` components are meaningful; the rest stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub nodal: Vec<Vec3>,
    pub bubble: Vec<Vec3>,
}

impl VelocityField {
    pub fn zeros(mesh: &TriMesh) -> Self {
        VelocityField {
            nodal: vec![Vec3::zeros(); mesh.n_nodes()],
            bubble: vec![Vec3::zeros(); mesh.n_elements()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.nodal
            .iter()
            .chain(&self.bubble)
            .map(|v| v.amax())
            .fold(0.0, f64::max)
    }
}

/// Bubble normalization so that the bubble equals one at the barycenter.
pub fn bubble_scale(dim: usize) -> f64 {
    if dim == 2 {
        27.0
    } else {
        256.0
    }
}

/// Bubble value at barycentric point `lam`.
pub fn bubble_value(dim: usize, lam: &[f64; 4]) -> f64 {
    bubble_scale(dim) * lam[..=dim].iter().product::<f64>()
}

/// Bubble gradient at barycentric point `lam` given the element gradients.
pub fn bubble_gradient(dim: usize, lam: &[f64; 4], grads: &[[f64; 3]]) -> Vec3 {
    let mut g = Vec3::zeros();
    for i in 0..=dim {
        let prod: f64 = (0..=dim).filter(|&k| k != i).map(|k| lam[k]).product();
        for c in 0..dim {
            g[c] += prod * grads[i][c];
        }
    }
    g * bubble_scale(dim)
}

pub(crate) fn grad_vec(g: &[f64; 3]) -> Vec3 {
    Vec3::new(g[0], g[1], g[2])
}

/// Interpolates nodal scalar values at barycentric point `lam` of element `el`.
pub(crate) fn interp(el: &[usize], lam: &[f64; 4], values: &[f64]) -> f64 {
    el.iter().enumerate().map(|(a, &i)| lam[a] * values[i]).sum()
}

pub(crate) fn interp_vec(el: &[usize], lam: &[f64; 4], values: &[Vec3]) -> Vec3 {
    let mut v = Vec3::zeros();
    for (a, &i) in el.iter().enumerate() {
        v += values[i] * lam[a];
    }
    v
}
