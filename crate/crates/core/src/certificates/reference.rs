//! Reference trajectories and their samples on a mesh.

use thiserror::Error;

use crate::fem::{bubble_value, interp, interp_vec, VelocityField};
use crate::mesh::TriMesh;
use crate::scheme::{effective_field, evaluate_q};
use crate::state::{DiscreteState, PhysParams};
use crate::{Mat3, Vec3};

const SPACE_STEP: f64 = 1e-5;

/// Smooth fields `v~, d~, phi~, n~+-` as functions of space and time.
///
/// Spatial derivatives default to central differences; implementors may
/// override them with analytic expressions.
pub trait ReferenceTrajectory {
    fn dim(&self) -> usize;
    fn velocity(&self, x: &[f64; 3], t: f64) -> Vec3;
    fn director(&self, x: &[f64; 3], t: f64) -> Vec3;
    fn potential(&self, x: &[f64; 3], t: f64) -> f64;
    fn n_plus(&self, x: &[f64; 3], t: f64) -> f64;
    fn n_minus(&self, x: &[f64; 3], t: f64) -> f64;

    /// Entry `(r, c)` is `d v_r / d x_c`.
    fn velocity_gradient(&self, x: &[f64; 3], t: f64) -> Mat3 {
        fd_jacobian(self.dim(), x, |y| self.velocity(y, t))
    }

    fn director_gradient(&self, x: &[f64; 3], t: f64) -> Mat3 {
        fd_jacobian(self.dim(), x, |y| self.director(y, t))
    }

    fn director_laplacian(&self, x: &[f64; 3], t: f64) -> Vec3 {
        fd_laplacian(self.dim(), x, |y| self.director(y, t))
    }

    fn potential_gradient(&self, x: &[f64; 3], t: f64) -> Vec3 {
        fd_gradient(self.dim(), x, |y| self.potential(y, t))
    }

    fn potential_hessian(&self, x: &[f64; 3], t: f64) -> Mat3 {
        fd_jacobian(self.dim(), x, |y| self.potential_gradient(y, t))
    }

    fn n_plus_gradient(&self, x: &[f64; 3], t: f64) -> Vec3 {
        fd_gradient(self.dim(), x, |y| self.n_plus(y, t))
    }

    fn n_minus_gradient(&self, x: &[f64; 3], t: f64) -> Vec3 {
        fd_gradient(self.dim(), x, |y| self.n_minus(y, t))
    }
}

fn shifted(x: &[f64; 3], c: usize, h: f64) -> [f64; 3] {
    let mut y = *x;
    y[c] += h;
    y
}

pub(crate) fn fd_gradient(dim: usize, x: &[f64; 3], f: impl Fn(&[f64; 3]) -> f64) -> Vec3 {
    let mut g = Vec3::zeros();
    for c in 0..dim {
        g[c] = (f(&shifted(x, c, SPACE_STEP)) - f(&shifted(x, c, -SPACE_STEP))) / (2.0 * SPACE_STEP);
    }
    g
}

pub(crate) fn fd_jacobian(dim: usize, x: &[f64; 3], f: impl Fn(&[f64; 3]) -> Vec3) -> Mat3 {
    let mut j = Mat3::zeros();
    for c in 0..dim {
        let col = (f(&shifted(x, c, SPACE_STEP)) - f(&shifted(x, c, -SPACE_STEP))) / (2.0 * SPACE_STEP);
        j.set_column(c, &col);
    }
    j
}

pub(crate) fn fd_laplacian(dim: usize, x: &[f64; 3], f: impl Fn(&[f64; 3]) -> Vec3) -> Vec3 {
    let h = 1e-4;
    let f0 = f(x);
    let mut l = Vec3::zeros();
    for c in 0..dim {
        l += (f(&shifted(x, c, h)) - f0 * 2.0 + f(&shifted(x, c, -h))) / (h * h);
    }
    l
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("reference director has norm {norm} at node {node}")]
    NonUnitDirector { node: usize, norm: f64 },
}

/// Reference fields at one time level, as nodal values on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub velocity: VelocityField,
    pub director: Vec<Vec3>,
    /// Variational derivative of the reference director.
    pub q: Vec<Vec3>,
    pub phi: Vec<f64>,
    pub n_plus: Vec<f64>,
    pub n_minus: Vec<f64>,
}

impl ReferenceSample {
    /// Uses a discrete state as reference.
    pub fn from_state(state: &DiscreteState) -> Self {
        ReferenceSample {
            t: state.t,
            velocity: state.velocity.clone(),
            director: state.director.values.clone(),
            q: state.q.clone(),
            phi: state.phi.values.clone(),
            n_plus: state.n_plus.values.clone(),
            n_minus: state.n_minus.values.clone(),
        }
    }

    /// Nodal interpolation of a smooth trajectory at time `t`; `q~` is
    /// evaluated with the discrete operators of the scheme.
    pub fn from_trajectory(
        traj: &dyn ReferenceTrajectory,
        mesh: &TriMesh,
        params: &PhysParams,
        t: f64,
    ) -> Result<Self, ReferenceError> {
        let mut velocity = VelocityField::zeros(mesh);
        let mut director = Vec::with_capacity(mesh.n_nodes());
        for (z, x) in mesh.nodes.iter().enumerate() {
            velocity.nodal[z] = traj.velocity(x, t);
            let d = traj.director(x, t);
            if (d.norm() - 1.0).abs() > 1e-8 {
                return Err(ReferenceError::NonUnitDirector { node: z, norm: d.norm() });
            }
            director.push(d);
        }
        let phi: Vec<f64> = mesh.nodes.iter().map(|x| traj.potential(x, t)).collect();
        let field = effective_field(mesh, &phi, &Vec3::zeros());
        let q = evaluate_q(mesh, params, &director, &director, &field);
        Ok(ReferenceSample {
            t,
            velocity,
            director,
            q,
            phi,
            n_plus: mesh.nodes.iter().map(|x| traj.n_plus(x, t)).collect(),
            n_minus: mesh.nodes.iter().map(|x| traj.n_minus(x, t)).collect(),
        })
    }
}

/// Interpolates a state from `coarse` onto the nodes of `fine`.
///
/// P1 fields are reproduced exactly on nested meshes; the MINI velocity is
/// interpolated nodally (bubble included) with zero bubbles on `fine`.
pub fn transfer_state(state: &DiscreteState, coarse: &TriMesh, fine: &TriMesh) -> Option<DiscreteState> {
    let n = fine.n_nodes();
    let mut out = DiscreteState::at_rest(fine, Vec3::z(), state.director.bc);
    out.t = state.t;
    out.step_index = state.step_index;
    out.director.values.clear();
    for z in 0..n {
        let x = fine.nodes[z];
        let (e, lam) = coarse.locate(&x)?;
        let el = coarse.element(e);
        let mut v = interp_vec(el, &lam, &state.velocity.nodal) + state.velocity.bubble[e] * bubble_value(coarse.dim, &lam);
        if fine.is_boundary[z] {
            v = Vec3::zeros();
        }
        out.velocity.nodal[z] = v;
        out.director.values.push(interp_vec(el, &lam, &state.director.values));
        out.q[z] = interp_vec(el, &lam, &state.q);
        out.n_plus.values[z] = interp(el, &lam, &state.n_plus.values);
        out.n_minus.values[z] = interp(el, &lam, &state.n_minus.values);
        out.phi.values[z] = interp(el, &lam, &state.phi.values);
        out.pressure.values[z] = interp(el, &lam, &state.pressure.values);
    }
    Some(out)
}
