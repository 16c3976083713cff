//! Nodal director update with the variational derivative eliminated.
//!
//! With `d_mid = (d_prev + d)/2` the update solves, at every evolving node,
//! `d - d_prev = k d_mid x (d_mid x (nu_el G v + q(d_mid)))` where
//! `q(d_mid) = m^{-1} [A K d_mid + h^beta K M_L^{-1} K d_mid - mu eps_a r]`.

use log::debug;

use super::{StepError, LINEAR_TOL};
use crate::fem::{
    assemble_isotropic_stiffness, director_torque, lumped_l2_project_gradient, DirectorBc,
};
use crate::linalg::{solve_nonsymmetric_from, CsrMatrix, TripletBuilder};
use crate::mesh::TriMesh;
use crate::state::PhysParams;
use crate::{Mat3, Vec3};

/// `A K + h^beta K D M_L^{-1} K` with rows scaled by `1 / m_z`.
///
/// `D` drops boundary nodes in Dirichlet mode, where the discrete Laplacian
/// is restricted to interior test functions.
pub(crate) fn director_operator(mesh: &TriMesh, params: &PhysParams, k_iso: &CsrMatrix) -> CsrMatrix {
    let mut op = k_iso.scaled(params.elastic);
    if params.stabilization_on {
        let dirichlet = params.director_bc == DirectorBc::Dirichlet;
        let w: Vec<f64> = (0..mesh.n_nodes())
            .map(|z| {
                if dirichlet && mesh.is_boundary[z] {
                    0.0
                } else {
                    1.0 / mesh.lumped_mass[z]
                }
            })
            .collect();
        let kmk = k_iso.matmul(&k_iso.scale_rows(&w));
        op = op.add(&kmk.scaled(mesh.h.powf(params.beta)));
    }
    let inv: Vec<f64> = mesh.lumped_mass.iter().map(|m| 1.0 / m).collect();
    op.scale_rows(&inv)
}

fn is_fixed(mesh: &TriMesh, params: &PhysParams, z: usize) -> bool {
    params.director_bc == DirectorBc::Dirichlet && mesh.is_boundary[z]
}

/// Electric part of `q`: `-mu eps_a m^{-1} int F (d_prev . F) phi_z`.
fn electric_q(mesh: &TriMesh, params: &PhysParams, d_prev: &[Vec3], field: &[Vec3]) -> Vec<Vec3> {
    let c = params.mu_phi * params.eps_a;
    if c == 0.0 {
        return vec![Vec3::zeros(); mesh.n_nodes()];
    }
    director_torque(mesh, d_prev, field)
        .into_iter()
        .zip(&mesh.lumped_mass)
        .map(|(r, m)| r * (-c / m))
        .collect()
}

fn apply_q(op: &CsrMatrix, base: &[Vec3], d_mid: &[Vec3], fixed: &[bool]) -> Vec<Vec3> {
    let mut q = base.to_vec();
    for (z, qz) in q.iter_mut().enumerate() {
        if fixed[z] {
            *qz = Vec3::zeros();
            continue;
        }
        let (cols, vals) = op.row(z);
        for (&j, &v) in cols.iter().zip(vals) {
            *qz += d_mid[j] * v;
        }
    }
    q
}

/// Variational derivative `q` at the midpoint director `d_mid`.
pub fn evaluate_q(
    mesh: &TriMesh,
    params: &PhysParams,
    d_mid: &[Vec3],
    d_prev: &[Vec3],
    field: &[Vec3],
) -> Vec<Vec3> {
    let k = assemble_isotropic_stiffness(mesh);
    let op = director_operator(mesh, params, &k);
    let fixed: Vec<bool> = (0..mesh.n_nodes()).map(|z| is_fixed(mesh, params, z)).collect();
    apply_q(&op, &electric_q(mesh, params, d_prev, field), d_mid, &fixed)
}

/// Data entering the director update of one outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct DirectorInputs<'a> {
    pub d_prev: &'a [Vec3],
    /// Nodal velocity (P1 part).
    pub velocity: &'a [Vec3],
    /// Effective field per element.
    pub field: &'a [Vec3],
    /// Lumped projection of `grad d_prev`.
    pub grad_prev: &'a [Mat3],
    /// Starting iterate; `d_prev` when `None`.
    pub guess: Option<&'a [Vec3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectorSolution {
    pub d: Vec<Vec3>,
    pub q: Vec<Vec3>,
    pub iterations: usize,
    /// Final `max_z |R_z|`.
    pub residual: f64,
}

const NEWTON_ROUNDOFF: f64 = 100.0;

struct NodalSystem<'a> {
    op: &'a CsrMatrix,
    base_q: Vec<Vec3>,
    transport: Vec<Vec3>,
    d_prev: &'a [Vec3],
    fixed: Vec<bool>,
    k: f64,
}

impl NodalSystem<'_> {
    fn midpoint(&self, d: &[Vec3]) -> Vec<Vec3> {
        d.iter().zip(self.d_prev).map(|(a, b)| (a + b) * 0.5).collect()
    }

    fn residual(&self, d: &[Vec3]) -> (Vec<Vec3>, f64) {
        let mid = self.midpoint(d);
        let q = apply_q(self.op, &self.base_q, &mid, &self.fixed);
        let mut worst = 0.0f64;
        let r: Vec<Vec3> = (0..d.len())
            .map(|z| {
                let mut r = d[z] - self.d_prev[z];
                if !self.fixed[z] {
                    let y = self.transport[z] + q[z];
                    r -= mid[z].cross(&mid[z].cross(&y)) * self.k;
                }
                worst = worst.max(r.amax());
                r
            })
            .collect();
        (r, worst)
    }

    /// Smallest attainable residual: a multiple of the unit round-off times
    /// `1 + k max_z (|transport_z| + |base_z| + sum_j |op_zj|)`, the size of
    /// the summands entering the nodal residual of unit vectors.
    fn roundoff_floor(&self) -> f64 {
        let worst = (0..self.d_prev.len())
            .filter(|&z| !self.fixed[z])
            .map(|z| {
                self.transport[z].amax() + self.base_q[z].amax() + self.op.row(z).1.iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max);
        NEWTON_ROUNDOFF * f64::EPSILON * (1.0 + self.k * worst)
    }

    fn jacobian(&self, d: &[Vec3]) -> CsrMatrix {
        let n = d.len();
        let mid = self.midpoint(d);
        let q = apply_q(self.op, &self.base_q, &mid, &self.fixed);
        let mut b = TripletBuilder::with_capacity(3 * n, 3 * n, 9 * self.op.nnz() + 3 * n);
        for z in 0..n {
            if self.fixed[z] {
                for c in 0..3 {
                    b.push(3 * z + c, 3 * z + c, 1.0);
                }
                continue;
            }
            let x = mid[z];
            let y = self.transport[z] + q[z];
            let d1 = Mat3::identity() * x.dot(&y) + x * y.transpose() - y * x.transpose() * 2.0;
            let d2 = x * x.transpose() - Mat3::identity() * x.norm_squared();
            let diag = Mat3::identity() - d1 * (0.5 * self.k);
            let (cols, vals) = self.op.row(z);
            let mut wrote_diag = false;
            for (&j, &v) in cols.iter().zip(vals) {
                let mut blk = d2 * (-0.5 * self.k * v);
                if j == z {
                    blk += diag;
                    wrote_diag = true;
                }
                push_block(&mut b, z, j, &blk);
            }
            if !wrote_diag {
                push_block(&mut b, z, z, &diag);
            }
        }
        b.build()
    }
}

fn push_block(b: &mut TripletBuilder, i: usize, j: usize, m: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            if m[(r, c)] != 0.0 {
                b.push(3 * i + r, 3 * j + c, m[(r, c)]);
            }
        }
    }
}

/// Solves the nodal director system by damped Newton iteration.
pub fn director_newton(
    mesh: &TriMesh,
    params: &PhysParams,
    newton_tol: f64,
    newton_max_iters: usize,
    op: &CsrMatrix,
    inputs: &DirectorInputs<'_>,
) -> Result<DirectorSolution, StepError> {
    let n = mesh.n_nodes();
    let fixed: Vec<bool> = (0..n).map(|z| is_fixed(mesh, params, z)).collect();
    let transport: Vec<Vec3> = (0..n)
        .map(|z| inputs.grad_prev[z] * inputs.velocity[z] * params.nu_el)
        .collect();
    let sys = NodalSystem {
        op,
        base_q: electric_q(mesh, params, inputs.d_prev, inputs.field),
        transport,
        d_prev: inputs.d_prev,
        fixed,
        k: params.k,
    };
    let mut d: Vec<Vec3> = inputs.guess.unwrap_or(inputs.d_prev).to_vec();
    for z in 0..n {
        if sys.fixed[z] {
            d[z] = inputs.d_prev[z];
        }
    }
    let tol = newton_tol.max(sys.roundoff_floor());
    let (mut r, mut rn) = sys.residual(&d);
    let mut iterations = 0;
    while rn > tol {
        if iterations == newton_max_iters {
            return Err(StepError::NewtonDiverged { iterations, residual: rn });
        }
        iterations += 1;
        let jac = sys.jacobian(&d);
        let rhs: Vec<f64> = r.iter().flat_map(|v| [-v[0], -v[1], -v[2]]).collect();
        let mut delta = vec![0.0; 3 * n];
        solve_nonsymmetric_from(&jac, &rhs, &mut delta, LINEAR_TOL)
            .map_err(|e| StepError::solve("director", e))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let trial: Vec<Vec3> = d
                .iter()
                .enumerate()
                .map(|(z, dz)| dz + Vec3::new(delta[3 * z], delta[3 * z + 1], delta[3 * z + 2]) * lambda)
                .collect();
            let (rt, rtn) = sys.residual(&trial);
            if rtn < rn || rtn <= tol {
                d = trial;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(StepError::NewtonDiverged { iterations, residual: rn });
        }
        debug!("director newton iteration {iterations}: residual {rn:.3e}");
    }
    let q = apply_q(op, &sys.base_q, &sys.midpoint(&d), &sys.fixed);
    Ok(DirectorSolution { d, q, iterations, residual: rn })
}

/// Convenience wrapper assembling the operators from scratch.
pub fn director_step(
    mesh: &TriMesh,
    params: &PhysParams,
    newton_tol: f64,
    newton_max_iters: usize,
    d_prev: &[Vec3],
    velocity: &[Vec3],
    field: &[Vec3],
) -> Result<DirectorSolution, StepError> {
    let k = assemble_isotropic_stiffness(mesh);
    let op = director_operator(mesh, params, &k);
    let g = lumped_l2_project_gradient(mesh, d_prev);
    let inputs = DirectorInputs {
        d_prev,
        velocity,
        field,
        grad_prev: &g,
        guess: None,
    };
    director_newton(mesh, params, newton_tol, newton_max_iters, &op, &inputs)
}
