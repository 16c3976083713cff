//! Operators acting on P1 scalar fields: permittivity-weighted stiffness,
//! charge convection and drift, mass matrices and lumped pairings.

use super::{bubble_value, grad_vec, interp, interp_vec, FemError, VelocityField};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::TriMesh;
use crate::quadrature::SimplexRule;
use crate::{Mat3, Vec3};

/// `eps_perp I + eps_a (P d)(P d)^T` in the leading `dim x dim` block.
///
/// `P` keeps the first `dim` components of `d`; the remaining rows and
/// columns of the returned matrix are zero.
pub fn epsilon_of_d(d: &Vec3, eps_perp: f64, eps_a: f64, dim: usize) -> Mat3 {
    let mut e = Mat3::zeros();
    for i in 0..dim {
        for j in 0..dim {
            e[(i, j)] = eps_a * d[i] * d[j];
        }
        e[(i, i)] += eps_perp;
    }
    e
}

/// Cutoff `phi(gamma s)`: one for `gamma s <= 1`, zero for `gamma s >= 2`,
/// and a C1 cubic blend in between.
pub fn truncation_phi_gamma(s: f64, gamma: f64) -> f64 {
    let x = gamma * s;
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let t = x - 1.0;
        1.0 - 3.0 * t * t + 2.0 * t * t * t
    }
}

/// Cutoff weight `phi_gamma(|n|)` evaluated from a nodal density.
#[derive(Debug, Clone, Copy)]
pub struct Truncation<'a> {
    pub density: &'a [f64],
    pub gamma: f64,
}

impl Truncation<'_> {
    fn weight(&self, el: &[usize], lam: &[f64; 4]) -> f64 {
        truncation_phi_gamma(interp(el, lam, self.density).abs(), self.gamma)
    }
}

/// Constant gradient of a P1 field on every element.
pub fn element_gradients(mesh: &TriMesh, values: &[f64]) -> Vec<Vec3> {
    (0..mesh.n_elements())
        .map(|e| {
            let mut g = Vec3::zeros();
            for (a, &i) in mesh.element(e).iter().enumerate() {
                g += grad_vec(&mesh.grads(e)[a]) * values[i];
            }
            g
        })
        .collect()
}

/// `int_K eps(d)` for a P1 director, in closed form.
fn element_epsilon_integral(mesh: &TriMesh, e: usize, d: &[Vec3], eps_perp: f64, eps_a: f64) -> Mat3 {
    let dim = mesh.dim;
    let vol = mesh.elem_volume[e];
    let mut sum = Vec3::zeros();
    let mut outer = Mat3::zeros();
    for &i in mesh.element(e) {
        let mut p = d[i];
        for c in dim..3 {
            p[c] = 0.0;
        }
        sum += p;
        outer += p * p.transpose();
    }
    outer += sum * sum.transpose();
    let n = (dim + 1) as f64 * (dim + 2) as f64;
    let mut m = outer * (eps_a * vol / n);
    for c in 0..dim {
        m[(c, c)] += eps_perp * vol;
    }
    m
}

/// `coeff * (eps(d) grad phi_j, grad phi_i)` for all node pairs.
pub fn assemble_stiffness_aniso(
    mesh: &TriMesh,
    d: &[Vec3],
    eps_perp: f64,
    eps_a: f64,
    coeff: f64,
) -> CsrMatrix {
    let npe = mesh.npe();
    let mut b = TripletBuilder::with_capacity(mesh.n_nodes(), mesh.n_nodes(), mesh.n_elements() * npe * npe);
    for e in 0..mesh.n_elements() {
        let eps = element_epsilon_integral(mesh, e, d, eps_perp, eps_a);
        let el = mesh.element(e);
        let g = mesh.grads(e);
        for a in 0..npe {
            let ga = grad_vec(&g[a]);
            let eg = eps * ga;
            for bb in 0..npe {
                b.push(el[a], el[bb], coeff * eg.dot(&grad_vec(&g[bb])));
            }
        }
    }
    b.build()
}

/// Standard P1 stiffness matrix `(grad phi_j, grad phi_i)`.
pub fn assemble_isotropic_stiffness(mesh: &TriMesh) -> CsrMatrix {
    let npe = mesh.npe();
    let mut b = TripletBuilder::with_capacity(mesh.n_nodes(), mesh.n_nodes(), mesh.n_elements() * npe * npe);
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        for a in 0..npe {
            for bb in 0..npe {
                let s = g[a][0] * g[bb][0] + g[a][1] * g[bb][1] + g[a][2] * g[bb][2];
                b.push(el[a], el[bb], vol * s);
            }
        }
    }
    b.build()
}

/// Consistent P1 mass matrix `(phi_j, phi_i)`.
pub fn assemble_consistent_mass(mesh: &TriMesh) -> CsrMatrix {
    let npe = mesh.npe();
    let n = (mesh.dim + 1) as f64 * (mesh.dim + 2) as f64;
    let mut b = TripletBuilder::with_capacity(mesh.n_nodes(), mesh.n_nodes(), mesh.n_elements() * npe * npe);
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let vol = mesh.elem_volume[e];
        for a in 0..npe {
            for bb in 0..npe {
                let f = if a == bb { 2.0 } else { 1.0 };
                b.push(el[a], el[bb], f * vol / n);
            }
        }
    }
    b.build()
}

/// `-(w v phi_j, grad phi_i)` with `w = phi_gamma(|n|)` when truncated.
///
/// The MINI velocity includes its bubble part; the quadrature is exact for
/// the untruncated integrand.
pub fn assemble_convection_charge(
    mesh: &TriMesh,
    v: &VelocityField,
    truncation: Option<&Truncation<'_>>,
) -> CsrMatrix {
    let dim = mesh.dim;
    let npe = mesh.npe();
    let rule = SimplexRule::new(dim, dim + 2);
    let mut b = TripletBuilder::with_capacity(mesh.n_nodes(), mesh.n_nodes(), mesh.n_elements() * npe * npe);
    let mut local = vec![0.0; npe * npe];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        local.iter_mut().for_each(|x| *x = 0.0);
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let vx = interp_vec(el, lam, &v.nodal) + v.bubble[e] * bubble_value(dim, lam);
            let w = truncation.map_or(1.0, |t| t.weight(el, lam)) * wq * vol;
            for a in 0..npe {
                let vg = vx.dot(&grad_vec(&g[a]));
                for bb in 0..npe {
                    local[a * npe + bb] -= w * lam[bb] * vg;
                }
            }
        }
        for a in 0..npe {
            for bb in 0..npe {
                b.push(el[a], el[bb], local[a * npe + bb]);
            }
        }
    }
    b.build()
}

/// `sign * (w phi_j eps(d) F, grad phi_i)` for a piecewise constant field `F`
/// (normally the effective field gradient, one vector per element).
pub fn assemble_drift_charge(
    mesh: &TriMesh,
    d: &[Vec3],
    field: &[Vec3],
    eps_perp: f64,
    eps_a: f64,
    sign: f64,
    truncation: Option<&Truncation<'_>>,
) -> CsrMatrix {
    let dim = mesh.dim;
    let npe = mesh.npe();
    let rule = SimplexRule::new(dim, 3);
    let mut b = TripletBuilder::with_capacity(mesh.n_nodes(), mesh.n_nodes(), mesh.n_elements() * npe * npe);
    let mut local = vec![0.0; npe * npe];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        local.iter_mut().for_each(|x| *x = 0.0);
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let dx = interp_vec(el, lam, d);
            let flux = epsilon_of_d(&dx, eps_perp, eps_a, dim) * field[e];
            let w = truncation.map_or(1.0, |t| t.weight(el, lam)) * wq * vol * sign;
            for a in 0..npe {
                let fg = flux.dot(&grad_vec(&g[a]));
                for bb in 0..npe {
                    local[a * npe + bb] += w * lam[bb] * fg;
                }
            }
        }
        for a in 0..npe {
            for bb in 0..npe {
                b.push(el[a], el[bb], local[a * npe + bb]);
            }
        }
    }
    b.build()
}

/// `sum_K int_K rho (eps(d) F_K) . G_K` for piecewise constant `F`, `G` and
/// optional P1 weight `rho` (one when absent).
pub fn weighted_dirichlet_energy(
    mesh: &TriMesh,
    d: &[Vec3],
    eps_perp: f64,
    eps_a: f64,
    f: &[Vec3],
    g: &[Vec3],
    rho: Option<&[f64]>,
) -> f64 {
    let mut total = 0.0;
    match rho {
        None => {
            for e in 0..mesh.n_elements() {
                let eps = element_epsilon_integral(mesh, e, d, eps_perp, eps_a);
                total += (eps * f[e]).dot(&g[e]);
            }
        }
        Some(rho) => {
            let dim = mesh.dim;
            let rule = SimplexRule::new(dim, 3);
            for e in 0..mesh.n_elements() {
                let el = mesh.element(e);
                let vol = mesh.elem_volume[e];
                let mut s = 0.0;
                for (lam, wq) in rule.points.iter().zip(&rule.weights) {
                    let dx = interp_vec(el, lam, d);
                    let r = interp(el, lam, rho);
                    s += wq * r * (epsilon_of_d(&dx, eps_perp, eps_a, dim) * f[e]).dot(&g[e]);
                }
                total += vol * s;
            }
        }
    }
    total
}

/// Nodal values that can be paired pointwise.
pub trait NodalDot {
    fn nodal_dot(&self, other: &Self) -> f64;
}

impl NodalDot for f64 {
    fn nodal_dot(&self, other: &Self) -> f64 {
        self * other
    }
}

impl NodalDot for Vec3 {
    fn nodal_dot(&self, other: &Self) -> f64 {
        self.dot(other)
    }
}

/// Lumped pairing `(f, g)_h = sum_z m_z f(z) . g(z)`.
pub fn mass_lumped_inner<T: NodalDot>(mesh: &TriMesh, f: &[T], g: &[T]) -> Result<f64, FemError> {
    if f.len() != g.len() {
        return Err(FemError::DimensionMismatch(f.len(), g.len()));
    }
    if f.len() != mesh.n_nodes() {
        return Err(FemError::DimensionMismatch(f.len(), mesh.n_nodes()));
    }
    Ok(f.iter()
        .zip(g)
        .zip(&mesh.lumped_mass)
        .map(|((a, b), m)| m * a.nodal_dot(b))
        .sum())
}
