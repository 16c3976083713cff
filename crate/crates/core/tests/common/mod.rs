//! Independent quadrature oracle shared by the integration tests.
//!
//! Element integrals are evaluated with the Grundmann-Moeller rule of
//! degree 9 and an element geometry computed here from the node
//! coordinates alone, so nothing is shared with the assembly code apart
//! from the connectivity.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use nematic_core::fem::{self, VelocityField};
use nematic_core::mesh::{build_structured_mesh, BoxDomain, Pattern, TriMesh};
use nematic_core::{Mat3, Vec3};

/// Quadrature rule in barycentric coordinates with weights summing to one.
pub struct GmRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Grundmann-Moeller rule of degree `2s + 1` on the `n`-simplex.
pub fn grundmann_moeller(n: usize, s: usize) -> GmRule {
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        // Weight for the reference simplex of volume 1/n!, rescaled to one.
        let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32) / (factorial(i) * factorial(d + n - i))
            * factorial(n);
        let mut betas = Vec::new();
        compositions(s - i, n + 1, &mut Vec::new(), &mut betas);
        for b in betas {
            points.push(b.iter().map(|&bj| (2 * bj + 1) as f64 / denom).collect());
            weights.push(w);
        }
    }
    GmRule { points, weights }
}

/// Degree-9 rule used throughout the oracle; exact for bubble products in 3-d.
pub fn rule9(dim: usize) -> GmRule {
    grundmann_moeller(dim, 4)
}

/// Geometry of one simplex from its vertex coordinates.
pub struct Simplex {
    pub dim: usize,
    pub verts: Vec<[f64; 3]>,
    pub volume: f64,
    /// Gradients of the barycentric coordinates, padded to three entries.
    pub grads: Vec<Vec3>,
}

impl Simplex {
    pub fn new(dim: usize, verts: Vec<[f64; 3]>) -> Self {
        let mut j = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            for r in 0..dim {
                j[(r, c)] = verts[c + 1][r] - verts[0][r];
            }
        }
        let volume = j.determinant().abs() / factorial(dim);
        let inv = j.try_inverse().expect("degenerate simplex");
        let mut grads = vec![Vec3::zeros(); dim + 1];
        for a in 1..=dim {
            for c in 0..dim {
                grads[a][c] = inv[(a - 1, c)];
            }
        }
        grads[0] = -grads[1..].iter().sum::<Vec3>();
        Simplex { dim, verts, volume, grads }
    }

    pub fn of(mesh: &TriMesh, e: usize) -> Self {
        Simplex::new(mesh.dim, mesh.element(e).iter().map(|&i| mesh.nodes[i]).collect())
    }

    pub fn point(&self, lam: &[f64]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, v) in self.verts.iter().enumerate() {
            for c in 0..3 {
                x[c] += lam[a] * v[c];
            }
        }
        x
    }

    fn bubble_constant(&self) -> f64 {
        ((self.dim + 1) as f64).powi(self.dim as i32 + 1)
    }

    /// Bubble normalized to one at the barycenter.
    pub fn bubble(&self, lam: &[f64]) -> f64 {
        self.bubble_constant() * lam.iter().product::<f64>()
    }

    pub fn bubble_grad(&self, lam: &[f64]) -> Vec3 {
        let mut g = Vec3::zeros();
        for i in 0..=self.dim {
            let p: f64 = (0..=self.dim).filter(|&k| k != i).map(|k| lam[k]).product();
            g += self.grads[i] * p;
        }
        g * self.bubble_constant()
    }

    /// `sum_q w_q f(lam_q) |K|`.
    pub fn integrate<T>(&self, rule: &GmRule, mut f: impl FnMut(&[f64]) -> T) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let mut acc = T::default();
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            acc = acc + f(p) * (w * self.volume);
        }
        acc
    }
}

fn nodal_interp<T>(mesh: &TriMesh, e: usize, lam: &[f64], values: &[T]) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
{
    mesh.element(e)
        .iter()
        .enumerate()
        .fold(T::default(), |acc, (a, &i)| acc + values[i] * lam[a])
}

/// `eps_perp I + eps_a d d^T` restricted to the leading `dim` block.
pub fn permittivity(d: &Vec3, eps_perp: f64, eps_a: f64, dim: usize) -> Mat3 {
    let mut p = *d;
    for c in dim..3 {
        p[c] = 0.0;
    }
    let mut e = p * p.transpose() * eps_a;
    for c in 0..dim {
        e[(c, c)] += eps_perp;
    }
    e
}

pub fn velocity_value(mesh: &TriMesh, s: &Simplex, e: usize, lam: &[f64], v: &VelocityField) -> Vec3 {
    nodal_interp(mesh, e, lam, &v.nodal) + v.bubble[e] * s.bubble(lam)
}

/// Entry `(r, c)` is `d v_r / d x_c`.
pub fn velocity_gradient(mesh: &TriMesh, s: &Simplex, e: usize, lam: &[f64], v: &VelocityField) -> Mat3 {
    let mut g = v.bubble[e] * s.bubble_grad(lam).transpose();
    for (a, &i) in mesh.element(e).iter().enumerate() {
        g += v.nodal[i] * s.grads[a].transpose();
    }
    g
}

/// Dense `n x n` matrix with entry `(i, j) = sum_K int_K f(K, lam, a_i, a_j)`.
fn assemble_p1(mesh: &TriMesh, mut local: impl FnMut(usize, &Simplex, &[f64], usize, usize) -> f64) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let rule = rule9(mesh.dim);
    let mut out = DMatrix::zeros(n, n);
    for e in 0..mesh.n_elements() {
        let s = Simplex::of(mesh, e);
        let el = mesh.element(e);
        for a in 0..el.len() {
            for b in 0..el.len() {
                out[(el[a], el[b])] += s.integrate(&rule, |lam| local(e, &s, lam, a, b));
            }
        }
    }
    out
}

pub fn consistent_mass(mesh: &TriMesh) -> DMatrix<f64> {
    assemble_p1(mesh, |_, _, lam, a, b| lam[a] * lam[b])
}

pub fn lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let m = consistent_mass(mesh);
    (0..mesh.n_nodes()).map(|i| m.row(i).sum()).collect()
}

pub fn stiffness_aniso(mesh: &TriMesh, d: &[Vec3], eps_perp: f64, eps_a: f64) -> DMatrix<f64> {
    assemble_p1(mesh, |e, s, lam, a, b| {
        let dx = nodal_interp(mesh, e, lam, d);
        (permittivity(&dx, eps_perp, eps_a, mesh.dim) * s.grads[b]).dot(&s.grads[a])
    })
}

pub fn convection_charge(mesh: &TriMesh, v: &VelocityField) -> DMatrix<f64> {
    assemble_p1(mesh, |e, s, lam, a, b| -velocity_value(mesh, s, e, lam, v).dot(&s.grads[a]) * lam[b])
}

pub fn drift_charge(mesh: &TriMesh, d: &[Vec3], field: &[Vec3], eps_perp: f64, eps_a: f64, sign: f64) -> DMatrix<f64> {
    assemble_p1(mesh, |e, s, lam, a, b| {
        let dx = nodal_interp(mesh, e, lam, d);
        sign * lam[b] * (permittivity(&dx, eps_perp, eps_a, mesh.dim) * field[e]).dot(&s.grads[a])
    })
}

pub fn torque(mesh: &TriMesh, d: &[Vec3], field: &[Vec3]) -> Vec<Vec3> {
    let rule = rule9(mesh.dim);
    let mut out = vec![Vec3::zeros(); mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let s = Simplex::of(mesh, e);
        for (a, &z) in mesh.element(e).iter().enumerate() {
            out[z] += s.integrate(&rule, |lam| {
                let dx = nodal_interp(mesh, e, lam, d);
                field[e] * (dx.dot(&field[e]) * lam[a])
            });
        }
    }
    out
}

pub fn weighted_energy(
    mesh: &TriMesh,
    d: &[Vec3],
    eps_perp: f64,
    eps_a: f64,
    f: &[Vec3],
    g: &[Vec3],
    rho: Option<&[f64]>,
) -> f64 {
    let rule = rule9(mesh.dim);
    (0..mesh.n_elements())
        .map(|e| {
            let s = Simplex::of(mesh, e);
            s.integrate(&rule, |lam| {
                let dx = nodal_interp(mesh, e, lam, d);
                let r = rho.map_or(1.0, |r| nodal_interp(mesh, e, lam, r));
                r * (permittivity(&dx, eps_perp, eps_a, mesh.dim) * f[e]).dot(&g[e])
            })
        })
        .sum()
}

/// `(L2, H1-seminorm)` inner products of two MINI fields.
pub fn velocity_products(mesh: &TriMesh, u: &VelocityField, w: &VelocityField) -> (f64, f64) {
    let rule = rule9(mesh.dim);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for e in 0..mesh.n_elements() {
        let s = Simplex::of(mesh, e);
        l2 += s.integrate(&rule, |lam| {
            velocity_value(mesh, &s, e, lam, u).dot(&velocity_value(mesh, &s, e, lam, w))
        });
        h1 += s.integrate(&rule, |lam| {
            velocity_gradient(mesh, &s, e, lam, u)
                .component_mul(&velocity_gradient(mesh, &s, e, lam, w))
                .sum()
        });
    }
    (l2, h1)
}

/// `(div v, q_i)` for every P1 basis function.
pub fn divergence_residual(mesh: &TriMesh, v: &VelocityField) -> Vec<f64> {
    let rule = rule9(mesh.dim);
    let mut out = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let s = Simplex::of(mesh, e);
        for (a, &z) in mesh.element(e).iter().enumerate() {
            out[z] += s.integrate(&rule, |lam| velocity_gradient(mesh, &s, e, lam, v).trace() * lam[a]);
        }
    }
    out
}

/// Scalar MINI momentum operator on all P1 nodes followed by all bubbles,
/// entry `(test, trial)`, plus the divergence blocks per component with
/// entry `(pressure node, trial)`.
pub fn mini_operator(
    mesh: &TriMesh,
    mass: f64,
    viscosity: f64,
    convection: Option<&VelocityField>,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    let dim = mesh.dim;
    let rule = rule9(dim);
    let mut a = DMatrix::zeros(n + ne, n + ne);
    let mut div = vec![DMatrix::zeros(n, n + ne); dim];
    for e in 0..ne {
        let s = Simplex::of(mesh, e);
        let el = mesh.element(e);
        let idx: Vec<usize> = el.iter().copied().chain(std::iter::once(n + e)).collect();
        let basis = |lam: &[f64], k: usize| if k < el.len() { lam[k] } else { s.bubble(lam) };
        let grad = |lam: &[f64], k: usize| if k < el.len() { s.grads[k] } else { s.bubble_grad(lam) };
        for i in 0..idx.len() {
            for j in 0..idx.len() {
                a[(idx[i], idx[j])] += s.integrate(&rule, |lam| {
                    let mut v = mass * basis(lam, i) * basis(lam, j) + viscosity * grad(lam, i).dot(&grad(lam, j));
                    if let Some(w) = convection {
                        let wx = velocity_value(mesh, &s, e, lam, w);
                        v += 0.5 * (wx.dot(&grad(lam, j)) * basis(lam, i) - wx.dot(&grad(lam, i)) * basis(lam, j));
                    }
                    v
                });
            }
            for (q, &zq) in el.iter().enumerate() {
                for c in 0..dim {
                    div[c][(zq, idx[i])] -= s.integrate(&rule, |lam| lam[q] * grad(lam, i)[c]);
                }
            }
        }
    }
    (a, div)
}

/// `(rho F, psi)` for every P1 node and bubble, per component.
pub fn electric_force(mesh: &TriMesh, n_plus: &[f64], n_minus: &[f64], field: &[Vec3]) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    let rule = rule9(mesh.dim);
    let mut out = DMatrix::zeros(n + ne, mesh.dim);
    for e in 0..ne {
        let s = Simplex::of(mesh, e);
        let el = mesh.element(e);
        for k in 0..=el.len() {
            let row = if k < el.len() { el[k] } else { n + e };
            let val = s.integrate(&rule, |lam| {
                let rho = nodal_interp(mesh, e, lam, n_plus) - nodal_interp(mesh, e, lam, n_minus);
                rho * if k < el.len() { lam[k] } else { s.bubble(lam) }
            });
            for c in 0..mesh.dim {
                out[(row, c)] += val * field[e][c];
            }
        }
    }
    out
}

/// L2 norm of `u_h - u` for a P1 field against a smooth function.
pub fn l2_error(mesh: &TriMesh, uh: &[f64], u: impl Fn(&[f64; 3]) -> f64) -> f64 {
    let rule = rule9(mesh.dim);
    (0..mesh.n_elements())
        .map(|e| {
            let s = Simplex::of(mesh, e);
            s.integrate(&rule, |lam| (nodal_interp(mesh, e, lam, uh) - u(&s.point(lam))).powi(2))
        })
        .sum::<f64>()
        .sqrt()
}

/// Two simplices sharing a facet, with random vertices on both sides.
pub fn random_pair_mesh(dim: usize, rng: &mut impl Rng) -> TriMesh {
    loop {
        let mut nodes: Vec<[f64; 3]> = Vec::new();
        for _ in 0..dim {
            let mut p = [0.0; 3];
            for c in 0..dim {
                p[c] = rng.gen_range(-1.0..1.0);
            }
            nodes.push(p);
        }
        // Normal of the shared facet.
        let normal = if dim == 2 {
            Vec3::new(-(nodes[1][1] - nodes[0][1]), nodes[1][0] - nodes[0][0], 0.0)
        } else {
            let u = Vec3::new(nodes[1][0] - nodes[0][0], nodes[1][1] - nodes[0][1], nodes[1][2] - nodes[0][2]);
            let v = Vec3::new(nodes[2][0] - nodes[0][0], nodes[2][1] - nodes[0][1], nodes[2][2] - nodes[0][2]);
            u.cross(&v)
        };
        if normal.norm() < 0.2 {
            continue;
        }
        let centroid: Vec3 = nodes.iter().map(|p| Vec3::new(p[0], p[1], p[2])).sum::<Vec3>() / dim as f64;
        let nrm = normal.normalize();
        let apex = |side: f64, rng: &mut dyn rand::RngCore| {
            let mut off = Vec3::zeros();
            for c in 0..dim {
                off[c] = rng.gen_range(-0.4..0.4);
            }
            let off = off - nrm * off.dot(&nrm);
            let p = centroid + off + nrm * (side * rng.gen_range(0.3..1.0));
            [p.x, p.y, p.z]
        };
        let a = apex(1.0, rng);
        let b = apex(-1.0, rng);
        nodes.push(a);
        nodes.push(b);
        let shared: Vec<usize> = (0..dim).collect();
        let mut e1 = shared.clone();
        e1.push(dim);
        let mut e2 = shared;
        e2.push(dim + 1);
        if let Ok(m) = TriMesh::from_parts(dim, nodes, vec![e1, e2]) {
            let s0 = Simplex::of(&m, 0);
            let s1 = Simplex::of(&m, 1);
            if s0.volume > 0.02 && s1.volume > 0.02 {
                return m;
            }
        }
    }
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 {
            return v.normalize();
        }
    }
}

pub fn random_in_plane(dim: usize, rng: &mut impl Rng) -> Vec3 {
    let mut v = Vec3::zeros();
    for c in 0..dim {
        v[c] = rng.gen_range(-1.0..1.0);
    }
    v
}

pub fn random_velocity(mesh: &TriMesh, rng: &mut impl Rng) -> VelocityField {
    VelocityField {
        nodal: (0..mesh.n_nodes()).map(|_| random_in_plane(mesh.dim, rng)).collect(),
        bubble: (0..mesh.n_elements()).map(|_| random_in_plane(mesh.dim, rng)).collect(),
    }
}

/// `max |a - b| / max(1, max |b|)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax() / b.amax().max(1.0)
}

pub fn rel_diff_vec(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let da = DVector::from_column_slice(a);
    let db = DVector::from_column_slice(b);
    (da - &db).amax() / db.amax().max(1.0)
}

pub fn rel_diff_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Structured mesh of `[0,1]^dim` with interior nodes moved randomly by up
/// to a quarter of the cell size.
pub fn jittered_patch_mesh(dim: usize, n: usize, rng: &mut impl Rng) -> TriMesh {
    let base = build_structured_mesh(n, &BoxDomain::unit(dim), Pattern::default_for(dim)).unwrap();
    let elements: Vec<Vec<usize>> = (0..base.n_elements()).map(|e| base.element(e).to_vec()).collect();
    let dx = 0.25 / n as f64;
    let nodes = base
        .nodes
        .iter()
        .zip(&base.is_boundary)
        .map(|(p, &b)| {
            let mut q = *p;
            if !b {
                for c in q.iter_mut().take(dim) {
                    *c += rng.gen_range(-dx..dx);
                }
            }
            q
        })
        .collect();
    TriMesh::from_parts(dim, nodes, elements).unwrap()
}

/// Largest relative discrepancy of every assembled operator against the
/// oracle on one random two-element mesh and one jittered patch.
pub fn assembly_discrepancies(dim: usize, rng: &mut impl Rng) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mesh = random_pair_mesh(dim, rng);
    let nn = mesh.n_nodes();
    let ne = mesh.n_elements();
    let d: Vec<Vec3> = (0..nn).map(|_| random_unit(rng)).collect();
    let f: Vec<Vec3> = (0..ne).map(|_| random_in_plane(dim, rng)).collect();
    let g: Vec<Vec3> = (0..ne).map(|_| random_in_plane(dim, rng)).collect();
    let rho: Vec<f64> = (0..nn).map(|_| rng.gen_range(0.0..2.0)).collect();
    let (ep, ea) = (rng.gen_range(0.1..2.0), rng.gen_range(0.0..5.0));
    let v = random_velocity(&mesh, rng);
    let u = random_velocity(&mesh, rng);

    out.push(("consistent mass", rel_diff(&fem::assemble_consistent_mass(&mesh).to_dense(), &consistent_mass(&mesh))));
    out.push(("lumped mass", rel_diff_vec(&mesh.lumped_mass, &lumped_mass(&mesh))));
    out.push((
        "isotropic stiffness",
        rel_diff(&fem::assemble_isotropic_stiffness(&mesh).to_dense(), &stiffness_aniso(&mesh, &d, 1.0, 0.0)),
    ));
    out.push((
        "anisotropic stiffness",
        rel_diff(
            &fem::assemble_stiffness_aniso(&mesh, &d, ep, ea, 1.0).to_dense(),
            &stiffness_aniso(&mesh, &d, ep, ea),
        ),
    ));
    out.push((
        "charge convection",
        rel_diff(&fem::assemble_convection_charge(&mesh, &v, None).to_dense(), &convection_charge(&mesh, &v)),
    ));
    out.push((
        "charge drift",
        rel_diff(
            &fem::assemble_drift_charge(&mesh, &d, &f, ep, ea, -1.0, None).to_dense(),
            &drift_charge(&mesh, &d, &f, ep, ea, -1.0),
        ),
    ));
    let t_fem = fem::director_torque(&mesh, &d, &f);
    let t_ref = torque(&mesh, &d, &f);
    let flat = |t: &[Vec3]| t.iter().flat_map(|x| x.iter().copied()).collect::<Vec<f64>>();
    out.push(("director torque", rel_diff_vec(&flat(&t_fem), &flat(&t_ref))));
    out.push((
        "weighted energy",
        rel_diff_scalar(
            fem::weighted_dirichlet_energy(&mesh, &d, ep, ea, &f, &g, Some(&rho)),
            weighted_energy(&mesh, &d, ep, ea, &f, &g, Some(&rho)),
        ),
    ));
    out.push((
        "unweighted energy",
        rel_diff_scalar(
            fem::weighted_dirichlet_energy(&mesh, &d, ep, ea, &f, &g, None),
            weighted_energy(&mesh, &d, ep, ea, &f, &g, None),
        ),
    ));
    let (l2, h1) = fem::velocity_products(&mesh, &u, &v);
    let (l2r, h1r) = velocity_products(&mesh, &u, &v);
    out.push(("velocity products", rel_diff_scalar(l2, l2r).max(rel_diff_scalar(h1, h1r))));
    out.push((
        "divergence residual",
        rel_diff_vec(&fem::divergence_residual(&mesh, &v), &divergence_residual(&mesh, &v)),
    ));

    // MINI blocks need interior nodes.
    let patch = jittered_patch_mesh(dim, 2, rng);
    let nn = patch.n_nodes();
    let ne = patch.n_elements();
    let w = random_velocity(&patch, rng);
    let (mass, visc) = (rng.gen_range(0.5..2.0), rng.gen_range(0.1..2.0));
    let sys = fem::MiniSystem::assemble(
        &patch,
        &fem::MomentumCoefficients { mass, viscosity: visc, convection: Some(&w) },
    );
    let (a, div) = mini_operator(&patch, mass, visc, Some(&w));
    let free = &sys.layout.free;
    let nf = free.len();
    let pick = |rows: &[usize], cols: &[usize], m: &DMatrix<f64>| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    };
    let bubbles: Vec<usize> = (nn..nn + ne).collect();
    let all: Vec<usize> = (0..nn).collect();
    let mut mini = rel_diff(&sys.s11.to_dense(), &pick(free, free, &a));
    mini = mini.max(rel_diff(&sys.s1b.to_dense(), &pick(free, &bubbles, &a)));
    mini = mini.max(rel_diff(&sys.sb1.to_dense(), &pick(&bubbles, free, &a)));
    let bb = pick(&bubbles, &bubbles, &a);
    let sbb = DMatrix::from_diagonal(&DVector::from_column_slice(&sys.sbb));
    mini = mini.max(rel_diff(&sbb, &bb));
    out.push(("momentum blocks", mini));
    let mut dv = 0.0f64;
    for c in 0..dim {
        dv = dv.max(rel_diff(&sys.d1[c].to_dense(), &pick(&all, free, &div[c])));
        dv = dv.max(rel_diff(&sys.db[c].to_dense(), &pick(&all, &bubbles, &div[c])));
    }
    out.push(("divergence blocks", dv));

    let np: Vec<f64> = (0..nn).map(|_| rng.gen_range(0.0..2.0)).collect();
    let nm: Vec<f64> = (0..nn).map(|_| rng.gen_range(0.0..2.0)).collect();
    let field: Vec<Vec3> = (0..ne).map(|_| random_in_plane(dim, rng)).collect();
    let (f1, fb) = fem::electric_force(&patch, &sys.layout, &np, &nm, &field, None);
    let ef = electric_force(&patch, &np, &nm, &field);
    let mut f1r = vec![0.0; dim * nf];
    let mut fbr = vec![0.0; dim * ne];
    for c in 0..dim {
        for (k, &z) in free.iter().enumerate() {
            f1r[c * nf + k] = ef[(z, c)];
        }
        for e in 0..ne {
            fbr[c * ne + e] = ef[(nn + e, c)];
        }
    }
    out.push(("electric force", rel_diff_vec(&f1, &f1r).max(rel_diff_vec(&fb, &fbr))));
    out
}
