//! MINI element operators for the momentum equation.
//!
//! The momentum operator is the same scalar operator for each velocity
//! component: `mass (u, a) + viscosity (grad u, grad a) + c(w; u, a)` with
//! the skew-symmetric convection
//! `c(w; u, a) = 1/2 [((w . grad) u, a) - ((w . grad) a, u)]`.
//! Velocity unknowns live on interior nodes (homogeneous Dirichlet data) and
//! on every element bubble. Bubbles couple only within their element, so the
//! bubble block is diagonal and is eliminated by static condensation.

use super::{bubble_gradient, bubble_scale, bubble_value, grad_vec, interp, interp_vec, VelocityField};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::TriMesh;
use crate::quadrature::{barycentric_monomial_average, SimplexRule};
use crate::{Mat3, Vec3};

/// Numbering of the velocity unknowns.
///
/// P1 unknown `(free node f, component c)` has index `c * n_free + f`;
/// bubble unknown `(element e, component c)` has index `c * n_elem + e`.
#[derive(Debug, Clone)]
pub struct VelocityLayout {
    pub dim: usize,
    pub n_nodes: usize,
    pub n_elem: usize,
    pub free: Vec<usize>,
    /// Position of each node in `free`, `usize::MAX` on the boundary.
    pub free_index: Vec<usize>,
}

impl VelocityLayout {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut free = Vec::new();
        let mut free_index = vec![usize::MAX; mesh.n_nodes()];
        for z in 0..mesh.n_nodes() {
            if !mesh.is_boundary[z] {
                free_index[z] = free.len();
                free.push(z);
            }
        }
        VelocityLayout {
            dim: mesh.dim,
            n_nodes: mesh.n_nodes(),
            n_elem: mesh.n_elements(),
            free,
            free_index,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_p1(&self) -> usize {
        self.dim * self.free.len()
    }

    pub fn n_bubble(&self) -> usize {
        self.dim * self.n_elem
    }

    /// Splits a velocity field into P1 and bubble unknown vectors.
    pub fn gather(&self, v: &VelocityField) -> (Vec<f64>, Vec<f64>) {
        let nf = self.n_free();
        let mut u1 = vec![0.0; self.n_p1()];
        let mut ub = vec![0.0; self.n_bubble()];
        for c in 0..self.dim {
            for (f, &z) in self.free.iter().enumerate() {
                u1[c * nf + f] = v.nodal[z][c];
            }
            for e in 0..self.n_elem {
                ub[c * self.n_elem + e] = v.bubble[e][c];
            }
        }
        (u1, ub)
    }

    /// Inverse of [`VelocityLayout::gather`]; boundary nodes get zero.
    pub fn scatter(&self, u1: &[f64], ub: &[f64]) -> VelocityField {
        let nf = self.n_free();
        let mut nodal = vec![Vec3::zeros(); self.n_nodes];
        let mut bubble = vec![Vec3::zeros(); self.n_elem];
        for c in 0..self.dim {
            for (f, &z) in self.free.iter().enumerate() {
                nodal[z][c] = u1[c * nf + f];
            }
            for (e, b) in bubble.iter_mut().enumerate() {
                b[c] = ub[c * self.n_elem + e];
            }
        }
        VelocityField { nodal, bubble }
    }
}

/// Coefficients of the scalar momentum operator.
#[derive(Debug, Clone, Copy)]
pub struct MomentumCoefficients<'a> {
    pub mass: f64,
    pub viscosity: f64,
    pub convection: Option<&'a VelocityField>,
}

/// Assembled MINI blocks of one scalar momentum operator and the divergence.
#[derive(Debug, Clone)]
pub struct MiniSystem {
    pub layout: VelocityLayout,
    /// P1 test, P1 trial.
    pub s11: CsrMatrix,
    /// P1 test, bubble trial.
    pub s1b: CsrMatrix,
    /// Bubble test, P1 trial.
    pub sb1: CsrMatrix,
    /// Bubble-bubble diagonal.
    pub sbb: Vec<f64>,
    /// Per component: `-(q, d_c phi)` for P1 trial functions.
    pub d1: Vec<CsrMatrix>,
    /// Per component: `-(q, d_c b)` for bubble trial functions.
    pub db: Vec<CsrMatrix>,
}

/// Condensed saddle-point blocks `[A G; D -C]` on the P1 velocity unknowns.
#[derive(Debug, Clone)]
pub struct CondensedMini {
    pub a: CsrMatrix,
    pub grad: CsrMatrix,
    pub div: CsrMatrix,
    pub stab: CsrMatrix,
}

fn block_diag(m: &CsrMatrix, copies: usize) -> CsrMatrix {
    let (r, c) = (m.nrows(), m.ncols());
    let mut b = TripletBuilder::with_capacity(r * copies, c * copies, m.nnz() * copies);
    for k in 0..copies {
        for i in 0..r {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.push(k * r + i, k * c + j, v);
            }
        }
    }
    b.build()
}

/// Places blocks at the given row/column offsets of a new matrix.
fn place(nrows: usize, ncols: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> CsrMatrix {
    let mut b = TripletBuilder::new(nrows, ncols);
    for &(r0, c0, m) in blocks {
        for i in 0..m.nrows() {
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.push(r0 + i, c0 + j, v);
            }
        }
    }
    b.build()
}

impl MiniSystem {
    pub fn assemble(mesh: &TriMesh, coeffs: &MomentumCoefficients<'_>) -> MiniSystem {
        let layout = VelocityLayout::new(mesh);
        let dim = mesh.dim;
        let npe = mesh.npe();
        let nb = npe + 1;
        let degree = if coeffs.convection.is_some() {
            3 * dim + 2
        } else {
            2 * dim + 2
        };
        let rule = SimplexRule::new(dim, degree);
        let nf = layout.n_free();
        let ne = mesh.n_elements();
        let nn = mesh.n_nodes();
        let mut s11 = TripletBuilder::with_capacity(nf, nf, ne * npe * npe);
        let mut s1b = TripletBuilder::with_capacity(nf, ne, ne * npe);
        let mut sb1 = TripletBuilder::with_capacity(ne, nf, ne * npe);
        let mut sbb = vec![0.0; ne];
        let mut d1: Vec<TripletBuilder> = (0..dim).map(|_| TripletBuilder::new(nn, nf)).collect();
        let mut db: Vec<TripletBuilder> = (0..dim).map(|_| TripletBuilder::new(nn, ne)).collect();
        let mut local = vec![0.0; nb * nb];
        let mut dloc = vec![Vec3::zeros(); npe * nb];
        let mut phi = vec![0.0; nb];
        let mut dphi = vec![Vec3::zeros(); nb];
        for e in 0..ne {
            let el = mesh.element(e);
            let g = mesh.grads(e);
            let vol = mesh.elem_volume[e];
            local.iter_mut().for_each(|x| *x = 0.0);
            dloc.iter_mut().for_each(|x| *x = Vec3::zeros());
            for a in 0..npe {
                dphi[a] = grad_vec(&g[a]);
            }
            for (lam, wq) in rule.points.iter().zip(&rule.weights) {
                let w = wq * vol;
                phi[..npe].copy_from_slice(&lam[..npe]);
                phi[npe] = bubble_value(dim, lam);
                dphi[npe] = bubble_gradient(dim, lam, g);
                let conv = coeffs
                    .convection
                    .map(|v| interp_vec(el, lam, &v.nodal) + v.bubble[e] * phi[npe]);
                for a in 0..nb {
                    let wa = conv.map_or(0.0, |c| c.dot(&dphi[a]));
                    for b in 0..nb {
                        let mut s = coeffs.mass * phi[a] * phi[b]
                            + coeffs.viscosity * dphi[a].dot(&dphi[b]);
                        if let Some(c) = conv {
                            s += 0.5 * (c.dot(&dphi[b]) * phi[a] - wa * phi[b]);
                        }
                        local[a * nb + b] += w * s;
                    }
                }
                for q in 0..npe {
                    for b in 0..nb {
                        dloc[q * nb + b] -= dphi[b] * (w * phi[q]);
                    }
                }
            }
            for a in 0..nb {
                let ra = if a < npe { layout.free_index[el[a]] } else { usize::MAX };
                for b in 0..nb {
                    let cb = if b < npe { layout.free_index[el[b]] } else { usize::MAX };
                    let v = local[a * nb + b];
                    match (a < npe, b < npe) {
                        (true, true) if ra != usize::MAX && cb != usize::MAX => s11.push(ra, cb, v),
                        (true, false) if ra != usize::MAX => s1b.push(ra, e, v),
                        (false, true) if cb != usize::MAX => sb1.push(e, cb, v),
                        (false, false) => sbb[e] += v,
                        _ => {}
                    }
                }
            }
            for q in 0..npe {
                for b in 0..nb {
                    let dv = dloc[q * nb + b];
                    for c in 0..dim {
                        if b < npe {
                            let cb = layout.free_index[el[b]];
                            if cb != usize::MAX {
                                d1[c].push(el[q], cb, dv[c]);
                            }
                        } else {
                            db[c].push(el[q], e, dv[c]);
                        }
                    }
                }
            }
        }
        MiniSystem {
            layout,
            s11: s11.build(),
            s1b: s1b.build(),
            sb1: sb1.build(),
            sbb,
            d1: d1.into_iter().map(|b| b.build()).collect(),
            db: db.into_iter().map(|b| b.build()).collect(),
        }
    }

    fn inv_bubble(&self) -> Vec<f64> {
        self.sbb.iter().map(|s| 1.0 / s).collect()
    }

    /// Eliminates the bubbles, giving `[A G; D -C]` on P1 unknowns and pressure.
    pub fn condensed(&self) -> CondensedMini {
        let dim = self.layout.dim;
        let nf = self.layout.n_free();
        let nn = self.layout.n_nodes;
        let inv = self.inv_bubble();
        let sb1_scaled = self.sb1.scale_rows(&inv);
        let a_scalar = self.s11.linear_combination(1.0, &self.s1b.matmul(&sb1_scaled), -1.0);
        let a = block_diag(&a_scalar, dim);
        let mut grad_blocks = Vec::with_capacity(dim);
        let mut div_blocks = Vec::with_capacity(dim);
        let mut stab = CsrMatrix::zeros(nn, nn);
        for c in 0..dim {
            let dbt = self.db[c].transpose();
            let dbt_scaled = dbt.scale_rows(&inv);
            let g = self.d1[c].transpose().linear_combination(1.0, &self.s1b.matmul(&dbt_scaled), -1.0);
            let d = self.d1[c].linear_combination(1.0, &self.db[c].matmul(&sb1_scaled), -1.0);
            stab = stab.add(&self.db[c].matmul(&dbt_scaled));
            grad_blocks.push(g);
            div_blocks.push(d);
        }
        let grad = place(
            dim * nf,
            nn,
            &grad_blocks.iter().enumerate().map(|(c, g)| (c * nf, 0, g)).collect::<Vec<_>>(),
        );
        let div = place(
            nn,
            dim * nf,
            &div_blocks.iter().enumerate().map(|(c, d)| (0, c * nf, d)).collect::<Vec<_>>(),
        );
        CondensedMini { a, grad, div, stab }
    }

    /// Right-hand sides of the condensed system from full momentum loads.
    pub fn condense_rhs(&self, f1: &[f64], fb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nf = self.layout.n_free();
        let ne = self.layout.n_elem;
        let inv = self.inv_bubble();
        let mut fhat = f1.to_vec();
        let mut g = vec![0.0; self.layout.n_nodes];
        for c in 0..self.layout.dim {
            let y: Vec<f64> = (0..ne).map(|e| inv[e] * fb[c * ne + e]).collect();
            let s = self.s1b.mul_vec(&y);
            for f in 0..nf {
                fhat[c * nf + f] -= s[f];
            }
            let t = self.db[c].mul_vec(&y);
            g.iter_mut().zip(t).for_each(|(a, b)| *a -= b);
        }
        (fhat, g)
    }

    /// Bubble coefficients from the P1 solution and the pressure.
    pub fn recover_bubbles(&self, u1: &[f64], p: &[f64], fb: &[f64]) -> Vec<f64> {
        let nf = self.layout.n_free();
        let ne = self.layout.n_elem;
        let mut ub = vec![0.0; self.layout.n_bubble()];
        for c in 0..self.layout.dim {
            let s = self.sb1.mul_vec(&u1[c * nf..(c + 1) * nf]);
            let t = self.db[c].mul_vec_transpose(p);
            for e in 0..ne {
                ub[c * ne + e] = (fb[c * ne + e] - s[e] - t[e]) / self.sbb[e];
            }
        }
        ub
    }

    /// Applies the full momentum operator to `v` on the interior test space.
    ///
    /// `v` must vanish on boundary nodes.
    pub fn apply(&self, v: &VelocityField) -> (Vec<f64>, Vec<f64>) {
        let (u1, ub) = self.layout.gather(v);
        let nf = self.layout.n_free();
        let ne = self.layout.n_elem;
        let mut f1 = vec![0.0; u1.len()];
        let mut fb = vec![0.0; ub.len()];
        for c in 0..self.layout.dim {
            let a = self.s11.mul_vec(&u1[c * nf..(c + 1) * nf]);
            let b = self.s1b.mul_vec(&ub[c * ne..(c + 1) * ne]);
            for f in 0..nf {
                f1[c * nf + f] = a[f] + b[f];
            }
            let s = self.sb1.mul_vec(&u1[c * nf..(c + 1) * nf]);
            for e in 0..ne {
                fb[c * ne + e] = s[e] + self.sbb[e] * ub[c * ne + e];
            }
        }
        (f1, fb)
    }

    /// Uncondensed operator and divergence; per component the unknowns are
    /// ordered as `[P1 (free nodes), bubbles]`.
    pub fn full_matrices(&self) -> (CsrMatrix, CsrMatrix) {
        let dim = self.layout.dim;
        let nf = self.layout.n_free();
        let ne = self.layout.n_elem;
        let blk = nf + ne;
        let bdiag = CsrMatrix::from_diagonal(&self.sbb);
        let mut ablocks = Vec::new();
        let mut dblocks = Vec::new();
        for c in 0..dim {
            let o = c * blk;
            ablocks.push((o, o, &self.s11));
            ablocks.push((o, o + nf, &self.s1b));
            ablocks.push((o + nf, o, &self.sb1));
            ablocks.push((o + nf, o + nf, &bdiag));
            dblocks.push((0, o, &self.d1[c]));
            dblocks.push((0, o + nf, &self.db[c]));
        }
        (
            place(dim * blk, dim * blk, &ablocks),
            place(self.layout.n_nodes, dim * blk, &dblocks),
        )
    }
}

/// MINI velocity at barycentric point `lam` of element `e`.
pub fn velocity_at(mesh: &TriMesh, v: &VelocityField, e: usize, lam: &[f64; 4]) -> Vec3 {
    interp_vec(mesh.element(e), lam, &v.nodal) + v.bubble[e] * bubble_value(mesh.dim, lam)
}

/// `(div v, q)` for every P1 pressure basis function `q`.
pub fn divergence_residual(mesh: &TriMesh, v: &VelocityField) -> Vec<f64> {
    let dim = mesh.dim;
    let npe = mesh.npe();
    let bubble_mean = bubble_scale(dim) * barycentric_monomial_average(dim, &vec![1; npe]);
    let mut out = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        let mut div = 0.0;
        for (a, &i) in el.iter().enumerate() {
            div += v.nodal[i].dot(&grad_vec(&g[a]));
        }
        for (a, &i) in el.iter().enumerate() {
            // The bubble term is integrated by parts on the element.
            let bubble = -v.bubble[e].dot(&grad_vec(&g[a])) * bubble_mean * vol;
            out[i] += div * vol / npe as f64 + bubble;
        }
    }
    out
}

/// Load `(rho F, a)` with `rho = n+ - n-` and a piecewise constant field `F`.
///
/// With `gamma` each density is replaced by `phi_gamma(|n|) n`.
pub fn electric_force(
    mesh: &TriMesh,
    layout: &VelocityLayout,
    n_plus: &[f64],
    n_minus: &[f64],
    field: &[Vec3],
    gamma: Option<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let dim = mesh.dim;
    let npe = mesh.npe();
    let rule = SimplexRule::new(dim, dim + 2);
    let nf = layout.n_free();
    let ne = layout.n_elem;
    let mut f1 = vec![0.0; layout.n_p1()];
    let mut fb = vec![0.0; layout.n_bubble()];
    let cut = |n: f64| match gamma {
        Some(g) => super::truncation_phi_gamma(n.abs(), g) * n,
        None => n,
    };
    for e in 0..mesh.n_elements() {
        if field[e] == Vec3::zeros() {
            continue;
        }
        let el = mesh.element(e);
        let vol = mesh.elem_volume[e];
        let mut lp = [0.0; 4];
        let mut lb = 0.0;
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let rho = cut(interp(el, lam, n_plus)) - cut(interp(el, lam, n_minus));
            let w = wq * vol * rho;
            for a in 0..npe {
                lp[a] += w * lam[a];
            }
            lb += w * bubble_value(dim, lam);
        }
        for c in 0..dim {
            for a in 0..npe {
                let f = layout.free_index[el[a]];
                if f != usize::MAX {
                    f1[c * nf + f] += lp[a] * field[e][c];
                }
            }
            fb[c * ne + e] += lb * field[e][c];
        }
    }
    (f1, fb)
}

/// Lumped elastic load `m_z (G_z^T w_z) . a(z)` on the P1 test functions.
pub fn elastic_force(mesh: &TriMesh, layout: &VelocityLayout, g: &[Mat3], w: &[Vec3]) -> Vec<f64> {
    let nf = layout.n_free();
    let mut f1 = vec![0.0; layout.n_p1()];
    for (f, &z) in layout.free.iter().enumerate() {
        let v = g[z].transpose() * w[z] * mesh.lumped_mass[z];
        for c in 0..layout.dim {
            f1[c * nf + f] = v[c];
        }
    }
    f1
}

/// `((u, w), (grad u, grad w))` for MINI fields, exact.
pub fn velocity_products(mesh: &TriMesh, u: &VelocityField, w: &VelocityField) -> (f64, f64) {
    let dim = mesh.dim;
    let rule = SimplexRule::new(dim, 2 * dim + 2);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let uv = velocity_at(mesh, u, e, lam);
            let wv = velocity_at(mesh, w, e, lam);
            let bg = bubble_gradient(dim, lam, g);
            let mut gu = u.bubble[e] * bg.transpose();
            let mut gw = w.bubble[e] * bg.transpose();
            for (a, &i) in el.iter().enumerate() {
                gu += u.nodal[i] * grad_vec(&g[a]).transpose();
                gw += w.nodal[i] * grad_vec(&g[a]).transpose();
            }
            l2 += wq * vol * uv.dot(&wv);
            h1 += wq * vol * gu.component_mul(&gw).sum();
        }
    }
    (l2, h1)
}
