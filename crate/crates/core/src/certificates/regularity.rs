//! Regularity weights of a reference trajectory and the residual of the
//! scheme evaluated at the reference.
//!
//! Norms are computed with a degree-4 rule per element; `L^inf` norms take
//! the maximum over quadrature points and mesh nodes.

use crate::fem::{bubble_gradient, bubble_value, epsilon_of_d, grad_vec, interp_vec, VelocityField};
use crate::mesh::TriMesh;
use crate::quadrature::SimplexRule;
use crate::state::PhysParams;
use crate::Vec3;

use super::reference::{fd_jacobian, ReferenceTrajectory};

/// Regularity weights with the individual norms they are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityWeights {
    pub k1: f64,
    pub k2: f64,
    pub kd: f64,
    pub terms: Vec<(&'static str, f64)>,
}

/// `q~ = -A Delta d~_mid - mu eps_a grad phi~ (grad phi~ . d~_prev)`.
fn reference_q(
    traj: &dyn ReferenceTrajectory,
    params: &PhysParams,
    x: &[f64; 3],
    t: f64,
    k: f64,
) -> Vec3 {
    let lap = (traj.director_laplacian(x, t) + traj.director_laplacian(x, t - k)) * 0.5;
    let g = traj.potential_gradient(x, t);
    let d_prev = traj.director(x, t - k);
    -lap * params.elastic - g * (params.mu_phi * params.eps_a * g.dot(&d_prev))
}

/// `d~_mid x ((v~ . grad) d~_prev + q~)`.
fn transport(
    traj: &dyn ReferenceTrajectory,
    params: &PhysParams,
    x: &[f64; 3],
    t: f64,
    k: f64,
) -> Vec3 {
    let mid = (traj.director(x, t) + traj.director(x, t - k)) * 0.5;
    let conv = traj.director_gradient(x, t - k) * traj.velocity(x, t);
    mid.cross(&(conv + reference_q(traj, params, x, t, k)))
}

struct Norms {
    p: f64,
    acc: f64,
    sup: f64,
}

impl Norms {
    fn new(p: f64) -> Self {
        Norms { p, acc: 0.0, sup: 0.0 }
    }

    fn add(&mut self, w: f64, v: f64) {
        self.acc += w * v.abs().powf(self.p);
        self.sup = self.sup.max(v.abs());
    }

    fn lp(&self) -> f64 {
        self.acc.powf(1.0 / self.p)
    }
}

/// `K1`, `K2` and `Kd` of the reference at `t` with step `k`.
///
/// `constant` multiplies `K1` and `K2`. The time supremum of
/// `||grad phi~||_{L3}` is taken over the two time levels.
pub fn regularity_weights(
    traj: &dyn ReferenceTrajectory,
    mesh: &TriMesh,
    params: &PhysParams,
    t: f64,
    k: f64,
    constant: f64,
) -> RegularityWeights {
    let rule = SimplexRule::new(mesh.dim, 4);
    let mut grad_d_prev = Norms::new(3.0);
    let mut grad_d = Norms::new(3.0);
    let mut q = Norms::new(3.0);
    let mut v = Norms::new(3.0);
    let mut grad_phi = Norms::new(3.0);
    let mut grad_phi_prev = Norms::new(3.0);
    let mut hess_phi = Norms::new(3.0);
    let mut grad_np = Norms::new(3.0);
    let mut grad_nm = Norms::new(3.0);
    let mut dt_grad_phi = Norms::new(3.0);
    let mut density = Norms::new(3.0);
    let mut dt_d = Norms::new(3.0);
    let mut tr = Norms::new(3.0);
    let mut grad_tr = Norms::new(3.0);
    let mut visit = |x: &[f64; 3], w: f64| {
        let gd_prev = traj.director_gradient(x, t - k);
        grad_d_prev.add(w, gd_prev.norm());
        grad_d.add(w, traj.director_gradient(x, t).norm());
        q.add(w, reference_q(traj, params, x, t, k).norm());
        v.add(w, traj.velocity(x, t).norm());
        let gp = traj.potential_gradient(x, t);
        let gp_prev = traj.potential_gradient(x, t - k);
        grad_phi.add(w, gp.norm());
        grad_phi_prev.add(w, gp_prev.norm());
        hess_phi.add(w, traj.potential_hessian(x, t).norm());
        grad_np.add(w, traj.n_plus_gradient(x, t).norm());
        grad_nm.add(w, traj.n_minus_gradient(x, t).norm());
        dt_grad_phi.add(w, ((gp - gp_prev) / k).norm());
        density.add(w, traj.n_plus(x, t) + traj.n_minus(x, t));
        dt_d.add(w, ((traj.director(x, t) - traj.director(x, t - k)) / k).norm());
        tr.add(w, transport(traj, params, x, t, k).norm());
        grad_tr.add(w, fd_jacobian(mesh.dim, x, |y| transport(traj, params, y, t, k)).norm());
    };
    for e in 0..mesh.n_elements() {
        let vol = mesh.elem_volume[e];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            visit(&mesh.point(e, lam), w * vol);
        }
    }
    for x in &mesh.nodes {
        visit(x, 0.0);
    }
    let sup_grad_phi_l3 = grad_phi.lp().max(grad_phi_prev.lp());
    let tr_w13 = (tr.acc + grad_tr.acc).powf(1.0 / 3.0);
    let terms = vec![
        ("grad_d_prev_l3", grad_d_prev.lp()),
        ("q_l3", q.lp()),
        ("v_linf", v.sup),
        ("grad_phi_linf", grad_phi.sup),
        ("grad_d_l3", grad_d.lp()),
        ("hess_phi_l3", hess_phi.lp()),
        ("grad_n_plus_l3", grad_np.lp()),
        ("grad_n_minus_l3", grad_nm.lp()),
        ("dt_grad_phi_l3", dt_grad_phi.lp()),
        ("density_linf", density.sup),
        ("dt_d_linf", dt_d.sup),
        ("transport_linf", tr.sup),
        ("transport_w13", tr_w13),
        ("sup_grad_phi_l3", sup_grad_phi_l3),
    ];
    let val = |name: &str| terms.iter().find(|(n, _)| *n == name).map(|t| t.1).unwrap_or(0.0);
    let coupling = val("transport_linf") * (sup_grad_phi_l3.powi(2) + 1.0) + val("transport_w13");
    let common = val("grad_d_prev_l3").powi(4)
        + val("q_l3").powi(4)
        + val("v_linf").powi(4)
        + val("grad_phi_linf").powi(8)
        + val("dt_grad_phi_l3")
        + coupling
        + 1.0;
    let k1 = constant
        * (common
            + val("grad_d_l3").powi(4)
            + val("hess_phi_l3").powi(2)
            + val("grad_n_plus_l3")
            + val("grad_n_minus_l3")
            + val("density_linf").powi(2)
            + val("dt_d_linf").powf(4.0 / 3.0));
    let k2 = constant * common;
    let kd = k * params.eps_a * val("dt_d_linf").powi(2);
    RegularityWeights { k1, k2, kd, terms }
}

/// Discrete test functions paired with the residual operator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdProbe {
    /// Momentum test function (MINI).
    pub a: VelocityField,
    /// Director test function (P1, nodal).
    pub c: Vec<Vec3>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
}

impl AdProbe {
    pub fn zeros(mesh: &TriMesh) -> Self {
        AdProbe {
            a: VelocityField::zeros(mesh),
            c: vec![Vec3::zeros(); mesh.n_nodes()],
            e_plus: vec![0.0; mesh.n_nodes()],
            e_minus: vec![0.0; mesh.n_nodes()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdReport {
    pub momentum: f64,
    pub director: f64,
    pub charge_plus: f64,
    pub charge_minus: f64,
    pub total: f64,
}

/// Residual of the scheme's forms evaluated at the reference trajectory at
/// time level `t` (previous level `t - k`), paired with `probe`.
pub fn residual_operator_ad(
    traj: &dyn ReferenceTrajectory,
    probe: &AdProbe,
    mesh: &TriMesh,
    params: &PhysParams,
    t: f64,
    k: f64,
) -> AdReport {
    let dim = mesh.dim;
    let rule = SimplexRule::new(dim, 6);
    let t0 = t - k;
    let mut momentum = 0.0;
    let mut director = 0.0;
    let mut charges = [0.0; 2];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        let mut grad_e = [Vec3::zeros(); 2];
        for (a, &i) in el.iter().enumerate() {
            grad_e[0] += grad_vec(&g[a]) * probe.e_plus[i];
            grad_e[1] += grad_vec(&g[a]) * probe.e_minus[i];
        }
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let w = wq * vol;
            let x = mesh.point(e, lam);
            let av = interp_vec(el, lam, &probe.a.nodal) + probe.a.bubble[e] * bubble_value(dim, lam);
            let mut ga = probe.a.bubble[e] * bubble_gradient(dim, lam, g).transpose();
            for (a, &i) in el.iter().enumerate() {
                ga += probe.a.nodal[i] * grad_vec(&g[a]).transpose();
            }
            let v = traj.velocity(&x, t);
            let v0 = traj.velocity(&x, t0);
            let gv = traj.velocity_gradient(&x, t);
            let gv0 = traj.velocity_gradient(&x, t0);
            let rho = traj.n_plus(&x, t) - traj.n_minus(&x, t);
            let gphi = traj.potential_gradient(&x, t);
            momentum += w
                * (((v - v0) / k).dot(&av)
                    + params.nu * gv.component_mul(&ga).sum()
                    + (gv * v0).dot(&av)
                    + 0.5 * gv0.trace() * v.dot(&av)
                    + params.lambda_npp * rho * gphi.dot(&av));
            let cx = interp_vec(el, lam, &probe.c);
            director += w * ((traj.director(&x, t) - traj.director(&x, t0)) / k).dot(&cx);
            let eps = epsilon_of_d(&traj.director(&x, t), params.eps_perp, params.eps_a, dim);
            for (s, sign, n_of, gn_of) in [
                (0usize, 1.0, traj.n_plus(&x, t), traj.n_plus_gradient(&x, t)),
                (1, -1.0, traj.n_minus(&x, t), traj.n_minus_gradient(&x, t)),
            ] {
                charges[s] += w
                    * (params.mu_phi * (eps * gn_of).dot(&grad_e[s])
                        + sign * n_of * (eps * gphi).dot(&grad_e[s])
                        - params.lambda_npp * n_of * v.dot(&grad_e[s]));
            }
        }
    }
    // Lumped terms use nodal values.
    for (z, x) in mesh.nodes.iter().enumerate() {
        let m = mesh.lumped_mass[z];
        let mid = (traj.director(x, t) + traj.director(x, t0)) * 0.5;
        let q = reference_q(traj, params, x, t, k);
        let gd0 = traj.director_gradient(x, t0);
        let v = traj.velocity(x, t);
        let w = mid.cross(&mid.cross(&q));
        momentum += m * params.nu_el * (gd0.transpose() * w).dot(&probe.a.nodal[z]);
        let cross_c = mid.cross(&probe.c[z]);
        director += m * (params.nu_el * mid.cross(&(gd0 * v)) + mid.cross(&q)).dot(&cross_c);
        charges[0] += m * (traj.n_plus(x, t) - traj.n_plus(x, t0)) / k * probe.e_plus[z];
        charges[1] += m * (traj.n_minus(x, t) - traj.n_minus(x, t0)) / k * probe.e_minus[z];
    }
    AdReport {
        momentum,
        director,
        charge_plus: charges[0],
        charge_minus: charges[1],
        total: momentum + director + charges[0] + charges[1],
    }
}
