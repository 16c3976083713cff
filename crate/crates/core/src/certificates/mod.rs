//! Computable analysis functionals: the energy and its discrete balance,
//! relative energy and dissipation with respect to a reference trajectory,
//! regularity weights, the residual of the scheme at a reference, and the
//! discrete Gronwall accumulator.

mod gronwall;
mod reference;
mod regularity;

pub use gronwall::{gronwall_accumulate, GronwallError, GronwallReport};
pub use reference::{transfer_state, ReferenceError, ReferenceSample, ReferenceTrajectory};
pub use regularity::{regularity_weights, residual_operator_ad, AdProbe, AdReport, RegularityWeights};

use crate::fem::{
    assemble_isotropic_stiffness, discrete_laplacian, element_gradients, nodal_cross_sq_norm,
    velocity_products, weighted_dirichlet_energy, DirectorBc, VelocityField,
};
use crate::linalg::CsrMatrix;
use crate::mesh::TriMesh;
use crate::state::{DiscreteState, PhysParams};
use crate::Vec3;

/// Kinetic, elastic and electric parts of the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    /// `1/2 ||v||^2`.
    pub kinetic: f64,
    /// `A/2 ||grad d||^2`.
    pub elastic: f64,
    /// `mu/2 (eps(d) grad phi, grad phi)`.
    pub electric: f64,
    pub total: f64,
}

fn dirichlet_form(k: &CsrMatrix, f: &[Vec3], g: &[Vec3]) -> f64 {
    (0..3)
        .map(|c| {
            let x: Vec<f64> = f.iter().map(|v| v[c]).collect();
            let kx = k.mul_vec(&x);
            kx.iter().zip(g).map(|(a, b)| a * b[c]).sum::<f64>()
        })
        .sum()
}

pub fn total_energy(state: &DiscreteState, mesh: &TriMesh, params: &PhysParams) -> EnergyParts {
    let k = assemble_isotropic_stiffness(mesh);
    energy_with(state, mesh, params, &k)
}

fn energy_with(state: &DiscreteState, mesh: &TriMesh, params: &PhysParams, k: &CsrMatrix) -> EnergyParts {
    let kinetic = 0.5 * velocity_products(mesh, &state.velocity, &state.velocity).0;
    let d = &state.director.values;
    let elastic = 0.5 * params.elastic * dirichlet_form(k, d, d);
    let electric = if state.phi.values.iter().any(|&p| p != 0.0) {
        let g = element_gradients(mesh, &state.phi.values);
        0.5 * params.mu_phi * weighted_dirichlet_energy(mesh, d, params.eps_perp, params.eps_a, &g, &g, None)
    } else {
        0.0
    };
    EnergyParts {
        kinetic,
        elastic,
        electric,
        total: kinetic + elastic + electric,
    }
}

/// Rates entering the discrete energy balance of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLawTerms {
    /// `nu ||grad v||^2`.
    pub viscous: f64,
    /// `||d_mid x q||_h^2`.
    pub director: f64,
    /// `((n+ + n-) eps(d) grad phi, grad phi)`.
    pub drift: f64,
    /// `||n+ - n-||_h^2`.
    pub charge: f64,
    /// `||d_t v||^2`.
    pub damping_velocity: f64,
    /// `mu (eps(d_prev) grad d_t phi, grad d_t phi)`.
    pub damping_potential: f64,
    /// `mu eps_a ||grad phi . d_t d||^2`.
    pub damping_director: f64,
    /// Change of `h^alpha/2 ||grad v||^2` plus `h^alpha/2 ||grad (v - v_prev)||^2`.
    pub stab_velocity: f64,
    /// Change of `h^beta/2 ||Delta_h d||_h^2`.
    pub stab_director: f64,
}

/// Itemized discrete energy balance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLaw {
    pub energy_prev: f64,
    pub energy_new: f64,
    pub terms: EnergyLawTerms,
    /// `k` times the sum of the dissipation rates.
    pub dissipation: f64,
    /// `k^2/2` times the sum of the damping rates.
    pub damping: f64,
    /// Sum of the stabilization contributions.
    pub stabilization: f64,
    /// `E_new - E_prev + dissipation + damping + stabilization`.
    pub residual: f64,
}

fn diff_velocity(a: &VelocityField, b: &VelocityField) -> VelocityField {
    VelocityField {
        nodal: a.nodal.iter().zip(&b.nodal).map(|(x, y)| x - y).collect(),
        bubble: a.bubble.iter().zip(&b.bubble).map(|(x, y)| x - y).collect(),
    }
}

/// `int (F . w)^2` for elementwise constant `F` and P1 `w`.
fn projected_square(mesh: &TriMesh, f: &[Vec3], w: &[Vec3]) -> f64 {
    let c = 1.0 / ((mesh.dim + 1) as f64 * (mesh.dim + 2) as f64);
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let s: Vec<f64> = mesh.element(e).iter().map(|&i| f[e].dot(&w[i])).collect();
        let sum: f64 = s.iter().sum();
        let sq: f64 = s.iter().map(|x| x * x).sum();
        total += mesh.elem_volume[e] * c * (sq + sum * sum);
    }
    total
}

fn lumped_sq(mesh: &TriMesh, v: &[Vec3]) -> f64 {
    v.iter().zip(&mesh.lumped_mass).map(|(x, m)| m * x.norm_squared()).sum()
}

pub fn energy_law_residual(
    prev: &DiscreteState,
    new: &DiscreteState,
    mesh: &TriMesh,
    params: &PhysParams,
) -> EnergyLaw {
    let k = params.k;
    let stiff = assemble_isotropic_stiffness(mesh);
    let e_prev = energy_with(prev, mesh, params, &stiff).total;
    let e_new = energy_with(new, mesh, params, &stiff).total;
    let n = mesh.n_nodes();
    let d_mid: Vec<Vec3> = (0..n)
        .map(|z| (prev.director.values[z] + new.director.values[z]) * 0.5)
        .collect();
    let grad_new = element_gradients(mesh, &new.phi.values);
    let (_, grad_v_sq) = velocity_products(mesh, &new.velocity, &new.velocity);
    let rho: Vec<f64> = (0..n).map(|z| new.n_plus.values[z] - new.n_minus.values[z]).collect();
    let density: Vec<f64> = (0..n).map(|z| new.n_plus.values[z] + new.n_minus.values[z]).collect();
    let dv = diff_velocity(&new.velocity, &prev.velocity);
    let (dv_l2, dv_h1) = velocity_products(mesh, &dv, &dv);
    let dphi: Vec<f64> = (0..n).map(|z| new.phi.values[z] - prev.phi.values[z]).collect();
    let grad_dphi = element_gradients(mesh, &dphi);
    let dd: Vec<Vec3> = (0..n)
        .map(|z| new.director.values[z] - prev.director.values[z])
        .collect();
    let (ep, ea) = (params.eps_perp, params.eps_a);
    let mut t = EnergyLawTerms {
        viscous: params.nu * grad_v_sq,
        director: nodal_cross_sq_norm(mesh, &d_mid, &new.q),
        drift: weighted_dirichlet_energy(mesh, &new.director.values, ep, ea, &grad_new, &grad_new, Some(&density)),
        charge: rho.iter().zip(&mesh.lumped_mass).map(|(r, m)| m * r * r).sum(),
        damping_velocity: dv_l2 / (k * k),
        damping_potential: params.mu_phi
            * weighted_dirichlet_energy(mesh, &prev.director.values, ep, ea, &grad_dphi, &grad_dphi, None)
            / (k * k),
        damping_director: params.mu_phi * ea * projected_square(mesh, &grad_new, &dd) / (k * k),
        ..Default::default()
    };
    if params.stabilization_on {
        let ha = mesh.h.powf(params.alpha);
        let (_, prev_h1) = velocity_products(mesh, &prev.velocity, &prev.velocity);
        t.stab_velocity = 0.5 * ha * (grad_v_sq - prev_h1 + dv_h1);
        let dirichlet = params.director_bc == DirectorBc::Dirichlet;
        let lap_new = discrete_laplacian(mesh, &new.director.values, &stiff, dirichlet);
        let lap_prev = discrete_laplacian(mesh, &prev.director.values, &stiff, dirichlet);
        t.stab_director = 0.5 * mesh.h.powf(params.beta) * (lumped_sq(mesh, &lap_new) - lumped_sq(mesh, &lap_prev));
    }
    let dissipation = k * (t.viscous + t.director + t.drift + t.charge);
    let damping = 0.5 * k * k * (t.damping_velocity + t.damping_potential + t.damping_director);
    let stabilization = t.stab_velocity + t.stab_director;
    EnergyLaw {
        energy_prev: e_prev,
        energy_new: e_new,
        terms: t,
        dissipation,
        damping,
        stabilization,
        residual: e_new - e_prev + dissipation + damping + stabilization,
    }
}

/// `A/2 ||grad(d - d~)||^2 + 1/2 ||v - v~||^2 + mu/2 int |grad(phi - phi~)|^2_eps(d)`.
pub fn relative_energy(state: &DiscreteState, reference: &ReferenceSample, mesh: &TriMesh, params: &PhysParams) -> f64 {
    let n = mesh.n_nodes();
    let dd: Vec<Vec3> = (0..n).map(|z| state.director.values[z] - reference.director[z]).collect();
    let dv = diff_velocity(&state.velocity, &reference.velocity);
    let dphi: Vec<f64> = (0..n).map(|z| state.phi.values[z] - reference.phi[z]).collect();
    let g = element_gradients(mesh, &dphi);
    let k = assemble_isotropic_stiffness(mesh);
    0.5 * params.elastic * dirichlet_form(&k, &dd, &dd)
        + 0.5 * velocity_products(mesh, &dv, &dv).0
        + 0.5
            * params.mu_phi
            * weighted_dirichlet_energy(mesh, &state.director.values, params.eps_perp, params.eps_a, &g, &g, None)
}

/// Relative dissipation in its continuous form `w` (L2 cross-product term,
/// current directors) and its lumped discrete form `w_d` (midpoint directors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeDissipation {
    pub viscous: f64,
    /// `||d x q - d~ x q~||^2` in L2.
    pub director_l2: f64,
    /// `||d_mid x q - d~_mid x q~||_h^2`.
    pub director_lumped: f64,
    pub drift: f64,
    /// `||rho - rho~||^2` in L2.
    pub charge_l2: f64,
    /// `||rho - rho~||_h^2`.
    pub charge_lumped: f64,
    pub w: f64,
    pub w_d: f64,
}

/// Relative dissipation of `state` against `reference`.
///
/// `previous` supplies the earlier time levels for the midpoint directors
/// of the lumped form; without them the current directors are used.
pub fn relative_dissipation(
    state: &DiscreteState,
    reference: &ReferenceSample,
    previous: Option<(&DiscreteState, &ReferenceSample)>,
    mesh: &TriMesh,
    params: &PhysParams,
) -> RelativeDissipation {
    let n = mesh.n_nodes();
    let dv = diff_velocity(&state.velocity, &reference.velocity);
    let viscous = params.nu * velocity_products(mesh, &dv, &dv).1;
    let d = &state.director.values;
    let dr = &reference.director;
    // The cross products of P1 fields are quadratic; their difference is
    // integrated exactly with a degree-4 rule.
    let rule = crate::quadrature::SimplexRule::new(mesh.dim, 4);
    let mut director_l2 = 0.0;
    let mut charge_l2 = 0.0;
    let rho: Vec<f64> = (0..n)
        .map(|z| {
            (state.n_plus.values[z] - state.n_minus.values[z]) - (reference.n_plus[z] - reference.n_minus[z])
        })
        .collect();
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let vol = mesh.elem_volume[e];
        for (lam, w) in rule.points.iter().zip(&rule.weights) {
            let x = crate::fem::interp_vec(el, lam, d).cross(&crate::fem::interp_vec(el, lam, &state.q))
                - crate::fem::interp_vec(el, lam, dr).cross(&crate::fem::interp_vec(el, lam, &reference.q));
            director_l2 += w * vol * x.norm_squared();
            let r = crate::fem::interp(el, lam, &rho);
            charge_l2 += w * vol * r * r;
        }
    }
    let (mid, mid_ref): (Vec<Vec3>, Vec<Vec3>) = match previous {
        Some((ps, pr)) => (
            (0..n).map(|z| (d[z] + ps.director.values[z]) * 0.5).collect(),
            (0..n).map(|z| (dr[z] + pr.director[z]) * 0.5).collect(),
        ),
        None => (d.clone(), dr.clone()),
    };
    let director_lumped = (0..n)
        .map(|z| mesh.lumped_mass[z] * (mid[z].cross(&state.q[z]) - mid_ref[z].cross(&reference.q[z])).norm_squared())
        .sum();
    let charge_lumped = rho.iter().zip(&mesh.lumped_mass).map(|(r, m)| m * r * r).sum();
    let dphi: Vec<f64> = (0..n).map(|z| state.phi.values[z] - reference.phi[z]).collect();
    let g = element_gradients(mesh, &dphi);
    let density: Vec<f64> = (0..n).map(|z| state.n_plus.values[z] + state.n_minus.values[z]).collect();
    let drift = weighted_dirichlet_energy(mesh, d, params.eps_perp, params.eps_a, &g, &g, Some(&density));
    RelativeDissipation {
        viscous,
        director_l2,
        director_lumped,
        drift,
        charge_l2,
        charge_lumped,
        w: viscous + director_l2 + drift + charge_l2,
        w_d: viscous + director_lumped + drift + charge_lumped,
    }
}
