//! One time step of the coupled scheme and the time loop.
//!
//! Each step runs an outer fixed-point iteration over four decoupled linear
//! (or nodal nonlinear) sub-solves: potential, charges, director, velocity.
//! The iteration stops once the largest nodal change of all unknowns
//! between two sweeps falls below `tol_fp`.

mod director;
mod velocity;

pub use director::{
    director_newton, director_step, evaluate_q, DirectorInputs, DirectorSolution,
};
pub(crate) use director::director_operator;
pub use velocity::{project_divergence_free, MomentumStep};

use log::{debug, info};
use thiserror::Error;

use crate::certificates::{energy_law_residual, total_energy};
use crate::fem::{
    assemble_convection_charge, assemble_drift_charge, assemble_isotropic_stiffness,
    assemble_stiffness_aniso, divergence_residual, element_gradients, lumped_l2_project_gradient,
    Truncation,
};
use crate::linalg::{
    audit_m_matrix, project_mean_zero, solve_nonsymmetric_from, solve_spd_from, CsrMatrix,
    Nullspace, SolveError,
};
use crate::mesh::TriMesh;
use crate::state::{initialize_state, DiscreteState, InitError, InitialData, PhysParams, StepCertificate};
use crate::Vec3;

/// Relative tolerance of the inner linear solves.
pub const LINEAR_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("fixed-point iteration did not converge in {iterations} sweeps (increment {increment:.3e})")]
    FixedPointDiverged { iterations: usize, increment: f64 },
    #[error("director Newton iteration failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("{stage} solve failed: {source}")]
    Solve {
        stage: &'static str,
        #[source]
        source: SolveError,
    },
    #[error("potential operator vanishes but the charge density does not")]
    DegeneratePotential,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

impl StepError {
    pub(crate) fn solve(stage: &'static str, source: SolveError) -> Self {
        StepError::Solve { stage, source }
    }
}

impl From<SolveError> for StepError {
    fn from(source: SolveError) -> Self {
        StepError::Solve { stage: "linear", source }
    }
}

/// One of the four decoupled sub-solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubSolve {
    Potential,
    Charges,
    Director,
    Velocity,
}

/// Sub-solves to skip; frozen unknowns keep their previous values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Freeze {
    pub potential: bool,
    pub charges: bool,
    pub director: bool,
    pub velocity: bool,
}

impl Freeze {
    fn skips(&self, s: SubSolve) -> bool {
        match s {
            SubSolve::Potential => self.potential,
            SubSolve::Charges => self.charges,
            SubSolve::Director => self.director,
            SubSolve::Velocity => self.velocity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    /// Tolerance on the l-infinity increment between sweeps.
    pub tol_fp: f64,
    pub max_outer_iters: usize,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub order: [SubSolve; 4],
    pub freeze: Freeze,
    /// Evaluate the energy law and M-matrix audits every step.
    pub certify: bool,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            tol_fp: 1e-9,
            max_outer_iters: 200,
            newton_tol: 1e-12,
            newton_max_iters: 30,
            order: [SubSolve::Potential, SubSolve::Charges, SubSolve::Director, SubSolve::Velocity],
            freeze: Freeze::default(),
            certify: true,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.tol_fp > 0.0) || !(self.newton_tol > 0.0) {
            return Err("tolerances must be positive");
        }
        if self.max_outer_iters == 0 || self.newton_max_iters == 0 {
            return Err("iteration limits must be positive");
        }
        let mut seen = [false; 4];
        for s in self.order {
            seen[s as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err("order must contain every sub-solve once");
        }
        Ok(())
    }
}

/// `grad phi - E0` on every element; `E0` is restricted to the mesh dimension.
pub fn effective_field(mesh: &TriMesh, phi: &[f64], e0: &Vec3) -> Vec<Vec3> {
    let mut e = Vec3::zeros();
    for c in 0..mesh.dim {
        e[c] = e0[c];
    }
    element_gradients(mesh, phi).into_iter().map(|g| g - e).collect()
}

fn potential_with(
    mesh: &TriMesh,
    k_eps: &CsrMatrix,
    n_plus: &[f64],
    n_minus: &[f64],
    phi: &mut [f64],
) -> Result<(), StepError> {
    let rhs: Vec<f64> = (0..mesh.n_nodes())
        .map(|z| mesh.lumped_mass[z] * (n_plus[z] - n_minus[z]))
        .collect();
    if rhs.iter().all(|&r| r == 0.0) {
        phi.iter_mut().for_each(|p| *p = 0.0);
        return Ok(());
    }
    if k_eps.max_abs() == 0.0 {
        return Err(StepError::DegeneratePotential);
    }
    solve_spd_from(k_eps, &rhs, phi, LINEAR_TOL, Nullspace::Constants(&mesh.lumped_mass))
        .map_err(|e| StepError::solve("potential", e))?;
    project_mean_zero(phi, &mesh.lumped_mass);
    Ok(())
}

/// Solves `mu (eps(d) grad phi, grad g) = (n+ - n-, g)_h` with zero lumped mean.
pub fn solve_potential(
    mesh: &TriMesh,
    params: &PhysParams,
    d: &[Vec3],
    n_plus: &[f64],
    n_minus: &[f64],
    guess: Option<&[f64]>,
) -> Result<Vec<f64>, StepError> {
    let k_eps = assemble_stiffness_aniso(mesh, d, params.eps_perp, params.eps_a, params.mu_phi);
    let mut phi = guess.map_or_else(|| vec![0.0; mesh.n_nodes()], <[f64]>::to_vec);
    potential_with(mesh, &k_eps, n_plus, n_minus, &mut phi)?;
    Ok(phi)
}

/// Inputs of the charge matrices besides the permittivity stiffness.
pub struct ChargeInputs<'a> {
    pub velocity: &'a crate::fem::VelocityField,
    pub director: &'a [Vec3],
    pub field: &'a [Vec3],
    /// Current iterates of `(n+, n-)`, used by the truncation weight.
    pub densities: (&'a [f64], &'a [f64]),
    pub gamma: Option<f64>,
}

/// `B = M_L/k + mu K_eps(d) + lambda C1(v) + sign C2(F, d)` in test-by-trial
/// layout (the transpose of the M-matrix).
pub fn charge_matrix(
    mesh: &TriMesh,
    params: &PhysParams,
    k_eps: &CsrMatrix,
    inputs: &ChargeInputs<'_>,
    sign: f64,
) -> CsrMatrix {
    let density = if sign > 0.0 { inputs.densities.0 } else { inputs.densities.1 };
    let trunc = inputs.gamma.map(|gamma| Truncation { density, gamma });
    let mass: Vec<f64> = mesh.lumped_mass.iter().map(|m| m / params.k).collect();
    let mut b = CsrMatrix::from_diagonal(&mass).add(k_eps);
    if params.lambda_npp != 0.0 && inputs.velocity.max_abs() > 0.0 {
        let c1 = assemble_convection_charge(mesh, inputs.velocity, trunc.as_ref());
        b = b.add(&c1.scaled(params.lambda_npp));
    }
    if inputs.field.iter().any(|f| *f != Vec3::zeros()) {
        let c2 = assemble_drift_charge(
            mesh,
            inputs.director,
            inputs.field,
            params.eps_perp,
            params.eps_a,
            sign,
            trunc.as_ref(),
        );
        b = b.add(&c2);
    }
    b
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup_diff_vec(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).amax()))
}

/// Largest nodal change over velocity, director, `q`, charges and potential.
fn increment(a: &DiscreteState, b: &DiscreteState) -> f64 {
    [
        sup_diff_vec(&a.velocity.nodal, &b.velocity.nodal),
        sup_diff_vec(&a.velocity.bubble, &b.velocity.bubble),
        sup_diff_vec(&a.director.values, &b.director.values),
        sup_diff_vec(&a.q, &b.q),
        sup_diff(&a.n_plus.values, &b.n_plus.values),
        sup_diff(&a.n_minus.values, &b.n_minus.values),
        sup_diff(&a.phi.values, &b.phi.values),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn is_finite(s: &DiscreteState) -> bool {
    s.velocity.nodal.iter().chain(&s.velocity.bubble).chain(&s.director.values).chain(&s.q).all(|v| v.iter().all(|x| x.is_finite()))
        && s.n_plus.values.iter().chain(&s.n_minus.values).chain(&s.phi.values).chain(&s.pressure.values).all(|x| x.is_finite())
}

/// Advances `prev` by one time step.
pub fn step(
    prev: &DiscreteState,
    mesh: &TriMesh,
    params: &PhysParams,
    cfg: &FixedPointConfig,
) -> Result<(DiscreteState, StepCertificate), StepError> {
    let t_new = prev.t + params.k;
    let e0 = params.applied_field.at(t_new);
    let gamma = params.truncation_gamma(mesh);
    let freeze = cfg.freeze;
    let grad_prev = lumped_l2_project_gradient(mesh, &prev.director.values);
    let k_iso = assemble_isotropic_stiffness(mesh);
    let dir_op = director_operator(mesh, params, &k_iso);
    let momentum = (!freeze.velocity).then(|| MomentumStep::new(mesh, params, &prev.velocity));

    let mut cur = prev.clone();
    cur.t = t_new;
    cur.step_index = prev.step_index + 1;
    let mut b_plus = None;
    let mut b_minus = None;
    let mut newton_iters = 0;
    let mut converged = None;
    let mut last_inc = f64::INFINITY;
    for it in 1..=cfg.max_outer_iters {
        let old = cur.clone();
        let k_eps = assemble_stiffness_aniso(mesh, &old.director.values, params.eps_perp, params.eps_a, params.mu_phi);
        for sub in cfg.order {
            if freeze.skips(sub) {
                continue;
            }
            match sub {
                SubSolve::Potential => {
                    potential_with(mesh, &k_eps, &cur.n_plus.values, &cur.n_minus.values, &mut cur.phi.values)?;
                }
                SubSolve::Charges => {
                    let field = effective_field(mesh, &cur.phi.values, &e0);
                    let inputs = ChargeInputs {
                        velocity: &cur.velocity,
                        director: &old.director.values,
                        field: &field,
                        densities: (&cur.n_plus.values, &cur.n_minus.values),
                        gamma,
                    };
                    let bp = charge_matrix(mesh, params, &k_eps, &inputs, 1.0);
                    let bm = charge_matrix(mesh, params, &k_eps, &inputs, -1.0);
                    for (b, prev_n, n, name) in [
                        (&bp, &prev.n_plus.values, &mut cur.n_plus.values, "charges (+)"),
                        (&bm, &prev.n_minus.values, &mut cur.n_minus.values, "charges (-)"),
                    ] {
                        let rhs: Vec<f64> =
                            prev_n.iter().zip(&mesh.lumped_mass).map(|(x, m)| x * m / params.k).collect();
                        solve_nonsymmetric_from(b, &rhs, n, LINEAR_TOL).map_err(|e| StepError::solve(name, e))?;
                    }
                    b_plus = Some(bp);
                    b_minus = Some(bm);
                }
                SubSolve::Director => {
                    let field = effective_field(mesh, &cur.phi.values, &e0);
                    let guess = cur.director.values.clone();
                    let inputs = DirectorInputs {
                        d_prev: &prev.director.values,
                        velocity: &cur.velocity.nodal,
                        field: &field,
                        grad_prev: &grad_prev,
                        guess: Some(&guess),
                    };
                    let sol = director_newton(mesh, params, cfg.newton_tol, cfg.newton_max_iters, &dir_op, &inputs)?;
                    newton_iters += sol.iterations;
                    cur.director.values = sol.d;
                    cur.q = sol.q;
                }
                SubSolve::Velocity => {
                    let field = effective_field(mesh, &cur.phi.values, &e0);
                    let w: Vec<Vec3> = (0..mesh.n_nodes())
                        .map(|z| {
                            let m = (prev.director.values[z] + cur.director.values[z]) * 0.5;
                            m.cross(&m.cross(&cur.q[z]))
                        })
                        .collect();
                    let guess = cur.pressure.values.clone();
                    let (v, p) = momentum.as_ref().expect("momentum operator").solve(
                        mesh,
                        params,
                        &cur.n_plus.values,
                        &cur.n_minus.values,
                        &field,
                        gamma,
                        &grad_prev,
                        &w,
                        Some(&guess),
                        LINEAR_TOL,
                    )?;
                    cur.velocity = v;
                    cur.pressure.values = p;
                }
            }
        }
        if !is_finite(&cur) {
            return Err(StepError::NonFinite("fixed-point iterate"));
        }
        last_inc = increment(&old, &cur);
        debug!("step {} sweep {it}: increment {last_inc:.3e}", cur.step_index);
        if last_inc <= cfg.tol_fp {
            converged = Some(it);
            break;
        }
    }
    let Some(iters) = converged else {
        return Err(StepError::FixedPointDiverged {
            iterations: cfg.max_outer_iters,
            increment: last_inc,
        });
    };

    let (mp0, mm0) = prev.charge_masses(mesh);
    let (mp1, mm1) = cur.charge_masses(mesh);
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let divergence_norm = divergence_residual(mesh, &cur.velocity)
        .into_iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let audit = |b: Option<CsrMatrix>| {
        b.filter(|_| cfg.certify).map(|b| {
            let bt = b.transpose();
            audit_m_matrix(&bt, 1e-12 * bt.max_abs())
        })
    };
    let (energy_before, energy_after, energy_law) = if cfg.certify {
        let law = energy_law_residual(prev, &cur, mesh, params);
        (law.energy_prev, law.energy_new, Some(law))
    } else {
        (total_energy(prev, mesh, params).total, total_energy(&cur, mesh, params).total, None)
    };
    let cert = StepCertificate {
        step: cur.step_index,
        t: cur.t,
        energy_before,
        energy_after,
        energy_law,
        max_norm_violation: cur.director.max_norm_deviation().0,
        n_plus_range: range(&cur.n_plus.values),
        n_minus_range: range(&cur.n_minus.values),
        charge_mass_change: (mp1 - mp0, mm1 - mm0),
        divergence_norm,
        m_matrix_plus: audit(b_plus),
        m_matrix_minus: audit(b_minus),
        fixed_point_iters: iters,
        newton_iters,
        fixed_point_increment: last_inc,
    };
    info!(
        "step {} t={:.6} E={:.10e} sweeps={} newton={}",
        cert.step, cert.t, cert.energy_after, iters, newton_iters
    );
    Ok((cur, cert))
}

/// Initial state, every subsequent state, and one certificate per step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DiscreteState>,
    pub certificates: Vec<StepCertificate>,
}

impl Trajectory {
    pub fn last(&self) -> &DiscreteState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        /// Everything computed before the failing step.
        partial: Box<Trajectory>,
        #[source]
        source: StepError,
    },
}

/// Runs `n_steps` steps from `state`, handing every new state and its
/// certificate to `observe`. Returns the final state.
pub fn run_from<F>(
    state: DiscreteState,
    mesh: &TriMesh,
    params: &PhysParams,
    cfg: &FixedPointConfig,
    n_steps: usize,
    mut observe: F,
) -> Result<DiscreteState, (usize, StepError)>
where
    F: FnMut(&DiscreteState, &StepCertificate),
{
    let mut state = state;
    for j in 1..=n_steps {
        let (next, cert) = step(&state, mesh, params, cfg).map_err(|e| (j, e))?;
        observe(&next, &cert);
        state = next;
    }
    Ok(state)
}

/// Initializes and runs `n_steps` steps, keeping every state.
pub fn run(
    mesh: &TriMesh,
    params: &PhysParams,
    cfg: &FixedPointConfig,
    init: &InitialData,
    n_steps: usize,
) -> Result<Trajectory, RunError> {
    let s0 = initialize_state(mesh, params, init)?;
    run_state(s0, mesh, params, cfg, n_steps)
}

/// Runs from a given initial state, keeping every state.
pub fn run_state(
    s0: DiscreteState,
    mesh: &TriMesh,
    params: &PhysParams,
    cfg: &FixedPointConfig,
    n_steps: usize,
) -> Result<Trajectory, RunError> {
    let mut traj = Trajectory {
        states: vec![s0.clone()],
        certificates: Vec::new(),
    };
    let res = run_from(s0, mesh, params, cfg, n_steps, |s, c| {
        traj.states.push(s.clone());
        traj.certificates.push(c.clone());
    });
    match res {
        Ok(_) => Ok(traj),
        Err((step, source)) => Err(RunError::Step {
            step,
            partial: Box::new(traj),
            source,
        }),
    }
}
