//! Discrete state, model parameters, initial data and invariant checks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use log::warn;
use thiserror::Error;

use crate::certificates::EnergyLaw;
use crate::fem::{DirectorBc, DirectorField, ScalarField, ScalarSpace, VelocityField};
use crate::linalg::{MMatrixAudit, SolveError};
use crate::mesh::TriMesh;
use crate::scheme;
use crate::Vec3;

/// Externally applied electric field `E0(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum AppliedField {
    None,
    Constant(Vec3),
    /// `amplitude * cos(omega t)`.
    Oscillating { amplitude: Vec3, omega: f64 },
}

impl AppliedField {
    pub fn at(&self, t: f64) -> Vec3 {
        match self {
            AppliedField::None => Vec3::zeros(),
            AppliedField::Constant(e) => *e,
            AppliedField::Oscillating { amplitude, omega } => amplitude * (omega * t).cos(),
        }
    }

    pub fn is_active(&self) -> bool {
        match self {
            AppliedField::None => false,
            AppliedField::Constant(e) => *e != Vec3::zeros(),
            AppliedField::Oscillating { amplitude, .. } => *amplitude != Vec3::zeros(),
        }
    }

    /// Angular frequency of the oscillating catalogue field.
    pub fn catalogue_omega() -> f64 {
        35.0 * PI
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter {name} = {value} is invalid: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Model constants, stabilization switches and time stepping.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysParams {
    /// Viscosity.
    pub nu: f64,
    /// Elastic constant.
    pub elastic: f64,
    pub eps_perp: f64,
    pub eps_a: f64,
    pub lambda_npp: f64,
    pub mu_phi: f64,
    pub nu_el: f64,
    pub alpha: f64,
    pub beta: f64,
    pub stabilization_on: bool,
    /// Truncation constant; `Some` switches the cutoff on.
    pub truncation: Option<f64>,
    pub applied_field: AppliedField,
    pub director_bc: DirectorBc,
    /// Time step.
    pub k: f64,
    /// Final time.
    pub t_final: f64,
}

impl PhysParams {
    /// Default constants of the experiment section in dimension `dim`.
    pub fn defaults(dim: usize) -> Self {
        let (alpha, beta) = default_stabilization_exponents(dim);
        PhysParams {
            nu: 1.0,
            elastic: 0.01,
            eps_perp: 0.1,
            eps_a: 10.0,
            lambda_npp: 1.0,
            mu_phi: 0.25,
            nu_el: 1.0,
            alpha,
            beta,
            stabilization_on: false,
            truncation: None,
            applied_field: AppliedField::None,
            director_bc: DirectorBc::Neumann,
            k: 1e-3,
            t_final: 0.1,
        }
    }

    /// Number of steps needed to reach `t_final`.
    pub fn n_steps(&self) -> usize {
        let n = self.t_final / self.k;
        let r = n.round();
        if (n - r).abs() < 1e-9 * n.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }

    /// Cutoff parameter `gamma = C2 / 2 h^{d/2}`.
    pub fn truncation_gamma(&self, mesh: &TriMesh) -> Option<f64> {
        self.truncation
            .map(|c2| 0.5 * c2 * mesh.h.powf(mesh.dim as f64 / 2.0))
    }

    /// Checks ranges; returns warnings for soft conditions.
    pub fn validate(&self, dim: usize, h: f64) -> Result<Vec<String>, ParamError> {
        let bad = |name, value, reason| Err(ParamError::Invalid { name, value, reason });
        if !(self.nu > 0.0) {
            return bad("nu", self.nu, "must be positive");
        }
        for (name, v) in [
            ("A", self.elastic),
            ("eps_a", self.eps_a),
            ("lambda_npp", self.lambda_npp),
            ("mu_phi", self.mu_phi),
            ("nu_el", self.nu_el),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(name, v, "must be nonnegative");
            }
        }
        if !(self.eps_perp >= 0.0) {
            return bad("eps_perp", self.eps_perp, "must be nonnegative");
        }
        if self.eps_perp == 0.0 && (self.eps_a != 0.0 || self.lambda_npp != 0.0) {
            return bad("eps_perp", self.eps_perp, "must be positive when charges are coupled");
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return bad("k", self.k, "time step must be positive");
        }
        if !(self.t_final >= 0.0) {
            return bad("T", self.t_final, "final time must be nonnegative");
        }
        if let Some(c2) = self.truncation {
            if !(c2 > 0.0) {
                return bad("truncation", c2, "constant must be positive");
            }
        }
        let d = dim as f64;
        if self.stabilization_on {
            if !(self.alpha > 0.0 && self.alpha < 6.0 / d - 1.0) {
                return bad("alpha", self.alpha, "outside (0, 6/d - 1)");
            }
            let lo = 2.0 - 2.0 * d / 3.0;
            let hi = (4.0 - d) * (4.0 - d) / d;
            if !(self.beta > lo && self.beta < hi) {
                return bad("beta", self.beta, "outside (2 - 2d/3, (4-d)^2/d)");
            }
        }
        let mut warnings = Vec::new();
        if self.eps_perp == 0.0 {
            warnings.push("eps_perp = 0: potential and charge diffusion are switched off".to_string());
        }
        let bound = h.powf(d / 2.0);
        if self.k > bound {
            warnings.push(format!("time step {} exceeds h^(d/2) = {}", self.k, bound));
        }
        for w in &warnings {
            warn!("{w}");
        }
        Ok(warnings)
    }
}

/// Default stabilization exponents `(alpha, beta)`.
pub fn default_stabilization_exponents(dim: usize) -> (f64, f64) {
    if dim == 3 {
        (0.5, 0.25)
    } else {
        (1.0, 1.0)
    }
}

pub type VectorFn = Arc<dyn Fn(&[f64; 3]) -> Vec3 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>;

/// Initial data evaluated at mesh nodes.
#[derive(Clone)]
pub struct InitialData {
    /// Initial velocity; `None` means zero.
    pub velocity: Option<VectorFn>,
    /// Unnormalized director `d_hat`.
    pub director: VectorFn,
    /// Used where `|d_hat(z)| = 0`.
    pub director_fallback: Option<Vec3>,
    pub n_plus: ScalarFn,
    pub n_minus: ScalarFn,
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("velocity", &self.velocity.is_some())
            .field("director_fallback", &self.director_fallback)
            .finish_non_exhaustive()
    }
}

impl InitialData {
    /// Constant director, zero velocity, constant charges.
    pub fn uniform(d: Vec3, n_plus: f64, n_minus: f64) -> Self {
        InitialData {
            velocity: None,
            director: Arc::new(move |_| d),
            director_fallback: None,
            n_plus: Arc::new(move |_| n_plus),
            n_minus: Arc::new(move |_| n_minus),
        }
    }
}

/// One time level of all unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub t: f64,
    pub step_index: usize,
    pub velocity: VelocityField,
    pub pressure: ScalarField,
    pub director: DirectorField,
    /// Nodal variational derivative of the energy with respect to the director.
    pub q: Vec<Vec3>,
    pub n_plus: ScalarField,
    pub n_minus: ScalarField,
    pub phi: ScalarField,
}

impl DiscreteState {
    /// Zero velocity, potential and charges, uniform director.
    pub fn at_rest(mesh: &TriMesh, d: Vec3, bc: DirectorBc) -> Self {
        let n = mesh.n_nodes();
        DiscreteState {
            t: 0.0,
            step_index: 0,
            velocity: VelocityField::zeros(mesh),
            pressure: ScalarField::zeros(n, ScalarSpace::MeanZero),
            director: DirectorField::uniform(n, d, bc),
            q: vec![Vec3::zeros(); n],
            n_plus: ScalarField::zeros(n, ScalarSpace::Free),
            n_minus: ScalarField::zeros(n, ScalarSpace::Free),
            phi: ScalarField::zeros(n, ScalarSpace::MeanZero),
        }
    }

    /// Total charge masses `(sum m n+, sum m n-)`.
    pub fn charge_masses(&self, mesh: &TriMesh) -> (f64, f64) {
        let m = &mesh.lumped_mass;
        (
            self.n_plus.values.iter().zip(m).map(|(a, b)| a * b).sum(),
            self.n_minus.values.iter().zip(m).map(|(a, b)| a * b).sum(),
        )
    }
}

/// Per-step record of the certified quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCertificate {
    pub step: usize,
    pub t: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// Itemized energy law; `None` when certification is off.
    pub energy_law: Option<EnergyLaw>,
    /// `max_z ||d(z)| - 1|`.
    pub max_norm_violation: f64,
    pub n_plus_range: (f64, f64),
    pub n_minus_range: (f64, f64),
    /// Change of `sum m n+` and `sum m n-` over the step.
    pub charge_mass_change: (f64, f64),
    /// `max_q |(div v, q)|`.
    pub divergence_norm: f64,
    pub m_matrix_plus: Option<MMatrixAudit>,
    pub m_matrix_minus: Option<MMatrixAudit>,
    pub fixed_point_iters: usize,
    pub newton_iters: usize,
    pub fixed_point_increment: f64,
}

impl StepCertificate {
    pub fn energy_residual(&self) -> f64 {
        self.energy_law.as_ref().map_or(0.0, |l| l.residual)
    }

    pub fn m_matrix_pass(&self) -> (Option<bool>, Option<bool>) {
        (
            self.m_matrix_plus.as_ref().map(|a| a.pass),
            self.m_matrix_minus.as_ref().map(|a| a.pass),
        )
    }
}

#[derive(Debug, Error)]
pub enum InitError {
    #[error("initial charges are not compatible: net charge {0:.3e}")]
    IncompatibleCharges(f64),
    #[error("initial director vanishes at node {0} and no fallback is configured")]
    UnnormalizableDirector(usize),
    #[error("initial {name} density {value} at node {node} lies outside [0, 1]")]
    ChargeOutOfRange {
        name: &'static str,
        node: usize,
        value: f64,
    },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("initial solve failed: {0}")]
    Solve(#[from] scheme::StepError),
}

impl From<SolveError> for InitError {
    fn from(e: SolveError) -> Self {
        InitError::Solve(scheme::StepError::from(e))
    }
}

const CHARGE_RANGE_SLACK: f64 = 1e-12;

/// Builds the initial state: normalized director, checked charges, one
/// potential solve, one evaluation of `q`, and the projected velocity.
pub fn initialize_state(
    mesh: &TriMesh,
    params: &PhysParams,
    init: &InitialData,
) -> Result<DiscreteState, InitError> {
    params.validate(mesh.dim, mesh.h)?;
    let n = mesh.n_nodes();
    let mut d = Vec::with_capacity(n);
    for (z, x) in mesh.nodes.iter().enumerate() {
        let dh = (init.director)(x);
        let norm = dh.norm();
        if norm > 0.0 && norm.is_finite() {
            d.push(dh / norm);
        } else {
            match init.director_fallback {
                Some(f) => d.push(f.normalize()),
                None => return Err(InitError::UnnormalizableDirector(z)),
            }
        }
    }
    let mut charges = [vec![0.0; n], vec![0.0; n]];
    for (s, name, f) in [(0, "n_plus", &init.n_plus), (1, "n_minus", &init.n_minus)] {
        for (z, x) in mesh.nodes.iter().enumerate() {
            let v = f(x);
            if !(-CHARGE_RANGE_SLACK..=1.0 + CHARGE_RANGE_SLACK).contains(&v) {
                return Err(InitError::ChargeOutOfRange { name, node: z, value: v });
            }
            charges[s][z] = v.clamp(0.0, 1.0);
        }
    }
    let net: f64 = (0..n)
        .map(|z| mesh.lumped_mass[z] * (charges[0][z] - charges[1][z]))
        .sum();
    if net.abs() > 1e-10 * mesh.volume() {
        return Err(InitError::IncompatibleCharges(net));
    }
    let [n_plus, n_minus] = charges;
    let mut state = DiscreteState::at_rest(mesh, Vec3::z(), params.director_bc);
    state.director.values = d;
    state.n_plus.values = n_plus;
    state.n_minus.values = n_minus;
    if let Some(v0) = &init.velocity {
        let (v, _) = scheme::project_divergence_free(mesh, v0.as_ref(), scheme::LINEAR_TOL)?;
        state.velocity = v;
    }
    state.phi.values = scheme::solve_potential(
        mesh,
        params,
        &state.director.values,
        &state.n_plus.values,
        &state.n_minus.values,
        None,
    )?;
    let field = scheme::effective_field(mesh, &state.phi.values, &params.applied_field.at(0.0));
    state.q = scheme::evaluate_q(mesh, params, &state.director.values, &state.director.values, &field);
    Ok(state)
}

/// Which invariants are asserted.
#[derive(Debug, Clone, Copy)]
pub struct InvariantFlags {
    /// Assert `0 <= n <= 1` nodally.
    pub max_principle: bool,
    pub norm_tol: f64,
    pub bound_tol: f64,
    pub charge_tol: f64,
}

impl Default for InvariantFlags {
    fn default() -> Self {
        InvariantFlags {
            max_principle: true,
            norm_tol: 1e-8,
            bound_tol: 1e-10,
            charge_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DirectorNorm { node: usize, deviation: f64 },
    ChargeBelowZero { species: &'static str, node: usize, amount: f64 },
    ChargeAboveOne { species: &'static str, node: usize, amount: f64 },
    NetCharge(f64),
    PotentialMean(f64),
}

/// Worst invariant values and the violations exceeding tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub max_norm_deviation: f64,
    pub worst_norm_node: usize,
    pub n_plus_range: (f64, f64),
    pub n_minus_range: (f64, f64),
    pub net_charge: f64,
    pub phi_mean: f64,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn check_invariants(state: &DiscreteState, mesh: &TriMesh, flags: &InvariantFlags) -> InvariantReport {
    let mut violations = Vec::new();
    let (max_norm_deviation, worst_norm_node) = state.director.max_norm_deviation();
    for (z, d) in state.director.values.iter().enumerate() {
        let dev = (d.norm() - 1.0).abs();
        if dev > flags.norm_tol {
            violations.push(Violation::DirectorNorm { node: z, deviation: dev });
        }
    }
    if flags.max_principle {
        for (species, field) in [("n_plus", &state.n_plus), ("n_minus", &state.n_minus)] {
            for (z, &v) in field.values.iter().enumerate() {
                if v < -flags.bound_tol {
                    violations.push(Violation::ChargeBelowZero { species, node: z, amount: -v });
                }
                if v > 1.0 + flags.bound_tol {
                    violations.push(Violation::ChargeAboveOne { species, node: z, amount: v - 1.0 });
                }
            }
        }
    }
    let (mp, mm) = state.charge_masses(mesh);
    let net_charge = mp - mm;
    if net_charge.abs() > flags.charge_tol * mesh.volume() {
        violations.push(Violation::NetCharge(net_charge));
    }
    let phi_mean = state.phi.lumped_mean(mesh);
    if phi_mean.abs() > flags.charge_tol {
        violations.push(Violation::PotentialMean(phi_mean));
    }
    InvariantReport {
        max_norm_deviation,
        worst_norm_node,
        n_plus_range: range(&state.n_plus.values),
        n_minus_range: range(&state.n_minus.values),
        net_charge,
        phi_mean,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, BoxDomain, Pattern};

    fn mesh() -> TriMesh {
        build_structured_mesh(4, &BoxDomain::centered_unit(2), Pattern::Crisscross).unwrap()
    }

    fn defect_data() -> InitialData {
        InitialData {
            velocity: None,
            director: Arc::new(|x| Vec3::new(4.0 * x[0] * x[0] + 4.0 * x[1] * x[1] - 0.25, 2.0 * x[1], 0.0)),
            director_fallback: Some(Vec3::z()),
            n_plus: Arc::new(|_| 0.0),
            n_minus: Arc::new(|_| 0.0),
        }
    }

    #[test]
    fn defect_director_is_normalized_with_fallback() {
        let m = mesh();
        let mut p = PhysParams::defaults(2);
        p.eps_perp = 0.0;
        p.eps_a = 0.0;
        p.lambda_npp = 0.0;
        let s = initialize_state(&m, &p, &defect_data()).unwrap();
        assert!(s.director.max_norm_deviation().0 < 1e-15);
        // The defects at (+-1/4, 0) are nodes of this mesh.
        let z = m.nodes.iter().position(|x| (x[0] - 0.25).abs() < 1e-14 && x[1].abs() < 1e-14).unwrap();
        assert_eq!(s.director.values[z], Vec3::z());
        let mut data = defect_data();
        data.director_fallback = None;
        assert!(matches!(initialize_state(&m, &p, &data), Err(InitError::UnnormalizableDirector(_))));
    }

    #[test]
    fn charge_compatibility() {
        let m = mesh();
        let p = PhysParams::defaults(2);
        let s = initialize_state(&m, &p, &InitialData::uniform(Vec3::x(), 0.5, 0.5)).unwrap();
        assert_eq!(s.charge_masses(&m).0, s.charge_masses(&m).1);
        assert!(s.phi.values.iter().all(|&v| v == 0.0));
        assert!(matches!(
            initialize_state(&m, &p, &InitialData::uniform(Vec3::x(), 1.0, 0.0)),
            Err(InitError::IncompatibleCharges(_))
        ));
        assert!(matches!(
            initialize_state(&m, &p, &InitialData::uniform(Vec3::x(), 1.5, 1.5)),
            Err(InitError::ChargeOutOfRange { .. })
        ));
    }

    #[test]
    fn invariant_reports() {
        let m = mesh();
        let p = PhysParams::defaults(2);
        let mut s = initialize_state(&m, &p, &InitialData::uniform(Vec3::x(), 0.5, 0.5)).unwrap();
        let flags = InvariantFlags::default();
        assert!(check_invariants(&s, &m, &flags).is_clean());
        s.director.values[3] = Vec3::new(2.0, 0.0, 0.0);
        let r = check_invariants(&s, &m, &flags);
        assert_eq!(r.violations, vec![Violation::DirectorNorm { node: 3, deviation: 1.0 }]);
        s.director.values[3] = Vec3::x();
        s.n_plus.values[5] = 1.1;
        s.n_minus.values[5] = 1.1;
        let r = check_invariants(&s, &m, &flags);
        match &r.violations[0] {
            Violation::ChargeAboveOne { node, amount, .. } => {
                assert_eq!(*node, 5);
                assert!((amount - 0.1).abs() < 1e-12);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = PhysParams::defaults(2);
        assert!(p.validate(2, 0.1).is_ok());
        p.nu = 0.0;
        assert!(p.validate(2, 0.1).is_err());
        let mut p = PhysParams::defaults(3);
        p.stabilization_on = true;
        assert!(p.validate(3, 0.1).is_ok());
        p.beta = 1.0;
        assert!(p.validate(3, 0.1).is_err());
        let mut p = PhysParams::defaults(2);
        p.k = 1.0;
        assert_eq!(p.validate(2, 0.01).unwrap().len(), 1);
        p.k = -1.0;
        assert!(p.validate(2, 0.01).is_err());
    }

    #[test]
    fn applied_field_evaluation() {
        let f = AppliedField::Oscillating {
            amplitude: Vec3::x(),
            omega: AppliedField::catalogue_omega(),
        };
        assert!((f.at(0.0) - Vec3::x()).norm() < 1e-15);
        assert!((f.at(1.0 / 35.0) + Vec3::x()).norm() < 1e-12);
        assert_eq!(AppliedField::None.at(3.0), Vec3::zeros());
        let p = PhysParams {
            k: 1e-3,
            t_final: 0.04,
            ..PhysParams::defaults(2)
        };
        assert_eq!(p.n_steps(), 40);
    }
}
