//! Momentum sub-solve and the initial divergence-free projection.

use super::StepError;
use crate::fem::{
    bubble_value, electric_force, elastic_force, interp_vec, CondensedMini, MiniSystem,
    MomentumCoefficients, VelocityField,
};
use crate::linalg::SaddleSystem;
use crate::mesh::TriMesh;
use crate::quadrature::SimplexRule;
use crate::state::PhysParams;
use crate::{Mat3, Vec3};

/// Momentum operator of one time step, fixed across outer iterations.
///
/// The left side is `(1/k) M + (nu + h^alpha/k) L + c(v_prev; ., .)`, the
/// right side collects `(1/k) M v_prev + (h^alpha/k) L v_prev`.
pub struct MomentumStep {
    lhs: MiniSystem,
    cond: CondensedMini,
    base1: Vec<f64>,
    baseb: Vec<f64>,
}

impl MomentumStep {
    pub fn new(mesh: &TriMesh, params: &PhysParams, v_prev: &VelocityField) -> Self {
        let stab = if params.stabilization_on {
            mesh.h.powf(params.alpha) / params.k
        } else {
            0.0
        };
        let lhs = MiniSystem::assemble(
            mesh,
            &MomentumCoefficients {
                mass: 1.0 / params.k,
                viscosity: params.nu + stab,
                convection: Some(v_prev),
            },
        );
        let rhs = MiniSystem::assemble(
            mesh,
            &MomentumCoefficients {
                mass: 1.0 / params.k,
                viscosity: stab,
                convection: None,
            },
        );
        let (base1, baseb) = rhs.apply(v_prev);
        let cond = lhs.condensed();
        MomentumStep { lhs, cond, base1, baseb }
    }

    /// Solves for the new velocity and pressure.
    ///
    /// `field` is the effective electric field per element, `grad_prev` the
    /// projected director gradient and `w = d_mid x (d_mid x q)` nodally.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &self,
        mesh: &TriMesh,
        params: &PhysParams,
        n_plus: &[f64],
        n_minus: &[f64],
        field: &[Vec3],
        gamma: Option<f64>,
        grad_prev: &[Mat3],
        w: &[Vec3],
        p_guess: Option<&[f64]>,
        tol: f64,
    ) -> Result<(VelocityField, Vec<f64>), StepError> {
        let layout = &self.lhs.layout;
        let mut f1 = self.base1.clone();
        let mut fb = self.baseb.clone();
        if params.lambda_npp != 0.0 {
            let (e1, eb) = electric_force(mesh, layout, n_plus, n_minus, field, gamma);
            f1.iter_mut().zip(e1).for_each(|(a, b)| *a -= params.lambda_npp * b);
            fb.iter_mut().zip(eb).for_each(|(a, b)| *a -= params.lambda_npp * b);
        }
        if params.nu_el != 0.0 {
            let el = elastic_force(mesh, layout, grad_prev, w);
            f1.iter_mut().zip(el).for_each(|(a, b)| *a -= params.nu_el * b);
        }
        let (fhat, g) = self.lhs.condense_rhs(&f1, &fb);
        let sys = SaddleSystem {
            a: &self.cond.a,
            grad: &self.cond.grad,
            div: &self.cond.div,
            stab: Some(&self.cond.stab),
            pressure_weights: Some(&mesh.lumped_mass),
        };
        let sol = sys
            .solve(&fhat, &g, tol, p_guess)
            .map_err(|e| StepError::solve("velocity", e))?;
        let ub = self.lhs.recover_bubbles(&sol.u, &sol.p, &fb);
        Ok((layout.scatter(&sol.u, &ub), sol.p))
    }
}

/// L2 projection of `v0` onto discretely divergence-free MINI fields
/// vanishing on the boundary.
pub fn project_divergence_free(
    mesh: &TriMesh,
    v0: &dyn Fn(&[f64; 3]) -> Vec3,
    tol: f64,
) -> Result<(VelocityField, Vec<f64>), StepError> {
    let sys = MiniSystem::assemble(
        mesh,
        &MomentumCoefficients {
            mass: 1.0,
            viscosity: 0.0,
            convection: None,
        },
    );
    let layout = &sys.layout;
    let dim = mesh.dim;
    let npe = mesh.npe();
    let nf = layout.n_free();
    let ne = layout.n_elem;
    let rule = SimplexRule::new(dim, 2 * dim + 2);
    let mut f1 = vec![0.0; layout.n_p1()];
    let mut fb = vec![0.0; layout.n_bubble()];
    for e in 0..ne {
        let el = mesh.element(e);
        let vol = mesh.elem_volume[e];
        let corners: Vec<Vec3> = el.iter().map(|&i| Vec3::from(mesh.nodes[i])).collect();
        for (lam, wq) in rule.points.iter().zip(&rule.weights) {
            let x = interp_vec(&(0..npe).collect::<Vec<_>>(), lam, &corners);
            let v = v0(&[x[0], x[1], x[2]]);
            let w = wq * vol;
            let b = bubble_value(dim, lam);
            for c in 0..dim {
                for a in 0..npe {
                    let f = layout.free_index[el[a]];
                    if f != usize::MAX {
                        f1[c * nf + f] += w * v[c] * lam[a];
                    }
                }
                fb[c * ne + e] += w * v[c] * b;
            }
        }
    }
    let cond = sys.condensed();
    let (fhat, g) = sys.condense_rhs(&f1, &fb);
    let saddle = SaddleSystem {
        a: &cond.a,
        grad: &cond.grad,
        div: &cond.div,
        stab: Some(&cond.stab),
        pressure_weights: Some(&mesh.lumped_mass),
    };
    let sol = saddle
        .solve(&fhat, &g, tol, None)
        .map_err(|e| StepError::solve("projection", e))?;
    let ub = sys.recover_bubbles(&sol.u, &sol.p, &fb);
    Ok((layout.scatter(&sol.u, &ub), sol.p))
}
