//! Preconditioned conjugate gradients and BiCGStab.
//!
//! Both solvers stop when `||r|| <= tol * max(||b||, ||A||_est ||x||)`, the
//! relative residual or the normwise backward error, whichever is reached
//! first. `||A||_est` is the largest ratio `||A p|| / ||p||` seen during the
//! iteration. Convergence of the recursive residual is always confirmed on
//! the true residual `b - A x`.

use log::debug;

use super::banded::BandedLu;
use super::ilu::{Ilu0, Jacobi, Preconditioner};
use super::sparse::CsrMatrix;
use super::SolveError;

/// Square linear operator, possibly matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), SolveError>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), SolveError> {
        self.mul_vec_into(x, y);
        Ok(())
    }
}

/// Kernel handling for singular symmetric systems.
#[derive(Debug, Clone, Copy)]
pub enum Nullspace<'a> {
    None,
    /// Constants span the kernel; the solution is normalized to zero mean
    /// with respect to the given nodal weights.
    Constants(&'a [f64]),
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl KrylovOptions {
    /// Tolerance `tol` with the iteration cap `10 * n`.
    pub fn for_size(tol: f64, n: usize) -> Self {
        KrylovOptions {
            tol,
            max_iter: 10 * n.max(10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Subtracts the weighted mean.
pub fn project_mean_zero(x: &mut [f64], weights: &[f64]) {
    let wsum: f64 = weights.iter().sum();
    let mean = dot(x, weights) / wsum;
    x.iter_mut().for_each(|v| *v -= mean);
}

struct Monitor {
    tol: f64,
    bnorm: f64,
    op_norm: f64,
}

impl Monitor {
    fn observe(&mut self, input: &[f64], output: &[f64]) {
        let ni = norm(input);
        if ni > 0.0 {
            self.op_norm = self.op_norm.max(norm(output) / ni);
        }
    }

    fn done(&self, rnorm: f64, x: &[f64]) -> bool {
        rnorm <= self.tol * self.bnorm.max(self.op_norm * norm(x))
    }
}

fn true_residual(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &[f64],
    r: &mut [f64],
    mon: &mut Monitor,
) -> Result<f64, SolveError> {
    op.apply(x, r)?;
    mon.observe(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(norm(r))
}

const MAX_RESTARTS: usize = 25;

/// BiCGStab iteration cap before the direct fallback.
const NONSYMMETRIC_MAX_ITER: usize = 300;

/// Preconditioned CG for symmetric positive (semi)definite operators.
pub fn cg(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    opts: &KrylovOptions,
    pc: &dyn Preconditioner,
    nullspace: Nullspace<'_>,
) -> Result<SolveStats, SolveError> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(SolveError::DimensionMismatch);
    }
    let mut rhs = b.to_vec();
    if let Nullspace::Constants(_) = nullspace {
        let mean = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
    }
    let project = |x: &mut [f64]| {
        if let Nullspace::Constants(w) = nullspace {
            project_mean_zero(x, w);
        }
    };
    let mut mon = Monitor {
        tol: opts.tol,
        bnorm: norm(&rhs),
        op_norm: 0.0,
    };
    if mon.bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    project(x);
    let mut r = vec![0.0; n];
    let mut rnorm = true_residual(op, &rhs, x, &mut r, &mut mon)?;
    if mon.done(rnorm, x) {
        return Ok(SolveStats {
            iterations: 0,
            residual: rnorm / mon.bnorm,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut restarts = 0;
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap)?;
        mon.observe(&p, &ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            rnorm = true_residual(op, &rhs, x, &mut r, &mut mon)?;
            if mon.done(rnorm, x) {
                return Ok(SolveStats {
                    iterations: it,
                    residual: rnorm / mon.bnorm,
                });
            }
            return Err(SolveError::Breakdown {
                solver: "cg",
                iteration: it,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(x);
        rnorm = norm(&r);
        if mon.done(rnorm, x) {
            rnorm = true_residual(op, &rhs, x, &mut r, &mut mon)?;
            if mon.done(rnorm, x) {
                return Ok(SolveStats {
                    iterations: it,
                    residual: rnorm / mon.bnorm,
                });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                break;
            }
            pc.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = true_residual(op, &rhs, x, &mut r, &mut mon)?;
    Err(SolveError::NoConvergence {
        solver: "cg",
        iterations: opts.max_iter,
        residual: rnorm / mon.bnorm,
    })
}

/// Right-preconditioned BiCGStab for general nonsingular operators.
///
/// With `Nullspace::Constants` the iterate is normalized to weighted mean
/// zero after every update; this requires constants in the kernel of the
/// operator and a right-hand side in its range.
pub fn bicgstab(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    opts: &KrylovOptions,
    pc: &dyn Preconditioner,
    nullspace: Nullspace<'_>,
) -> Result<SolveStats, SolveError> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(SolveError::DimensionMismatch);
    }
    let project = |x: &mut [f64]| {
        if let Nullspace::Constants(w) = nullspace {
            project_mean_zero(x, w);
        }
    };
    let mut mon = Monitor {
        tol: opts.tol,
        bnorm: norm(b),
        op_norm: 0.0,
    };
    if mon.bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    project(x);
    let mut r = vec![0.0; n];
    let mut rnorm = true_residual(op, b, x, &mut r, &mut mon)?;
    if mon.done(rnorm, x) {
        return Ok(SolveStats {
            iterations: 0,
            residual: rnorm / mon.bnorm,
        });
    }
    let mut rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut restarts = 0;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() <= 1e-30 * norm(&rhat) * rnorm || !rho_new.is_finite() {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                break;
            }
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pc.apply(&p, &mut phat);
        op.apply(&phat, &mut v)?;
        mon.observe(&phat, &v);
        let rv = dot(&rhat, &v);
        if rv == 0.0 || !rv.is_finite() {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                break;
            }
            rnorm = true_residual(op, b, x, &mut r, &mut mon)?;
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm(&s);
        if mon.done(snorm, x) {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            project(x);
            rnorm = true_residual(op, b, x, &mut r, &mut mon)?;
            if mon.done(rnorm, x) {
                return Ok(SolveStats {
                    iterations: it,
                    residual: rnorm / mon.bnorm,
                });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                break;
            }
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        pc.apply(&s, &mut shat);
        op.apply(&shat, &mut t)?;
        mon.observe(&shat, &t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        project(x);
        rnorm = norm(&r);
        if mon.done(rnorm, x) || omega == 0.0 {
            rnorm = true_residual(op, b, x, &mut r, &mut mon)?;
            if mon.done(rnorm, x) {
                return Ok(SolveStats {
                    iterations: it,
                    residual: rnorm / mon.bnorm,
                });
            }
            restarts += 1;
            if restarts > MAX_RESTARTS {
                break;
            }
            rhat.copy_from_slice(&r);
            p.iter_mut().for_each(|x| *x = 0.0);
            v.iter_mut().for_each(|x| *x = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
        }
    }
    let rnorm = true_residual(op, b, x, &mut r, &mut mon)?;
    Err(SolveError::NoConvergence {
        solver: "bicgstab",
        iterations: it,
        residual: rnorm / mon.bnorm,
    })
}

/// Jacobi-preconditioned CG from a zero initial guess.
pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    nullspace: Nullspace<'_>,
) -> Result<Vec<f64>, SolveError> {
    let mut x = vec![0.0; b.len()];
    solve_spd_from(a, b, &mut x, tol, nullspace)?;
    Ok(x)
}

/// Jacobi-preconditioned CG starting from `x`.
pub fn solve_spd_from(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    nullspace: Nullspace<'_>,
) -> Result<SolveStats, SolveError> {
    let opts = KrylovOptions::for_size(tol, a.nrows());
    cg(a, b, x, &opts, &Jacobi::new(a), nullspace)
}

/// ILU(0)-preconditioned BiCGStab from a zero initial guess.
pub fn solve_nonsymmetric(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
    let mut x = vec![0.0; b.len()];
    solve_nonsymmetric_from(a, b, &mut x, tol)?;
    Ok(x)
}

/// ILU(0)-preconditioned BiCGStab starting from `x`; when it stagnates or
/// the ILU(0) factorization breaks down the system is solved by banded LU.
pub fn solve_nonsymmetric_from(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
) -> Result<SolveStats, SolveError> {
    if b.iter().all(|&v| v == 0.0) {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let krylov = Ilu0::new(a).and_then(|ilu| {
        let opts = KrylovOptions {
            tol,
            max_iter: NONSYMMETRIC_MAX_ITER.min(10 * a.nrows().max(10)),
        };
        bicgstab(a, b, x, &opts, &ilu, Nullspace::None)
    });
    match krylov {
        Err(SolveError::NoConvergence { .. } | SolveError::Breakdown { .. } | SolveError::ZeroPivot(_)) => {
            debug!("bicgstab failed on a system of size {}; using banded LU", a.nrows());
            let sol = BandedLu::new(a)?.solve(b)?;
            x.copy_from_slice(&sol);
            let mut r = vec![0.0; b.len()];
            a.mul_vec_into(&sol, &mut r);
            let res = r.iter().zip(b).map(|(ax, bi)| (bi - ax).powi(2)).sum::<f64>().sqrt();
            Ok(SolveStats {
                iterations: 0,
                residual: res / norm(b),
            })
        }
        other => other,
    }
}
