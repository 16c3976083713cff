//! Schur-complement solver for saddle-point systems
//!
//! ```text
//! [ A     G ] [u]   [f]
//! [ D    -C ] [p] = [g]
//! ```
//!
//! The pressure is obtained from `(D A^{-1} G + C) p = D A^{-1} f - g` by an
//! outer Krylov method whose operator applications each perform one inner
//! solve with `A`. CG is used when the system is symmetric (`A = A^T`,
//! `D = G^T`, `C = C^T`), BiCGStab otherwise.

use std::cell::Cell;

use super::ilu::{IdentityPreconditioner, Ilu0, Jacobi};
use super::krylov::{bicgstab, cg, KrylovOptions, LinearOperator, Nullspace, SolveStats};
use super::sparse::CsrMatrix;
use super::SolveError;

/// Blocks of a saddle-point system; see the module docs for the layout.
pub struct SaddleSystem<'a> {
    pub a: &'a CsrMatrix,
    pub grad: &'a CsrMatrix,
    pub div: &'a CsrMatrix,
    pub stab: Option<&'a CsrMatrix>,
    /// Weights of the pressure mean-zero normalization; `None` when the
    /// Schur complement is nonsingular.
    pub pressure_weights: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub outer: SolveStats,
    pub inner_iterations: usize,
    /// `max_i |(D u - C p - g)_i|`.
    pub constraint_residual: f64,
}

enum Inner {
    Spd(Jacobi),
    General(Ilu0),
}

struct InnerSolver<'a> {
    a: &'a CsrMatrix,
    pc: Inner,
    tol: f64,
    iterations: Cell<usize>,
}

impl InnerSolver<'_> {
    fn solve(&self, rhs: &[f64], x: &mut [f64]) -> Result<(), SolveError> {
        x.iter_mut().for_each(|v| *v = 0.0);
        let opts = KrylovOptions::for_size(self.tol, self.a.nrows());
        let st = match &self.pc {
            Inner::Spd(j) => cg(self.a, rhs, x, &opts, j, Nullspace::None)?,
            Inner::General(ilu) => bicgstab(self.a, rhs, x, &opts, ilu, Nullspace::None)?,
        };
        self.iterations.set(self.iterations.get() + st.iterations);
        Ok(())
    }
}

struct Schur<'a, 'b> {
    sys: &'b SaddleSystem<'a>,
    inner: &'b InnerSolver<'a>,
}

impl LinearOperator for Schur<'_, '_> {
    fn dim(&self) -> usize {
        self.sys.div.nrows()
    }

    fn apply(&self, p: &[f64], y: &mut [f64]) -> Result<(), SolveError> {
        let t = self.sys.grad.mul_vec(p);
        let mut w = vec![0.0; t.len()];
        self.inner.solve(&t, &mut w)?;
        self.sys.div.mul_vec_into(&w, y);
        if let Some(c) = self.sys.stab {
            let cp = c.mul_vec(p);
            y.iter_mut().zip(cp).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }
}

impl SaddleSystem<'_> {
    fn is_symmetric(&self) -> bool {
        let tol = 1e-13;
        self.a.is_symmetric(tol)
            && self.stab.is_none_or(|c| c.is_symmetric(tol))
            && {
                let gt = self.grad.transpose();
                let diff = gt.linear_combination(1.0, self.div, -1.0);
                diff.max_abs() <= tol * self.div.max_abs().max(f64::MIN_POSITIVE)
            }
    }

    /// Solves the system; `guess` warm-starts the pressure iteration.
    pub fn solve(
        &self,
        f: &[f64],
        g: &[f64],
        tol: f64,
        guess: Option<&[f64]>,
    ) -> Result<SaddleSolution, SolveError> {
        let nu = self.a.nrows();
        let np = self.div.nrows();
        if f.len() != nu || g.len() != np || self.grad.nrows() != nu || self.grad.ncols() != np {
            return Err(SolveError::DimensionMismatch);
        }
        if f.iter().chain(g).all(|&v| v == 0.0) {
            return Ok(SaddleSolution {
                u: vec![0.0; nu],
                p: vec![0.0; np],
                outer: SolveStats {
                    iterations: 0,
                    residual: 0.0,
                },
                inner_iterations: 0,
                constraint_residual: 0.0,
            });
        }
        let symmetric = self.is_symmetric();
        let pc = if symmetric {
            Inner::Spd(Jacobi::new(self.a))
        } else {
            Inner::General(Ilu0::new(self.a)?)
        };
        let inner = InnerSolver {
            a: self.a,
            pc,
            tol,
            iterations: Cell::new(0),
        };
        let mut af = vec![0.0; nu];
        inner.solve(f, &mut af)?;
        let mut rhs = self.div.mul_vec(&af);
        rhs.iter_mut().zip(g).for_each(|(r, gi)| *r -= gi);
        let schur = Schur { sys: self, inner: &inner };
        let mut p = match guess {
            Some(p0) => p0.to_vec(),
            None => vec![0.0; np],
        };
        let ns = match self.pressure_weights {
            Some(w) => Nullspace::Constants(w),
            None => Nullspace::None,
        };
        let opts = KrylovOptions::for_size(tol, np);
        let outer = if symmetric {
            cg(&schur, &rhs, &mut p, &opts, &IdentityPreconditioner, ns)?
        } else {
            bicgstab(&schur, &rhs, &mut p, &opts, &IdentityPreconditioner, ns)?
        };
        let mut rhs_u = self.grad.mul_vec(&p);
        rhs_u.iter_mut().zip(f).for_each(|(r, fi)| *r = fi - *r);
        let mut u = vec![0.0; nu];
        inner.solve(&rhs_u, &mut u)?;
        let mut c = self.div.mul_vec(&u);
        if let Some(cm) = self.stab {
            let cp = cm.mul_vec(&p);
            c.iter_mut().zip(cp).for_each(|(a, b)| *a -= b);
        }
        let constraint_residual = c.iter().zip(g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(SaddleSolution {
            u,
            p,
            outer,
            inner_iterations: inner.iterations.get(),
            constraint_residual,
        })
    }
}

/// Solves `[A B^T; B 0][u; p] = [f; 0]`.
///
/// If the columns of `B` sum to zero the pressure is determined up to
/// constants and is returned with zero mean.
pub fn solve_saddle(
    a: &CsrMatrix,
    b: &CsrMatrix,
    f: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let bt = b.transpose();
    let np = b.nrows();
    let colsum = b.col_sums();
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    let singular = colsum.iter().all(|s| s.abs() <= 1e-13 * scale * np as f64);
    let w = vec![1.0; np];
    let sys = SaddleSystem {
        a,
        grad: &bt,
        div: b,
        stab: None,
        pressure_weights: singular.then_some(&w[..]),
    };
    let sol = sys.solve(f, &vec![0.0; np], tol, None)?;
    Ok((sol.u, sol.p))
}
