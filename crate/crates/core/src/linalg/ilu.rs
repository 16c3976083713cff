//! Incomplete LU factorization with zero fill-in.

use super::sparse::CsrMatrix;
use super::SolveError;

/// Linear preconditioner `z = M^{-1} r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling; zero diagonal entries are treated as one.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Jacobi { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// ILU(0): `L` (unit lower) and `U` stored in the sparsity pattern of `A`.
pub struct Ilu0 {
    factors: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.nrows();
        let mut f = a.clone();
        let row_ptr = f.row_ptr().to_vec();
        let col_idx = f.col_idx().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(SolveError::ZeroPivot(i));
            }
        }
        let mut pos = vec![usize::MAX; n];
        let vals = f.values_mut();
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = k;
            }
            for k in row_ptr[i]..diag_pos[i] {
                let j = col_idx[k];
                let pivot = vals[diag_pos[j]];
                let lij = vals[k] / pivot;
                vals[k] = lij;
                for kk in (diag_pos[j] + 1)..row_ptr[j + 1] {
                    let p = pos[col_idx[kk]];
                    if p != usize::MAX {
                        vals[p] -= lij * vals[kk];
                    }
                }
            }
            if vals[diag_pos[i]] == 0.0 || !vals[diag_pos[i]].is_finite() {
                return Err(SolveError::ZeroPivot(i));
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 {
            factors: f,
            diag_pos,
        })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let rp = self.factors.row_ptr();
        let ci = self.factors.col_idx();
        let v = self.factors.values();
        for i in 0..n {
            let mut s = r[i];
            for k in rp[i]..self.diag_pos[i] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (self.diag_pos[i] + 1)..rp[i + 1] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s / v[self.diag_pos[i]];
        }
    }
}
