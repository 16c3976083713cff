//! Banded LU factorization with partial pivoting after reverse
//! Cuthill-McKee reordering.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use super::SolveError;

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern;
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| adj[i].len());
    for &start in &by_degree {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut next: Vec<usize> = adj[i].iter().copied().filter(|&j| !seen[j]).collect();
            next.sort_by_key(|&j| adj[j].len());
            for j in next {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// LU factors of a symmetrically permuted square matrix stored by bands.
///
/// Permuted row `i` keeps columns `i - kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals hold the fill produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SolveError::DimensionMismatch);
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for old in 0..n {
            let i = inv[old];
            for &oj in a.row(old).0 {
                let j = inv[oj];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            perm,
            n,
            kl,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for old in 0..n {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                *lu.at(inv[old], inv[j]) += v;
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.data[o]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset(i, j)]
    }

    fn last_col(&self, i: usize) -> usize {
        (i + self.width - self.kl - 1).min(self.n - 1)
    }

    fn factor(&mut self) -> Result<(), SolveError> {
        let n = self.n;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&a, &b| self.get(a, k).abs().total_cmp(&self.get(b, k).abs()))
                .unwrap();
            if self.get(p, k) == 0.0 {
                return Err(SolveError::ZeroPivot(k));
            }
            self.pivots[k] = p;
            let end = self.last_col(k);
            if p != k {
                for j in k..=end {
                    let (a, b) = (self.offset(k, j), self.offset(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in (k + 1)..=last_row {
                let l = self.get(i, k) / pivot;
                *self.at(i, k) = l;
                if l != 0.0 {
                    for j in (k + 1)..=end {
                        let u = self.get(k, j);
                        *self.at(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        if b.len() != self.n {
            return Err(SolveError::DimensionMismatch);
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let last_row = (k + self.kl).min(n - 1);
            for i in (k + 1)..=last_row {
                x[i] -= self.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = ((k + 1)..=self.last_col(k)).map(|j| self.get(k, j) * x[j]).sum();
            x[k] = (x[k] - s) / self.get(k, k);
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }
}
