//! M-matrix audit: nonpositive off-diagonal entries, positive diagonal and
//! strict row diagonal dominance.

use super::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixAudit {
    pub tol: f64,
    /// Largest off-diagonal entry and its location.
    pub max_offdiag: f64,
    pub max_offdiag_at: Option<(usize, usize)>,
    pub min_diag: f64,
    pub min_diag_at: usize,
    /// `min_i (|a_ii| - sum_{j != i} |a_ij|)` and the row attaining it.
    pub min_dominance_gap: f64,
    pub min_gap_row: usize,
    pub offdiag_nonpositive: bool,
    pub diag_positive: bool,
    pub diagonally_dominant: bool,
    pub pass: bool,
}

pub fn audit_m_matrix(b: &CsrMatrix, tol: f64) -> MMatrixAudit {
    assert_eq!(b.nrows(), b.ncols(), "audit needs a square matrix");
    let mut max_offdiag = f64::NEG_INFINITY;
    let mut max_offdiag_at = None;
    let mut min_diag = f64::INFINITY;
    let mut min_diag_at = 0;
    let mut min_gap = f64::INFINITY;
    let mut min_gap_row = 0;
    for i in 0..b.nrows() {
        let (cols, vals) = b.row(i);
        let mut diag = 0.0;
        let mut off = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                off += v.abs();
                if v > max_offdiag {
                    max_offdiag = v;
                    max_offdiag_at = Some((i, j));
                }
            }
        }
        if diag < min_diag {
            min_diag = diag;
            min_diag_at = i;
        }
        let gap = diag.abs() - off;
        if gap < min_gap {
            min_gap = gap;
            min_gap_row = i;
        }
    }
    if max_offdiag_at.is_none() {
        max_offdiag = 0.0;
    }
    let offdiag_nonpositive = max_offdiag <= tol;
    let diag_positive = min_diag > 0.0;
    let diagonally_dominant = min_gap > -tol;
    MMatrixAudit {
        tol,
        max_offdiag,
        max_offdiag_at,
        min_diag,
        min_diag_at,
        min_dominance_gap: min_gap,
        min_gap_row,
        offdiag_nonpositive,
        diag_positive,
        diagonally_dominant,
        pass: offdiag_nonpositive && diag_positive && diagonally_dominant,
    }
}
