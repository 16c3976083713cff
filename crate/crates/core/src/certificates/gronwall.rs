//! Discrete Gronwall accumulation.
//!
//! For sequences with `d_t y^j + f^j <= g1^j y^j + g2^j y^{j-1}` the weights
//! `omega^j = (1 + k g2^j) / (1 - k g1^j)` give, for every nonnegative test
//! sequence `phi`,
//! `-k sum_{j=0}^{J} d_t phi^{j+1} y^j P^j + k sum_{j=1}^{J} phi^j f^j / (1 - k g1^j) P^j
//!  <= phi^0 y^0 - phi^{J+1} y^J P^J` with `P^j = prod_{l<=j} 1/omega^l`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GronwallError {
    #[error("k g1 = {value} >= 1 at index {index}")]
    StepTooLarge { index: usize, value: f64 },
    #[error("sequence lengths do not match: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    /// `omega^j`, with `omega^0 = 1`.
    pub omega: Vec<f64>,
    /// `prod_{l=1}^j 1/omega^l`, with the empty product at `j = 0`.
    pub products: Vec<f64>,
    /// First index violating the hypothesis.
    pub hypothesis_violation: Option<usize>,
    pub hypothesis_holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub conclusion_holds: bool,
    /// Hypothesis and conclusion both hold.
    pub verified: bool,
}

/// Checks the hypothesis and conclusion for the given sequences.
///
/// `y`, `f`, `g1`, `g2` are indexed `0..=J`; `phi` is indexed `0..=J+1`.
pub fn gronwall_accumulate(
    y: &[f64],
    f: &[f64],
    g1: &[f64],
    g2: &[f64],
    phi: &[f64],
    k: f64,
) -> Result<GronwallReport, GronwallError> {
    let n = y.len();
    for s in [f, g1, g2] {
        if s.len() != n {
            return Err(GronwallError::LengthMismatch { expected: n, got: s.len() });
        }
    }
    if phi.len() != n + 1 {
        return Err(GronwallError::LengthMismatch { expected: n + 1, got: phi.len() });
    }
    let mut omega = vec![1.0; n];
    let mut products = vec![1.0; n];
    for j in 1..n {
        let kg = k * g1[j];
        if kg >= 1.0 {
            return Err(GronwallError::StepTooLarge { index: j, value: kg });
        }
        omega[j] = (1.0 + k * g2[j]) / (1.0 - kg);
        products[j] = products[j - 1] / omega[j];
    }
    let scale = |a: f64, b: f64| 1e-12 * (1.0 + a.abs() + b.abs());
    let mut hypothesis_violation = None;
    for j in 1..n {
        let lhs = (y[j] - y[j - 1]) / k + f[j];
        let rhs = g1[j] * y[j] + g2[j] * y[j - 1];
        if lhs > rhs + scale(lhs, rhs) {
            hypothesis_violation = Some(j);
            break;
        }
    }
    let mut lhs = 0.0;
    for j in 0..n {
        lhs -= (phi[j + 1] - phi[j]) * y[j] * products[j];
    }
    for j in 1..n {
        lhs += k * phi[j] * f[j] / (1.0 - k * g1[j]) * products[j];
    }
    let rhs = phi[0] * y[0] - phi[n] * y[n - 1] * products[n - 1];
    let conclusion_holds = lhs <= rhs + scale(lhs, rhs);
    let hypothesis_holds = hypothesis_violation.is_none();
    Ok(GronwallReport {
        omega,
        products,
        hypothesis_violation,
        hypothesis_holds,
        lhs,
        rhs,
        conclusion_holds,
        verified: hypothesis_holds && conclusion_holds,
    })
}
