//! Lyapunov progress certificate on the final-goal task error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateParams {
    /// When false every feasible candidate is accepted.
    pub enabled: bool,
    /// Required predicted decrease of `V`.
    pub eta: f64,
    /// Minimum update norm while `V > eps_v`.
    pub eps_q: f64,
    pub eps_v: f64,
    /// Constraint violation above which a candidate counts as infeasible.
    pub feas_tol: f64,
}

impl Default for CertificateParams {
    fn default() -> Self {
        Self {
            enabled: true,
            eta: 0.0005,
            eps_q: 1e-4,
            eps_v: 1e-6,
            feas_tol: 1e-4,
        }
    }
}

/// `½ eᵀ W e`.
pub fn lyapunov_value(e: &DVector<f64>, w: &DMatrix<f64>) -> f64 {
    0.5 * e.dot(&(w * e))
}

/// `½ (e − J dq)ᵀ W (e − J dq)`.
pub fn predicted_lyapunov(
    e: &DVector<f64>,
    j: &DMatrix<f64>,
    dq: &DVector<f64>,
    w: &DMatrix<f64>,
) -> f64 {
    lyapunov_value(&(e - j * dq), w)
}

/// Diagonal-weight variants used on the hot path.
pub(crate) fn lyapunov_diag(e: &DVector<f64>, w: &DVector<f64>) -> f64 {
    0.5 * e
        .iter()
        .zip(w.iter())
        .map(|(v, wi)| wi * v * v)
        .sum::<f64>()
}

/// Acceptance test for one candidate.
pub fn certify(
    feasible: bool,
    dq_norm: f64,
    v: f64,
    v_pred: f64,
    params: &CertificateParams,
) -> bool {
    if !feasible {
        return false;
    }
    if !params.enabled {
        return true;
    }
    v_pred <= v - params.eta && (v <= params.eps_v || dq_norm >= params.eps_q)
}

/// Index of the largest accepted candidate (candidates sorted by α).
pub fn select_candidate(accepted: &[bool]) -> Option<usize> {
    accepted.iter().rposition(|&a| a)
}
