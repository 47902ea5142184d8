use nalgebra::{DMatrix, DVector};

use crate::rigidbody::min_singular_value;

/// True iff some joint stays within `tol` of a limit with `|dq_i| < tol`
/// for at least `window` consecutive steps. `q_history[t]` is the
/// configuration at which `dq_history[t]` was applied.
pub fn detect_stagnation(
    q_history: &[DVector<f64>],
    dq_history: &[DVector<f64>],
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    window: usize,
    tol: f64,
) -> bool {
    if window == 0 {
        return false;
    }
    let steps = q_history.len().min(dq_history.len());
    let n = lower.len();
    (0..n).any(|i| {
        let mut run = 0usize;
        for t in 0..steps {
            let q = q_history[t][i];
            let at_limit = q - lower[i] <= tol || upper[i] - q <= tol;
            if at_limit && dq_history[t][i].abs() < tol {
                run += 1;
                if run >= window {
                    return true;
                }
            } else {
                run = 0;
            }
        }
        false
    })
}

/// True iff any barrier value is negative at any executed step.
pub fn detect_collision(h_history: &[Vec<f64>]) -> bool {
    h_history.iter().flatten().any(|&h| h < 0.0)
}

/// True iff the smallest singular value of any Jacobian is below `threshold`.
pub fn detect_singularity(jacobians: &[DMatrix<f64>], threshold: f64) -> bool {
    jacobians.iter().any(|j| min_singular_value(j) < threshold)
}
