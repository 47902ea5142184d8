//! Strictly convex QPs of the form
//!
//! ```text
//! minimize    ½ zᵀ H z + gᵀ z
//! subject to  lower ≤ A z ≤ upper
//! ```
//!
//! solved with a dense two-block ADMM iteration (OSQP form with unscaled
//! dual variables), individually or in batches sharing `H` and `A`.
//! [`reference_solve`] is an exact active-set enumeration used as a test
//! oracle for small problems.

mod admm;
mod reference;

pub use admm::{solve, solve_batch, AdmmSolver};
pub use reference::reference_solve;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        a: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let p = Self {
            h,
            g,
            a,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    /// Problem without constraint rows.
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        let m = g.len();
        Self::new(
            h,
            g,
            DMatrix::zeros(0, m),
            DVector::zeros(0),
            DVector::zeros(0),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.g.len()
    }

    pub fn num_rows(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        validate_parts(&self.h, &self.g, &self.a, &self.lower, &self.upper)
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// Largest bound violation of `A z` (zero when feasible).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        row_violation(&self.a, &self.lower, &self.upper, z)
    }
}

pub(crate) fn row_violation(
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    z: &DVector<f64>,
) -> f64 {
    let az = a * z;
    az.iter()
        .zip(lower.iter().zip(upper.iter()))
        .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
        .fold(0.0, f64::max)
}

pub(crate) fn validate_parts(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<()> {
    let m = g.len();
    let k = lower.len();
    if h.nrows() != m || h.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: h.nrows().max(h.ncols()),
        });
    }
    if a.ncols() != m && !(k == 0 && a.nrows() == 0) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: a.ncols(),
        });
    }
    if a.nrows() != k || upper.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: a.nrows().max(upper.len()),
        });
    }
    let scale = h.amax().max(1.0);
    for i in 0..m {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidProblem("H is not symmetric".into()));
            }
        }
    }
    for i in 0..k {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i] {
            return Err(Error::InvalidProblem(format!(
                "row {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
    }
    if h.iter()
        .chain(g.iter())
        .chain(a.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidProblem("non-finite data".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Solved,
    MaxIterReached,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Decision vector.
    pub z: DVector<f64>,
    /// ADMM slack (projected `A z`), kept for warm starts.
    pub slack: DVector<f64>,
    /// Constraint multipliers, `H z + g + Aᵀ y = 0` at optimality.
    pub dual: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl QpSolution {
    pub fn is_usable(&self) -> bool {
        self.status != QpStatus::Infeasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSettings {
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub warm_start: bool,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Rebalance `rho` from the residual ratio (refactorises when it moves).
    pub adaptive_rho: bool,
    /// Refine the final iterate by solving the KKT system of the guessed
    /// active set.
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self::batch()
    }
}

impl QpSettings {
    /// Fixed-iteration GPU-style batch regime: 50 iterations, σ = 1e-6, ρ = 50.
    pub fn batch() -> Self {
        Self {
            max_iter: 50,
            rho: 50.0,
            sigma: 1e-6,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            warm_start: true,
            relaxation: 1.6,
            adaptive_rho: false,
            polish: false,
        }
    }

    /// Residual-tolerance CPU regime: 500 iterations, eps 1e-5, warm start.
    pub fn reference() -> Self {
        Self {
            max_iter: 500,
            rho: 0.1,
            sigma: 1e-6,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            warm_start: true,
            relaxation: 1.6,
            adaptive_rho: true,
            polish: false,
        }
    }

    /// Tight tolerances with polishing; used by the global IK baseline and
    /// oracle comparisons.
    pub fn precise() -> Self {
        Self {
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            warm_start: true,
            relaxation: 1.6,
            adaptive_rho: true,
            polish: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.rho > 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::Config(
                "rho must be positive and sigma non-negative".into(),
            ));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Config("relaxation must lie in (0, 2)".into()));
        }
        Ok(())
    }
}
