use nalgebra::{DMatrix, DVector};

use crate::qpsolve::QpProblem;
use crate::rigidbody::RobotModel;
use crate::safety::CbfRow;
use crate::{Error, Result};

/// Data shared by every continuation candidate of one segment at one
/// configuration. Only the linear term depends on the displacement.
#[derive(Debug, Clone)]
pub struct SegmentQp {
    pub joints: Vec<usize>,
    /// Task Jacobian restricted to the segment columns.
    pub jac: DMatrix<f64>,
    /// `J_sᵀ W_x`.
    pub jt_w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub num_cbf: usize,
}

impl SegmentQp {
    /// `jac` holds the task rows over all model joints; `cbf_rows` carry
    /// full-length gradients; `step_bounds` is the per-joint `|Δq|` cap over
    /// all model joints (no increment rows when `None`).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &RobotModel,
        q: &DVector<f64>,
        joints: &[usize],
        jac: &DMatrix<f64>,
        w_x: &DVector<f64>,
        w_q: f64,
        cbf_rows: &[CbfRow],
        step_bounds: Option<&DVector<f64>>,
    ) -> Result<Self> {
        let dof = model.dof();
        model.check_dim(q)?;
        if jac.ncols() != dof {
            return Err(Error::DimensionMismatch {
                expected: dof,
                found: jac.ncols(),
            });
        }
        if w_x.len() != jac.nrows() {
            return Err(Error::DimensionMismatch {
                expected: jac.nrows(),
                found: w_x.len(),
            });
        }
        if let Some(b) = step_bounds {
            if b.len() != dof {
                return Err(Error::DimensionMismatch {
                    expected: dof,
                    found: b.len(),
                });
            }
        }
        if let Some(r) = cbf_rows.iter().find(|r| r.gradient.len() != dof) {
            return Err(Error::DimensionMismatch {
                expected: dof,
                found: r.gradient.len(),
            });
        }
        if let Some(&j) = joints.iter().find(|&&j| j >= dof) {
            return Err(Error::Embedding(format!("joint index {j} out of range")));
        }
        if !(w_q > 0.0) {
            return Err(Error::Config(
                "joint regularisation weight must be positive".into(),
            ));
        }

        let n = joints.len();
        let jac_s = jac.select_columns(joints);
        let mut jt_w = jac_s.transpose();
        for (c, &w) in w_x.iter().enumerate() {
            jt_w.column_mut(c).scale_mut(w);
        }
        let mut h = &jt_w * &jac_s;
        for i in 0..n {
            h[(i, i)] += w_q;
        }
        // Restore exact symmetry lost to rounding.
        let h = (&h + h.transpose()) * 0.5;

        let num_cbf = cbf_rows.len();
        let box_blocks = if step_bounds.is_some() { 2 } else { 1 };
        let k = num_cbf + box_blocks * n;
        let mut a = DMatrix::zeros(k, n);
        let mut lower = DVector::zeros(k);
        let mut upper = DVector::zeros(k);
        for (r, row) in cbf_rows.iter().enumerate() {
            for (c, &j) in joints.iter().enumerate() {
                a[(r, c)] = row.gradient[j];
            }
            lower[r] = row.bound;
            upper[r] = f64::INFINITY;
        }
        let (ql, qu) = (model.lower_limits(), model.upper_limits());
        let mut r = num_cbf;
        if let Some(b) = step_bounds {
            for (c, &j) in joints.iter().enumerate() {
                a[(r, c)] = 1.0;
                lower[r] = -b[j];
                upper[r] = b[j];
                r += 1;
            }
        }
        for (c, &j) in joints.iter().enumerate() {
            a[(r, c)] = 1.0;
            lower[r] = ql[j] - q[j];
            upper[r] = qu[j] - q[j];
            r += 1;
        }

        Ok(Self {
            joints: joints.to_vec(),
            jac: jac_s,
            jt_w,
            h,
            a,
            lower,
            upper,
            num_cbf,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.joints.len()
    }

    pub fn num_rows(&self) -> usize {
        self.lower.len()
    }

    /// `g = −J_sᵀ W_x d`.
    pub fn linear_term(&self, displacement: &DVector<f64>) -> DVector<f64> {
        -(&self.jt_w * displacement)
    }

    pub fn problem(&self, displacement: &DVector<f64>) -> Result<QpProblem> {
        if displacement.len() != self.jt_w.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.jt_w.ncols(),
                found: displacement.len(),
            });
        }
        QpProblem::new(
            self.h.clone(),
            self.linear_term(displacement),
            self.a.clone(),
            self.lower.clone(),
            self.upper.clone(),
        )
    }
}

/// Candidate QP for one segment and one target displacement:
/// `min ½‖J Δq − d‖²_{W_x} + ½ w_q‖Δq‖²` subject to the barrier rows, the
/// increment box and the position box.
#[allow(clippy::too_many_arguments)]
pub fn build_candidate_qp(
    model: &RobotModel,
    q: &DVector<f64>,
    segment: &[usize],
    jac: &DMatrix<f64>,
    displacement: &DVector<f64>,
    w_x: &DVector<f64>,
    w_q: f64,
    cbf_rows: &[CbfRow],
    step_bounds: Option<&DVector<f64>>,
) -> Result<QpProblem> {
    SegmentQp::new(model, q, segment, jac, w_x, w_q, cbf_rows, step_bounds)?.problem(displacement)
}
