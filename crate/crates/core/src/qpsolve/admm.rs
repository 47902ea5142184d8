use std::borrow::Cow;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::{validate_parts, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::{Error, Result};

/// Batches at least this long are evaluated on the rayon pool.
const PARALLEL_BATCH: usize = 16;
/// Residuals are evaluated every `CHECK_INTERVAL` iterations.
const CHECK_INTERVAL: usize = 5;
/// Tolerance of the primal infeasibility certificate.
const EPS_PINF: f64 = 1e-6;
const ADAPT_INTERVAL: usize = 25;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE: usize = 5;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn factorize(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    sigma: f64,
    rho: f64,
) -> Result<Cholesky<f64, Dyn>> {
    let m = h.nrows();
    let mut kkt = h.clone();
    for i in 0..m {
        kkt[(i, i)] += sigma;
    }
    if a.nrows() > 0 {
        kkt.gemm_tr(rho, a, a, 1.0);
    }
    Cholesky::new(kkt).ok_or_else(|| Error::InvalidProblem("H is not positive definite".into()))
}

/// ADMM solver bound to one `(H, A)` pair. The factorisation of
/// `H + σI + ρAᵀA` is computed once and reused for every linear term and
/// bound vector solved against it.
#[derive(Debug, Clone)]
pub struct AdmmSolver<'a> {
    h: &'a DMatrix<f64>,
    a: &'a DMatrix<f64>,
    settings: QpSettings,
    factor: Cholesky<f64, Dyn>,
    /// Rows with a single non-zero coefficient: `(row, column, coefficient)`.
    simple_rows: Vec<(usize, usize, f64)>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(h: &'a DMatrix<f64>, a: &'a DMatrix<f64>, settings: QpSettings) -> Result<Self> {
        settings.validate()?;
        let m = h.nrows();
        if h.ncols() != m || (a.nrows() > 0 && a.ncols() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: h.ncols().max(a.ncols()),
            });
        }
        let factor = factorize(h, a, settings.sigma, settings.rho)?;
        let simple_rows = (0..a.nrows())
            .filter_map(|r| {
                let row = a.row(r);
                let mut nz = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
                match (nz.next(), nz.next()) {
                    (Some((c, &v)), None) => Some((r, c, v)),
                    _ => None,
                }
            })
            .collect();
        Ok(Self {
            h,
            a,
            settings,
            factor,
            simple_rows,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    /// Solve several linear terms against the shared data; results are in
    /// input order and identical to solving each one on its own.
    pub fn solve_many(
        &self,
        gs: &[DVector<f64>],
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        warms: &[Option<&QpSolution>],
    ) -> Result<Vec<QpSolution>> {
        if !warms.is_empty() && warms.len() != gs.len() {
            return Err(Error::DimensionMismatch {
                expected: gs.len(),
                found: warms.len(),
            });
        }
        let warm = |i: usize| warms.get(i).copied().flatten();
        if gs.len() >= PARALLEL_BATCH {
            gs.par_iter()
                .enumerate()
                .map(|(i, g)| self.solve(g, lower, upper, warm(i)))
                .collect()
        } else {
            gs.iter()
                .enumerate()
                .map(|(i, g)| self.solve(g, lower, upper, warm(i)))
                .collect()
        }
    }

    pub fn solve(
        &self,
        g: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
        warm: Option<&QpSolution>,
    ) -> Result<QpSolution> {
        validate_parts(self.h, g, self.a, lower, upper)?;
        let s = &self.settings;
        let (m, k) = (self.num_vars(), self.num_rows());
        let (h, a) = (self.h, self.a);

        let (mut x, mut z, mut y) = match warm {
            Some(w)
                if s.warm_start && w.z.len() == m && w.slack.len() == k && w.dual.len() == k =>
            {
                (w.z.clone(), w.slack.clone(), w.dual.clone())
            }
            _ => (DVector::zeros(m), DVector::zeros(k), DVector::zeros(k)),
        };

        let mut rho = s.rho;
        let mut factor: Cow<'_, Cholesky<f64, Dyn>> = Cow::Borrowed(&self.factor);
        let alpha = s.relaxation;

        let mut rhs = DVector::zeros(m);
        let mut xt = DVector::zeros(m);
        let mut zt = DVector::zeros(k);
        let mut tmp_k = DVector::zeros(k);
        let mut ax = DVector::zeros(k);
        let mut hx = DVector::zeros(m);
        let mut aty = DVector::zeros(m);

        let mut status = QpStatus::MaxIterReached;
        let mut iterations = 0;
        let mut r_prim = f64::INFINITY;
        let mut r_dual = f64::INFINITY;
        let mut y_prev = DVector::zeros(k);

        for iter in 1..=s.max_iter {
            iterations = iter;
            let check = iter % CHECK_INTERVAL == 0 || iter == s.max_iter;
            if check {
                y_prev.copy_from(&y);
            }
            // x̃ = (H + σI + ρAᵀA)⁻¹ (σx − g + Aᵀ(ρz − y))
            tmp_k.copy_from(&z);
            tmp_k *= rho;
            tmp_k -= &y;
            rhs.copy_from(&x);
            rhs *= s.sigma;
            rhs -= g;
            if k > 0 {
                rhs.gemv_tr(1.0, a, &tmp_k, 1.0);
            }
            xt.copy_from(&rhs);
            factor.solve_mut(&mut xt);
            if k > 0 {
                zt.gemv(1.0, a, &xt, 0.0);
            }

            // Relaxed updates.
            x *= 1.0 - alpha;
            x.axpy(alpha, &xt, 1.0);
            for i in 0..k {
                let relaxed = alpha * zt[i] + (1.0 - alpha) * z[i];
                let zn = (relaxed + y[i] / rho).clamp(lower[i], upper[i]);
                y[i] += rho * (relaxed - zn);
                z[i] = zn;
            }

            if !check {
                continue;
            }

            // Residuals.
            hx.gemv(1.0, h, &x, 0.0);
            if k > 0 {
                ax.gemv(1.0, a, &x, 0.0);
                aty.gemv_tr(1.0, a, &y, 0.0);
            } else {
                aty.fill(0.0);
            }
            r_prim = (0..k).fold(0.0, |acc: f64, i| acc.max((ax[i] - z[i]).abs()));
            r_dual = (0..m).fold(0.0, |acc: f64, i| acc.max((hx[i] + g[i] + aty[i]).abs()));
            let eps_prim = s.eps_abs + s.eps_rel * inf_norm(&ax).max(inf_norm(&z));
            let eps_dual =
                s.eps_abs + s.eps_rel * inf_norm(&hx).max(inf_norm(&aty)).max(inf_norm(g));
            if r_prim <= eps_prim && r_dual <= eps_dual {
                status = QpStatus::Solved;
                break;
            }

            if k > 0 && primal_infeasible(a, lower, upper, &y, &y_prev, &mut tmp_k) {
                status = QpStatus::Infeasible;
                break;
            }

            if s.adaptive_rho && k > 0 && iter % ADAPT_INTERVAL == 0 {
                let p = r_prim / (inf_norm(&ax).max(inf_norm(&z)) + 1e-30);
                let d = r_dual / (inf_norm(&hx).max(inf_norm(&aty)).max(inf_norm(g)) + 1e-30);
                let candidate = (rho * (p / (d + 1e-30)).sqrt()).clamp(1e-6, 1e6);
                if candidate > 5.0 * rho || candidate < 0.2 * rho {
                    rho = candidate;
                    factor = Cow::Owned(factorize(h, a, s.sigma, rho)?);
                }
            }
        }

        if status == QpStatus::Solved && s.polish && k > 0 {
            if let Some((px, pz, py)) = polish(h, a, g, lower, upper, &x, &z, &y) {
                x = px;
                z = pz;
                y = py;
                hx.gemv(1.0, h, &x, 0.0);
                ax.gemv(1.0, a, &x, 0.0);
                aty.gemv_tr(1.0, a, &y, 0.0);
                r_prim = (0..k).fold(0.0, |acc: f64, i| acc.max((ax[i] - z[i]).abs()));
                r_dual = (0..m).fold(0.0, |acc: f64, i| acc.max((hx[i] + g[i] + aty[i]).abs()));
            }
        }

        if status != QpStatus::Infeasible {
            self.clip_simple_rows(&mut x, lower, upper);
        }

        Ok(QpSolution {
            z: x,
            slack: z,
            dual: y,
            status,
            iterations,
            primal_residual: r_prim,
            dual_residual: r_dual,
        })
    }

    /// Intersect the single-variable rows into per-variable boxes and clip.
    fn clip_simple_rows(&self, x: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
        if self.simple_rows.is_empty() {
            return;
        }
        let m = x.len();
        let mut lo = vec![f64::NEG_INFINITY; m];
        let mut hi = vec![f64::INFINITY; m];
        for &(r, c, v) in &self.simple_rows {
            let (a, b) = if v > 0.0 {
                (lower[r] / v, upper[r] / v)
            } else {
                (upper[r] / v, lower[r] / v)
            };
            lo[c] = lo[c].max(a);
            hi[c] = hi[c].min(b);
        }
        for i in 0..m {
            if lo[i] <= hi[i] {
                x[i] = x[i].clamp(lo[i], hi[i]);
            }
        }
    }
}

/// Certificate of primal infeasibility from the dual increment `δy`:
/// `‖Aᵀδy‖ ≈ 0` while `uᵀδy₊ + lᵀδy₋ < 0`.
fn primal_infeasible(
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    y: &DVector<f64>,
    y_prev: &DVector<f64>,
    dy: &mut DVector<f64>,
) -> bool {
    dy.copy_from(y);
    *dy -= y_prev;
    let norm = inf_norm(dy);
    if norm < 1e-12 {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let d = dy[i];
        let b = if d > 0.0 { upper[i] } else { lower[i] };
        if d != 0.0 {
            if !b.is_finite() {
                if d.abs() > EPS_PINF * norm {
                    return false;
                }
                continue;
            }
            support += b * d;
        }
    }
    if support >= -EPS_PINF * norm {
        return false;
    }
    let at_dy = a.tr_mul(dy);
    inf_norm(&at_dy) <= EPS_PINF * norm
}

/// Solve the equality-constrained KKT system of the active set suggested by
/// the ADMM iterate. Returns `None` if the guess is not a valid KKT point.
#[allow(clippy::too_many_arguments)]
fn polish(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    g: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    _x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let m = h.nrows();
    let k = a.nrows();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..k {
        if lower[i] == upper[i] || z[i] - lower[i] < -y[i] {
            active.push((i, lower[i]));
        } else if upper[i] - z[i] < y[i] {
            active.push((i, upper[i]));
        }
    }
    let na = active.len();
    let dim = m + na;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (m, m)).copy_from(h);
    for (r, &(row, _)) in active.iter().enumerate() {
        for c in 0..m {
            kkt[(m + r, c)] = a[(row, c)];
            kkt[(c, m + r)] = a[(row, c)];
        }
    }
    let mut rhs = DVector::zeros(dim);
    for i in 0..m {
        rhs[i] = -g[i];
    }
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[m + r] = b;
    }
    let mut reg = kkt.clone();
    for i in 0..m {
        reg[(i, i)] += POLISH_DELTA;
    }
    for i in m..dim {
        reg[(i, i)] -= POLISH_DELTA;
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..POLISH_REFINE {
        let residual = &rhs - &kkt * &sol;
        sol += lu.solve(&residual)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }

    let x = sol.rows(0, m).into_owned();
    let mut y_full = DVector::zeros(k);
    for (r, &(row, _)) in active.iter().enumerate() {
        y_full[row] = sol[m + r];
    }
    let ax = a * &x;
    let scale = 1.0 + inf_norm(g).max(h.amax()).max(inf_norm(&ax));
    let tol = 1e-9 * scale;
    for i in 0..k {
        if ax[i] < lower[i] - tol || ax[i] > upper[i] + tol {
            return None;
        }
        if lower[i] != upper[i] {
            let at_lower = active.iter().any(|&(r, b)| r == i && b == lower[i]);
            if at_lower && y_full[i] > tol {
                return None;
            }
            if !at_lower && y_full[i] < -tol {
                return None;
            }
        }
    }
    let dual_res = h * &x + g + a.tr_mul(&y_full);
    if inf_norm(&dual_res) > tol {
        return None;
    }
    let z_new = DVector::from_iterator(k, (0..k).map(|i| ax[i].clamp(lower[i], upper[i])));
    Some((x, z_new, y_full))
}

/// Solve one problem, optionally warm-started from a previous solution.
pub fn solve(
    problem: &QpProblem,
    settings: &QpSettings,
    warm: Option<&QpSolution>,
) -> Result<QpSolution> {
    problem.validate()?;
    AdmmSolver::new(&problem.h, &problem.a, *settings)?.solve(
        &problem.g,
        &problem.lower,
        &problem.upper,
        warm,
    )
}

/// Solve a batch of equally sized problems. When every problem shares `H`
/// and `A` the factorisation is computed once. Output order matches input
/// order and each entry equals the corresponding [`solve`] call.
pub fn solve_batch(
    problems: &[QpProblem],
    settings: &QpSettings,
    warms: &[Option<QpSolution>],
) -> Result<Vec<QpSolution>> {
    let Some(first) = problems.first() else {
        return Ok(Vec::new());
    };
    if !warms.is_empty() && warms.len() != problems.len() {
        return Err(Error::DimensionMismatch {
            expected: problems.len(),
            found: warms.len(),
        });
    }
    let (m, k) = (first.num_vars(), first.num_rows());
    if problems
        .iter()
        .any(|p| p.num_vars() != m || p.num_rows() != k)
    {
        return Err(Error::HeterogeneousBatch);
    }
    for p in problems {
        p.validate()?;
    }
    let warm = |i: usize| warms.get(i).and_then(|w| w.as_ref());
    let shared = problems.iter().all(|p| p.h == first.h && p.a == first.a);
    if shared {
        let solver = AdmmSolver::new(&first.h, &first.a, *settings)?;
        let run = |(i, p): (usize, &QpProblem)| solver.solve(&p.g, &p.lower, &p.upper, warm(i));
        if problems.len() >= PARALLEL_BATCH {
            problems.par_iter().enumerate().map(run).collect()
        } else {
            problems.iter().enumerate().map(run).collect()
        }
    } else {
        let run = |(i, p): (usize, &QpProblem)| solve(p, settings, warm(i));
        if problems.len() >= PARALLEL_BATCH {
            problems.par_iter().enumerate().map(run).collect()
        } else {
            problems.iter().enumerate().map(run).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_box() -> QpProblem {
        QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 0.0),
            DVector::from_element(1, 0.5),
        )
        .unwrap()
    }

    #[test]
    fn clipped_scalar_optimum() {
        for settings in [
            QpSettings::batch(),
            QpSettings::reference(),
            QpSettings::precise(),
        ] {
            let sol = solve(&scalar_box(), &settings, None).unwrap();
            assert!((sol.z[0] - 0.5).abs() < 1e-4, "{settings:?}: {}", sol.z[0]);
        }
    }

    #[test]
    fn unconstrained_identity_goes_to_origin() {
        let p = QpProblem::unconstrained(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let sol = solve(&p, &QpSettings::batch(), None).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(sol.z.amax() < 1e-12);
    }

    #[test]
    fn infeasible_rows_detected() {
        // z ≥ 1 and z ≤ 0.
        let p = QpProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            DMatrix::from_element(2, 1, 1.0),
            DVector::from_vec(vec![1.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![f64::INFINITY, 0.0]),
        )
        .unwrap();
        let mut s = QpSettings::reference();
        s.max_iter = 2000;
        let sol = solve(&p, &s, None).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn invalid_inputs() {
        let mut p = scalar_box();
        p.lower[0] = 1.0;
        assert!(solve(&p, &QpSettings::batch(), None).is_err());
        let p = scalar_box();
        let q = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(matches!(
            solve_batch(&[p, q], &QpSettings::batch(), &[]),
            Err(Error::HeterogeneousBatch)
        ));
        assert!(QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
            DVector::zeros(2),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DVector::zeros(0)
        )
        .is_err());
    }

    #[test]
    fn warm_start_from_solution_converges_immediately() {
        let p = scalar_box();
        let s = QpSettings::reference();
        let cold = solve(&p, &s, None).unwrap();
        let warm = solve(&p, &s, Some(&cold)).unwrap();
        assert!(warm.iterations <= cold.iterations);
        assert!(warm.iterations <= CHECK_INTERVAL);
    }
}
