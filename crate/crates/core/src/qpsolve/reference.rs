use nalgebra::{DMatrix, DVector};

use super::{QpProblem, QpSolution, QpStatus};
use crate::{Error, Result};

const MAX_VARS: usize = 16;
const MAX_ROWS: usize = 20;

#[derive(Clone, Copy)]
enum Side {
    Lower,
    Upper,
    Equal,
}

/// Exact solution by active-set enumeration.
///
/// Candidate active sets are visited in order of increasing size; for each
/// one the equality-constrained KKT system is solved and the point is kept
/// if it is primal feasible with correctly signed multipliers. Strict
/// convexity makes the first such point the unique optimum.
pub fn reference_solve(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    let m = problem.num_vars();
    let k = problem.num_rows();
    if m > MAX_VARS || k > MAX_ROWS {
        return Err(Error::SizeExceeded { vars: m, rows: k });
    }
    if problem.h.clone().cholesky().is_none() {
        return Err(Error::InvalidProblem("H is not positive definite".into()));
    }

    let (lo, up) = (&problem.lower, &problem.upper);
    let mandatory: Vec<(usize, Side)> = (0..k)
        .filter(|&i| lo[i] == up[i])
        .map(|i| (i, Side::Equal))
        .collect();
    let optional: Vec<usize> = (0..k)
        .filter(|&i| lo[i] != up[i] && (lo[i].is_finite() || up[i].is_finite()))
        .collect();

    let scale = 1.0 + problem.h.amax().max(problem.g.amax()).max(problem.a.amax());
    let max_size = m.saturating_sub(mandatory.len()).min(optional.len());

    for size in 0..=max_size {
        let mut found = None;
        for_each_combination(optional.len(), size, &mut |idx| {
            if found.is_some() {
                return;
            }
            let sides: Vec<Vec<Side>> = idx
                .iter()
                .map(|&j| {
                    let r = optional[j];
                    let mut v = Vec::with_capacity(2);
                    if lo[r].is_finite() {
                        v.push(Side::Lower);
                    }
                    if up[r].is_finite() {
                        v.push(Side::Upper);
                    }
                    v
                })
                .collect();
            let total: usize = sides.iter().map(|s| s.len()).product();
            for code in 0..total {
                let mut c = code;
                let mut set = mandatory.clone();
                for (pos, &j) in idx.iter().enumerate() {
                    let opts = &sides[pos];
                    set.push((optional[j], opts[c % opts.len()]));
                    c /= opts.len();
                }
                if let Some(sol) = try_active_set(problem, &set, scale) {
                    found = Some(sol);
                    return;
                }
            }
        });
        if let Some((z, y)) = found {
            let az = &problem.a * &z;
            let slack = DVector::from_iterator(k, (0..k).map(|i| az[i].clamp(lo[i], up[i])));
            return Ok(QpSolution {
                z,
                slack,
                dual: y,
                status: QpStatus::Solved,
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
            });
        }
    }
    Ok(QpSolution {
        z: DVector::zeros(m),
        slack: DVector::zeros(k),
        dual: DVector::zeros(k),
        status: QpStatus::Infeasible,
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    })
}

fn for_each_combination(n: usize, r: usize, f: &mut dyn FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    'outer: loop {
        f(&idx);
        for i in (0..r).rev() {
            if idx[i] < n - r + i {
                idx[i] += 1;
                for j in i + 1..r {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        return;
    }
}

fn try_active_set(
    p: &QpProblem,
    set: &[(usize, Side)],
    scale: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let m = p.num_vars();
    let k = p.num_rows();
    let na = set.len();
    let dim = m + na;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (m, m)).copy_from(&p.h);
    let mut rhs = DVector::zeros(dim);
    for i in 0..m {
        rhs[i] = -p.g[i];
    }
    for (r, &(row, side)) in set.iter().enumerate() {
        for c in 0..m {
            kkt[(m + r, c)] = p.a[(row, c)];
            kkt[(c, m + r)] = p.a[(row, c)];
        }
        rhs[m + r] = match side {
            Side::Lower | Side::Equal => p.lower[row],
            Side::Upper => p.upper[row],
        };
    }
    let sol = kkt.clone().lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) || (&kkt * &sol - &rhs).amax() > 1e-9 * scale {
        return None;
    }
    let z = sol.rows(0, m).into_owned();
    let mut y = DVector::zeros(k);
    let tol = 1e-9 * scale;
    for (r, &(row, side)) in set.iter().enumerate() {
        let mult = sol[m + r];
        match side {
            Side::Lower if mult > tol => return None,
            Side::Upper if mult < -tol => return None,
            _ => {}
        }
        y[row] = mult;
    }
    let az = &p.a * &z;
    let ftol = 1e-9 * (1.0 + az.amax());
    if (0..k).any(|i| az[i] < p.lower[i] - ftol || az[i] > p.upper[i] + ftol) {
        return None;
    }
    Some((z, y))
}
