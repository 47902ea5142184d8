#![allow(dead_code)]

use pdik::{DMatrix, DVector, QpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random strictly convex, feasible QP with `m` variables and `k` rows.
pub fn random_qp(rng: &mut impl Rng, m: usize, k: usize) -> QpProblem {
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let mut h = b.transpose() * &b;
    for i in 0..m {
        h[(i, i)] += 0.1;
    }
    let h = (&h + h.transpose()) * 0.5;
    let g = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(k, m, |_, _| rng.random_range(-1.0..1.0));
    let z0 = DVector::from_fn(m, |_, _| rng.random_range(-0.5..0.5));
    let az0 = &a * &z0;
    let mut lower = DVector::zeros(k);
    let mut upper = DVector::zeros(k);
    for i in 0..k {
        lower[i] = if rng.random_bool(0.2) {
            f64::NEG_INFINITY
        } else {
            az0[i] - rng.random_range(0.0..0.5)
        };
        upper[i] = if rng.random_bool(0.2) {
            f64::INFINITY
        } else {
            az0[i] + rng.random_range(0.0..0.5)
        };
    }
    QpProblem::new(h, g, a, lower, upper).unwrap()
}
