mod common;

use pdik::qpsolve::{reference_solve, solve, solve_batch};
use pdik::{QpSettings, QpStatus};
use rand::Rng;

#[test]
fn admm_matches_enumeration_oracle() {
    let mut rng = common::rng(7);
    let settings = QpSettings::precise();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..=10);
        let k = rng.random_range(0..=12);
        let p = common::random_qp(&mut rng, m, k);
        let oracle = reference_solve(&p).unwrap();
        assert_eq!(oracle.status, QpStatus::Solved);
        let sol = solve(&p, &settings, None).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        let err = (&sol.z - &oracle.z).amax();
        worst = worst.max(err);
        assert!(err <= 1e-4, "m={m} k={k} err={err}");
        assert!(p.max_violation(&sol.z) <= 1e-6);
    }
    eprintln!("worst deviation {worst:e}");
}

#[test]
fn reference_settings_are_close_to_oracle() {
    let mut rng = common::rng(11);
    let settings = QpSettings::reference();
    let mut solved = 0;
    for _ in 0..100 {
        let p = common::random_qp(&mut rng, 6, 8);
        let oracle = reference_solve(&p).unwrap();
        let sol = solve(&p, &settings, None).unwrap();
        if sol.status == QpStatus::Solved {
            solved += 1;
            assert!((&sol.z - &oracle.z).amax() < 1e-3);
        }
    }
    assert!(solved >= 90, "{solved}");
}

#[test]
fn batch_is_elementwise_identical() {
    let mut rng = common::rng(3);
    let settings = QpSettings::batch();
    let problems: Vec<_> = (0..256)
        .map(|_| common::random_qp(&mut rng, 5, 7))
        .collect();
    let batch = solve_batch(&problems, &settings, &[]).unwrap();
    for (p, b) in problems.iter().zip(&batch) {
        let single = solve(p, &settings, None).unwrap();
        assert_eq!(single.iterations, b.iterations);
        assert!((&single.z - &b.z).amax() <= 1e-12);
    }
}

#[test]
fn batch_of_copies_and_singletons() {
    let mut rng = common::rng(5);
    let p = common::random_qp(&mut rng, 4, 6);
    let settings = QpSettings::reference();
    let one = solve_batch(std::slice::from_ref(&p), &settings, &[]).unwrap();
    assert_eq!(one[0], solve(&p, &settings, None).unwrap());
    let copies = vec![p.clone(); 32];
    let out = solve_batch(&copies, &settings, &[]).unwrap();
    assert!(out.iter().all(|s| *s == out[0]));
}

#[test]
fn warm_start_rarely_slower_after_small_perturbation() {
    let mut rng = common::rng(13);
    let settings = QpSettings::reference();
    let trials = 200;
    let mut not_slower = 0;
    for _ in 0..trials {
        let p = common::random_qp(&mut rng, 6, 8);
        let base = solve(&p, &settings, None).unwrap();
        let mut q = p.clone();
        for v in q.g.iter_mut() {
            *v += rng.random_range(-1e-3..1e-3) / (6f64).sqrt();
        }
        let cold = solve(&q, &settings, None).unwrap();
        let warm = solve(&q, &settings, Some(&base)).unwrap();
        if warm.iterations <= cold.iterations {
            not_slower += 1;
        }
    }
    assert!(
        not_slower as f64 >= 0.9 * trials as f64,
        "{not_slower}/{trials}"
    );
}
