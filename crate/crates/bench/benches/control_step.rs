use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pdik::baselines::{single_shot_config, SingleShotMode};
use pdik::models::{desk_dual_arm, dual_arm_config, dual_arm_ready_pose, DESK_HANDS};
use pdik::qpsolve::AdmmSolver;
use pdik::retarget::task_jacobian;
use pdik::{Controller, DMatrix, DVector, QpSettings, TaskSpec, TaskTarget, Vector3};

fn desk_task() -> TaskSpec {
    TaskSpec::new(vec![
        TaskTarget::new(DESK_HANDS[0], Vector3::new(0.32, 0.05, 0.20)),
        TaskTarget::new(DESK_HANDS[1], Vector3::new(0.32, -0.05, 0.20)),
    ])
}

fn control_steps(c: &mut Criterion) {
    let model = desk_dual_arm();
    let q = dual_arm_ready_pose(&model).unwrap();
    let task = desk_task();
    let mut group = c.benchmark_group("control_step");
    for k in [16, 64] {
        let mut ctrl = Controller::new(&model, dual_arm_config().with_k(k)).unwrap();
        group.bench_function(format!("distributed_k{k}"), |b| {
            b.iter(|| ctrl.step(&model, &q, &task).unwrap())
        });
    }
    for (name, mode) in [
        ("monolithic_single", SingleShotMode::Monolithic),
        ("distributed_single", SingleShotMode::Distributed),
    ] {
        let mut ctrl =
            Controller::new(&model, single_shot_config(&dual_arm_config(), mode)).unwrap();
        group.bench_function(name, |b| b.iter(|| ctrl.step(&model, &q, &task).unwrap()));
    }
    group.finish();
}

fn qp_batch(c: &mut Criterion) {
    let model = desk_dual_arm();
    let q = dual_arm_ready_pose(&model).unwrap();
    let jac = task_jacobian(&model, &q, &desk_task()).unwrap();
    let n = model.dof();
    let mut h = jac.transpose() * &jac;
    for i in 0..n {
        h[(i, i)] += 1e-2;
    }
    let a = DMatrix::identity(n, n);
    let bound = DVector::from_element(n, 0.025);
    let lower = -&bound;
    let gs: Vec<DVector<f64>> = (1..=64)
        .map(|j| DVector::from_fn(n, |i, _| 0.01 * (j as f64 / 64.0) * ((i % 3) as f64 - 1.0)))
        .collect();
    let solver = AdmmSolver::new(&h, &a, QpSettings::batch()).unwrap();
    c.bench_function("admm_batch_64", |b| {
        b.iter_batched(
            || gs.clone(),
            |gs| solver.solve_many(&gs, &lower, &bound, &[]).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, control_steps, qp_batch);
criterion_main!(benches);
