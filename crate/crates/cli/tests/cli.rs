use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pdik-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .current_dir(root())
        .args(args)
        .output()
        .unwrap()
}

fn retarget(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retarget"))
        .current_dir(root())
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn escape_mc_prints_one_row_per_k() {
    let out = bench(&[
        "escape-mc",
        "--p",
        "0.1",
        "--k-list",
        "1,16",
        "--trials",
        "20000",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    let cols: Vec<&str> = rows[1].split('|').map(str::trim).collect();
    assert_eq!(cols[1], "16");
    let empirical: f64 = cols[2].parse().unwrap();
    assert!((empirical - 0.8147).abs() < 0.02);
}

#[test]
fn escape_mc_rejects_bad_probability() {
    let out = bench(&["escape-mc", "--p", "1.5", "--k-list", "1", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_variant_list_gives_empty_report() {
    let dir = scratch("empty");
    let out = bench(&[
        "ablation",
        "--model",
        "models/desk_dual_arm.model",
        "--trials",
        "3",
        "--variants",
        "",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.join("table.md")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.trim().is_empty());
}

#[test]
fn small_ablation_writes_reports() {
    let dir = scratch("small");
    let out = bench(&[
        "ablation",
        "--model",
        "models/desk_dual_arm.model",
        "--trials",
        "2",
        "--variants",
        "dist_qp,par_dist:4:0.0005",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.join("table.md")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let mut rdr = csv::Reader::from_path(dir.join("metrics.csv")).unwrap();
    assert_eq!(rdr.records().count(), 4);
    let mut rdr = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn unknown_variant_is_a_config_error() {
    let dir = scratch("bad-variant");
    let out = bench(&[
        "ablation",
        "--model",
        "models/desk_dual_arm.model",
        "--variants",
        "par_dist:0:0.1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_model_is_a_config_error() {
    let out = bench(&[
        "trial",
        "--seed",
        "0",
        "--method",
        "dist_qp",
        "--model",
        "does/not/exist.model",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trial_replays_static_target() {
    let dir = scratch("replay");
    let replay = dir.join("static.csv");
    std::fs::write(
        &replay,
        "t,frame,x,y,z\n0,l_hand,0.35,0.15,0.20\n0,r_hand,0.35,-0.15,0.20\n",
    )
    .unwrap();
    let out = bench(&[
        "trial",
        "--seed",
        "1",
        "--method",
        "par_dist:16:0.0005",
        "--replay",
        replay.to_str().unwrap(),
        "--horizon",
        "150",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = headers.iter().position(|h| h == "final_error").unwrap();
    let final_error: f64 = row[col].parse().unwrap();
    assert!(final_error < 1e-3, "final error {final_error}");
}

#[test]
fn retarget_run_tracks_demo_trajectory() {
    let dir = scratch("run");
    let out_csv = dir.join("metrics.csv");
    let out = retarget(&[
        "run",
        "--model",
        "models/desk_dual_arm.model",
        "--traj",
        "data/demo_keypoints.csv",
        "--config",
        "configs/retarget_desk.toml",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut rdr = csv::Reader::from_path(&out_csv).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 200);
    let body = headers.iter().position(|h| h == "body_id").unwrap();
    assert!(rows.iter().all(|r| &r[body] == "0"));
    let barrier = headers.iter().position(|h| h == "min_barrier").unwrap();
    assert!(rows
        .iter()
        .all(|r| r[barrier].parse::<f64>().unwrap() > -1e-3));
    let err = headers.iter().position(|h| h == "max_error").unwrap();
    let last: f64 = rows.last().unwrap()[err].parse().unwrap();
    assert!(last < 0.01, "final error {last}");
}

#[test]
fn retarget_run_rejects_bad_config() {
    let dir = scratch("bad-config");
    let cfg = dir.join("bad.toml");
    std::fs::write(
        &cfg,
        "beta = -1.0\nanchor_robot = [0, 0, 0]\ntargets = []\n",
    )
    .unwrap();
    let out = retarget(&[
        "run",
        "--model",
        "models/desk_dual_arm.model",
        "--traj",
        "data/demo_keypoints.csv",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("m.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
