//! End-to-end runs of the binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_contract-solve");

/// Small grids and few paths so each run takes well under a second.
const FAST: &[&str] = &[
    "grid.n=201",
    "sim.n_paths=200",
    "sim.horizon=20",
    "sim.export_paths=4",
    "fb.n=11",
    "fb.nt=11",
    "voi.n=11",
    "sweep.sigmas=1.5,2.2",
];

fn run(args: &[&str], out: &Path) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out).env_remove("CONTRACT_SOLVE_OUT");
    cmd.output().expect("binary runs")
}

fn run_fast(sub: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub];
    for s in FAST.iter().chain(extra) {
        args.push("--set");
        args.push(s);
    }
    run(&args, out)
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn manifest_files(dir: &Path) -> BTreeSet<String> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

fn header(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap().lines().next().unwrap().to_string()
}

fn column(dir: &Path, name: &str, col: &str) -> Vec<String> {
    let text = fs::read_to_string(dir.join(name)).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == col).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn subcommands_write_listed_files() {
    let cases: &[(&str, &[(&str, &str)])] = &[
        (
            "first-best",
            &[("fb_value.csv", "x,lambda_lag,tau_star,value"), ("fb_schedule.csv", "t,rent,effort,H")],
        ),
        ("second-best", &[("sb_solution.csv", "x,w,r_star,a_star,stop")]),
        (
            "simulate",
            &[
                ("mc_value.csv", "x0,estimate,std_error,w,n_paths,stopped,floored,censored,censoring_bias_bound"),
                ("paths.csv", "path_id,t,j,x,dw,stopped"),
                (
                    "incentive.csv",
                    "deviation,agent_objective,agent_objective_se,advantage,advantage_se,violated",
                ),
            ],
        ),
        ("voi", &[("voi.csv", "x,v_fb,v_sb,voi")]),
    ];
    for (sub, files) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run_fast(sub, dir.path(), &[]);
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        let mut expect: BTreeSet<String> = files.iter().map(|(f, _)| f.to_string()).collect();
        expect.insert("manifest.json".into());
        assert_eq!(files_in(dir.path()), expect, "{sub}");
        assert_eq!(manifest_files(dir.path()), expect, "{sub}");
        for (f, h) in *files {
            assert_eq!(header(dir.path(), f), *h, "{sub}/{f}");
        }
        let m = manifest(dir.path());
        assert_eq!(m["command"], *sub);
        assert_eq!(m["config"]["grid.n"], "201");
        assert!(m["timings_ms"]["total"].as_f64().unwrap() >= 0.0);
        assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn report_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fast("report", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let files = files_in(dir.path());
    for f in [
        "fb_value.csv",
        "fb_schedule.csv",
        "sb_solution.csv",
        "mc_value.csv",
        "paths.csv",
        "incentive.csv",
        "voi.csv",
        "sweep.csv",
        "manifest.json",
    ] {
        assert!(files.contains(f), "missing {f}");
    }
    assert_eq!(files, manifest_files(dir.path()));
    assert_eq!(header(dir.path(), "sweep.csv"), "sigma,x,w");
    assert_eq!(column(dir.path(), "sweep.csv", "w").len(), 2 * 201);
}

#[test]
fn seeded_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run_fast("simulate", d.path(), &[]).status.code(), Some(0));
    }
    for f in ["mc_value.csv", "paths.csv", "incentive.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let c = tempfile::tempdir().unwrap();
    run_fast("simulate", c.path(), &["sim.seed=9"]);
    assert_ne!(fs::read(a.path().join("paths.csv")).unwrap(), fs::read(c.path().join("paths.csv")).unwrap());
}

#[test]
fn single_sigma_sweep_equals_second_best() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fast("report", dir.path(), &["sweep.sigmas=1.85", "sim.n_paths=20"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(column(dir.path(), "sweep.csv", "w"), column(dir.path(), "sb_solution.csv", "w"));
    assert_eq!(column(dir.path(), "sweep.csv", "x"), column(dir.path(), "sb_solution.csv", "x"));
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fast("report", dir.path(), &["sweep.sigmas=", "sim.n_paths=20"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failing_sigma_does_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fast("report", dir.path(), &["sweep.sigmas=1.5,-1,2.2", "sim.n_paths=20"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let sigmas: BTreeSet<String> = column(dir.path(), "sweep.csv", "sigma").into_iter().collect();
    assert_eq!(sigmas.len(), 2);
    assert!(manifest(dir.path())["diagnostics"]["sweep.failures"]["-1"].is_string());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = |args: &[&str]| run(args, d).status.code();
    assert_eq!(Command::new(BIN).arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(Command::new(BIN).output().unwrap().status.code(), Some(1));
    assert_eq!(code(&["bogus"]), Some(1));
    assert_eq!(code(&["second-best", "--set", "gamma=2"]), Some(1));
    assert_eq!(code(&["second-best", "--set", "p=1.5"]), Some(1));
    assert_eq!(code(&["second-best", "--config", "/nonexistent/run.cfg"]), Some(1));
    assert_eq!(code(&["simulate", "--set", "grid.n=201", "--set", "sim.x0=1.2"]), Some(1));
    assert_eq!(code(&["second-best", "--set", "grid.n=201", "--set", "howard.max_iter=1"]), Some(2));
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# coarse grid\ngrid.n = 101\nsigma = 2.2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &["second-best", "--config", cfg.to_str().unwrap(), "--set", "sigma=1.5"],
        &out_dir,
    );
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&out_dir);
    assert_eq!(m["config"]["grid.n"], "101");
    assert_eq!(m["config"]["sigma"], "1.5");
    assert_eq!(column(&out_dir, "sb_solution.csv", "x").len(), 101);
}

#[test]
fn environment_overrides_out() {
    let dir = tempfile::tempdir().unwrap();
    let flag = dir.path().join("flag");
    let env = dir.path().join("env");
    let out = Command::new(BIN)
        .args(["second-best", "--set", "grid.n=101", "--out"])
        .arg(&flag)
        .env("CONTRACT_SOLVE_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env.join("sb_solution.csv").exists());
    assert!(!flag.exists());
}
