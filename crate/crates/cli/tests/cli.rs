use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn popsize(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popsize"))
        .current_dir(dir)
        .env_remove("POPSIZE_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn solve_writes_fields_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = popsize(dir.path(), &["solve", "--mu", "0.5", "--domain.cells=[200]", "--out", "res"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("res/solve");
    for f in ["theta.csv", "theta.svg", "theta.dat", "m.csv", "phi.csv", "verdicts.csv", "summary.txt", "config.toml"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let theta = fs::read_to_string(run.join("theta.csv")).unwrap();
    assert!(theta.starts_with("x,value\n"));
    assert_eq!(theta.lines().count(), 201);
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_popsize"))
        .current_dir(dir.path())
        .env("POPSIZE_OUT", "envroot")
        .args(["eigen", "--profile", "double-crenel", "--domain.extents=[1.0, 2.0]"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let eig = fs::read_to_string(dir.path().join("envroot/eigen/eigenfunction.csv")).unwrap();
    assert!(eig.starts_with("x,y,value\n"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "mu = 3.0\n[domain]\ncells = [64]\n[solver]\ntol = 1e-9\n").unwrap();
    let o = popsize(dir.path(), &["solve", "--config", "run.toml", "--solver.tol", "1e-11"]);
    assert_eq!(code(&o), 0);
    let used = fs::read_to_string(dir.path().join("out/solve/config.toml")).unwrap();
    assert!(used.contains("mu = 3.0"), "{used}");
    let cfg: toml::Table = used.parse().unwrap();
    assert_eq!(cfg["solver"]["tol"].as_float(), Some(1e-11));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = popsize(dir.path(), &["solve", "--solver.tol=1e-30", "--domain.cells=[100]"]);
    assert_eq!(code(&o), 1);
    let verdicts = fs::read_to_string(dir.path().join("out/solve/verdicts.csv")).unwrap();
    assert!(verdicts.contains("FAIL"));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&popsize(dir.path(), &["experiment", "nope"])), 2);
    assert_eq!(code(&popsize(dir.path(), &["solve", "--solver.tol=-1"])), 2);
    assert_eq!(code(&popsize(dir.path(), &["solve", "--budget.m0=2.0"])), 2);
    assert_eq!(code(&popsize(dir.path(), &["eigen", "--m", "missing.csv"])), 2);
    assert_eq!(code(&popsize(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["optimize", "--mu", "2", "--domain.cells=[120]", "--seed", "7", "--out", out]
    };
    assert_eq!(code(&popsize(dir.path(), &args("a"))), 0);
    assert_eq!(code(&popsize(dir.path(), &args("b"))), 0);
    for f in ["m.csv", "theta.csv", "trace.txt"] {
        let a = fs::read(dir.path().join("a/optimize").join(f)).unwrap();
        let b = fs::read(dir.path().join("b/optimize").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn rearrange_round_trips_a_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.csv"), "x,value\n0.125,3\n0.375,1\n0.625,4\n0.875,1\n").unwrap();
    let o = popsize(dir.path(), &["rearrange", "--input", "u.csv", "--direction", "decreasing"]);
    assert_eq!(code(&o), 0);
    let r = fs::read_to_string(dir.path().join("out/rearrange/rearranged.csv")).unwrap();
    let vals: Vec<f64> = r.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals, vec![4.0, 3.0, 1.0, 1.0]);
}

#[test]
fn expansion_experiment_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let o = popsize(dir.path(), &["experiment", "expansion", "--domain.cells=[400]"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("out/expansion/remainder.csv").exists());
}
