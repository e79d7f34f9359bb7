use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const CONFIG: &str = "\
seed = 5
[fit]
m = 8
resolution = 15
boundary_points = 40
[benchmark]
repeats = 2
m_list = 4, 8
hyper = fixed
resolution = 15
boundary_points = 40
[ot]
n = 4
";

fn ksos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksos")).current_dir(dir).args(args).output().expect("binary runs")
}

fn setup(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.ini"), config).unwrap();
    dir
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn fit_is_deterministic() {
    let dir = setup(CONFIG);
    for out in ["a", "b"] {
        let o = ksos(dir.path(), &["fit", "--config", "run.ini", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = dir.path().join("a");
    let names = files_in(&a);
    assert!(names.contains(&"fit_coefficients.csv".to_string()));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(dir.path().join("b").join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = setup("[fit]\nm = 8\n");
    let o = ksos(dir.path(), &["fit", "--config", "run.ini", "--out", "out"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_sample_count_writes_nothing() {
    let dir = setup(CONFIG);
    let o = ksos(dir.path(), &["fit", "--config", "run.ini", "--seed", "1", "--out", "out"]);
    assert!(o.status.success());
    fs::write(dir.path().join("bad.ini"), CONFIG.replace("m = 8", "m = 6")).unwrap();
    let o = ksos(dir.path(), &["fit", "--config", "bad.ini", "--out", "bad"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn bad_flags_and_keys_exit_with_one() {
    let dir = setup(CONFIG);
    assert_eq!(ksos(dir.path(), &["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ksos(dir.path(), &["nonsense"]).status.code(), Some(1));
    assert_eq!(ksos(dir.path(), &["fit", "--seed", "abc"]).status.code(), Some(1));
    assert_eq!(ksos(dir.path(), &["fit", "--config", "missing.ini"]).status.code(), Some(1));
    fs::write(dir.path().join("typo.ini"), "seed = 1\n[fit]\nmm = 8\n").unwrap();
    assert_eq!(ksos(dir.path(), &["fit", "--config", "typo.ini"]).status.code(), Some(1));
    assert!(ksos(dir.path(), &["--help"]).status.success());
}

#[test]
fn existing_outputs_need_force() {
    let dir = setup(CONFIG);
    let args = ["ot", "--config", "run.ini", "--out", "out"];
    assert!(ksos(dir.path(), &args).status.success());
    let target = dir.path().join("out").join("ot.csv");
    fs::write(&target, "sentinel").unwrap();
    let o = ksos(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(&target).unwrap(), "sentinel");
    let o = ksos(dir.path(), &["ot", "--config", "run.ini", "--out", "out", "--force"]);
    assert!(o.status.success());
    assert_ne!(fs::read_to_string(&target).unwrap(), "sentinel");
}

#[test]
fn benchmark_writes_one_row_per_fit() {
    let dir = setup(CONFIG);
    let o = ksos(dir.path(), &["benchmark", "--config", "run.ini", "--out", "out"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    let repeats = fs::read_to_string(dir.path().join("out").join("benchmark_repeats.csv")).unwrap();
    let mut lines = repeats.lines();
    assert_eq!(
        lines.next(),
        Some("mode,M,repeat,converged,lambda_k,angular,l2,linf_violation,l1_violation,sample_violation")
    );
    // three modes, two sample counts, two repeats
    assert_eq!(lines.count(), 3 * 2 * 2);
    let cells = fs::read_to_string(dir.path().join("out").join("benchmark.csv")).unwrap();
    assert_eq!(cells.lines().next(), Some("mode,M,metric,q1,median,q3,n_converged,n_substituted"));
    // four metrics per (mode, M)
    assert_eq!(cells.lines().count() - 1, 3 * 2 * 4);
}
