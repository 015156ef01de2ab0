use std::path::Path;
use std::process::{Command, Output};

use sparseplq_core::bench::load_records;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparseplq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 12] = ["--n", "60", "--p", "120", "--noise", "gauss:2", "--corrupt", "0.1", "--seed", "7", "--cov", "ar:0.8"];

#[test]
fn gen_is_deterministic_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    for ext in ["bin", "txt"] {
        let (a, b) = (dir.path().join(format!("a.{ext}")), dir.path().join(format!("b.{ext}")));
        for path in [&a, &b] {
            let mut args = vec!["gen"];
            args.extend(SMALL);
            args.extend(["--out", p(path)]);
            let o = run(&args);
            assert!(o.status.success(), "{}", stderr(&o));
            assert!(stdout(&o).contains("60x120"));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let txt = std::fs::read_to_string(dir.path().join("a.txt")).unwrap();
    assert!(!txt.is_empty());
}

#[test]
fn solve_instance_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.bin");
    let mut args = vec!["gen"];
    args.extend(SMALL);
    args.extend(["--out", p(&inst)]);
    assert!(run(&args).status.success());

    let mut records = Vec::new();
    for name in ["r1.csv", "r2.csv"] {
        let out = dir.path().join(name);
        let o = run(&["solve", "--instance", p(&inst), "--out", p(&out), "-q"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let s = stdout(&o);
        for key in ["nz=", "loss=", "l2err=", "time="] {
            assert!(s.contains(key), "missing {key} in {s}");
        }
        records.push(load_records(&out).unwrap());
    }
    assert_eq!(records[0].len(), 1);
    assert!(records[0][0].same_results(&records[1][0]));
    assert_eq!(records[0][0].solver, "pmm");
}

#[test]
fn solve_libsvm_runs_both_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    let mut text = String::new();
    for i in 0..30 {
        let x1 = (i as f64 * 0.37).sin();
        let x2 = (i as f64 * 0.91).cos();
        let y = 2.0 * x1 + if i % 7 == 0 { 5.0 } else { 0.0 };
        text += &format!("{y} 1:{x1} 2:{x2} 4:{}\n", (i % 3) as f64);
    }
    std::fs::write(&data, text).unwrap();
    let o = run(&["solve", "--libsvm", p(&data), "--solver", "pmm", "--lambda", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("nz="));
    assert!(!stdout(&o).contains("l2err="));

    let o = run(&["solve", "--libsvm", p(&data), "--solver", "ipadmm", "--lambda", "0.1", "--eps", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ipadmm"));
}

#[test]
fn flag_errors_exit_2_with_usage() {
    let o = run(&["solve", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));

    let o = run(&["solve", "--solver", "ipadmm", "--n", "20", "--p", "30"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--eps"));

    let o = run(&["solve", "--instance", "x.bin", "--n", "20"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["gen", "--corrupt", "1.5", "--out", "never-written.bin"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new("never-written.bin").exists());

    let o = run(&[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--instance", p(&dir.path().join("missing.bin"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 1:2\n1 x:3\n").unwrap();
    let o = run(&["solve", "--libsvm", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('2'), "{}", stderr(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "# small instance\nn = 40\np = 80\nseed = 3\nlambda = 0.3\n").unwrap();
    let o = run(&["--config", p(&conf), "solve", "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("lambda=3.0000e-1"), "{}", stdout(&o));
    let o = run(&["--config", p(&conf), "solve", "-q", "--lambda", "0.2"]);
    assert!(stdout(&o).contains("lambda=2.0000e-1"), "{}", stdout(&o));

    std::fs::write(&conf, "lambda 0.3\n").unwrap();
    assert_eq!(run(&["--config", p(&conf), "solve"]).status.code(), Some(2));
}

#[test]
fn defaults_and_help() {
    let o = run(&["--show-defaults"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for line in ["a = 6", "mu = 1e-8", "gamma1-0 = 0.1", "varrho = 0.8", "k-max = 200", "admm-k-max = 20000"] {
        assert!(s.contains(line), "missing `{line}`");
    }
    for sub in ["gen", "solve", "sweep", "table1", "eps-search"] {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success());
        assert!(stdout(&o).contains("--"), "{sub}");
    }
    assert!(stdout(&run(&["solve", "--help"])).contains("[default: 6]"));
}
