use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_banach-sgd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn small_integral(out: &Path) -> Vec<String> {
    [
        "experiment",
        "integral",
        "n=200",
        "n_batches=20",
        "--epochs",
        "12",
        "--seeds",
        "2",
        "--out-dir",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.to_string_lossy().into_owned()])
    .collect()
}

#[test]
fn integral_run_writes_traces_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bin().args(small_integral(&out)).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files(&out),
        [
            "convergence.svg",
            "manifest.json",
            "mean.csv",
            "reconstruction.csv",
            "trace_seed_0.csv",
            "trace_seed_1.csv"
        ]
    );
    for f in ["trace_seed_0.csv", "trace_seed_1.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "epoch,objective,residual,bregman,delta1,delta2,step"
        );
        assert_eq!(lines.count(), 13, "epochs + 1 rows");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 200);
    assert!(manifest["rng_algorithm"]
        .as_str()
        .unwrap()
        .contains("ChaCha8"));
    assert!(stdout(&o).contains("seed 1:"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut args_b = small_integral(&b);
    args_b.extend(["--jobs".into(), "2".into()]);
    assert!(bin().args(small_integral(&a)).status().unwrap().success());
    assert!(bin().args(args_b).status().unwrap().success());
    for f in files(&a).iter().filter(|f| f.as_str() != "manifest.json") {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn ct_run_exports_an_image() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ct");
    let o = run(&[
        "experiment",
        "ct",
        "--epochs",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = std::fs::read(out.join("reconstruction.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n255\n"));
    assert_eq!(pgm.len(), 13 + 64 * 64);
    let csv = std::fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    assert_eq!(csv.lines().count(), 64 * 64);
}

#[test]
fn solve_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("solve");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "preset": "integral", "n": 100, "n_batches": 10, "epochs": 3, "r_x": 1.5,
            "noise": {"kind": "impulse", "pct": 0.05},
            "out_dir": out,
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["solve", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trace_seed_0.csv").exists());
}

#[test]
fn norm_estimate_of_a_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("d.csv");
    std::fs::write(&m, "3,0\n0,1\n").unwrap();
    let o = run(&[
        "norm-estimate",
        m.to_str().unwrap(),
        "--rx",
        "2",
        "--ry",
        "2",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    let value: f64 = s
        .lines()
        .next()
        .unwrap()
        .strip_prefix("norm ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 3.0).abs() < 1e-8);
    assert!(s.contains("converged true"));

    let o = run(&[
        "norm-estimate",
        m.to_str().unwrap(),
        "--rx",
        "2",
        "--ry",
        "2",
        "--tol",
        "0",
        "--max-iter",
        "2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("converged false"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lower bound"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,x\n").unwrap();
    assert_eq!(
        run(&[
            "norm-estimate",
            bad.to_str().unwrap(),
            "--rx",
            "2",
            "--ry",
            "2"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        run(&[
            "norm-estimate",
            "/nonexistent/m.csv",
            "--rx",
            "2",
            "--ry",
            "2"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        run(&["solve", "/nonexistent/cfg.json"]).status.code(),
        Some(3)
    );
    // usage errors are validation failures, not clap's default 2
    let o = run(&["norm-estimate", bad.to_str().unwrap(), "--rx", "two"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let out = dir.path().join("x");
    let o = run(&[
        "experiment",
        "integral",
        "r_x=1.0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = run(&[
        "experiment",
        "integral",
        "no_such_key=3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));

    // a huge constant step overflows the iterate: a runtime invariant, not a config error
    let o = run(&[
        "experiment",
        "integral",
        "n=100",
        "n_batches=10",
        r#"schedule={"kind":"constant","mu0":1e200}"#,
        "--epochs",
        "50",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
