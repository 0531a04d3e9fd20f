use std::path::Path;
use std::process::{Command, Output};

fn dyspn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyspn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec![
        "synth",
        "--output",
        d,
        "--height",
        "24",
        "--width",
        "20",
        "--sparsity",
        "0.1",
    ];
    args.extend_from_slice(extra);
    let out = dyspn(&args);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn synth_propagate_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, &[]);
    for f in [
        "gt.pgm",
        "sparse.pgm",
        "init.pgm",
        "guidance.dyt",
        "affinity.dyt",
        "attention.dyt",
        "run.cfg",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let cfg = dir.join("run.cfg");
    let out = dyspn(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("RMSE (mm)"));
    let res = dir.join("out");
    for f in [
        "depth.pgm",
        "depth.dyt",
        "run.cfg",
        "metrics.txt",
        "metrics.csv",
        "rmse_curve.csv",
    ] {
        assert!(res.join(f).exists(), "{f}");
    }
    // the recorded config is itself a valid run config
    let recorded = std::fs::read_to_string(res.join("run.cfg")).unwrap();
    assert!(dyspn::io::RunConfig::parse(&recorded).is_ok());
    assert_eq!(
        std::fs::read_to_string(res.join("rmse_curve.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 7
    );

    let csv = dir.join("eval.csv");
    let out = dyspn(&[
        "eval",
        "--pred",
        res.join("depth.dyt").to_str().unwrap(),
        "--gt",
        dir.join("gt.pgm").to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        std::fs::read_to_string(res.join("metrics.csv")).unwrap()
    );
}

#[test]
fn deformable_pipeline_with_tape() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth(dir, &["--variant", "deformable", "--steps", "3"]);
    assert!(dir.join("offsets.dyt").exists());
    let cfg = dir.join("run.cfg");
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text = text.replace("tape = false", "tape = true");
    std::fs::write(&cfg, text).unwrap();
    let out = dyspn(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    let tape = dyspn::io::read_tensor(&dir.join("out/tape.dyt")).unwrap();
    assert_eq!(tape.dims(), &[4, 24, 20]);
}

#[test]
fn eval_shape_mismatch_exits_1() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), &[]);
    let out = dyspn(&[
        "synth",
        "--output",
        b.path().to_str().unwrap(),
        "--height",
        "8",
        "--width",
        "8",
    ]);
    assert_eq!(code(&out), 0);
    let out = dyspn(&[
        "eval",
        "--pred",
        a.path().join("init.pgm").to_str().unwrap(),
        "--gt",
        b.path().join("gt.pgm").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("init.pgm") && err.contains("gt.pgm"), "{err}");
}

#[test]
fn oracle_check_passes_on_8x8() {
    let out = dyspn(&["oracle-check", "--size", "8", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    let diff: f64 = text
        .split("max-abs-diff ")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff <= 1e-10, "{text}");
    assert!(text.contains("PASS"));
}

#[test]
fn failed_check_exits_2() {
    let out = dyspn(&["gradcheck", "--size", "4", "--steps", "1", "--tolerance", "0"]);
    assert_eq!(code(&out), 2, "{out:?}");
    assert!(stdout(&out).contains("FAIL"));
    let out = dyspn(&["gradcheck", "--variant", "dilated", "--size", "4", "--steps", "1"]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn validation_errors_exit_1() {
    assert_eq!(code(&dyspn(&["--help"])), 0);
    assert_eq!(code(&dyspn(&["--version"])), 0);
    assert_eq!(code(&dyspn(&["frobnicate"])), 1);
    assert_eq!(code(&dyspn(&["oracle-check", "--size", "100"])), 1);
    assert_eq!(code(&dyspn(&["bench", "--threads", "0"])), 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "variant = ring7x7\ncolour = red\n").unwrap();
    let out = dyspn(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    std::fs::write(&cfg, "depth = missing.pgm\n").unwrap();
    let out = dyspn(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pgm"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bench_lists_every_variant() {
    let out = dyspn(&["bench", "--size", "16", "--steps", "2", "--reps", "1"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    for v in ["ring7x7", "dilated", "deformable"] {
        assert!(text.contains(v), "{text}");
    }
}
