//! End-to-end runs of the `stvo-esn` binary on a small synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SIDE: usize = 8;
const CLASSES: usize = 10;

/// IDX header: two zero bytes, type code, dimension count, then big-endian sizes.
fn idx(type_dims: [u8; 2], dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, type_dims[0], type_dims[1]];
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend(payload);
    out
}

/// Linear congruential noise, enough to make classes overlap a little.
fn noise(state: &mut u64) -> u8 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (*state >> 58) as u8
}

fn write_split(dir: &Path, prefix: &str, n: usize, seed: u64) {
    let mut state = seed;
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % CLASSES) as u8;
        labels.push(label);
        for p in 0..SIDE * SIDE {
            // each class lights a different diagonal band
            let on = (p / SIDE + p % SIDE) % CLASSES == label as usize;
            let base: u8 = if on { 180 } else { 20 };
            pixels.push(base.saturating_add(noise(&mut state)));
        }
    }
    let side = SIDE as u32;
    fs::write(
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        idx([8, 3], &[n as u32, side, side], &pixels),
    )
    .unwrap();
    fs::write(
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
        idx([8, 1], &[n as u32], &labels),
    )
    .unwrap();
}

fn corpus() -> TempDir {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("mnist");
    fs::create_dir_all(&dir).unwrap();
    write_split(&dir, "train", 400, 1);
    write_split(&dir, "t10k", 100, 2);
    root
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stvo-esn"))
        .args(args)
        .env_remove("STVO_ESN_DATA")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(data: &Path, out: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec![
        "train",
        "--data-dir",
        s(data),
        "--out",
        s(out),
        "--n-theta",
        "30",
        "--n-f",
        "6",
    ];
    args.extend_from_slice(extra);
    ok(run(&args));
    out.join("model.json")
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let data = corpus();
    let o = run(&["train", "--data-dir", s(data.path()), "--activation", "tanh"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["train", "--data-dir", s(data.path()), "--set", "n_theta=0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["train", "--data-dir", s(data.path()), "--set", "no_such_key=3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_data_exits_two() {
    let empty = tempfile::tempdir().unwrap();
    let o = run(&["train", "--data-dir", s(empty.path()), "--n-theta", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn subcritical_calibration_grid_exits_three() {
    let data = corpus();
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "calibrate",
        "--data-dir",
        s(data.path()),
        "--out",
        s(out.path()),
        "--grid-j-dc",
        "5.0",
        "--validation",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_and_eval_are_deterministic() {
    let data = corpus();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = train(data.path(), a.path(), &["--seed", "3"]);
    let mb = train(data.path(), b.path(), &["--seed", "3"]);
    assert_eq!(fs::read(&ma).unwrap(), fs::read(&mb).unwrap());
    assert!(a.path().join("manifest.json").is_file());

    let pa = a.path().join("pred.txt");
    let ea = ok(run(&[
        "eval",
        "--model",
        s(&ma),
        "--data-dir",
        s(data.path()),
        "--predictions",
        s(&pa),
    ]));
    let eb = ok(run(&["eval", "--model", s(&mb), "--data-dir", s(data.path())]));
    assert_eq!(ea, eb);
    assert!(ea.starts_with("accuracy: "), "{ea}");
    assert_eq!(fs::read_to_string(&pa).unwrap().lines().count(), 100);

    // a different mask seed gives a different model
    let c = tempfile::tempdir().unwrap();
    let mc = train(data.path(), c.path(), &["--seed", "4"]);
    assert_ne!(fs::read(&ma).unwrap(), fs::read(&mc).unwrap());
}

#[test]
fn identity_model_reproduces_the_linear_baseline() {
    let data = corpus();
    let out = tempfile::tempdir().unwrap();
    let model = train(data.path(), out.path(), &["--activation", "identity"]);
    let eval = ok(run(&["eval", "--model", s(&model), "--data-dir", s(data.path())]));
    let base = ok(run(&["baseline", "--data-dir", s(data.path()), "--n-f", "6"]));
    let first = |t: &str| t.lines().next().unwrap().to_string();
    assert_eq!(first(&eval), first(&base));
}

#[test]
fn inspect_reports_the_configuration() {
    let data = corpus();
    let out = tempfile::tempdir().unwrap();
    let model = train(data.path(), out.path(), &["--amplitude", "0.25", "--seed", "9"]);
    let text = ok(run(&["inspect", "--model", s(&model)]));
    for needle in [
        "n_theta: 30",
        "n_f: 6",
        "mask_seed: 9",
        "amplitude: 0.25",
        "activation: stvo",
        "state_reset: per-image",
    ] {
        assert!(text.contains(needle), "missing '{needle}' in\n{text}");
    }
}

#[test]
fn config_file_and_overrides() {
    let data = corpus();
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("exp.toml");
    fs::write(
        &cfg,
        "dataset = \"mnist\"\nn_theta = 12\nactivation = \"relu\"\nn_f = 5\n",
    )
    .unwrap();
    let model = ok(run(&[
        "train",
        "--config",
        s(&cfg),
        "--data-dir",
        s(data.path()),
        "--out",
        s(out.path()),
        "--set",
        "n_theta=14",
    ]));
    assert!(model.contains("relu n_theta=14 n_f=5"), "{model}");
}

#[test]
fn calibrate_sweep_and_plot_write_their_outputs() {
    let data = corpus();
    let out = tempfile::tempdir().unwrap();
    let cal = ok(run(&[
        "calibrate",
        "--data-dir",
        s(data.path()),
        "--out",
        s(out.path()),
        "--n-f",
        "6",
        "--grid-j-dc",
        "6.5,7",
        "--grid-amplitude",
        "0.5",
        "--grid-d-t",
        "8e-4",
        "--calib-n-theta",
        "20",
        "--validation",
        "100",
    ]));
    assert!(cal.contains("best: j_dc = "), "{cal}");
    let calibrated = out.path().join("calibrated.toml");
    assert!(calibrated.is_file() && out.path().join("calibration.json").is_file());

    let sweep_dir = out.path().join("sweep");
    let args = [
        "sweep",
        "--config",
        s(&calibrated),
        "--data-dir",
        s(data.path()),
        "--out",
        s(&sweep_dir),
        "--seeds",
        "0..2",
        "--n-theta-values",
        "6,12",
        "--activations",
        "stvo,identity",
    ];
    let first = ok(run(&args));
    for f in [
        "sweep.jsonl",
        "results.csv",
        "results.json",
        "accuracy.svg",
        "nrmse.svg",
        "manifest.json",
    ] {
        assert!(sweep_dir.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(sweep_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    // the second invocation resumes every cell from the store
    let again = ok(run(&args));
    let table = |t: &str| t.lines().take(5).collect::<Vec<_>>().join("\n");
    assert_eq!(table(&first), table(&again));

    let plots = out.path().join("plots");
    ok(run(&[
        "plot",
        "--input",
        s(&sweep_dir.join("results.json")),
        "--out",
        s(&plots),
    ]));
    let svg = fs::read_to_string(plots.join("accuracy.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let bad = run(&[
        "sweep",
        "--data-dir",
        s(data.path()),
        "--out",
        s(&sweep_dir),
        "--n-theta-values",
        "12,6",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
