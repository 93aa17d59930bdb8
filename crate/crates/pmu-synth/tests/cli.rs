use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmu-synth"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates `samples` SMIB records into `dir`.
fn simulate(dir: &Path, samples: usize, seed: u64) -> PathBuf {
    let n = samples.to_string();
    let seed = seed.to_string();
    ok(&["simulate", "--system", "smib", "--samples", &n, "--seed", &seed, "--out", s(dir)]);
    dir.join("dataset.csv")
}

fn train(data: &Path, out: &Path, iterations: usize, extra: &[&str]) {
    let it = iterations.to_string();
    let mut args = vec!["train", "--data", s(data), "--iterations", &it, "--seed", "3", "--out", s(out)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_writes_expected_layout() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["simulate", "--system", "smib", "--samples", "500", "--seed", "7", "--out", s(dir.path())]);
    assert!(stdout.contains("500"));
    let csv = fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 500 * 200);
    assert_eq!(csv.lines().next().unwrap(), "sample_id,step,time_s,i_mag_pu,i_phase_rad");
    let meta = json(&dir.path().join("dataset.meta.json"));
    assert!((meta["dt"].as_f64().unwrap() - 1.0 / 60.0).abs() < 1e-15);
    assert_eq!(meta["sample_count"], 500);
    assert_eq!(meta["source_tag"], "simulated");
    assert_eq!(meta["filter"], Value::Null);
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = simulate(a.path(), 20, 5);
    let pb = simulate(b.path(), 20, 5);
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
    let c = tempfile::tempdir().unwrap();
    let pc = simulate(c.path(), 20, 6);
    assert_ne!(fs::read(a.path().join("dataset.csv")).unwrap(), fs::read(pc).unwrap());
}

#[test]
fn ninebus_simulation_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--system", "ninebus", "--samples", "3", "--seed", "1", "--out", s(dir.path())]);
    let meta = json(&dir.path().join("dataset.meta.json"));
    assert_eq!(meta["system"], "ninebus");
    assert_eq!(meta["sample_count"], 3);
}

#[test]
fn bundled_case_file_is_accepted_by_config() {
    let dir = tempfile::tempdir().unwrap();
    let case = Path::new(env!("CARGO_MANIFEST_DIR")).join("cases/wscc9.json");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"simulation": {{"case_file": {:?}}}}}"#, s(&case))).unwrap();
    let with_file = dir.path().join("file");
    let builtin = dir.path().join("builtin");
    ok(&["simulate", "--config", s(&cfg), "--system", "ninebus", "--samples", "2", "--out", s(&with_file)]);
    ok(&["simulate", "--system", "ninebus", "--samples", "2", "--out", s(&builtin)]);
    assert_eq!(
        fs::read(with_file.join("dataset.csv")).unwrap(),
        fs::read(builtin.join("dataset.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["simulate", "--samples", "0", "--out", s(dir.path())]), 2);
    assert_eq!(code(&["simulate", "--system", "triangle"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"threshold": -1}"#).unwrap();
    assert_eq!(code(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]), 2);
    fs::write(&cfg, "not json").unwrap();
    assert_eq!(code(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]), 2);
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(
        code(&["generate", "--checkpoint", s(&missing), "--samples", "2", "--out", s(dir.path())]),
        3
    );
    assert_eq!(code(&["validate", "--data", s(&dir.path().join("nope.csv"))]), 3);
}

#[test]
fn one_iteration_writes_one_loss_row_and_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 70, 2);
    let out = dir.path().join("run");
    train(&data, &out, 1, &[]);
    for name in ["loss_critic.csv", "loss_generator.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2, "{name}");
        assert_eq!(lines[0], "iteration,value");
        assert!(lines[1].starts_with("1,"));
    }
    let ckpt = json(&out.join("checkpoint.json"));
    assert_eq!(ckpt["config"]["critic_steps"], 5);
    assert_eq!(ckpt["config"]["learning_rate"].as_f64(), Some(1e-4));
    assert_eq!(ckpt["config"]["clip"].as_f64(), Some(0.01));
    assert_eq!(ckpt["iteration"], 1);
}

#[test]
fn batch_larger_than_dataset_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 10, 2);
    let it = ["train", "--data", s(&data), "--iterations", "1", "--out", s(dir.path())];
    assert_eq!(code(&it), 2);
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 70, 4);
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    let rest = dir.path().join("rest");
    train(&data, &full, 3, &[]);
    train(&data, &part, 2, &[]);
    let ckpt = part.join("checkpoint.json");
    train(&data, &rest, 3, &["--resume", s(&ckpt)]);
    assert_eq!(
        fs::read(full.join("checkpoint.json")).unwrap(),
        fs::read(rest.join("checkpoint.json")).unwrap()
    );
    let resumed = fs::read_to_string(rest.join("loss_critic.csv")).unwrap();
    assert_eq!(resumed.lines().count(), 2);
    assert!(resumed.lines().nth(1).unwrap().starts_with("3,"));
    let all = fs::read_to_string(full.join("loss_critic.csv")).unwrap();
    assert_eq!(all.lines().nth(3), resumed.lines().nth(1));
}

#[test]
fn resume_rejects_a_different_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&dir.path().join("a"), 70, 4);
    let b = simulate(&dir.path().join("b"), 70, 5);
    let out = dir.path().join("run");
    train(&a, &out, 1, &[]);
    let ckpt = out.join("checkpoint.json");
    let args = ["train", "--data", s(&b), "--iterations", "2", "--resume", s(&ckpt), "--out", s(&out)];
    assert_eq!(code(&args), 2);
}

#[test]
fn generate_filter_options_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 70, 8);
    let run_dir = dir.path().join("run");
    train(&data, &run_dir, 2, &[]);
    let ckpt = run_dir.join("checkpoint.json");
    let gen = |name: &str, extra: &[&str]| -> PathBuf {
        let out = dir.path().join(name);
        let mut args = vec!["generate", "--checkpoint", s(&ckpt), "--samples", "100", "--seed", "9", "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args);
        out
    };
    let filtered = gen("filtered", &["--filter-cutoff", "5.0"]);
    let meta = json(&filtered.join("synthetic.meta.json"));
    assert_eq!(meta["filter"]["cutoff_hz"].as_f64(), Some(5.0));
    assert_eq!(meta["source_tag"], "synthetic");
    assert_eq!(meta["sample_count"], 100);
    let csv = fs::read_to_string(filtered.join("synthetic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 100 * 200);

    let raw = gen("raw", &["--no-filter"]);
    assert_eq!(json(&raw.join("synthetic.meta.json"))["filter"], Value::Null);

    let again = gen("again", &["--filter-cutoff", "5.0"]);
    assert_eq!(
        fs::read(filtered.join("synthetic.csv")).unwrap(),
        fs::read(again.join("synthetic.csv")).unwrap()
    );
    let nyquist = ["generate", "--checkpoint", s(&ckpt), "--filter-cutoff", "30", "--out", s(dir.path())];
    assert_eq!(code(&nyquist), 2);
}

#[test]
fn validate_clean_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 40, 7);
    let stdout = ok(&["validate", "--data", s(&data), "--out", s(dir.path())]);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["threshold"].as_f64(), Some(0.09));
    let fraction = report["realistic_fraction"].as_f64().unwrap();
    assert!(fraction >= 0.95, "{fraction}");
    assert!(stdout.contains("realistic_fraction"));
    assert_eq!(report["samples"].as_array().unwrap().len(), 40);
    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("bin_lower,bin_upper,count"));
    let total: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 40);
    assert_eq!(hist.lines().count(), 21);
}

#[test]
fn validate_threshold_flag_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 5, 7);
    ok(&["validate", "--data", s(&data), "--threshold", "0.2", "--out", s(dir.path())]);
    assert_eq!(json(&dir.path().join("report.json"))["threshold"].as_f64(), Some(0.2));
}

/// Rewrites a dataset with `shift` added to its phase column.
fn shifted_copy(src: &Path, dst_dir: &Path, shift: f64) -> PathBuf {
    fs::create_dir_all(dst_dir).unwrap();
    let text = fs::read_to_string(src).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let mut cols: Vec<String> = line.split(',').map(String::from).collect();
            let v: f64 = cols[4].parse().unwrap();
            cols[4] = (v + shift).to_string();
            out.push_str(&cols.join(","));
        }
        out.push('\n');
    }
    let dst = dst_dir.join("dataset.csv");
    fs::write(&dst, out).unwrap();
    fs::copy(src.with_file_name("dataset.meta.json"), dst_dir.join("dataset.meta.json")).unwrap();
    dst
}

fn column(path: &Path, step: usize, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|r| r[1] as usize == step)
        .map(|r| r[col])
        .collect()
}

/// Smallest mean absolute difference over all pairings (Heap's algorithm).
fn brute_force(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum::<f64>() / n as f64;
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

#[test]
fn wdist_self_shift_and_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(&dir.path().join("a"), 8, 1);
    let b = simulate(&dir.path().join("b"), 8, 2);
    let stdout = ok(&["wdist", s(&a), s(&a), "--out", s(dir.path())]);
    assert_eq!(stdout.trim(), "mean 0 max 0");

    let shifted = shifted_copy(&a, &dir.path().join("shifted"), 0.5);
    ok(&["wdist", s(&a), s(&shifted), "--out", s(dir.path())]);
    let report = json(&dir.path().join("wdist.json"));
    assert!(report["i_mag_pu"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    assert!(report["i_phase_rad"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| (v.as_f64().unwrap() - 0.5).abs() < 1e-12));

    ok(&["wdist", s(&a), s(&b), "--out", s(dir.path())]);
    let report = json(&dir.path().join("wdist.json"));
    for step in [0, 57, 199] {
        let expect = brute_force(&column(&a, step, 3), &column(&b, step, 3));
        let got = report["i_mag_pu"][step].as_f64().unwrap();
        assert!((got - expect).abs() < 1e-12, "step {step}: {got} vs {expect}");
    }

    let c = simulate(&dir.path().join("c"), 9, 2);
    assert_eq!(code(&["wdist", s(&a), s(&c), "--out", s(dir.path())]), 2);
}

#[test]
fn gradcheck_default_specs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["gradcheck", "--out", s(dir.path())]);
    assert!(stdout.contains("critic layer 0"));
    assert!(stdout.contains("generator layer 5"));
    let report = json(&dir.path().join("gradcheck.json"));
    assert_eq!(report["passed"], true);
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-5);
    assert_eq!(report["networks"][0]["layers"].as_array().unwrap().len(), 3);
}

#[test]
fn gradcheck_flags_a_corrupted_backward_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gradcheck", "--corrupt-backward", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&dir.path().join("gradcheck.json"));
    assert_eq!(report["passed"], false);
    assert!(report["max_rel_error"].as_f64().unwrap() >= 1e-4);
}

#[test]
fn gradcheck_reads_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("nets.json");
    fs::write(
        &spec,
        r#"{
  "generator_head": {"layer_sizes": [4, 6, 5], "activations": ["relu", "sigmoid"]},
  "critic": {"layer_sizes": [10, 7, 1], "activations": ["relu", "linear"]}
}"#,
    )
    .unwrap();
    ok(&["gradcheck", "--spec", s(&spec), "--out", s(dir.path())]);
    fs::write(&spec, r#"{"generator_head": 3}"#).unwrap();
    assert_eq!(code(&["gradcheck", "--spec", s(&spec), "--out", s(dir.path())]), 2);
}
