//! Drives the compiled binary: exit-code contract, netload output, fixture
//! generation, prediction traces, and byte-identical reruns (acceptance
//! criterion 8).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedload"))
}

fn run_in(dir: &Path, threads: &str, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

const DETERMINISM_CONFIG: &str = r#"
[data]
synthetic = { n_clients = 8, n_days = 8 }

[scenario]
rounds = 4
subset_size = 3
local_epochs = 1
learning_rate = 0.02
optimizer = "sgd"
layer_widths = [1, 6]
seed = 11

[partition]
n_participants = 6
n_holdout = 2

[run]
out_dir = "out"
personalize = true
personalize_epochs = 2
"#;

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Acceptance criterion 8: identical config produces byte-identical report
/// and prediction files, independent of the worker count.
#[test]
fn criterion_8_byte_identical_runs_across_worker_counts() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        fs::write(d.path().join("config.toml"), DETERMINISM_CONFIG).unwrap();
    }
    let out1 = run_in(d1.path(), "1", &["run", "config.toml"]);
    assert!(out1.status.success(), "{}", String::from_utf8_lossy(&out1.stderr));
    let out2 = run_in(d2.path(), "4", &["run", "config.toml"]);
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));

    let files1 = collect_files(&d1.path().join("out"));
    let files2 = collect_files(&d2.path().join("out"));
    assert!(!files1.is_empty());
    assert_eq!(
        files1.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        files2.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()
    );
    for ((name1, bytes1), (_, bytes2)) in files1.iter().zip(&files2) {
        assert_eq!(bytes1, bytes2, "file {} differs between runs", name1);
    }
    println!("ACCEPTANCE 8 run determinism: PASS ({} files identical)", files1.len());
}

#[test]
fn netload_reproduces_paper_gains() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s1.toml"),
        "[data]\nsynthetic = { n_clients = 5, n_days = 5 }\n[scenario]\nscenario = 1\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["netload", "s1.toml"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("G_s = 0.976250"), "{}", stdout);

    fs::write(
        dir.path().join("s2.toml"),
        "[data]\nsynthetic = { n_clients = 5, n_days = 5 }\n[scenario]\nscenario = 2\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["netload", "s2.toml"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("G_s = 0.905000"), "{}", stdout);

    // Literal one-directional reading of the traffic equation.
    fs::write(
        dir.path().join("s1m1.toml"),
        "[data]\nsynthetic = { n_clients = 5, n_days = 5 }\n[scenario]\nscenario = 1\n[netload]\ndirection_multiplier = 1\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["netload", "s1m1.toml"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("G_s = 0.988125"), "{}", stdout);
}

#[test]
fn run_report_has_rounds_and_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("config.toml"),
        r#"
[data]
synthetic = { n_clients = 25, n_days = 10 }

[scenario]
scenario = 1
layer_widths = [1, 8]
learning_rate = 0.01
seed = 3

[partition]
n_participants = 20
n_holdout = 5

[run]
out_dir = "out"
personalize = true
"#,
    )
    .unwrap();
    let out = run_in(dir.path(), "2", &["run", "config.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = fs::read_to_string(dir.path().join("out/report.toml")).unwrap();
    assert_eq!(report.matches("[[rounds]]").count(), 20);
    assert!(report.contains("[participants_eval]"));
    assert!(report.contains("[holdout_eval]"));
    assert!(report.contains("[participants_personalization]"));
    assert!(report.contains("[holdout_personalization]"));
    assert!(report.contains("[network_load]"));

    // one global trace per client, participants and holdout alike
    let traces = fs::read_dir(dir.path().join("out/predictions_global")).unwrap().count();
    assert_eq!(traces, 25);
    let personalized = fs::read_dir(dir.path().join("out/predictions_personalized"))
        .unwrap()
        .count();
    assert_eq!(personalized, 25);

    // global and personalized traces differ for at least one holdout client
    let any = fs::read_dir(dir.path().join("out/predictions_global"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .file_name();
    let g = fs::read(dir.path().join("out/predictions_global").join(&any)).unwrap();
    let p = fs::read(dir.path().join("out/predictions_personalized").join(&any)).unwrap();
    assert_ne!(g, p);
}

#[test]
fn synth_then_run_from_csv_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("synth.toml"),
        r#"
[data]
synthetic = { n_clients = 6, n_days = 8 }

[scenario]
seed = 21

[run]
out_dir = "fixtures"
"#,
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["synth", "synth.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(dir.path().join("fixtures")).unwrap().count(), 6);

    fs::write(
        dir.path().join("run.toml"),
        r#"
[data]
csv_dir = "fixtures"

[scenario]
rounds = 2
subset_size = 2
layer_widths = [1, 4]
optimizer = "sgd"
learning_rate = 0.05
seed = 21

[partition]
n_participants = 4
n_holdout = 2

[run]
out_dir = "out"
"#,
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["run", "run.toml"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run_in(
        dir.path(),
        "1",
        &["predict", "out/model.flsm", "fixtures/c0000.csv", "trace.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("timestamp,actual_kw,predicted_kw\n"));
    assert!(trace.lines().count() > 1);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // config error -> 1
    fs::write(dir.path().join("bad.toml"), "[scenario]\nrounds = 0\n").unwrap();
    let out = run_in(dir.path(), "1", &["run", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    // data error -> 2
    fs::create_dir(dir.path().join("empty")).unwrap();
    fs::write(
        dir.path().join("nodata.toml"),
        "[data]\ncsv_dir = \"empty\"\n[partition]\nn_participants = 2\nn_holdout = 1\n",
    )
    .unwrap();
    let out = run_in(dir.path(), "1", &["run", "nodata.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("no client CSV files"), "{}", msg);
}
