use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pyrewire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pyrewire"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn toy_dir() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn train_on_sbm_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = pyrewire(&[
        "train", "--sbm", "--blocks", "2", "--epochs", "50", "--lr", "0.2", "--seed", "1", "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["test_acc"].as_f64().unwrap() >= 0.9);
    assert_eq!(summary["epochs"], 50);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,train_loss,val_loss,val_acc\n"));
    assert_eq!(metrics.lines().count(), 51);
    let spectra = fs::read_to_string(dir.path().join("spectra.csv")).unwrap();
    assert!(spectra.starts_with("epoch,layer,s1,s2,s3,s4,s5\n"));
    assert!(dir.path().join("model.ckpt").is_file());
}

#[test]
fn seeded_runs_are_bitwise_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = pyrewire(&[
            "train",
            "--lr",
            "0.2",
            "--sbm",
            "--epochs",
            "15",
            "--seed",
            "4",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    for f in ["metrics.csv", "spectra.csv", "model.ckpt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_epochs_reports_an_untrained_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = pyrewire(&[
        "train",
        "--lr",
        "0.2",
        "--sbm",
        "--epochs",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let acc = json(&dir.path().join("summary.json"))["test_acc"]
        .as_f64()
        .unwrap();
    assert!((0.2..=0.8).contains(&acc), "untrained accuracy {acc}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec![
            "train",
            "--lr",
            "0.2",
            "--data",
            "/definitely/not/here",
            "--out",
            out,
        ],
        vec!["train", "--lr", "0.2", "--out", out],
        vec!["train", "--sbm", "--out", out],
        vec![
            "train",
            "--lr",
            "0.2",
            "--sbm",
            "--config",
            "/missing.json",
            "--out",
            out,
        ],
        vec![
            "train",
            "--lr",
            "0.2",
            "--sbm",
            "--activation",
            "tanh",
            "--out",
            out,
        ],
        vec!["consensus", "--out", out],
        vec!["bogus"],
    ] {
        assert_eq!(pyrewire(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // valid flags, impossible split for a 3-node dataset
    let o = pyrewire(&[
        "train",
        "--lr",
        "0.2",
        "--data",
        &toy_dir(),
        "--name",
        "toy",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn toy_dataset_trains_with_a_small_split() {
    let dir = tempfile::tempdir().unwrap();
    let o = pyrewire(&[
        "train",
        "--lr",
        "0.2",
        "--data",
        &toy_dir(),
        "--name",
        "toy",
        "--train-per-class",
        "1",
        "--val",
        "1",
        "--test",
        "0",
        "--epochs",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"sbm": true, "lr": 0.2, "epochs": 3, "hidden": [8]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = pyrewire(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("summary.json"))["epochs"], 5);
}

#[test]
fn prune_writes_a_pyramidal_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = pyrewire(&[
        "prune",
        "--lr",
        "0.2",
        "--sbm",
        "--hidden",
        "32,16",
        "--epochs",
        "60",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan = json(&dir.path().join("width_plan.json"));
    let widths: Vec<u64> = plan["widths"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(widths.len(), 2);
    assert!(widths[0] >= widths[1] && widths[1] >= 2);
    assert!(plan["source_ranks"].is_array());
    let summary = json(&dir.path().join("prune_summary.json"));
    assert!(summary["pruned_test_acc"].as_f64().is_some());
}

#[test]
fn rewire_sweeps_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let o = pyrewire(&[
        "rewire",
        "--lr",
        "0.2",
        "--sbm",
        "--deltas",
        "0,1",
        "--epochs",
        "40",
        "--inject-fraction",
        "0.05",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(conv.starts_with("delta,epoch,train_loss,val_loss,val_acc,test_acc\n"));
    assert_eq!(conv.lines().count(), 1 + 2 * 40);
    let events = fs::read_to_string(dir.path().join("rewire_events.csv")).unwrap();
    assert!(events.starts_with("delta,epoch,layer,vertex,action,i,j,w,score\n"));
    assert!(
        events.lines().skip(1).all(|l| !l.starts_with("0,")),
        "delta 0 never edits"
    );
    let runs = json(&dir.path().join("rewire_summary.json"))["runs"]
        .as_array()
        .unwrap()
        .clone();
    assert_eq!(runs.len(), 2);
}

#[test]
fn rewire_data_mode_only_scores() {
    let dir = tempfile::tempdir().unwrap();
    let o = pyrewire(&[
        "rewire",
        "--lr",
        "0.2",
        "--sbm",
        "--mode",
        "data",
        "--top",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let scores = fs::read_to_string(dir.path().join("data_scores.csv")).unwrap();
    assert!(scores.starts_with("i,j,score\n"));
    assert_eq!(scores.lines().count(), 6);
}

#[test]
fn consensus_on_c4_reaches_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("c4.txt");
    fs::write(
        &sys,
        "4 4\n0.5 0.25 0 0.25\n0.25 0.5 0.25 0\n0 0.25 0.5 0.25\n0.25 0 0.25 0.5\n1 2 3 4\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = pyrewire(&[
        "consensus",
        "--system",
        sys.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("verdict.json"));
    assert_eq!(v["verdict"], "converges");
    assert_eq!(v["reached"], true);
    for x in v["final_state"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 2.5).abs() <= 1e-6);
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,x_0,x_1,x_2,x_3\n0,1,2,3,4\n"));
}

#[test]
fn diverging_consensus_fails_after_writing_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("d.txt");
    fs::write(&sys, "2 2\n2 0\n0 2\n1 1\n").unwrap();
    let out = dir.path().join("o");
    let o = pyrewire(&[
        "consensus",
        "--system",
        sys.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&out.join("verdict.json"))["verdict"], "diverges");
}

#[test]
fn spectra_replays_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let train_out = dir.path().join("t");
    let o = pyrewire(&[
        "train",
        "--lr",
        "0.2",
        "--sbm",
        "--epochs",
        "10",
        "--seed",
        "2",
        "--out",
        train_out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = dir.path().join("s");
    let ckpt = train_out.join("model.ckpt");
    let o = pyrewire(&[
        "spectra",
        "--sbm",
        "--seed",
        "2",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--epoch",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replay = fs::read_to_string(out.join("spectra.csv")).unwrap();
    let trained = fs::read_to_string(train_out.join("spectra.csv")).unwrap();
    // the last epoch of training describes the same model on the same data
    let last: Vec<&str> = trained.lines().filter(|l| l.starts_with("10,")).collect();
    let replayed: Vec<&str> = replay.lines().skip(1).collect();
    assert_eq!(replayed, last);
}
