use std::path::Path;
use std::process::{Command, Output};

fn androcon(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_androcon"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let o = androcon(args, cwd);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    o
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes the default synthetic data set into `dir/data`.
fn synth(dir: &Path) {
    ok(&["synth", "--seed", "7", "-o", "data"], dir);
}

#[test]
fn synth_writes_dataset_raw_logs_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let data = dir.path().join("data");
    for f in ["dataset.csv", "trajectories.csv", "truth_map.json", "raw/indoor.csv", "raw/metro.csv"] {
        assert!(data.join(f).is_file(), "{f} missing");
    }
    let rows = std::fs::read_to_string(data.join("dataset.csv")).unwrap().lines().count();
    assert_eq!(rows, 5001);
}

#[test]
fn synth_accepts_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
epochs_per_class = 40
n_satellites = 12
k_pr = -0.19
k_adr = -0.19
latent_ar = 0.9
cn0_bb_correlation = 0.98
bb_cn0_offset = 3.0
agc_gain = 1.0
agc_offset = 0.0
start_time_ms = 0
seed = 1

[[classes]]
name = "a"
doppler = { mean = 0.0, epoch_sd = 1.0, sat_sd = 1.0 }
pru = { mean = 0.1, epoch_sd = 0.01, sat_sd = 0.01 }
rec_sv_tu = { mean = 20.0, epoch_sd = 2.0, sat_sd = 2.0 }
cn0 = { mean = 40.0, epoch_sd = 2.0, sat_sd = 2.0 }
rss = { mean = 40.0, epoch_sd = 2.0, sat_sd = 2.0 }
ambiguity_prob = 0.1
visibility = 0.8

[[classes]]
name = "b"
doppler = { mean = 50.0, epoch_sd = 1.0, sat_sd = 1.0 }
pru = { mean = 0.5, epoch_sd = 0.01, sat_sd = 0.01 }
rec_sv_tu = { mean = 80.0, epoch_sd = 2.0, sat_sd = 2.0 }
cn0 = { mean = 25.0, epoch_sd = 2.0, sat_sd = 2.0 }
rss = { mean = 30.0, epoch_sd = 2.0, sat_sd = 2.0 }
ambiguity_prob = 0.5
visibility = 0.5
"#;
    std::fs::write(dir.path().join("default.toml"), spec).unwrap();
    ok(&["synth", "--spec", "default.toml", "--seed", "7", "-o", "data/"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("data/dataset.csv")).unwrap();
    assert_eq!(text.lines().count(), 81);
    assert!(dir.path().join("data/raw/b.csv").is_file());
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = androcon(&["train", "--model", "gb", "--in", "data/train.csv", "-o", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MissingInput"), "{}", stderr(&o));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(androcon(&["bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(androcon(&["eval", "--in", "x.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(androcon(&["train", "--model", "svm", "--in", "x", "-o", "y"], dir.path()).status.code(), Some(2));
    assert_eq!(androcon(&["--help"], dir.path()).status.code(), Some(0));
    // a randomized step without a seed
    synth(dir.path());
    let o = androcon(&["eval", "--in", "data/dataset.csv", "-o", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn ten_fold_report_has_ten_folds() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&["eval", "--in", "data/dataset.csv", "--cv", "10", "--seed", "7", "-o", "cv.json"], dir.path());
    let v = json(&dir.path().join("cv.json"));
    assert_eq!(v["format"], "androcon-report/1");
    assert_eq!(v["result"]["folds"].as_array().unwrap().len(), 10);
    assert_eq!(v["pipeline"]["model"], "gb");
    assert!(v["result"]["mean"]["accuracy"].as_f64().unwrap() > 95.0);
    assert!(v["sub_seeds"]["cv-folds"].is_string());
}

#[test]
fn runs_are_byte_identical_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let d = dir.path();
    let before = std::fs::read(d.join("data/dataset.csv")).unwrap();
    for out in ["a", "b"] {
        ok(&["eval", "--in", "data/dataset.csv", "--model", "rf", "--split", "0.5", "--seed", "3", "-o", &format!("{out}.json")], d);
        ok(&["map", "--in", "data/trajectories.csv", "--truth", "data/truth_map.json", "-o", &format!("{out}_map.json")], d);
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    assert_eq!(std::fs::read(d.join("a_map.json")).unwrap(), std::fs::read(d.join("b_map.json")).unwrap());
    assert_eq!(std::fs::read(d.join("data/dataset.csv")).unwrap(), before);
    // a different seed changes the split
    ok(&["eval", "--in", "data/dataset.csv", "--model", "rf", "--split", "0.5", "--seed", "4", "-o", "c.json"], d);
    assert_ne!(json(&d.join("a.json"))["sub_seeds"], json(&d.join("c.json"))["sub_seeds"]);
}

#[test]
fn parse_reproduces_the_synthetic_dataset() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let raw: Vec<String> = ["flight", "indoor", "metro", "open_ground", "outdoor_crowded"]
        .iter()
        .map(|c| format!("data/raw/{c}.csv"))
        .collect();
    let mut args = vec!["parse", "--in"];
    args.extend(raw.iter().map(String::as_str));
    args.extend(["-o", "parsed.csv", "--diagnostics", "diag.json"]);
    ok(&args, dir.path());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("parsed.csv")).unwrap(),
        std::fs::read_to_string(dir.path().join("data/dataset.csv")).unwrap()
    );
    let d = json(&dir.path().join("diag.json"));
    assert_eq!(d["files"].as_array().unwrap().len(), 5);
    assert_eq!(d["files"][0]["diagnostics"]["skipped"].as_array().unwrap().len(), 0);
}

#[test]
fn train_then_score_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&["train", "--model", "nb", "--in", "data/dataset.csv", "-o", "nb.json"], dir.path());
    ok(&["eval", "--in", "data/dataset.csv", "--model-file", "nb.json", "-o", "r.json", "--confusion", "cm.csv"], dir.path());
    let v = json(&dir.path().join("r.json"));
    assert!(v["result"]["accuracy"].as_f64().unwrap() > 95.0);
    let cm = std::fs::read_to_string(dir.path().join("cm.csv")).unwrap();
    assert_eq!(cm.lines().count(), 6);
    let table = ok(&["report", "--in", "r.json"], dir.path());
    assert!(String::from_utf8_lossy(&table.stdout).contains("overall accuracy"));
}

#[test]
fn ablation_and_svid_subset_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(
        &["eval", "--in", "data/raw", "--model", "knn", "--split", "0.8", "--seed", "1", "--ablate-ukf", "--svid-subset", "0.5", "-o", "r.json"],
        dir.path(),
    );
    let v = json(&dir.path().join("r.json"));
    let a = &v["ukf_ablation"];
    let delta = a["with_ukf"].as_f64().unwrap() - a["without_ukf"].as_f64().unwrap();
    assert!((a["accuracy_delta"].as_f64().unwrap() - delta).abs() < 1e-6);
    assert_eq!(v["svid_subset"]["fraction"], 0.5);
    assert!(v["svid_subset"]["accuracy_subset"].as_f64().unwrap() > 0.0);
    let o = androcon(&["eval", "--in", "data/dataset.csv", "--seed", "1", "--svid-subset", "0.5", "-o", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn importance_and_map_outputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    ok(&["importance", "--in", "data/dataset.csv", "--model", "rf", "--seed", "2", "--repeats", "3", "-o", "imp.json"], dir.path());
    let v = json(&dir.path().join("imp.json"));
    assert_eq!(v["importance"].as_array().unwrap().len(), 8);
    ok(&["map", "--in", "data/trajectories.csv", "--truth", "data/truth_map.json", "-o", "map.json", "--svg", "map.svg"], dir.path());
    let m = json(&dir.path().join("map.json"));
    assert!(m["gdm"]["summary"]["p90"].as_f64().unwrap() < 3.5);
    assert!(m["sdm"]["summary"]["count"].as_u64().unwrap() > 0);
    assert!(std::fs::read_to_string(dir.path().join("map.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn malformed_inputs_get_module_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("log.txt"), "Raw,1000,5,3\n").unwrap();
    let o = androcon(&["parse", "--in", "log.txt", "-o", "out.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[ingest::HeaderMissing]"), "{}", stderr(&o));
    std::fs::write(dir.path().join("empty.txt"), "# nothing logged\n").unwrap();
    let o = androcon(&["parse", "--in", "empty.txt", "-o", "out.csv"], dir.path());
    assert!(stderr(&o).contains("error[ingest::TooFewRows]"), "{}", stderr(&o));
    assert!(!dir.path().join("out.csv").exists());
    std::fs::write(dir.path().join("t.csv"), "t,x,y,activity_label,source_id\n0,1,2,flying,u\n").unwrap();
    let o = androcon(&["map", "--in", "t.csv", "-o", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[floormap::InvalidInput]"), "{}", stderr(&o));
    std::fs::write(dir.path().join("bad.toml"), "nonsense = [\n").unwrap();
    let o = androcon(&["filter", "--in", "t.csv", "-o", "f.csv", "--config", "bad.toml"], dir.path());
    assert!(stderr(&o).contains("error[cli::InvalidConfig]"), "{}", stderr(&o));
}
