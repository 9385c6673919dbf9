use std::path::{Path, PathBuf};

use androcon::classify::importance::permutation_importance;
use androcon::classify::metrics::EvalReport;
use androcon::classify::validation::split_indices;
use androcon::classify::{ClassifyError, ModelKind};
use androcon::floormap::{
    build_floor_map, gdm, parse_trajectory_csv, render_svg, sdm, trajectories_from_samples, write_trajectory_csv, FloorMap,
    Registration,
};
use androcon::ingest::{drop_correlated, parse_gnss_log, Aggregation, ImputationPolicy, LabeledDataset};
use androcon::pipeline::{
    ablate_ukf, cross_validate_pipeline, dataset_from_logs, denoise_dataset, fit_pipeline, prepare, split_evaluate,
    FittedPipeline, LabeledLog, PipelineConfig,
};
use androcon::report::{
    ablation_json, confusion_csv, cv_json, discrepancy_json, eval_json, importance_json, map_json, metrics_table, Report,
};
use androcon::synth::{generate_labeled_dataset, generate_trajectories, LayoutSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::fsio::*;

pub const MODEL_FILE_FORMAT: &str = "androcon-pipeline/1";
const DEFAULT_FOLDS: usize = 10;
const SDM_SAMPLES_PER_EDGE: usize = 10;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    seed: u64,
    pipeline: FittedPipeline,
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Parse(a) => parse(a),
        Command::Synth(a) => synth(a),
        Command::Filter(a) => filter(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Importance(a) => importance(a),
        Command::Map(a) => map(a),
        Command::Report(a) => report(a),
    }
}

fn seed_or_usage(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("{what} is randomized: pass --seed or set `seed` in --config")))
}

fn pipeline_config(cfg: &RunConfig, model: Option<ModelKind>, t: &StageToggles) -> PipelineConfig {
    let mut p = cfg.pipeline.clone();
    if let Some(m) = model {
        p.model = m;
    }
    p.ukf &= !t.no_ukf;
    p.standardize &= !t.no_standardize;
    p.lda &= !t.no_lda;
    p
}

fn write_report(path: &Path, r: &Report) -> Result<(), CliError> {
    write_atomic(path, r.to_json_string().as_bytes())
}

fn check_fraction(f: f64) -> Result<(), CliError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--svid-subset must lie in (0, 1], got {f}")))
    }
}

fn read_log(path: &Path, class_name: &str) -> Result<(LabeledLog, Value), CliError> {
    let parsed = parse_gnss_log(open(path)?)?;
    let diag = json!({
        "file": path.display().to_string(),
        "class": class_name,
        "diagnostics": parsed.diagnostics,
    });
    Ok((
        LabeledLog {
            class_name: class_name.to_string(),
            measurements: parsed.measurements,
        },
        diag,
    ))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Raw logs in a directory, sorted by name; the file stem is the class.
fn log_dir(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv" || e == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .csv or .txt logs in `{}`", dir.display())));
    }
    Ok(files)
}

fn parse(a: ParseArgs) -> Result<(), CliError> {
    require_inputs(a.inputs.iter().chain(a.seed.config.as_ref()))?;
    if !a.labels.is_empty() && a.labels.len() != a.inputs.len() {
        return Err(CliError::Usage(format!("{} labels for {} inputs", a.labels.len(), a.inputs.len())));
    }
    let cfg = load_config(a.seed.config.as_ref())?;
    let seed = a.seed.seed.or(cfg.seed);
    if let Some(f) = a.svid_subset {
        check_fraction(f)?;
        seed_or_usage(seed, "--svid-subset")?;
    }
    let mut logs = Vec::new();
    let mut diags = Vec::new();
    for (i, p) in a.inputs.iter().enumerate() {
        let label = a.labels.get(i).cloned().unwrap_or_else(|| stem(p));
        let (log, d) = read_log(p, &label)?;
        logs.push(log);
        diags.push(d);
    }
    let policy = match a.impute {
        Imputation::Zero => ImputationPolicy::Zero,
        Imputation::DatasetMean => ImputationPolicy::DatasetMean,
        Imputation::Reject => ImputationPolicy::Reject,
    };
    let agg = match a.agg {
        Agg::Mean => Aggregation::Mean,
        Agg::Median => Aggregation::Median,
    };
    let ds = dataset_from_logs(&logs, a.svid_subset, policy, agg, seed.unwrap_or(0))?;
    write_dataset(&a.out, &ds)?;
    if let Some(p) = &a.diagnostics {
        let mut r = Report::new("parse", seed.unwrap_or(0));
        if a.svid_subset.is_some() {
            r.sub_seed("svid-subset");
        }
        r.section("files", &diags);
        write_report(p, &r)?;
    }
    let accepted: usize = logs.iter().map(|l| l.measurements.len()).sum();
    eprintln!("parsed {} log(s): {accepted} measurements, {} epoch rows", logs.len(), ds.len());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    require_inputs(a.spec.iter().chain(a.layout.iter()))?;
    let mut spec: ScenarioSpec = match &a.spec {
        Some(p) => read_toml(p)?,
        None => ScenarioSpec::default(),
    };
    let mut layout: LayoutSpec = match &a.layout {
        Some(p) => read_toml(p)?,
        None => LayoutSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
        layout.seed = s;
    }
    let g = generate_labeled_dataset(&spec)?;
    write_dataset(&a.out.join("dataset.csv"), &g.dataset)?;
    for r in &g.recordings {
        write_atomic(&a.out.join("raw").join(format!("{}.csv", r.class_name)), r.raw_log().as_bytes())?;
    }
    let l = generate_trajectories(&layout)?;
    let traj_path = a.out.join("trajectories.csv");
    let mut buf = Vec::new();
    write_trajectory_csv(&l.samples, &mut buf).map_err(io_err(&traj_path))?;
    write_atomic(&traj_path, &buf)?;
    let truth = serde_json::to_string_pretty(&l.truth.to_json()).expect("map serializes") + "\n";
    write_atomic(&a.out.join("truth_map.json"), truth.as_bytes())?;
    eprintln!(
        "wrote {} rows over {} classes, {} raw logs, {} trajectories to {}",
        g.dataset.len(),
        g.dataset.n_classes(),
        g.recordings.len(),
        l.trajectories.len(),
        a.out.display()
    );
    Ok(())
}

fn filter(a: FilterArgs) -> Result<(), CliError> {
    require_inputs(std::iter::once(&a.input).chain(a.config.as_ref()))?;
    let cfg = load_config(a.config.as_ref())?;
    let mut ds = read_dataset(&a.input)?;
    if !a.no_ukf {
        ds = denoise_dataset(&ds, &cfg.pipeline.ukf_model)?;
    }
    if let Some(t) = a.drop_correlated {
        let (kept, dropped) = drop_correlated(&ds, t)?;
        eprintln!("dropped {}", if dropped.is_empty() { "nothing".to_string() } else { dropped.join(", ") });
        ds = kept;
    }
    write_dataset(&a.out, &ds)
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    require_inputs(std::iter::once(&a.input).chain(a.seed.config.as_ref()))?;
    let cfg = load_config(a.seed.config.as_ref())?;
    let p = pipeline_config(&cfg, a.model, &a.toggles);
    let seed = match a.seed.seed.or(cfg.seed) {
        Some(s) => s,
        // the remaining learners are deterministic
        None if p.model == ModelKind::Rf => return Err(seed_or_usage(None, "training rf").unwrap_err()),
        None => 0,
    };
    let ds = read_dataset(&a.input)?;
    let prepared = prepare(&ds, &p)?;
    let fitted = fit_pipeline(&prepared, &p, androcon::seed::derive(seed, "train"))?;
    let file = ModelFile {
        format: MODEL_FILE_FORMAT.to_string(),
        seed,
        pipeline: fitted,
    };
    let mut text = serde_json::to_string(&file).expect("model serializes");
    text.push('\n');
    write_atomic(&a.out, text.as_bytes())?;
    eprintln!("trained {} on {} rows", p.model, ds.len());
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let m: ModelFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::from(ClassifyError::UnsupportedFormat(e.to_string())))?;
    if m.format != MODEL_FILE_FORMAT {
        return Err(ClassifyError::UnsupportedFormat(format!("expected `{MODEL_FILE_FORMAT}`, found `{}`", m.format)).into());
    }
    Ok(m)
}

/// Renumbers `ds` labels to the model's class order.
fn align_classes(ds: &LabeledDataset, class_names: &[String]) -> Result<LabeledDataset, CliError> {
    let map: Vec<usize> = ds
        .class_names
        .iter()
        .map(|n| {
            class_names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| ClassifyError::InvalidParameter(format!("class `{n}` unknown to the model")))
        })
        .collect::<Result<_, _>>()?;
    Ok(LabeledDataset {
        labels: ds.labels.iter().map(|&l| map[l]).collect(),
        class_names: class_names.to_vec(),
        ..ds.clone()
    })
}

enum Mode {
    Cv(usize),
    Split(f64),
}

/// Accuracy, full JSON and the report whose confusion matrix is exported.
fn evaluate(ds: &LabeledDataset, p: &PipelineConfig, mode: &Mode, seed: u64) -> Result<(f64, Value, EvalReport), CliError> {
    Ok(match *mode {
        Mode::Cv(k) => {
            let r = cross_validate_pipeline(ds, p, k, seed)?;
            (r.mean.accuracy, cv_json(&r, &ds.class_names), r.mean)
        }
        Mode::Split(ratio) => {
            let o = split_evaluate(ds, p, ratio, seed)?;
            let v = json!({"n_train": o.n_train, "n_test": o.n_test, "test": eval_json(&o.report, &ds.class_names)});
            (o.report.accuracy, v, o.report)
        }
    })
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    require_inputs(std::iter::once(&a.input).chain(a.model_file.as_ref()).chain(a.seed.config.as_ref()))?;
    let cfg = load_config(a.seed.config.as_ref())?;

    if let Some(mf) = &a.model_file {
        let m = load_model(mf)?;
        let ds = align_classes(&read_dataset(&a.input)?, &m.pipeline.model.class_names)?;
        let r = m.pipeline.evaluate_raw(&ds)?;
        let mut rep = Report::new("eval", m.seed);
        rep.section("mode", json!({"kind": "model_file", "model": m.pipeline.model.kind}));
        rep.section("result", eval_json(&r, &ds.class_names));
        write_report(&a.out, &rep)?;
        if let Some(c) = &a.confusion {
            write_atomic(c, confusion_csv(&r, &ds.class_names).as_bytes())?;
        }
        eprintln!("accuracy {:.2}% on {} rows", r.accuracy, ds.len());
        return Ok(());
    }

    let seed = seed_or_usage(a.seed.seed.or(cfg.seed), "evaluation")?;
    let p = pipeline_config(&cfg, a.model, &a.toggles);
    let mode = match (a.cv, a.split) {
        (_, Some(r)) if !(r > 0.0 && r < 1.0) => return Err(CliError::Usage(format!("--split must lie in (0, 1), got {r}"))),
        (_, Some(r)) => Mode::Split(r),
        (Some(k), None) if k < 2 => return Err(CliError::Usage(format!("--cv needs at least 2 folds, got {k}"))),
        (k, None) => Mode::Cv(k.unwrap_or(DEFAULT_FOLDS)),
    };

    let mut rep = Report::new("eval", seed);
    match mode {
        Mode::Cv(_) => {
            rep.sub_seed("cv-folds");
            rep.sub_seed("cv-train");
        }
        Mode::Split(_) => {
            rep.sub_seed("split");
            rep.sub_seed("train");
        }
    }
    rep.section("pipeline", &p);
    rep.section(
        "mode",
        match mode {
            Mode::Cv(k) => json!({"kind": "cv", "k": k}),
            Mode::Split(r) => json!({"kind": "split", "train_ratio": r}),
        },
    );

    let ds = if a.input.is_dir() {
        let logs = log_dir(&a.input)?
            .iter()
            .map(|f| read_log(f, &stem(f)).map(|(l, _)| l))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(f) = a.svid_subset {
            check_fraction(f)?;
            rep.sub_seed("svid-subset");
            let full = dataset_from_logs(&logs, None, ImputationPolicy::DatasetMean, Aggregation::Mean, seed)?;
            let (acc_full, _, _) = evaluate(&full, &p, &mode, seed)?;
            let thinned = dataset_from_logs(&logs, Some(f), ImputationPolicy::DatasetMean, Aggregation::Mean, seed)?;
            let (acc_sub, _, _) = evaluate(&thinned, &p, &mode, seed)?;
            rep.section(
                "svid_subset",
                json!({"fraction": f, "accuracy_full": acc_full, "accuracy_subset": acc_sub, "accuracy_drop": acc_full - acc_sub}),
            );
            thinned
        } else {
            dataset_from_logs(&logs, None, ImputationPolicy::DatasetMean, Aggregation::Mean, seed)?
        }
    } else {
        if a.svid_subset.is_some() {
            return Err(CliError::Usage("--svid-subset needs a directory of raw logs as --in".into()));
        }
        read_dataset(&a.input)?
    };

    let (acc, result, shown) = evaluate(&ds, &p, &mode, seed)?;
    rep.section("result", result);
    if a.ablate_ukf {
        match mode {
            Mode::Cv(k) => {
                rep.section("ukf_ablation", ablation_json(&ablate_ukf(&ds, &p, k, seed)?, &ds.class_names));
            }
            Mode::Split(_) => {
                let (on, _, _) = evaluate(&ds, &PipelineConfig { ukf: true, ..p.clone() }, &mode, seed)?;
                let (off, _, _) = evaluate(&ds, &PipelineConfig { ukf: false, ..p.clone() }, &mode, seed)?;
                rep.section("ukf_ablation", json!({"with_ukf": on, "without_ukf": off, "accuracy_delta": on - off}));
            }
        }
    }
    write_report(&a.out, &rep)?;
    if let Some(c) = &a.confusion {
        write_atomic(c, confusion_csv(&shown, &ds.class_names).as_bytes())?;
    }
    eprintln!("{} accuracy {:.2}% on {} rows", p.model, acc, ds.len());
    Ok(())
}

fn importance(a: ImportanceArgs) -> Result<(), CliError> {
    require_inputs(std::iter::once(&a.input).chain(a.seed.config.as_ref()))?;
    let cfg = load_config(a.seed.config.as_ref())?;
    let seed = seed_or_usage(a.seed.seed.or(cfg.seed), "permutation importance")?;
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let p = pipeline_config(&cfg, a.model, &a.toggles);
    let ds = read_dataset(&a.input)?;
    let prepared = prepare(&ds, &p)?;
    let mut rep = Report::new("importance", seed);
    let (tr, te) = split_indices(&prepared, a.split, rep.sub_seed("split"))?;
    let fitted = fit_pipeline(&prepared.subset(&tr), &p, rep.sub_seed("train"))?;
    let test = prepared.subset(&te);
    let baseline = fitted.evaluate(&test)?;
    let scores = permutation_importance(&fitted, &test, a.repeats, rep.sub_seed("importance"));
    rep.section("pipeline", &p);
    rep.section("repeats", a.repeats);
    rep.section("test_accuracy", baseline.accuracy);
    rep.section("importance", importance_json(&scores, &ds.feature_names));
    write_report(&a.out, &rep)?;
    eprintln!("ranked {} features over {} held-out rows", scores.len(), test.len());
    Ok(())
}

fn map(a: MapArgs) -> Result<(), CliError> {
    require_inputs(std::iter::once(&a.input).chain(a.truth.as_ref()).chain(a.config.as_ref()))?;
    let cfg = load_config(a.config.as_ref())?;
    let samples = parse_trajectory_csv(open(&a.input)?)?;
    let trajectories = trajectories_from_samples(&samples)?;
    let result = build_floor_map(&trajectories, &cfg.map)?;
    let mut rep = Report::new("map", cfg.seed.unwrap_or(0));
    rep.section("trajectories", trajectories.len());
    rep.section("result", map_json(&result));
    let mut drawn = result.map.clone();
    let mut reference = None;
    if let Some(t) = &a.truth {
        let truth: FloorMap = serde_json::from_str(&read_text(t)?).map_err(|e| CliError::InvalidReport {
            path: t.clone(),
            message: e.to_string(),
        })?;
        let g = gdm(&result.map, &truth, Registration::RigidFit);
        let s = sdm(&result.map, &truth, SDM_SAMPLES_PER_EDGE, Registration::RigidFit)?;
        eprintln!("GDM p90 {:.2} m, max {:.2} m", g.summary.p90, g.summary.max);
        drawn = result.map.transformed(&g.transform);
        rep.section("gdm", discrepancy_json(&g));
        rep.section("sdm", discrepancy_json(&s));
        reference = Some(truth);
    }
    write_report(&a.out, &rep)?;
    if let Some(svg) = &a.svg {
        write_atomic(svg, render_svg(&drawn, reference.as_ref()).as_bytes())?;
    }
    eprintln!(
        "{} landmarks from {} trajectories; cost {:.3} -> {:.3}",
        result.map.landmarks.len(),
        trajectories.len(),
        result.outcome.initial_cost,
        result.outcome.final_cost
    );
    Ok(())
}

/// The evaluation block of a report: the CV mean, a split's test set or a
/// model-file result.
fn find_eval(v: &Value) -> Option<&Value> {
    let r = v.get("result")?;
    [r.get("mean"), r.get("test"), Some(r)]
        .into_iter()
        .flatten()
        .find(|e| e.get("confusion").is_some() && e.get("classes").is_some())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    require_inputs([&a.input])?;
    let bad = |m: &str| CliError::InvalidReport {
        path: a.input.clone(),
        message: m.to_string(),
    };
    let v: Value = serde_json::from_str(&read_text(&a.input)?).map_err(|e| bad(&e.to_string()))?;
    if v.get("format").and_then(Value::as_str) != Some(androcon::report::REPORT_FORMAT) {
        return Err(bad("not an androcon report"));
    }
    let e = find_eval(&v).ok_or_else(|| bad("no evaluation result"))?;
    let confusion: Vec<Vec<u64>> = serde_json::from_value(e["confusion"].clone()).map_err(|e| bad(&e.to_string()))?;
    let classes: Vec<String> = serde_json::from_value(e["classes"].clone()).map_err(|e| bad(&e.to_string()))?;
    if confusion.len() != classes.len() || confusion.iter().any(|r| r.len() != classes.len()) {
        return Err(bad("confusion matrix does not match the class list"));
    }
    let r = EvalReport::from_confusion(confusion);
    let text = match a.format {
        ReportFormat::Table => metrics_table(&r, &classes),
        ReportFormat::ConfusionCsv => confusion_csv(&r, &classes),
    };
    match &a.out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
