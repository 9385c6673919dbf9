//! Versioned JSON run reports (`androcon-report/1`) and text renderings of
//! evaluation results.
//!
//! Keys are sorted and every float is rounded to 9 significant digits, so
//! identical runs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::metrics::EvalReport;
use crate::classify::validation::CvReport;
use crate::floormap::{DiscrepancyReport, MapResult};
use crate::numfmt::{fmt_sig9, round_json};
use crate::pipeline::UkfAblation;
use crate::seed;

pub const REPORT_FORMAT: &str = "androcon-report/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    /// Named sub-seeds drawn from the root seed.
    pub sub_seeds: BTreeMap<String, u64>,
    pub sections: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Report {
        Report {
            command: command.to_string(),
            seed,
            sub_seeds: BTreeMap::new(),
            sections: BTreeMap::new(),
        }
    }

    /// Records `derive(seed, name)` and returns it.
    pub fn sub_seed(&mut self, name: &str) -> u64 {
        let s = seed::derive(self.seed, name);
        self.sub_seeds.insert(name.to_string(), s);
        s
    }

    pub fn section(&mut self, name: &str, value: impl Serialize) -> &mut Report {
        let v = serde_json::to_value(value).expect("report sections serialize");
        self.sections.insert(name.to_string(), v);
        self
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "format": REPORT_FORMAT,
            "command": self.command,
            // as text: JSON readers often hold numbers in doubles
            "seed": self.seed.to_string(),
            "sub_seeds": self.sub_seeds.iter().map(|(k, s)| (k.clone(), Value::String(s.to_string()))).collect::<serde_json::Map<_, _>>(),
        });
        for (k, s) in &self.sections {
            v[k] = s.clone();
        }
        round_json(&mut v);
        v
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        s.push('\n');
        s
    }
}

fn class_rows(r: &EvalReport, class_names: &[String]) -> Value {
    Value::Array(
        r.per_class
            .iter()
            .zip(class_names)
            .map(|(m, n)| {
                json!({
                    "class": n,
                    "acc": m.acc,
                    "sen": m.sen,
                    "spe": m.spe,
                    "precision": m.precision,
                    "f_score": m.f_score,
                })
            })
            .collect(),
    )
}

pub fn eval_json(r: &EvalReport, class_names: &[String]) -> Value {
    json!({
        "accuracy": r.accuracy,
        "classes": class_names,
        "per_class": class_rows(r, class_names),
        "confusion": r.confusion,
    })
}

pub fn cv_json(r: &CvReport, class_names: &[String]) -> Value {
    json!({
        "k": r.folds.len(),
        "folds": r.folds.iter().enumerate().map(|(i, f)| json!({
            "fold": i,
            "accuracy": f.accuracy,
            "confusion": f.confusion,
        })).collect::<Vec<_>>(),
        "mean": eval_json(&r.mean, class_names),
    })
}

pub fn ablation_json(a: &UkfAblation, class_names: &[String]) -> Value {
    json!({
        "with_ukf": cv_json(&a.with_ukf, class_names),
        "without_ukf": cv_json(&a.without_ukf, class_names),
        "accuracy_delta": a.accuracy_delta(),
    })
}

pub fn map_json(r: &MapResult) -> Value {
    json!({
        "map": r.map,
        "optimization": {
            "initial_cost": r.outcome.initial_cost,
            "final_cost": r.outcome.final_cost,
            "iterations": r.outcome.iterations,
            "accepted_costs": r.outcome.accepted_costs,
        },
        "alignment": {
            "order": r.alignment.order,
            "transforms": r.alignment.transforms,
        },
        "graph": {
            "nodes": r.graph.nodes.len(),
            "edges": r.graph.edges.len(),
        },
    })
}

pub fn discrepancy_json(r: &DiscrepancyReport) -> Value {
    serde_json::to_value(r).expect("discrepancy report serializes")
}

/// Importance scores ranked from most to least important.
pub fn importance_json(scores: &[f64], feature_names: &[String]) -> Value {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Value::Array(
        order
            .into_iter()
            .map(|j| json!({"feature": feature_names[j], "score": scores[j]}))
            .collect(),
    )
}

/// `truth\predicted` matrix with class names on both axes.
pub fn confusion_csv(r: &EvalReport, class_names: &[String]) -> String {
    let mut s = String::from("truth\\predicted");
    for n in class_names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (n, row) in class_names.iter().zip(&r.confusion) {
        s.push_str(n);
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Per-class metric table for terminals.
pub fn metrics_table(r: &EvalReport, class_names: &[String]) -> String {
    let w = class_names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<w$}  {:>9} {:>9} {:>9} {:>9} {:>9}\n", "class", "acc", "sen", "spe", "precision", "f");
    for (n, m) in class_names.iter().zip(&r.per_class) {
        let _ = writeln!(
            s,
            "{:<w$}  {:>9} {:>9} {:>9} {:>9} {:>9}",
            n,
            fmt_sig9(round2(m.acc)),
            fmt_sig9(round2(m.sen)),
            fmt_sig9(round2(m.spe)),
            fmt_sig9(round2(m.precision)),
            fmt_sig9(round2(m.f_score))
        );
    }
    let _ = writeln!(s, "overall accuracy {}", fmt_sig9(round2(r.accuracy)));
    s
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn sample() -> EvalReport {
        EvalReport::from_confusion(vec![vec![3, 1], vec![0, 4]])
    }

    #[test]
    fn report_has_format_and_sorted_keys() {
        let mut r = Report::new("eval", 7);
        let split = r.sub_seed("split");
        r.section("result", eval_json(&sample(), &names()));
        let text = r.to_json_string();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format"], REPORT_FORMAT);
        assert_eq!(v["seed"], "7");
        assert_eq!(v["sub_seeds"]["split"], split.to_string());
        assert_eq!(v["result"]["accuracy"], 87.5);
        assert!(text.find("\"command\"").unwrap() < text.find("\"format\"").unwrap());
    }

    #[test]
    fn floats_are_rounded() {
        let mut r = Report::new("x", 1);
        r.section("v", 1.0 / 3.0);
        assert!(r.to_json_string().contains("0.333333333\n") || r.to_json_string().contains("0.333333333,"));
        assert_eq!(r.to_value()["v"], 0.333333333);
    }

    #[test]
    fn identical_inputs_identical_bytes() {
        let build = || {
            let mut r = Report::new("eval", 3);
            r.sub_seed("train");
            r.section("result", eval_json(&sample(), &names()));
            r.to_json_string()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn confusion_csv_layout() {
        assert_eq!(confusion_csv(&sample(), &names()), "truth\\predicted,a,b\na,3,1\nb,0,4\n");
    }

    #[test]
    fn importance_is_ranked() {
        let v = importance_json(&[0.1, 0.5, 0.1], &["x".into(), "y".into(), "z".into()]);
        let order: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["feature"].as_str().unwrap()).collect();
        assert_eq!(order, ["y", "x", "z"]);
    }

    #[test]
    fn table_lists_every_class() {
        let t = metrics_table(&sample(), &names());
        assert_eq!(t.lines().count(), 4);
        assert!(t.contains("overall accuracy 87.5"));
    }
}
