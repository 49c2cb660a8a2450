//! Per-theme binary confusion metrics and cross-theme summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type LabelMap = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeMetrics {
    pub theme: String,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Set when TP + FP = 0; precision is then reported as 0.
    pub precision_undefined: bool,
    /// Set when TP + FN = 0; recall is then reported as 0.
    pub recall_undefined: bool,
}

impl ThemeMetrics {
    pub fn from_counts(theme: impl Into<String>, c: ConfusionCounts) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
        let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
        let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let accuracy = if c.total() == 0 {
            0.0
        } else {
            (c.tp + c.tn) as f64 / c.total() as f64
        };
        ThemeMetrics {
            theme: theme.into(),
            counts: c,
            precision,
            recall,
            f1,
            accuracy,
            precision_undefined,
            recall_undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub engine: String,
    /// Documents evaluated, i.e. the gold ids.
    pub n_docs: usize,
    /// Predicted documents without a gold label set.
    pub unevaluated: usize,
    pub themes: Vec<ThemeMetrics>,
}

impl MetricsReport {
    pub fn macro_f1(&self) -> f64 {
        mean(&self.themes.iter().map(|t| t.f1).collect::<Vec<_>>())
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.themes.iter().map(|t| t.accuracy).collect::<Vec<_>>())
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Engine: {} (n={})\n", self.engine, self.n_docs);
        out.push_str("| Theme | TP | FP | FN | TN | Precision | Recall | F1 | Accuracy |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for t in &self.themes {
            let flag = |v: f64, undefined: bool| {
                if undefined {
                    format!("{v:.3}*")
                } else {
                    format!("{v:.3}")
                }
            };
            let c = t.counts;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {:.3} | {:.3} |",
                t.theme,
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                flag(t.precision, t.precision_undefined),
                flag(t.recall, t.recall_undefined),
                t.f1,
                t.accuracy
            );
        }
        let _ = writeln!(
            out,
            "\nMacro F1 {:.3}, mean accuracy {:.3}. * undefined (zero denominator), reported as 0.",
            self.macro_f1(),
            self.mean_accuracy()
        );
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "engine",
            "theme",
            "tp",
            "fp",
            "fn",
            "tn",
            "precision",
            "recall",
            "f1",
            "accuracy",
            "precision_undefined",
            "recall_undefined",
        ])?;
        for t in &self.themes {
            let c = t.counts;
            w.write_record([
                self.engine.clone(),
                t.theme.clone(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                t.precision.to_string(),
                t.recall.to_string(),
                t.f1.to_string(),
                t.accuracy.to_string(),
                t.precision_undefined.to_string(),
                t.recall_undefined.to_string(),
            ])?;
        }
        csv_string(w)
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Binary evaluation of every theme over the gold documents. Every gold id
/// must have a prediction; predicted ids without gold are counted in
/// `unevaluated`.
pub fn per_theme_metrics(engine: &str, preds: &LabelMap, gold: &LabelMap, themes: &[String]) -> Result<MetricsReport> {
    if gold.is_empty() {
        return Err(Error::IdMismatch("gold set is empty".into()));
    }
    let missing: Vec<&String> = gold.keys().filter(|id| !preds.contains_key(*id)).collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).map(|s| s.as_str()).collect();
        return Err(Error::IdMismatch(format!(
            "{} gold ids have no prediction (first: {shown:?})",
            missing.len()
        )));
    }
    for labels in gold.values().chain(preds.values()) {
        if let Some(t) = labels.iter().find(|t| !themes.contains(t)) {
            return Err(Error::UnknownTheme(t.clone()));
        }
    }
    let mut counts = vec![ConfusionCounts::default(); themes.len()];
    for (id, actual) in gold {
        let predicted = &preds[id];
        for (c, theme) in counts.iter_mut().zip(themes) {
            c.add(predicted.contains(theme), actual.contains(theme));
        }
    }
    Ok(MetricsReport {
        engine: engine.to_owned(),
        n_docs: gold.len(),
        unevaluated: preds.keys().filter(|id| !gold.contains_key(*id)).count(),
        themes: themes
            .iter()
            .zip(counts)
            .map(|(t, c)| ThemeMetrics::from_counts(t.clone(), c))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let m = mean(values);
        let var = if values.is_empty() {
            0.0
        } else {
            values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
        };
        MeanStd { mean: m, std: var.sqrt() }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Means and population standard deviations of a theme x method matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub themes: Vec<String>,
    pub methods: Vec<String>,
    /// Across themes, one per method.
    pub per_method: Vec<MeanStd>,
    /// Across methods, one per theme.
    pub per_theme: Vec<MeanStd>,
}

/// `values[theme][method]`; every row must have one entry per method.
pub fn summarize(themes: &[String], methods: &[String], values: &[Vec<f64>]) -> Result<Summary> {
    if values.len() != themes.len() || values.iter().any(|r| r.len() != methods.len()) {
        return Err(Error::param("summary matrix must be themes x methods"));
    }
    let per_theme = values.iter().map(|r| MeanStd::of(r)).collect();
    let per_method = (0..methods.len())
        .map(|m| MeanStd::of(&values.iter().map(|r| r[m]).collect::<Vec<_>>()))
        .collect();
    Ok(Summary {
        themes: themes.to_vec(),
        methods: methods.to_vec(),
        per_method,
        per_theme,
    })
}

impl Summary {
    fn row(label: &str, heads: &[String], cells: &[MeanStd]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| | {} |", heads.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(heads.len()));
        let body: Vec<String> = cells.iter().map(|c| format!("{:.1} ({:.1})", c.mean, c.std)).collect();
        let _ = writeln!(out, "| {label} | {} |", body.join(" | "));
        out
    }

    /// Mean across themes for each method, one "Mean (STD)" row.
    pub fn method_table(&self) -> String {
        Self::row("Mean (STD)", &self.methods, &self.per_method)
    }

    /// Mean across methods for each theme, one "Mean (STD)" row.
    pub fn theme_table(&self) -> String {
        Self::row("Mean (STD)", &self.themes, &self.per_theme)
    }

    pub fn to_markdown(&self) -> String {
        format!(
            "Mean accuracy across themes for each method\n\n{}\nMean accuracy across methods for each theme\n\n{}\nSTD is the population standard deviation.\n",
            self.method_table(),
            self.theme_table()
        )
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "name", "mean", "std"])?;
        for (m, s) in self.methods.iter().zip(&self.per_method) {
            w.write_record(["method", m, &s.mean.to_string(), &s.std.to_string()])?;
        }
        for (t, s) in self.themes.iter().zip(&self.per_theme) {
            w.write_record(["theme", t, &s.mean.to_string(), &s.std.to_string()])?;
        }
        csv_string(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i}")).collect()
    }

    fn labels(pairs: &[(&str, &[&str])]) -> LabelMap {
        pairs
            .iter()
            .map(|(id, ls)| (id.to_string(), ls.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let themes = names(3);
        let gold: LabelMap = (0..10)
            .map(|i| (format!("d{i}"), [format!("T{}", i % 3)].into_iter().collect()))
            .collect();
        let r = per_theme_metrics("x", &gold, &gold, &themes).unwrap();
        for t in &r.themes {
            assert_eq!(t.accuracy, 1.0);
            assert_eq!(t.f1, 1.0);
        }
    }

    #[test]
    fn hand_counted_confusion() {
        // TP=2, FP=1, FN=1, TN=6
        let c = ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 6 };
        let m = ThemeMetrics::from_counts("A", c);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 0.8).abs() < 1e-15);
    }

    #[test]
    fn absent_theme_is_flagged_degenerate() {
        let themes = names(2);
        let gold = labels(&[("a", &["T0"]), ("b", &[])]);
        let r = per_theme_metrics("x", &gold, &gold, &themes).unwrap();
        let t = &r.themes[1];
        assert!(t.precision_undefined && t.recall_undefined);
        assert_eq!((t.precision, t.recall, t.f1, t.accuracy), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn missing_prediction_is_an_id_mismatch() {
        let themes = names(1);
        let gold = labels(&[("a", &["T0"]), ("b", &[])]);
        let preds = labels(&[("a", &["T0"])]);
        assert!(matches!(per_theme_metrics("x", &preds, &gold, &themes), Err(Error::IdMismatch(_))));
    }

    #[test]
    fn extra_predictions_are_not_evaluated() {
        let themes = names(1);
        let gold = labels(&[("a", &["T0"])]);
        let preds = labels(&[("a", &["T0"]), ("z", &["T0"])]);
        let r = per_theme_metrics("x", &preds, &gold, &themes).unwrap();
        assert_eq!((r.n_docs, r.unevaluated), (1, 1));
        assert_eq!(r.themes[0].counts.total(), 1);
    }

    #[test]
    fn unknown_theme_label_is_rejected() {
        let gold = labels(&[("a", &["Q"])]);
        assert!(matches!(
            per_theme_metrics("x", &gold, &gold, &names(1)),
            Err(Error::UnknownTheme(_))
        ));
    }

    #[test]
    fn population_std_of_three_values() {
        let s = MeanStd::of(&[60.0, 70.0, 80.0]);
        assert!((s.mean - 70.0).abs() < 1e-12);
        // sqrt(200 / 3)
        assert!((s.std - 8.164_965_809_277_26).abs() < 1e-9);
    }

    #[test]
    fn constant_matrix_has_zero_spread() {
        let s = summarize(&names(3), &names(4), &vec![vec![0.5; 4]; 3]).unwrap();
        for m in s.per_method.iter().chain(&s.per_theme) {
            assert_eq!((m.mean, m.std), (0.5, 0.0));
        }
    }

    #[test]
    fn method_table_uses_mean_std_row() {
        let methods: Vec<String> = ["BERTopic", "CorEx"].iter().map(|s| s.to_string()).collect();
        let s = summarize(&names(2), &methods, &[vec![20.0, 80.0], vec![40.0, 80.0]]).unwrap();
        let t = s.method_table();
        assert!(t.contains("| | BERTopic | CorEx |"), "{t}");
        assert!(t.contains("| Mean (STD) | 30.0 (10.0) | 80.0 (0.0) |"), "{t}");
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(summarize(&names(2), &names(2), &[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn confusion_counts_partition_documents(
            rows in prop::collection::vec((prop::collection::vec(any::<bool>(), 4), prop::collection::vec(any::<bool>(), 4)), 1..40)
        ) {
            let themes = names(4);
            let mut preds = LabelMap::new();
            let mut gold = LabelMap::new();
            for (i, (p, g)) in rows.iter().enumerate() {
                let pick = |v: &Vec<bool>| themes.iter().zip(v).filter(|(_, &b)| b).map(|(t, _)| t.clone()).collect();
                preds.insert(format!("d{i}"), pick(p));
                gold.insert(format!("d{i}"), pick(g));
            }
            let r = per_theme_metrics("x", &preds, &gold, &themes).unwrap();
            for t in &r.themes {
                prop_assert_eq!(t.counts.total(), rows.len());
                let c = t.counts;
                prop_assert_eq!(t.accuracy, (c.tp + c.tn) as f64 / rows.len() as f64);
            }
        }

        #[test]
        fn summary_matches_direct_recomputation(
            values in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 3), 1..6)
        ) {
            let n_t = values.len();
            let s = summarize(&names(n_t), &names(3), &values).unwrap();
            for m in 0..3 {
                let mut total = 0.0;
                for row in &values { total += row[m]; }
                let mu = total / n_t as f64;
                let mut sq = 0.0;
                for row in &values { sq += (row[m] - mu) * (row[m] - mu); }
                prop_assert_eq!(s.per_method[m].mean, mu);
                prop_assert_eq!(s.per_method[m].std, (sq / n_t as f64).sqrt());
            }
        }
    }
}
