//! Confusion matrices and the per-class figures derived from them.

use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                context: "predictions vs truths",
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::invalid(
                "label",
                format!("({truth}, {predicted}) out of range for {} classes", self.classes),
            ));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|j| self.get(j, j)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.classes)
    }
}

impl AddAssign<&ConfusionMatrix> for ConfusionMatrix {
    /// Merges partial matrices; class counts must agree.
    fn add_assign(&mut self, rhs: &ConfusionMatrix) {
        assert_eq!(self.classes, rhs.classes, "confusion matrices differ in class count");
        for (a, b) in self.counts.iter_mut().zip(&rhs.counts) {
            *a += b;
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    /// Micro accuracy, `trace / total`.
    pub accuracy: f64,
    /// Per-class recall (the diagonal fraction of each row).
    pub per_class_accuracy: Vec<f64>,
    pub per_class_precision: Vec<f64>,
    pub per_class_f1: Vec<f64>,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: ConfusionMatrix, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != confusion.classes() {
            return Err(Error::DimensionMismatch {
                context: "class names vs confusion matrix",
                expected: confusion.classes(),
                actual: class_names.len(),
            });
        }
        if confusion.total() == 0 {
            return Err(Error::EmptyDataset("evaluation set"));
        }
        let m = confusion.classes();
        let recall: Vec<f64> = (0..m)
            .map(|j| ratio(confusion.get(j, j), confusion.row_sum(j)))
            .collect();
        let precision: Vec<f64> = (0..m)
            .map(|j| ratio(confusion.get(j, j), confusion.col_sum(j)))
            .collect();
        let f1 = recall
            .iter()
            .zip(&precision)
            .map(|(&r, &p)| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
            .collect();
        Ok(Self {
            accuracy: ratio(confusion.trace(), confusion.total()),
            class_names,
            confusion,
            per_class_accuracy: recall,
            per_class_precision: precision,
            per_class_f1: f1,
        })
    }

    pub fn from_predictions(class_names: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        let cm = ConfusionMatrix::from_predictions(class_names.len(), truth, predicted)?;
        Self::from_confusion(cm, class_names)
    }

    /// Macro-averaged recall.
    pub fn balanced_accuracy(&self) -> f64 {
        self.per_class_accuracy.iter().sum::<f64>() / self.per_class_accuracy.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.confusion.total()
    }
}

/// Runs `predict` over every sample of `testset` and tallies the results.
pub fn evaluate<T, F>(mut predict: F, testset: &Dataset<T>) -> Result<EvaluationReport>
where
    T: Real,
    F: FnMut(&[T]) -> Result<usize>,
{
    if testset.is_empty() {
        return Err(Error::EmptyDataset("test set"));
    }
    let mut cm = ConfusionMatrix::new(testset.num_classes());
    for (x, label) in testset.iter() {
        cm.record(label, predict(x)?)?;
    }
    EvaluationReport::from_confusion(cm, testset.class_names().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

pub const CSV_HEADER: [&str; 5] = ["class", "count", "recall", "precision", "f1"];
pub const OVERALL_ROW: &str = "__overall__";

pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Table => report_table(report),
    }
}

fn report_csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (j, name) in report.class_names.iter().enumerate() {
        w.write_record([
            name.clone(),
            report.confusion.row_sum(j).to_string(),
            format!("{:.4}", report.per_class_accuracy[j]),
            format!("{:.4}", report.per_class_precision[j]),
            format!("{:.4}", report.per_class_f1[j]),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        OVERALL_ROW.to_string(),
        report.total().to_string(),
        format!("{:.4}", report.accuracy),
        String::new(),
        String::new(),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

fn report_table(report: &EvaluationReport) -> String {
    let width = report
        .class_names
        .iter()
        .map(|n| n.chars().count())
        .chain(std::iter::once(7))
        .max()
        .unwrap_or(7);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>9}  {:>9}  {:>9}",
        "class", "count", "recall", "precision", "f1"
    );
    let _ = writeln!(s, "{}", "-".repeat(width + 44));
    for (j, name) in report.class_names.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>9.4}  {:>9.4}  {:>9.4}",
            name,
            report.confusion.row_sum(j),
            report.per_class_accuracy[j],
            report.per_class_precision[j],
            report.per_class_f1[j]
        );
    }
    let _ = writeln!(s, "{}", "-".repeat(width + 44));
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>9.4}",
        "overall",
        report.total(),
        report.accuracy
    );
    s
}

/// One class row of a parsed report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub class: String,
    pub count: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub rows: Vec<ReportRow>,
    pub total: u64,
    pub accuracy: f64,
}

/// Reads back the CSV written by [`emit_report`].
pub fn parse_report_csv(text: &str) -> Result<ParsedReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format(format!("unexpected report header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Format(format!("not a number: `{s}`")))
    };
    let int = |s: &str| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::Format(format!("not a count: `{s}`")))
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        if &r[0] == OVERALL_ROW {
            return Ok(ParsedReport {
                rows,
                total: int(&r[1])?,
                accuracy: num(&r[2])?,
            });
        }
        rows.push(ReportRow {
            class: r[0].to_string(),
            count: int(&r[1])?,
            recall: num(&r[2])?,
            precision: num(&r[3])?,
            f1: num(&r[4])?,
        });
    }
    Err(Error::Format("report has no overall row".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn perfect_classifier() {
        let truth = [0, 1, 2, 1, 0, 2, 2];
        let r = EvaluationReport::from_predictions(names(3), &truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class_f1.iter().all(|&f| f == 1.0));
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(r.confusion.get(t, p), 0);
                }
            }
        }
    }

    #[test]
    fn constant_classifier_on_balanced_pair() {
        let truth = [0, 0, 0, 1, 1, 1];
        let r = EvaluationReport::from_predictions(names(2), &truth, &[0; 6]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        // class 0: recall 1, precision 3/6 → F1 = 2·0.5/(1.5) = 2/3
        assert!((r.per_class_f1[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class_f1[1], 0.0);
        assert_eq!(r.per_class_precision[1], 0.0);
    }

    #[test]
    fn swizzor_confusion_entry() {
        let class_names = vec!["Swizzor.gen!E".to_string(), "Swizzor.gen!I".to_string()];
        let truth = vec![1; 12];
        let mut pred = vec![1; 12];
        pred[..5].fill(0);
        let r = EvaluationReport::from_predictions(class_names, &truth, &pred).unwrap();
        assert_eq!(r.confusion.row_sum(1), 12);
        assert_eq!(r.confusion.get(1, 0), 5);
    }

    #[test]
    fn empty_set_is_error() {
        assert!(EvaluationReport::from_predictions(names(2), &[], &[]).is_err());
        let d = Dataset::<f64>::from_labeled(ndarray::Array2::zeros((0, 2)), vec![], names(2)).unwrap();
        assert!(evaluate(|_| Ok(0), &d).is_err());
    }

    #[test]
    fn csv_emission() {
        let truth = [0, 1];
        let r = EvaluationReport::from_predictions(names(2), &truth, &truth).unwrap();
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(
            csv,
            "class,count,recall,precision,f1\n\
             c0,1,1.0000,1.0000,1.0000\n\
             c1,1,1.0000,1.0000,1.0000\n\
             __overall__,2,1.0000,,\n"
        );
        let table = emit_report(&r, ReportFormat::Table);
        assert!(table.contains("overall"));
        assert!(table.lines().nth(2).unwrap().starts_with("c0"));
    }

    #[test]
    fn merging_partials_matches_whole() {
        let truth = [0, 1, 2, 2, 1, 0, 0];
        let pred = [0, 2, 2, 1, 1, 0, 1];
        let whole = ConfusionMatrix::from_predictions(3, &truth, &pred).unwrap();
        let mut a = ConfusionMatrix::from_predictions(3, &truth[..3], &pred[..3]).unwrap();
        let b = ConfusionMatrix::from_predictions(3, &truth[3..], &pred[3..]).unwrap();
        a += &b;
        assert_eq!(a, whole);
    }

    proptest! {
        #[test]
        fn invariants(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..200)) {
            let (truth, pred): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let r = EvaluationReport::from_predictions(names(4), &truth, &pred).unwrap();
            prop_assert_eq!(r.total() as usize, truth.len());
            prop_assert!((r.accuracy - r.confusion.trace() as f64 / truth.len() as f64).abs() < 1e-15);
            for j in 0..4 {
                prop_assert_eq!(r.confusion.row_sum(j) as usize, truth.iter().filter(|&&t| t == j).count());
                for v in [r.per_class_accuracy[j], r.per_class_precision[j], r.per_class_f1[j]] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                let off: u64 = (0..4).filter(|&k| k != j)
                    .map(|k| r.confusion.get(j, k) + r.confusion.get(k, j)).sum();
                let concentrated = off == 0 && r.confusion.get(j, j) > 0;
                prop_assert_eq!(r.per_class_f1[j] == 1.0, concentrated);
            }

            // relabel consistently with a rotation
            let perm = |c: usize| (c + 1) % 4;
            let t2: Vec<usize> = truth.iter().map(|&c| perm(c)).collect();
            let p2: Vec<usize> = pred.iter().map(|&c| perm(c)).collect();
            let r2 = EvaluationReport::from_predictions(names(4), &t2, &p2).unwrap();
            prop_assert_eq!(r.accuracy, r2.accuracy);

            let parsed = parse_report_csv(&emit_report(&r, ReportFormat::Csv)).unwrap();
            prop_assert_eq!(parsed.total, r.total());
            prop_assert!((parsed.accuracy - r.accuracy).abs() <= 5e-5);
            for (row, j) in parsed.rows.iter().zip(0..) {
                prop_assert_eq!(&row.class, &r.class_names[j]);
                prop_assert!((row.f1 - r.per_class_f1[j]).abs() <= 5e-5);
                prop_assert!((row.recall - r.per_class_accuracy[j]).abs() <= 5e-5);
            }
        }
    }
}
