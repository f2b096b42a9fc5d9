//! Precision / recall / f-measure and the comparison table.

use std::cmp::Ordering;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl Metrics {
    /// Undefined ratios (no predicted or no actual positives) are reported as 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f_measure: f_measure(precision, recall),
        }
    }
}

/// One scored example: clone probability and gold label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub prob: f64,
    pub label: u8,
}

pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn compute_metrics(predictions: &[ScoredPair]) -> Result<Metrics> {
    if predictions.is_empty() {
        return Err(Error::Empty("cannot compute metrics over zero predictions".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for p in predictions {
        match (p.prob >= DECISION_THRESHOLD, p.label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSource {
    #[serde(rename = "paper")]
    Published,
    ThisArtifact,
}

impl RowSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSource::Published => "paper",
            RowSource::ThisArtifact => "this-artifact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub approach: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub source: RowSource,
}

impl ComparisonRow {
    pub fn measured(approach: impl Into<String>, precision: f64, recall: f64, f: f64) -> Self {
        ComparisonRow {
            approach: approach.into(),
            precision,
            recall,
            f_measure: f,
            source: RowSource::ThisArtifact,
        }
    }
}

/// Published IR-Plag results, as printed (two decimals).
pub const PUBLISHED_ROWS: [(&str, f64, f64, f64); 6] = [
    ("CodeBERT", 0.72, 1.00, 0.84),
    ("Output Analysis", 0.88, 0.93, 0.90),
    ("Boosting (XGBoost)", 0.88, 0.99, 0.93),
    ("Bagging (Random Forest)", 0.95, 0.97, 0.96),
    ("GraphCodeBERT", 0.98, 0.95, 0.96),
    ("GraphCodeBERT + output feature", 0.98, 1.00, 0.99),
];

pub fn published_rows() -> Vec<ComparisonRow> {
    PUBLISHED_ROWS
        .iter()
        .map(|&(name, p, r, f)| ComparisonRow {
            approach: name.to_owned(),
            precision: p,
            recall: r,
            f_measure: f,
            source: RowSource::Published,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

/// Published rows plus `measured`, ascending by f-measure (stable), so the
/// best-ranked approach is the final row.
pub fn comparison_rows(measured: &[ComparisonRow]) -> Vec<ComparisonRow> {
    let mut rows = published_rows();
    rows.extend(measured.iter().cloned());
    rows.sort_by(|a, b| a.f_measure.partial_cmp(&b.f_measure).unwrap_or(Ordering::Equal));
    rows
}

pub fn compare_table(measured: &[ComparisonRow], format: TableFormat) -> String {
    let rows = comparison_rows(measured);
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str("| approach | precision | recall | f_measure | source |\n");
            out.push_str("|---|---:|---:|---:|---|\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "| {} | {:.4} | {:.4} | {:.4} | {} |",
                    r.approach,
                    r.precision,
                    r.recall,
                    r.f_measure,
                    r.source.as_str()
                );
            }
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["approach", "precision", "recall", "f_measure", "source"])
                .expect("in-memory write");
            for r in &rows {
                w.write_record([
                    r.approach.clone(),
                    r.precision.to_string(),
                    r.recall.to_string(),
                    r.f_measure.to_string(),
                    r.source.as_str().to_owned(),
                ])
                .expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
        }
    }
    out
}

pub fn parse_csv_table(text: &str) -> Result<Vec<ComparisonRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("bad comparison csv: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad numeric column {i} in comparison csv")))
        };
        let source = match rec.get(4) {
            Some("paper") => RowSource::Published,
            Some("this-artifact") => RowSource::ThisArtifact,
            other => return Err(Error::Config(format!("unknown row source {other:?}"))),
        };
        rows.push(ComparisonRow {
            approach: rec.get(0).unwrap_or_default().to_owned(),
            precision: num(1)?,
            recall: num(2)?,
            f_measure: num(3)?,
            source,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(prob: f64, label: u8) -> ScoredPair {
        ScoredPair { prob, label }
    }

    #[test]
    fn hand_confusion_matrix() {
        // tp=3, fp=1, fn=2
        let preds = [
            sp(0.9, 1),
            sp(0.8, 1),
            sp(0.5, 1),
            sp(0.7, 0),
            sp(0.1, 1),
            sp(0.2, 1),
            sp(0.3, 0),
        ];
        let m = compute_metrics(&preds).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (3, 1, 2, 1));
        assert!((m.precision - 0.75).abs() < 1e-15);
        assert!((m.recall - 0.6).abs() < 1e-15);
        assert!((m.f_measure - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&[sp(0.9, 1), sp(0.1, 0), sp(0.6, 1)]).unwrap();
        assert_eq!((m.precision, m.recall, m.f_measure), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_division_conventions() {
        let m = compute_metrics(&[sp(0.1, 0), sp(0.2, 0)]).unwrap();
        assert_eq!((m.precision, m.recall, m.f_measure), (0.0, 0.0, 0.0));
        let m = compute_metrics(&[sp(0.1, 1)]).unwrap();
        assert_eq!((m.precision, m.recall, m.f_measure), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_is_error() {
        assert!(compute_metrics(&[]).is_err());
    }

    #[test]
    fn variant_row_f_measure() {
        let f = f_measure(0.98, 1.00);
        assert!((f - 0.989_898_989_9).abs() < 1e-9);
    }

    #[test]
    fn table_ordering() {
        let rows = comparison_rows(&[]);
        assert_eq!(rows.last().unwrap().approach, "GraphCodeBERT + output feature");
        assert_eq!(rows.first().unwrap().approach, "CodeBERT");
        let rows = comparison_rows(&[ComparisonRow::measured("mine", 0.5, 0.5, 0.5)]);
        assert_eq!(rows[0].approach, "mine");
        assert_eq!(rows[0].source, RowSource::ThisArtifact);
    }

    #[test]
    fn csv_round_trip() {
        let measured = [ComparisonRow::measured("tiny, \"model\"", 0.123456789, 0.9, f_measure(0.123456789, 0.9))];
        let text = compare_table(&measured, TableFormat::Csv);
        assert_eq!(parse_csv_table(&text).unwrap(), comparison_rows(&measured));
    }

    #[test]
    fn markdown_shape() {
        let md = compare_table(&[], TableFormat::Markdown);
        assert_eq!(md.lines().count(), 8);
        assert!(md.lines().last().unwrap().contains("0.9900"));
    }
}
