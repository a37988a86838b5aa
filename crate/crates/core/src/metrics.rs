//! Corpus-level macro-F1.
//!
//! All cells of all documents are pooled into one confusion matrix first
//! (diagonal cells excluded unless asked for), then per-class F1 values are
//! averaged into the named report columns.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelMatrix, LabelSpace, ATTACK, RELATED, SUPPORT};
use crate::error::{ensure, Error, Result};

/// `counts[gold][pred]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    /// Adds the cells of one document pair.
    pub fn add_matrices(
        &mut self,
        pred: &LabelMatrix,
        gold: &LabelMatrix,
        include_diagonal: bool,
    ) -> Result<()> {
        ensure!(
            pred.n == gold.n,
            "prediction of size {} against gold of size {}",
            pred.n,
            gold.n
        );
        for i in 0..gold.n {
            for j in 0..gold.n {
                if i == j && !include_diagonal {
                    continue;
                }
                let (g, p) = (gold.get(i, j), pred.get(i, j));
                ensure!(
                    g < self.classes && p < self.classes,
                    "label out of range for {} classes",
                    self.classes
                );
                self.add(g, p);
            }
        }
        Ok(())
    }

    /// Elementwise sum; order of merging does not matter.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn actual(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn precision(&self, class: usize) -> f64 {
        Self::ratio(self.true_positives(class), self.predicted(class))
    }

    pub fn recall(&self, class: usize) -> f64 {
        Self::ratio(self.true_positives(class), self.actual(class))
    }

    /// `2PR / (P + R)`, with 0 whenever `P + R = 0`.
    pub fn f1(&self, class: usize) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Mean of the per-class F1 of these labels.
    Classes(Vec<String>),
    /// Mean of previously defined columns.
    Columns(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Named report columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub columns: Vec<Column>,
}

fn classes(name: &str, labels: &[&str]) -> Column {
    Column {
        name: name.into(),
        kind: ColumnKind::Classes(labels.iter().map(|s| s.to_string()).collect()),
    }
}

impl ColumnSpec {
    /// `F1` (all three classes), `S-F1`, `A-F1`, `U-F1`.
    pub fn abstrct(space: &LabelSpace) -> Self {
        let u = space.no_relation();
        ColumnSpec {
            name: "abstrct".into(),
            columns: vec![
                classes("F1", &[SUPPORT, ATTACK, u]),
                classes("S-F1", &[SUPPORT]),
                classes("A-F1", &[ATTACK]),
                classes("U-F1", &[u]),
            ],
        }
    }

    /// `F1` (related and no-relation), `R-F1`, `U-F1`.
    pub fn cdcp(space: &LabelSpace) -> Self {
        let u = space.no_relation();
        ColumnSpec {
            name: "cdcp".into(),
            columns: vec![
                classes("F1", &[RELATED, u]),
                classes("R-F1", &[RELATED]),
                classes("U-F1", &[u]),
            ],
        }
    }

    /// `Full-F1` over every class, `R-F1` over every relation class, `U-F1`,
    /// and `F1` as the mean of `R-F1` and `U-F1`.
    pub fn scidtb(space: &LabelSpace) -> Self {
        let all: Vec<&str> = space.labels.iter().map(String::as_str).collect();
        let related: Vec<&str> = all
            .iter()
            .copied()
            .filter(|l| *l != space.no_relation())
            .collect();
        ColumnSpec {
            name: "scidtb".into(),
            columns: vec![
                classes("Full-F1", &all),
                classes("R-F1", &related),
                classes("U-F1", &[space.no_relation()]),
                Column {
                    name: "F1".into(),
                    kind: ColumnKind::Columns(vec!["R-F1".into(), "U-F1".into()]),
                },
            ],
        }
    }

    /// `F1` over every class plus one `<label>-F1` column per class.
    pub fn per_class(space: &LabelSpace) -> Self {
        let all: Vec<&str> = space.labels.iter().map(String::as_str).collect();
        let mut columns = vec![classes("F1", &all)];
        columns.extend(all.iter().map(|l| classes(&format!("{l}-F1"), &[l])));
        ColumnSpec {
            name: "per_class".into(),
            columns,
        }
    }

    pub fn named(name: &str, space: &LabelSpace) -> Result<Self> {
        match ColumnPreset::from_str(name)? {
            ColumnPreset::Abstrct => Ok(Self::abstrct(space)),
            ColumnPreset::Cdcp => Ok(Self::cdcp(space)),
            ColumnPreset::Scidtb => Ok(Self::scidtb(space)),
            ColumnPreset::PerClass => Ok(Self::per_class(space)),
        }
    }

    pub fn validate(&self, space: &LabelSpace) -> Result<()> {
        let mut defined: Vec<&str> = Vec::new();
        for col in &self.columns {
            match &col.kind {
                ColumnKind::Classes(labels) => {
                    ensure!(!labels.is_empty(), "column {} has no classes", col.name);
                    for l in labels {
                        ensure!(
                            space.index_of(l).is_some(),
                            "column {} references unknown label {l:?}",
                            col.name
                        );
                    }
                }
                ColumnKind::Columns(names) => {
                    ensure!(!names.is_empty(), "column {} has no members", col.name);
                    for n in names {
                        ensure!(
                            defined.contains(&n.as_str()),
                            "column {} references undefined column {n:?}",
                            col.name
                        );
                    }
                }
            }
            defined.push(&col.name);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnPreset {
    Abstrct,
    Cdcp,
    Scidtb,
    PerClass,
}

impl FromStr for ColumnPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abstrct" => Ok(ColumnPreset::Abstrct),
            "cdcp" => Ok(ColumnPreset::Cdcp),
            "scidtb" => Ok(ColumnPreset::Scidtb),
            "per_class" => Ok(ColumnPreset::PerClass),
            other => Err(Error::Validation(format!(
                "unknown column preset {other:?}; expected abstrct, cdcp, scidtb or per_class"
            ))),
        }
    }
}

/// Evaluation output with a stable JSON key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub columns: String,
    /// Column names in report order.
    pub column_order: Vec<String>,
    pub averages: BTreeMap<String, f64>,
    pub per_class_f1: BTreeMap<String, f64>,
    pub per_class_precision: BTreeMap<String, f64>,
    pub per_class_recall: BTreeMap<String, f64>,
    pub labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub documents: usize,
    pub cells: u64,
}

impl MetricsReport {
    pub fn average(&self, column: &str) -> Option<f64> {
        self.averages.get(column).copied()
    }

    /// `(column, value)` in report order.
    pub fn ordered(&self) -> Vec<(&str, f64)> {
        self.column_order
            .iter()
            .map(|c| (c.as_str(), self.averages[c]))
            .collect()
    }

    /// Value of the `F1` column, or the first column when absent.
    pub fn headline(&self) -> f64 {
        self.average("F1")
            .or_else(|| self.column_order.first().and_then(|c| self.average(c)))
            .unwrap_or(0.0)
    }
}

pub fn report_from_confusion(
    confusion: ConfusionMatrix,
    space: &LabelSpace,
    spec: &ColumnSpec,
    documents: usize,
) -> Result<MetricsReport> {
    spec.validate(space)?;
    ensure!(
        confusion.classes == space.len(),
        "confusion matrix has {} classes, label space {}",
        confusion.classes,
        space.len()
    );
    let mut per_class_f1 = BTreeMap::new();
    let mut per_class_precision = BTreeMap::new();
    let mut per_class_recall = BTreeMap::new();
    for (i, label) in space.labels.iter().enumerate() {
        per_class_f1.insert(label.clone(), confusion.f1(i));
        per_class_precision.insert(label.clone(), confusion.precision(i));
        per_class_recall.insert(label.clone(), confusion.recall(i));
    }
    let mut averages: BTreeMap<String, f64> = BTreeMap::new();
    for col in &spec.columns {
        let values: Vec<f64> = match &col.kind {
            ColumnKind::Classes(labels) => labels.iter().map(|l| per_class_f1[l]).collect(),
            ColumnKind::Columns(names) => names
                .iter()
                .map(|n| averages.get(n).copied().unwrap_or(0.0))
                .collect(),
        };
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        averages.insert(col.name.clone(), mean);
    }
    let cells = confusion.counts.iter().flatten().sum();
    Ok(MetricsReport {
        columns: spec.name.clone(),
        column_order: spec.columns.iter().map(|c| c.name.clone()).collect(),
        averages,
        per_class_f1,
        per_class_precision,
        per_class_recall,
        labels: space.labels.clone(),
        confusion,
        documents,
        cells,
    })
}

/// Pools every document's cells into one confusion matrix and reports the
/// columns of `spec`.
pub fn macro_f1(
    preds: &[LabelMatrix],
    gold: &[LabelMatrix],
    space: &LabelSpace,
    spec: &ColumnSpec,
    include_diagonal: bool,
) -> Result<MetricsReport> {
    ensure!(
        preds.len() == gold.len(),
        "{} predicted documents against {} gold documents",
        preds.len(),
        gold.len()
    );
    let mut confusion = ConfusionMatrix::new(space.len());
    for (k, (p, g)) in preds.iter().zip(gold).enumerate() {
        confusion
            .add_matrices(p, g, include_diagonal)
            .map_err(|e| Error::Validation(format!("document {k}: {e}")))?;
    }
    report_from_confusion(confusion, space, spec, preds.len())
}

/// CSV with a header of column names and one row of values.
pub fn report_csv(report: &MetricsReport) -> String {
    let ordered = report.ordered();
    let names: Vec<&str> = ordered.iter().map(|(n, _)| *n).collect();
    let values: Vec<String> = ordered.iter().map(|(_, v)| format!("{v:.6}")).collect();
    format!("{}\n{}\n", names.join(","), values.join(","))
}
