//! Confidence-voted fusion of the two towers' predictions.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabelMatrix, LabelSpace};
use crate::encoder::{encode_pairs, EncoderBackend, RelationshipTensor};
use crate::error::{ensure, Error, Result};
use crate::model::{dmon_forward_with, Branch, BranchLogits, DmonParams};

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Top-1 minus top-2 softmax probability.
pub fn confidence_margin(logits: &[f64]) -> Result<f64> {
    ensure!(
        logits.len() >= 2,
        "margin needs at least two classes, got {}",
        logits.len()
    );
    if !logits.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric(format!("logits {logits:?}")));
    }
    let p = softmax(logits);
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x in p {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    Ok(first - second)
}

/// Which prediction a fused matrix takes per cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// Confidence voter: larger margin wins, ties go to the head tower.
    #[default]
    Fused,
    /// Head tower everywhere.
    HeadOnly,
    /// Tail tower everywhere.
    TailOnly,
}

/// Fused `n × n` prediction with per-cell provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedPrediction {
    pub n: usize,
    pub labels: LabelMatrix,
    pub source: Vec<Branch>,
    pub margins_h: Vec<f64>,
    pub margins_t: Vec<f64>,
}

fn check_shapes(head: &BranchLogits, tail: &BranchLogits) -> Result<()> {
    ensure!(
        head.m == tail.m && head.l == tail.l,
        "branch logits differ in shape: ({}, {}) vs ({}, {})",
        head.m,
        head.l,
        tail.m,
        tail.l
    );
    Ok(())
}

/// Per cell, keeps the argmax of whichever branch has the larger margin;
/// equal margins resolve to the head branch.
pub fn fuse(head: &BranchLogits, tail: &BranchLogits) -> Result<FusedPrediction> {
    fuse_with(head, tail, PredictionMode::Fused)
}

/// [`fuse`] with the voter optionally forced to one branch.
pub fn fuse_with(
    head: &BranchLogits,
    tail: &BranchLogits,
    mode: PredictionMode,
) -> Result<FusedPrediction> {
    check_shapes(head, tail)?;
    let n = head.m;
    let mut labels = LabelMatrix::filled(n, 0);
    let mut source = Vec::with_capacity(n * n);
    let mut margins_h = Vec::with_capacity(n * n);
    let mut margins_t = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (zh, zt) = (head.cell(i, j), tail.cell(i, j));
            let (mh, mt) = (confidence_margin(zh)?, confidence_margin(zt)?);
            let winner = match mode {
                PredictionMode::Fused if mh >= mt => Branch::Head,
                PredictionMode::Fused => Branch::Tail,
                PredictionMode::HeadOnly => Branch::Head,
                PredictionMode::TailOnly => Branch::Tail,
            };
            let label = match winner {
                Branch::Head => argmax(zh),
                Branch::Tail => argmax(zt),
            };
            labels.set(i, j, label);
            source.push(winner);
            margins_h.push(mh);
            margins_t.push(mt);
        }
    }
    Ok(FusedPrediction {
        n,
        labels,
        source,
        margins_h,
        margins_t,
    })
}

/// Full-tensor inference: no cropping, both towers, fusion, and the
/// diagonal forced to the no-relation class.
pub fn predict_tensor(
    h: &RelationshipTensor,
    params: &DmonParams,
    space: &LabelSpace,
    bypass_towers: bool,
    mode: PredictionMode,
) -> Result<FusedPrediction> {
    ensure!(
        params.num_labels() == space.len(),
        "model predicts {} classes but label space has {}",
        params.num_labels(),
        space.len()
    );
    let (head, tail) = dmon_forward_with(h, params, bypass_towers)?;
    let mut fused = fuse_with(&head, &tail, mode)?;
    for i in 0..fused.n {
        fused.labels.set(i, i, space.no_relation_index);
    }
    Ok(fused)
}

pub fn predict_document(
    doc: &Document,
    params: &DmonParams,
    backend: &dyn EncoderBackend,
    space: &LabelSpace,
) -> Result<FusedPrediction> {
    let h = encode_pairs(doc, backend)?;
    predict_tensor(&h, params, space, false, PredictionMode::Fused)
}
