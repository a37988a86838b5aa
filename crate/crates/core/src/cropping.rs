//! Training-time sub-tensor sampling.
//!
//! A crop keeps `m` of the `n` sentences, in discourse order, and takes the
//! induced `m × m` block of both the relationship tensor and the label
//! matrix. The two shuffle variants exist only to measure what happens when
//! order (`ord`) or head/tail alignment (`rad`) is destroyed.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelMatrix;
use crate::encoder::RelationshipTensor;
use crate::error::{ensure, Result};

/// Row/column indices selected from an `n`-sentence document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPlan {
    pub indices: Vec<usize>,
    pub n: usize,
}

impl CropPlan {
    pub fn identity(n: usize) -> Self {
        CropPlan {
            indices: (0..n).collect(),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.indices.windows(2).all(|w| w[0] < w[1])
    }

    /// Indices unique and in range. Sortedness is not required so shuffled
    /// plans validate too.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.indices.len() <= self.n,
            "crop of {} indices exceeds source size {}",
            self.indices.len(),
            self.n
        );
        let mut seen = vec![false; self.n];
        for &i in &self.indices {
            ensure!(
                i < self.n,
                "crop index {i} out of range for size {}",
                self.n
            );
            ensure!(!seen[i], "crop index {i} repeated");
            seen[i] = true;
        }
        Ok(())
    }
}

/// Draws `min(m, n)` distinct indices uniformly and sorts them ascending.
pub fn sample_crop<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<CropPlan> {
    ensure!(n >= 1, "cannot crop an empty document");
    ensure!(m >= 1, "window size must be positive");
    let m_eff = m.min(n);
    if m_eff == n {
        return Ok(CropPlan::identity(n));
    }
    let mut indices = rand::seq::index::sample(rng, n, m_eff).into_vec();
    indices.sort_unstable();
    Ok(CropPlan { indices, n })
}

/// `H'[j][k] = H[i_j][i_k]` and `Y'[j][k] = Y[i_j][i_k]`.
pub fn apply_crop(
    h: &RelationshipTensor,
    y: &LabelMatrix,
    plan: &CropPlan,
) -> Result<(RelationshipTensor, LabelMatrix)> {
    ensure!(
        plan.n == h.n && plan.n == y.n,
        "crop plan for size {} applied to tensor of size {} and labels of size {}",
        plan.n,
        h.n,
        y.n
    );
    plan.validate()?;
    let m = plan.len();
    let mut sub = RelationshipTensor::zeros(m, h.d);
    let mut labels = LabelMatrix::filled(m, 0);
    for (j, &a) in plan.indices.iter().enumerate() {
        for (k, &b) in plan.indices.iter().enumerate() {
            sub.cell_mut(j, k).copy_from_slice(h.cell(a, b));
            labels.set(j, k, y.get(a, b));
        }
    }
    Ok((sub, labels))
}

/// Order shuffle: permutes the plan's indices. Applying the result with
/// [`apply_crop`] permutes rows and columns by the same permutation, so
/// every cell is still a real `(head, tail)` pair but discourse order is
/// gone.
pub fn shuffle_ord<R: Rng + ?Sized>(plan: &CropPlan, rng: &mut R) -> CropPlan {
    let mut indices = plan.indices.clone();
    indices.shuffle(rng);
    CropPlan { indices, n: plan.n }
}

/// Random shuffle: fills an `m × m` grid with cells drawn independently and
/// uniformly (with replacement) from all `n²` source cells, each carrying
/// its own label. Rows no longer share a head sentence.
pub fn shuffle_rad<R: Rng + ?Sized>(
    h: &RelationshipTensor,
    y: &LabelMatrix,
    m: usize,
    rng: &mut R,
) -> Result<(RelationshipTensor, LabelMatrix)> {
    ensure!(
        h.n == y.n,
        "tensor size {} and label size {} differ",
        h.n,
        y.n
    );
    ensure!(
        h.n >= 1 && m >= 1,
        "shuffle needs a nonempty source and window"
    );
    let n = h.n;
    let mut sub = RelationshipTensor::zeros(m, h.d);
    let mut labels = LabelMatrix::filled(m, 0);
    for j in 0..m {
        for k in 0..m {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            sub.cell_mut(j, k).copy_from_slice(h.cell(a, b));
            labels.set(j, k, y.get(a, b));
        }
    }
    Ok((sub, labels))
}
