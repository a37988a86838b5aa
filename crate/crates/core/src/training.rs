//! Joint two-tower training with per-step crop resampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_label_matrix, Document, LabelMatrix, LabelSpace};
use crate::cropping::{apply_crop, sample_crop, shuffle_ord, shuffle_rad, CropPlan};
use crate::encoder::{encode_pairs, EncoderBackend, RelationshipTensor, ToyBackend};
use crate::error::{ensure, Error, Result};
use crate::model::{
    branch_backward, branch_forward_traced, init_params, round_half, Axis, Branch, BranchLogits,
    DmonParams, DEFAULT_KERNEL_SIZES,
};

/// How training sub-tensors are drawn from each document.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    /// Sorted random window of `window_size` sentences.
    Window,
    /// Whole tensor, no cropping.
    Full,
    /// Window whose indices are randomly permuted (rows and columns alike).
    OrdShuffle,
    /// Cells drawn independently from the whole tensor.
    RadShuffle,
    /// Order-shuffled window whose cells are then drawn independently.
    OrdAndRad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    FrozenToy,
    FinetunePretrained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Training hyperparameters. `Default` carries the fine-tuning settings
/// (window 13, λ = 0.5 each, learning rate 2e-5 decayed linearly to zero,
/// kernels 7/5/5/3/1, 128 units per pair); [`TrainConfig::desk_scale`]
/// adapts the optimizer to a from-scratch model on the toy encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub window_size: usize,
    pub lambda_head: f64,
    pub lambda_tail: f64,
    pub base_lr: f64,
    pub total_steps: usize,
    pub docs_per_step: usize,
    pub seed: u64,
    pub mixed_precision: bool,
    pub encoder_mode: EncoderMode,
    pub kernel_sizes: [usize; 5],
    pub max_seq_len: usize,
    /// Pair-embedding width `d` of the toy encoder.
    pub embed_dim: usize,
    pub encoder_seed: u64,
    pub crop_mode: CropMode,
    /// Skip both MSRMs; the classifiers see raw pair embeddings.
    pub bypass_towers: bool,
    pub optimizer: AdamWConfig,
    /// Validation interval in steps; 0 disables validation.
    pub eval_every: usize,
    /// Periodic checkpoint interval in steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window_size: 13,
            lambda_head: 0.5,
            lambda_tail: 0.5,
            base_lr: 2e-5,
            total_steps: 1000,
            docs_per_step: 1,
            seed: 0,
            mixed_precision: false,
            encoder_mode: EncoderMode::FrozenToy,
            kernel_sizes: DEFAULT_KERNEL_SIZES,
            max_seq_len: 128,
            embed_dim: 16,
            encoder_seed: 0,
            crop_mode: CropMode::Window,
            bypass_towers: false,
            optimizer: AdamWConfig::default(),
            eval_every: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Settings for training from scratch on the toy encoder: a larger
    /// learning rate than the fine-tuning default, everything else unchanged.
    pub fn desk_scale() -> Self {
        TrainConfig {
            base_lr: DESK_LEARNING_RATE,
            total_steps: 2000,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.window_size >= 1, "window_size must be at least 1");
        ensure!(
            self.lambda_head >= 0.0 && self.lambda_tail >= 0.0,
            "loss weights must be non-negative"
        );
        ensure!(
            self.lambda_head.is_finite() && self.lambda_tail.is_finite(),
            "loss weights must be finite"
        );
        ensure!(
            self.base_lr > 0.0 && self.base_lr.is_finite(),
            "base_lr must be positive"
        );
        ensure!(self.total_steps >= 1, "total_steps must be at least 1");
        ensure!(self.docs_per_step >= 1, "docs_per_step must be at least 1");
        ensure!(self.embed_dim >= 1, "embed_dim must be at least 1");
        ensure!(self.max_seq_len >= 1, "max_seq_len must be at least 1");
        for k in self.kernel_sizes {
            ensure!(k % 2 == 1, "kernel size {k} is even");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, truncated to 16 characters.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn backend(&self) -> Result<ToyBackend> {
        match self.encoder_mode {
            EncoderMode::FrozenToy => {
                let mut b = ToyBackend::new(self.embed_dim, self.encoder_seed)?;
                b.max_seq_len = self.max_seq_len;
                Ok(b)
            }
            EncoderMode::FinetunePretrained => Err(Error::Unsupported(
                "fine-tuning a pretrained encoder requires an external model backend; \
                 this build ships only the frozen toy encoder"
                    .into(),
            )),
        }
    }

    fn branch_weight(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Head => self.lambda_head,
            Branch::Tail => self.lambda_tail,
        }
    }
}

pub const DESK_LEARNING_RATE: f64 = 2e-3;

/// 16 hex characters of SHA-256 over the value's JSON serialization.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn log_softmax_true(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits[label] - lse
}

fn check_labels(logits: &BranchLogits, labels: &LabelMatrix) -> Result<()> {
    ensure!(
        logits.m == labels.n,
        "logits of size {} against labels of size {}",
        logits.m,
        labels.n
    );
    if let Some(&bad) = labels.values.iter().find(|&&y| y >= logits.l) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {} classes",
            logits.l
        )));
    }
    Ok(())
}

/// Mean categorical cross-entropy over all `m²` cells.
pub fn branch_loss(logits: &BranchLogits, labels: &LabelMatrix) -> Result<f64> {
    check_labels(logits, labels)?;
    let l = logits.l;
    let cells = labels.values.len();
    let total: f64 = labels
        .values
        .iter()
        .enumerate()
        .map(|(c, &y)| -log_softmax_true(&logits.values[c * l..(c + 1) * l], y))
        .sum();
    Ok(total / cells as f64)
}

/// Loss plus its gradient with respect to the logits,
/// `(softmax − onehot) / m²` per cell.
pub fn branch_loss_and_grad(
    logits: &BranchLogits,
    labels: &LabelMatrix,
) -> Result<(f64, Vec<f64>)> {
    check_labels(logits, labels)?;
    let l = logits.l;
    let cells = labels.values.len();
    let scale = 1.0 / cells as f64;
    let mut grad = vec![0.0; logits.values.len()];
    let mut total = 0.0;
    for (c, &y) in labels.values.iter().enumerate() {
        let z = &logits.values[c * l..(c + 1) * l];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g = &mut grad[c * l..(c + 1) * l];
        let mut sum = 0.0;
        for (gi, zi) in g.iter_mut().zip(z) {
            *gi = (zi - max).exp();
            sum += *gi;
        }
        total -= z[y] - max - sum.ln();
        for gi in g.iter_mut() {
            *gi *= scale / sum;
        }
        g[y] -= scale;
    }
    Ok((total * scale, grad))
}

pub fn joint_loss(loss_head: f64, loss_tail: f64, lambda_head: f64, lambda_tail: f64) -> f64 {
    lambda_head * loss_head + lambda_tail * loss_tail
}

/// `base_lr · (1 − step / total_steps)`; steps past the end clamp to 0.
pub fn lr_schedule(step: usize, total_steps: usize, base_lr: f64) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return 0.0;
    }
    base_lr * (1.0 - step as f64 / total_steps as f64)
}

/// A document with its pair tensor and gold labels, ready for training.
#[derive(Clone, Debug)]
pub struct EncodedDoc {
    pub doc_id: String,
    pub tensor: RelationshipTensor,
    pub labels: LabelMatrix,
}

pub fn encode_corpus(
    docs: &[Document],
    space: &LabelSpace,
    backend: &dyn EncoderBackend,
) -> Result<Vec<EncodedDoc>> {
    docs.iter()
        .map(|doc| {
            Ok(EncodedDoc {
                doc_id: doc.doc_id.clone(),
                tensor: encode_pairs(doc, backend)?,
                labels: build_label_matrix(doc, space)?,
            })
        })
        .collect()
}

/// Adam moments for every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: DmonParams,
    pub second: DmonParams,
    pub updates: u64,
}

/// Everything needed to continue a run exactly where it stopped. Random
/// streams are derived from `(seed, step)`, so no generator state is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointState {
    pub params: DmonParams,
    pub adam: AdamState,
    pub step: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based index of the completed optimizer step.
    pub step: usize,
    /// `None` when the branch has zero weight and is not run.
    pub loss_h: Option<f64>,
    pub loss_t: Option<f64>,
    pub loss: f64,
    pub lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_f1: Option<f64>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent generator for `(seed, purpose, a, b)`.
pub fn stream_rng(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    let s = splitmix(seed ^ splitmix(purpose ^ splitmix(a ^ splitmix(b))));
    ChaCha8Rng::seed_from_u64(s)
}

const STREAM_ORDER: u64 = 1;
const STREAM_CROP: u64 = 2;

/// Draws one training sub-tensor according to `mode`.
pub fn draw_crop(
    doc: &EncodedDoc,
    mode: CropMode,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RelationshipTensor, LabelMatrix)> {
    let n = doc.tensor.n;
    let m = window.min(n);
    match mode {
        CropMode::Full => apply_crop(&doc.tensor, &doc.labels, &CropPlan::identity(n)),
        CropMode::Window => {
            let plan = sample_crop(n, window, rng)?;
            apply_crop(&doc.tensor, &doc.labels, &plan)
        }
        CropMode::OrdShuffle => {
            let plan = shuffle_ord(&sample_crop(n, window, rng)?, rng);
            apply_crop(&doc.tensor, &doc.labels, &plan)
        }
        CropMode::RadShuffle => shuffle_rad(&doc.tensor, &doc.labels, m, rng),
        CropMode::OrdAndRad => {
            let plan = shuffle_ord(&sample_crop(n, window, rng)?, rng);
            let (h, y) = apply_crop(&doc.tensor, &doc.labels, &plan)?;
            shuffle_rad(&h, &y, m, rng)
        }
    }
}

/// Owns parameters and optimizer state for one run over a fixed corpus.
pub struct Trainer<'a> {
    config: TrainConfig,
    data: &'a [EncodedDoc],
    state: CheckpointState,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, data: &'a [EncodedDoc], num_labels: usize) -> Result<Self> {
        config.validate()?;
        ensure!(!data.is_empty(), "training corpus is empty");
        let d = data[0].tensor.d;
        ensure!(
            data.iter().all(|doc| doc.tensor.d == d),
            "documents were encoded with different widths"
        );
        let params = init_params(d, num_labels, config.kernel_sizes, config.seed)?;
        let zeros = params.zeros_like();
        let state = CheckpointState {
            adam: AdamState {
                first: zeros.clone(),
                second: zeros,
                updates: 0,
            },
            params,
            step: 0,
            seed: config.seed,
            config_hash: config.hash(),
        };
        Ok(Trainer {
            config,
            data,
            state,
        })
    }

    /// Continues from a saved state; the config must hash identically.
    pub fn resume(
        config: TrainConfig,
        data: &'a [EncodedDoc],
        state: CheckpointState,
    ) -> Result<Self> {
        config.validate()?;
        ensure!(!data.is_empty(), "training corpus is empty");
        ensure!(
            state.config_hash == config.hash(),
            "checkpoint was written by config {} but resuming with {}",
            state.config_hash,
            config.hash()
        );
        Ok(Trainer {
            config,
            data,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn state(&self) -> &CheckpointState {
        &self.state
    }

    pub fn into_state(self) -> CheckpointState {
        self.state
    }

    pub fn params(&self) -> &DmonParams {
        &self.state.params
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.config.total_steps
    }

    fn doc_for(&self, global: usize) -> usize {
        let n = self.data.len();
        let epoch = global / n;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(
            self.config.seed,
            STREAM_ORDER,
            epoch as u64,
            0,
        ));
        order[global % n]
    }

    fn active_branches(&self) -> Vec<(Branch, Axis)> {
        [
            (Branch::Head, Axis::Horizontal),
            (Branch::Tail, Axis::Vertical),
        ]
        .into_iter()
        .filter(|(b, _)| self.config.branch_weight(*b) > 0.0)
        .collect()
    }

    /// Loss and parameter gradient for the current step without updating.
    pub fn compute_gradients(&self) -> Result<(StepRecord, DmonParams)> {
        let step = self.state.step;
        let cfg = &self.config;
        let params = if cfg.mixed_precision {
            self.state.params.to_half_precision()
        } else {
            self.state.params.clone()
        };
        let mut grad = params.zeros_like();
        let batch = cfg.docs_per_step;
        let mut loss_sums = [0.0f64; 2];
        let active = self.active_branches();
        for slot in 0..batch {
            let doc = &self.data[self.doc_for(step * batch + slot)];
            let mut rng = stream_rng(cfg.seed, STREAM_CROP, step as u64, slot as u64);
            let (mut h, y) = draw_crop(doc, cfg.crop_mode, cfg.window_size, &mut rng)?;
            if cfg.mixed_precision {
                round_half(&mut h.values);
            }
            let mut doc_loss = 0.0;
            for &(branch, axis) in &active {
                let tower = params.tower(branch);
                let (logits, trace) = branch_forward_traced(&h, tower, axis, cfg.bypass_towers)?;
                let (loss, mut d_logits) = branch_loss_and_grad(&logits, &y)?;
                let weight = cfg.branch_weight(branch);
                d_logits
                    .iter_mut()
                    .for_each(|g| *g *= weight / batch as f64);
                branch_backward(tower, &trace, &d_logits, grad.tower_mut(branch));
                loss_sums[branch as usize] += loss;
                doc_loss += weight * loss;
            }
            if !doc_loss.is_finite() {
                return Err(Error::Diverged {
                    step: step + 1,
                    doc_id: doc.doc_id.clone(),
                });
            }
        }
        let mean = |b: Branch| {
            active
                .iter()
                .any(|(x, _)| *x == b)
                .then(|| loss_sums[b as usize] / batch as f64)
        };
        let (loss_h, loss_t) = (mean(Branch::Head), mean(Branch::Tail));
        let record = StepRecord {
            step: step + 1,
            loss_h,
            loss_t,
            loss: joint_loss(
                loss_h.unwrap_or(0.0),
                loss_t.unwrap_or(0.0),
                cfg.lambda_head,
                cfg.lambda_tail,
            ),
            lr: lr_schedule(step, cfg.total_steps, cfg.base_lr),
            val_f1: None,
        };
        Ok((record, grad))
    }

    /// One optimizer step. Towers with zero loss weight, and the MSRMs when
    /// bypassed, are left untouched, weight decay included.
    pub fn step(&mut self) -> Result<StepRecord> {
        ensure!(
            !self.is_done(),
            "training already reached {} steps",
            self.config.total_steps
        );
        let (record, grad) = self.compute_gradients()?;
        let opt = &self.config.optimizer;
        let lr = record.lr;
        let active = self.active_branches();
        // the classifier is always the last two tensors of a tower
        let skip = if self.config.bypass_towers {
            2 * self.state.params.tower(Branch::Head).msrm.convs().len()
        } else {
            0
        };
        let adam = &mut self.state.adam;
        adam.updates += 1;
        let t = adam.updates as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        for (branch, _) in active {
            let p = self.state.params.tower_mut(branch).tensors_mut();
            let g = grad.tower(branch).tensors();
            let m = adam.first.tower_mut(branch).tensors_mut();
            let v = adam.second.tower_mut(branch).tensors_mut();
            for (((p, g), m), v) in p.into_iter().zip(g).zip(m).zip(v).skip(skip) {
                for i in 0..p.len() {
                    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
                    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
                    p[i] *= 1.0 - lr * opt.weight_decay;
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + opt.eps);
                }
            }
        }
        self.state.step += 1;
        Ok(record)
    }
}

/// Scores parameters on held-out data, returning macro-F1.
pub type Validator<'a> = dyn FnMut(&DmonParams) -> Result<f64> + 'a;

/// Result of a complete run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: CheckpointState,
    pub log: Vec<StepRecord>,
    /// Best validation macro-F1 seen, with its step and parameters.
    pub best: Option<(usize, f64, DmonParams)>,
}

/// Trains from scratch for `config.total_steps` steps.
///
/// `validate` is called every `eval_every` steps (when both are set) with
/// the current parameters and must return a validation macro-F1.
pub fn train(
    data: &[EncodedDoc],
    num_labels: usize,
    config: &TrainConfig,
    mut validate: Option<&mut Validator<'_>>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), data, num_labels)?;
    let mut log = Vec::with_capacity(config.total_steps);
    let mut best: Option<(usize, f64, DmonParams)> = None;
    while !trainer.is_done() {
        let mut record = trainer.step()?;
        if let Some(f) = validate.as_deref_mut() {
            if config.eval_every > 0 && record.step % config.eval_every == 0 {
                let score = f(trainer.params())?;
                record.val_f1 = Some(score);
                if best.as_ref().is_none_or(|(_, s, _)| score > *s) {
                    best = Some((record.step, score, trainer.params().clone()));
                }
            }
        }
        log.push(record);
    }
    Ok(TrainOutcome {
        state: trainer.into_state(),
        log,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Branch;

    fn logits(m: usize, l: usize, values: Vec<f64>) -> BranchLogits {
        BranchLogits {
            m,
            l,
            branch: Branch::Head,
            values,
        }
    }

    #[test]
    fn uniform_logits_give_log_l() {
        let y = LabelMatrix {
            n: 2,
            values: vec![0, 1, 2, 1],
        };
        let loss = branch_loss(&logits(2, 3, vec![0.0; 12]), &y).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_give_zero() {
        let y = LabelMatrix {
            n: 1,
            values: vec![1],
        };
        let loss = branch_loss(&logits(1, 3, vec![0.0, 50.0, 0.0]), &y).unwrap();
        assert!(loss.abs() < 1e-6);
    }

    #[test]
    fn hand_computed_two_by_two() {
        let z = vec![1.0, 0.0, 0.0, 2.0, -1.0, 1.0, 3.0, 3.0];
        let y = LabelMatrix {
            n: 2,
            values: vec![0, 1, 0, 1],
        };
        // per cell: -log softmax(z)[y]
        let cell = |a: f64, b: f64, take_a: bool| {
            let lse = (a.exp() + b.exp()).ln();
            if take_a {
                lse - a
            } else {
                lse - b
            }
        };
        let expect = (cell(1.0, 0.0, true)
            + cell(0.0, 2.0, false)
            + cell(-1.0, 1.0, true)
            + cell(3.0, 3.0, false))
            / 4.0;
        let got = branch_loss(&logits(2, 2, z.clone()), &y).unwrap();
        assert!((got - expect).abs() < 1e-12);
        let (got2, _) = branch_loss_and_grad(&logits(2, 2, z), &y).unwrap();
        assert!((got2 - expect).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label() {
        let y = LabelMatrix {
            n: 1,
            values: vec![3],
        };
        assert!(branch_loss(&logits(1, 3, vec![0.0; 3]), &y).is_err());
    }

    #[test]
    fn joint_loss_arithmetic() {
        assert_eq!(joint_loss(1.0, 3.0, 0.5, 0.5), 2.0);
        assert_eq!(joint_loss(1.7, 3.0, 1.0, 0.0), 1.7);
        assert_eq!(joint_loss(0.0, 0.0, 0.5, 0.5), 0.0);
    }

    #[test]
    fn linear_decay() {
        assert_eq!(lr_schedule(0, 100, 2e-5), 2e-5);
        assert_eq!(lr_schedule(50, 100, 2e-5), 1e-5);
        assert_eq!(lr_schedule(100, 100, 2e-5), 0.0);
        assert_eq!(lr_schedule(150, 100, 2e-5), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                window_size: 0,
                ..Default::default()
            },
            TrainConfig {
                lambda_tail: -0.1,
                ..Default::default()
            },
            TrainConfig {
                base_lr: 0.0,
                ..Default::default()
            },
            TrainConfig {
                kernel_sizes: [7, 5, 5, 2, 1],
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn finetune_mode_is_reported() {
        let c = TrainConfig {
            encoder_mode: EncoderMode::FinetunePretrained,
            ..Default::default()
        };
        assert!(matches!(c.backend(), Err(Error::Unsupported(_))));
    }
}
