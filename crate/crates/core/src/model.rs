//! The dual-tower network.
//!
//! Each tower runs a multi-scale residual module (MSRM) along one axis of the
//! relationship tensor: the head tower along rows (fixed head sentence,
//! varying tail), the tail tower along columns. A shared-per-tower linear
//! classifier then maps every cell's `d` features to `l` logits.
//!
//! Sequences are stored position-major: element `(p, c)` of a length-`len`
//! sequence with `C` channels lives at `p * C + c`. Convolution weights are
//! laid out `(out, kernel, in)` so the receptive window of one output is a
//! single contiguous slice of both weight and input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::RelationshipTensor;
use crate::error::{ensure, Error, Result};

/// Kernel widths of the five convolutions, in order: `S1`, `P1`, `S2`,
/// `P2`, output projection.
pub const DEFAULT_KERNEL_SIZES: [usize; 5] = [7, 5, 5, 3, 1];

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Stride-1, length-preserving 1-D convolution with symmetric zero padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// Shape `(out_channels, kernel, in_channels)`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * kernel * in_channels],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.out_channels, self.kernel, self.in_channels]
    }

    /// Valid tap range `[t_lo, t_hi)` for output position `p`.
    fn taps(&self, p: usize, len: usize) -> (usize, usize) {
        let pad = self.kernel / 2;
        let t_lo = pad.saturating_sub(p);
        let t_hi = self.kernel.min(len + pad - p);
        (t_lo, t_hi)
    }

    /// `y[p][o] = b[o] + Σ_t Σ_i w[o][t][i] · x[p + t - k/2][i]`.
    pub fn forward(&self, x: &[f64], len: usize) -> Vec<f64> {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel);
        let pad = k / 2;
        debug_assert_eq!(x.len(), len * cin);
        let mut y = vec![0.0; len * cout];
        for p in 0..len {
            let (t_lo, t_hi) = self.taps(p, len);
            let q_lo = p + t_lo - pad;
            let xs = &x[q_lo * cin..(q_lo + t_hi - t_lo) * cin];
            let out = &mut y[p * cout..(p + 1) * cout];
            for (o, yo) in out.iter_mut().enumerate() {
                let base = o * k * cin;
                let w = &self.weight[base + t_lo * cin..base + t_hi * cin];
                *yo = self.bias[o] + dot(w, xs);
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and, when requested, the
    /// input gradient into `dx`.
    pub fn backward(
        &self,
        x: &[f64],
        len: usize,
        dy: &[f64],
        grad: &mut Conv1d,
        mut dx: Option<&mut [f64]>,
    ) {
        let (cin, cout, k) = (self.in_channels, self.out_channels, self.kernel);
        let pad = k / 2;
        for p in 0..len {
            let (t_lo, t_hi) = self.taps(p, len);
            let q_lo = p + t_lo - pad;
            let span = q_lo * cin..(q_lo + t_hi - t_lo) * cin;
            for o in 0..cout {
                let g = dy[p * cout + o];
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let base = o * k * cin;
                let wspan = base + t_lo * cin..base + t_hi * cin;
                axpy(g, &x[span.clone()], &mut grad.weight[wspan.clone()]);
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(g, &self.weight[wspan], &mut dx[span.clone()]);
                }
            }
        }
    }
}

/// Per-cell affine map `d → l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Shape `(in_dim, out_dim)`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            axpy(
                xi,
                &self.weight[i * self.out_dim..(i + 1) * self.out_dim],
                y,
            );
        }
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear, dx: &mut [f64]) {
        for (b, g) in grad.bias.iter_mut().zip(dy) {
            *b += g;
        }
        for (i, &xi) in x.iter().enumerate() {
            let row = i * self.out_dim..(i + 1) * self.out_dim;
            axpy(xi, dy, &mut grad.weight[row.clone()]);
            dx[i] += dot(&self.weight[row], dy);
        }
    }
}

/// The five convolutions of one multi-scale residual module. Channel plan:
/// `S1, P1: d → d`; `S2, P2: 2d → d`; output projection `2d → d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsrmParams {
    pub s1: Conv1d,
    pub p1: Conv1d,
    pub s2: Conv1d,
    pub p2: Conv1d,
    pub out: Conv1d,
}

impl MsrmParams {
    pub fn zeros(d: usize, kernel_sizes: [usize; 5]) -> Self {
        let [k1, k2, k3, k4, k5] = kernel_sizes;
        MsrmParams {
            s1: Conv1d::zeros(d, d, k1),
            p1: Conv1d::zeros(d, d, k2),
            s2: Conv1d::zeros(2 * d, d, k3),
            p2: Conv1d::zeros(2 * d, d, k4),
            out: Conv1d::zeros(2 * d, d, k5),
        }
    }

    pub fn dim(&self) -> usize {
        self.out.out_channels
    }

    pub fn kernel_sizes(&self) -> [usize; 5] {
        [
            self.s1.kernel,
            self.p1.kernel,
            self.s2.kernel,
            self.p2.kernel,
            self.out.kernel,
        ]
    }

    pub(crate) fn convs(&self) -> [(&'static str, &Conv1d); 5] {
        [
            ("s1", &self.s1),
            ("p1", &self.p1),
            ("s2", &self.s2),
            ("p2", &self.p2),
            ("out", &self.out),
        ]
    }

    pub(crate) fn convs_mut(&mut self) -> [&mut Conv1d; 5] {
        [
            &mut self.s1,
            &mut self.p1,
            &mut self.s2,
            &mut self.p2,
            &mut self.out,
        ]
    }
}

/// Intermediate activations of one MSRM pass, each `(len, channels)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MsrmTrace {
    pub len: usize,
    pub s1: Vec<f64>,
    pub p1: Vec<f64>,
    pub s2: Vec<f64>,
    pub p2: Vec<f64>,
    /// `o = out(concat(S2, P2)) + h`, shape `(len, d)`.
    pub output: Vec<f64>,
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Channel-wise concatenation of two `(len, c)` sequences.
fn concat(a: &[f64], b: &[f64], len: usize, c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len * 2 * c);
    for p in 0..len {
        out.extend_from_slice(&a[p * c..(p + 1) * c]);
        out.extend_from_slice(&b[p * c..(p + 1) * c]);
    }
    out
}

/// Splits a `(len, 2c)` gradient into its two halves, zeroing entries whose
/// forward activation was clipped by ReLU.
fn split_masked(
    g: &[f64],
    act_a: &[f64],
    act_b: &[f64],
    len: usize,
    c: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut ga = vec![0.0; len * c];
    let mut gb = vec![0.0; len * c];
    for p in 0..len {
        for ch in 0..c {
            let i = p * c + ch;
            if act_a[i] > 0.0 {
                ga[i] = g[p * 2 * c + ch];
            }
            if act_b[i] > 0.0 {
                gb[i] = g[p * 2 * c + c + ch];
            }
        }
    }
    (ga, gb)
}

fn check_finite(v: &[f64], layer: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("MSRM layer {layer}")))
    }
}

/// One MSRM pass over a `(len, d)` sequence:
///
/// ```text
/// S1 = ReLU(conv_k1(h))          P1 = ReLU(conv_k2(h))
/// S2 = ReLU(conv_k3([S1, P1]))   P2 = ReLU(conv_k4([S1, P1]))
/// o  = conv_k5([S2, P2]) + h
/// ```
pub fn msrm_forward(h: &[f64], len: usize, params: &MsrmParams) -> Result<MsrmTrace> {
    let d = params.dim();
    ensure!(len >= 1, "MSRM input must have at least one position");
    ensure!(
        h.len() == len * d,
        "MSRM input has {} values, expected {len} x {d}",
        h.len()
    );
    check_finite(h, "input")?;
    let mut s1 = params.s1.forward(h, len);
    relu_in_place(&mut s1);
    check_finite(&s1, "s1")?;
    let mut p1 = params.p1.forward(h, len);
    relu_in_place(&mut p1);
    check_finite(&p1, "p1")?;
    let cat1 = concat(&s1, &p1, len, d);
    let mut s2 = params.s2.forward(&cat1, len);
    relu_in_place(&mut s2);
    check_finite(&s2, "s2")?;
    let mut p2 = params.p2.forward(&cat1, len);
    relu_in_place(&mut p2);
    check_finite(&p2, "p2")?;
    let cat2 = concat(&s2, &p2, len, d);
    let mut output = params.out.forward(&cat2, len);
    axpy(1.0, h, &mut output);
    check_finite(&output, "out")?;
    Ok(MsrmTrace {
        len,
        s1,
        p1,
        s2,
        p2,
        output,
    })
}

/// Backpropagates `d_out` through one MSRM pass, accumulating into `grad`.
/// `d_h`, when given, receives the input gradient (residual path included).
pub fn msrm_backward(
    h: &[f64],
    trace: &MsrmTrace,
    d_out: &[f64],
    params: &MsrmParams,
    grad: &mut MsrmParams,
    mut d_h: Option<&mut [f64]>,
) {
    let len = trace.len;
    let d = params.dim();
    if let Some(dh) = d_h.as_deref_mut() {
        axpy(1.0, d_out, dh);
    }
    let cat2 = concat(&trace.s2, &trace.p2, len, d);
    let mut d_cat2 = vec![0.0; len * 2 * d];
    params
        .out
        .backward(&cat2, len, d_out, &mut grad.out, Some(&mut d_cat2));
    let (d_s2, d_p2) = split_masked(&d_cat2, &trace.s2, &trace.p2, len, d);

    let cat1 = concat(&trace.s1, &trace.p1, len, d);
    let mut d_cat1 = vec![0.0; len * 2 * d];
    params
        .s2
        .backward(&cat1, len, &d_s2, &mut grad.s2, Some(&mut d_cat1));
    params
        .p2
        .backward(&cat1, len, &d_p2, &mut grad.p2, Some(&mut d_cat1));
    let (d_s1, d_p1) = split_masked(&d_cat1, &trace.s1, &trace.p1, len, d);

    params
        .s1
        .backward(h, len, &d_s1, &mut grad.s1, d_h.as_deref_mut());
    params.p1.backward(h, len, &d_p1, &mut grad.p1, d_h);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Convolve along rows: fixed head, varying tail.
    Horizontal,
    /// Convolve along columns: fixed tail, varying head.
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Head,
    Tail,
}

impl Axis {
    pub fn branch(self) -> Branch {
        match self {
            Axis::Horizontal => Branch::Head,
            Axis::Vertical => Branch::Tail,
        }
    }
}

/// One tower: an MSRM plus its per-cell classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub msrm: MsrmParams,
    pub classifier: Linear,
}

impl Tower {
    pub fn zeros(d: usize, l: usize, kernel_sizes: [usize; 5]) -> Self {
        Tower {
            msrm: MsrmParams::zeros(d, kernel_sizes),
            classifier: Linear::zeros(d, l),
        }
    }

    fn named_tensors<'a>(&'a self, prefix: &str) -> Vec<(String, Vec<usize>, &'a [f64])> {
        let mut out = Vec::new();
        for (name, conv) in self.msrm.convs() {
            out.push((
                format!("{prefix}.msrm.{name}.weight"),
                conv.weight_shape().to_vec(),
                &conv.weight[..],
            ));
            out.push((
                format!("{prefix}.msrm.{name}.bias"),
                vec![conv.out_channels],
                &conv.bias[..],
            ));
        }
        let c = &self.classifier;
        out.push((
            format!("{prefix}.classifier.weight"),
            vec![c.in_dim, c.out_dim],
            &c.weight[..],
        ));
        out.push((
            format!("{prefix}.classifier.bias"),
            vec![c.out_dim],
            &c.bias[..],
        ));
        out
    }

    /// Parameter tensors in a fixed order: MSRM convolutions (weight, bias)
    /// then classifier (weight, bias).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (_, conv) in self.msrm.convs() {
            out.push(&conv.weight);
            out.push(&conv.bias);
        }
        out.push(&self.classifier.weight);
        out.push(&self.classifier.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for conv in self.msrm.convs_mut() {
            out.push(&mut conv.weight);
            out.push(&mut conv.bias);
        }
        out.push(&mut self.classifier.weight);
        out.push(&mut self.classifier.bias);
        out
    }
}

/// Parameters of both towers. The towers never share weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmonParams {
    pub head: Tower,
    pub tail: Tower,
}

impl DmonParams {
    pub fn zeros(d: usize, l: usize, kernel_sizes: [usize; 5]) -> Self {
        DmonParams {
            head: Tower::zeros(d, l, kernel_sizes),
            tail: Tower::zeros(d, l, kernel_sizes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn dim(&self) -> usize {
        self.head.msrm.dim()
    }

    pub fn num_labels(&self) -> usize {
        self.head.classifier.out_dim
    }

    pub fn kernel_sizes(&self) -> [usize; 5] {
        self.head.msrm.kernel_sizes()
    }

    pub fn tower(&self, branch: Branch) -> &Tower {
        match branch {
            Branch::Head => &self.head,
            Branch::Tail => &self.tail,
        }
    }

    pub fn tower_mut(&mut self, branch: Branch) -> &mut Tower {
        match branch {
            Branch::Head => &mut self.head,
            Branch::Tail => &mut self.tail,
        }
    }

    /// `(name, shape, values)` for every parameter tensor, head tower first.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = self.head.named_tensors("head");
        out.extend(self.tail.named_tensors("tail"));
        out
    }

    /// Mutable views in the same order as [`DmonParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = self.head.tensors_mut();
        out.extend(self.tail.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Copy with every value rounded through IEEE half precision.
    pub fn to_half_precision(&self) -> Self {
        let mut p = self.clone();
        for t in p.tensors_mut() {
            round_half(t);
        }
        p
    }
}

pub(crate) fn round_half(v: &mut [f64]) {
    for x in v {
        *x = half::f16::from_f64(*x).to_f64();
    }
}

/// Seeded initialization. Every weight is drawn from
/// `U(-1/√fan_in, 1/√fan_in)` where `fan_in = in_channels · kernel` for
/// convolutions and `d` for classifiers; biases start at zero. Draw order:
/// head tower (S1, P1, S2, P2, out, classifier) then tail tower.
pub fn init_params(d: usize, l: usize, kernel_sizes: [usize; 5], seed: u64) -> Result<DmonParams> {
    ensure!(
        d > 0 && l > 0,
        "dimensions must be positive (d = {d}, l = {l})"
    );
    for k in kernel_sizes {
        ensure!(
            k % 2 == 1,
            "kernel size {k} is even; same-length padding needs odd kernels"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = DmonParams::zeros(d, l, kernel_sizes);
    for tower in [&mut params.head, &mut params.tail] {
        for conv in tower.msrm.convs_mut() {
            let bound = 1.0 / ((conv.in_channels * conv.kernel) as f64).sqrt();
            conv.weight
                .iter_mut()
                .for_each(|w| *w = rng.gen_range(-bound..bound));
        }
        let bound = 1.0 / (d as f64).sqrt();
        tower
            .classifier
            .weight
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-bound..bound));
    }
    Ok(params)
}

/// Per-cell class scores of one tower, shape `(m, m, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchLogits {
    pub m: usize,
    pub l: usize,
    pub branch: Branch,
    pub values: Vec<f64>,
}

impl BranchLogits {
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.m + j) * self.l;
        &self.values[start..start + self.l]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.m + j) * self.l;
        &mut self.values[start..start + self.l]
    }

    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.m {
            for j in 0..self.m {
                out.cell_mut(j, i).copy_from_slice(self.cell(i, j));
            }
        }
        out
    }
}

/// Cached activations of one tower pass, needed for backpropagation.
#[derive(Clone, Debug)]
pub struct BranchTrace {
    pub axis: Axis,
    /// Per line (row or column): the gathered input sequence and its trace.
    /// Empty when the tower is bypassed.
    pub lines: Vec<(Vec<f64>, MsrmTrace)>,
    /// Pre-classifier features in cell layout `(m, m, d)`.
    pub features: Vec<f64>,
}

/// Cell offset of position `p` on line `r` along `axis`.
fn cell_index(axis: Axis, m: usize, r: usize, p: usize) -> usize {
    match axis {
        Axis::Horizontal => r * m + p,
        Axis::Vertical => p * m + r,
    }
}

fn gather_line(h: &RelationshipTensor, axis: Axis, r: usize) -> Vec<f64> {
    let (m, d) = (h.n, h.d);
    match axis {
        Axis::Horizontal => h.values[r * m * d..(r + 1) * m * d].to_vec(),
        Axis::Vertical => {
            let mut line = Vec::with_capacity(m * d);
            for p in 0..m {
                line.extend_from_slice(h.cell(p, r));
            }
            line
        }
    }
}

/// Runs one tower over `h` along `axis`, keeping activations for backward.
/// With `bypass` the MSRM is skipped and the classifier sees raw cells.
pub fn branch_forward_traced(
    h: &RelationshipTensor,
    tower: &Tower,
    axis: Axis,
    bypass: bool,
) -> Result<(BranchLogits, BranchTrace)> {
    let (m, d) = (h.n, h.d);
    let l = tower.classifier.out_dim;
    ensure!(
        tower.msrm.dim() == d && tower.classifier.in_dim == d,
        "tower width {} does not match tensor width {d}",
        tower.msrm.dim()
    );
    ensure!(m >= 1, "relationship tensor is empty");
    let mut lines = Vec::new();
    let features = if bypass {
        h.values.clone()
    } else {
        let mut features = vec![0.0; m * m * d];
        lines.reserve(m);
        for r in 0..m {
            let input = gather_line(h, axis, r);
            let trace = msrm_forward(&input, m, &tower.msrm).map_err(|e| match e {
                Error::Numeric(what) => Error::Numeric(format!("{axis:?} line {r}: {what}")),
                other => other,
            })?;
            for p in 0..m {
                let c = cell_index(axis, m, r, p);
                features[c * d..(c + 1) * d].copy_from_slice(&trace.output[p * d..(p + 1) * d]);
            }
            lines.push((input, trace));
        }
        features
    };
    let mut logits = BranchLogits {
        m,
        l,
        branch: axis.branch(),
        values: vec![0.0; m * m * l],
    };
    for c in 0..m * m {
        tower.classifier.forward_into(
            &features[c * d..(c + 1) * d],
            &mut logits.values[c * l..(c + 1) * l],
        );
    }
    if logits.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("{axis:?} classifier logits")));
    }
    Ok((
        logits,
        BranchTrace {
            axis,
            lines,
            features,
        },
    ))
}

/// Backpropagates logit gradients `(m, m, l)` through one tower.
pub fn branch_backward(tower: &Tower, trace: &BranchTrace, d_logits: &[f64], grad: &mut Tower) {
    let d = tower.classifier.in_dim;
    let l = tower.classifier.out_dim;
    let cells = trace.features.len() / d;
    let mut d_features = vec![0.0; cells * d];
    for c in 0..cells {
        tower.classifier.backward(
            &trace.features[c * d..(c + 1) * d],
            &d_logits[c * l..(c + 1) * l],
            &mut grad.classifier,
            &mut d_features[c * d..(c + 1) * d],
        );
    }
    let m = trace.lines.len();
    for (r, (input, line_trace)) in trace.lines.iter().enumerate() {
        let mut d_out = vec![0.0; m * d];
        for p in 0..m {
            let c = cell_index(trace.axis, m, r, p);
            d_out[p * d..(p + 1) * d].copy_from_slice(&d_features[c * d..(c + 1) * d]);
        }
        msrm_backward(input, line_trace, &d_out, &tower.msrm, &mut grad.msrm, None);
    }
}

/// Runs `tower` along `axis`: an MSRM pass per row (horizontal) or per
/// column (vertical), then the per-cell classifier.
pub fn branch_forward(h: &RelationshipTensor, tower: &Tower, axis: Axis) -> Result<BranchLogits> {
    branch_forward_traced(h, tower, axis, false).map(|(logits, _)| logits)
}

/// Head tower horizontally and tail tower vertically.
pub fn dmon_forward(
    h: &RelationshipTensor,
    params: &DmonParams,
) -> Result<(BranchLogits, BranchLogits)> {
    dmon_forward_with(h, params, false)
}

/// [`dmon_forward`] with optional tower bypass, which reduces both branches
/// to per-cell linear classifiers on the raw pair embeddings.
pub fn dmon_forward_with(
    h: &RelationshipTensor,
    params: &DmonParams,
    bypass_towers: bool,
) -> Result<(BranchLogits, BranchLogits)> {
    let (head, _) = branch_forward_traced(h, &params.head, Axis::Horizontal, bypass_towers)?;
    let (tail, _) = branch_forward_traced(h, &params.tail, Axis::Vertical, bypass_towers)?;
    Ok((head, tail))
}
