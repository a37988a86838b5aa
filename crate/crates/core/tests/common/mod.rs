//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use dmon::corpus::{generate_synthetic_corpus, LabelMatrix, LabelSpace, PlantedRule, SynthSpec};
use dmon::model::{Conv1d, MsrmParams};
use dmon::RelationshipTensor;
use rand::Rng;

/// Direct summation with an explicitly zero-padded input. `x` is
/// `(len, cin)`; returns `(len, cout)`.
pub fn naive_conv(x: &[f64], len: usize, conv: &Conv1d) -> Vec<f64> {
    let (cin, cout, k) = (conv.in_channels, conv.out_channels, conv.kernel);
    let pad = k / 2;
    let padded_len = len + 2 * pad;
    let mut padded = vec![0.0; padded_len * cin];
    for p in 0..len {
        for i in 0..cin {
            padded[(p + pad) * cin + i] = x[p * cin + i];
        }
    }
    let mut y = vec![0.0; len * cout];
    for p in 0..len {
        for o in 0..cout {
            let mut acc = conv.bias[o];
            for t in 0..k {
                for i in 0..cin {
                    let w = conv.weight[(o * k + t) * cin + i];
                    acc += w * padded[(p + t) * cin + i];
                }
            }
            y[p * cout + o] = acc;
        }
    }
    y
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Channel-wise concatenation of two `(len, c)` sequences.
fn concat(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let (ca, cb) = (a.len() / len, b.len() / len);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for p in 0..len {
        out.extend_from_slice(&a[p * ca..(p + 1) * ca]);
        out.extend_from_slice(&b[p * cb..(p + 1) * cb]);
    }
    out
}

/// The multi-scale residual module written out layer by layer.
pub fn naive_msrm(h: &[f64], len: usize, p: &MsrmParams) -> Vec<f64> {
    let s1 = relu(naive_conv(h, len, &p.s1));
    let p1 = relu(naive_conv(h, len, &p.p1));
    let c1 = concat(&s1, &p1, len);
    let s2 = relu(naive_conv(&c1, len, &p.s2));
    let p2 = relu(naive_conv(&c1, len, &p.p2));
    let c2 = concat(&s2, &p2, len);
    let o = naive_conv(&c2, len, &p.out);
    o.iter().zip(h).map(|(a, b)| a + b).collect()
}

pub fn random_conv<R: Rng>(rng: &mut R, cin: usize, cout: usize, k: usize) -> Conv1d {
    let mut c = Conv1d::zeros(cin, cout, k);
    c.weight
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-1.0..1.0));
    c.bias
        .iter_mut()
        .for_each(|b| *b = rng.gen_range(-0.5..0.5));
    c
}

pub fn random_msrm<R: Rng>(rng: &mut R, d: usize, ks: [usize; 5]) -> MsrmParams {
    MsrmParams {
        s1: random_conv(rng, d, d, ks[0]),
        p1: random_conv(rng, d, d, ks[1]),
        s2: random_conv(rng, 2 * d, d, ks[2]),
        p2: random_conv(rng, 2 * d, d, ks[3]),
        out: random_conv(rng, 2 * d, d, ks[4]),
    }
}

pub fn random_tensor<R: Rng>(rng: &mut R, n: usize, d: usize) -> RelationshipTensor {
    let values = (0..n * n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    RelationshipTensor::from_values(n, d, values).unwrap()
}

pub fn random_labels<R: Rng>(rng: &mut R, n: usize, l: usize) -> LabelMatrix {
    LabelMatrix {
        n,
        values: (0..n * n).map(|_| rng.gen_range(0..l)).collect(),
    }
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Top-1 minus top-2 probability by sorting.
pub fn sorted_margin(z: &[f64]) -> f64 {
    let mut p = softmax(z);
    p.sort_by(|a, b| b.partial_cmp(a).unwrap());
    p[0] - p[1]
}

/// First index of the maximum.
pub fn first_argmax(z: &[f64]) -> usize {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.iter().position(|&x| x == m).unwrap()
}

/// Per-class F1 by counting cells one at a time.
pub fn brute_force_f1(
    preds: &[LabelMatrix],
    gold: &[LabelMatrix],
    l: usize,
    include_diagonal: bool,
) -> Vec<f64> {
    (0..l)
        .map(|c| {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (p, g) in preds.iter().zip(gold) {
                for i in 0..g.n {
                    for j in 0..g.n {
                        if i == j && !include_diagonal {
                            continue;
                        }
                        let (pv, gv) = (p.values[i * g.n + j], g.values[i * g.n + j]);
                        match (pv == c, gv == c) {
                            (true, true) => tp += 1,
                            (true, false) => fp += 1,
                            (false, true) => fn_ += 1,
                            _ => {}
                        }
                    }
                }
            }
            let prec = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let rec = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            if prec + rec == 0.0 {
                0.0
            } else {
                2.0 * prec * rec / (prec + rec)
            }
        })
        .collect()
}

/// The trend-protocol corpora: 100 training and 30 test documents of 8
/// sentences under the chain rule.
pub fn chain_splits() -> (LabelSpace, Vec<dmon::Document>, Vec<dmon::Document>) {
    let train =
        generate_synthetic_corpus(&SynthSpec::new(100, (8, 8), PlantedRule::Chain, 1)).unwrap();
    let test =
        generate_synthetic_corpus(&SynthSpec::new(30, (8, 8), PlantedRule::Chain, 2)).unwrap();
    (LabelSpace::support_attack(), train, test)
}
