//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dmon::corpus::{build_label_matrix, Document, LabelMatrix, LabelSpace, Relation};
use dmon::cropping::{apply_crop, sample_crop};
use dmon::experiment::{ablate, sweep, Dataset, Table, Variant};
use dmon::fusion::fuse;
use dmon::metrics::{macro_f1, ColumnSpec};
use dmon::model::{
    dmon_forward, init_params, msrm_forward, Branch, BranchLogits, DmonParams, MsrmParams,
};
use dmon::training::{
    branch_loss, joint_loss, AdamState, CheckpointState, CropMode, EncodedDoc, TrainConfig, Trainer,
};
use dmon::RunConfig;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

const KS: [usize; 5] = [7, 5, 5, 3, 1];

fn c1_residual_identity() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (m, d) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let h: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let out = msrm_forward(&h, m, &MsrmParams::zeros(d, KS)).map_err(|e| e.to_string())?;
        for (a, b) in out.output.iter().zip(&h) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst == 0.0, format!("max abs error {worst:e}"))?;
    within(t0.elapsed(), 5.0)?;
    Ok(format!(
        "100 inputs, max abs error 0, {:.2}s",
        t0.elapsed().as_secs_f64()
    ))
}

fn c2_convolution_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m, d) = (rng.gen_range(1..=6), rng.gen_range(1..=4));
        let ks = [7, 5, 5, 3, 1].map(|k: usize| {
            if rng.gen_bool(0.2) {
                [1, 3, 5, 7][rng.gen_range(0..4)]
            } else {
                k
            }
        });
        let params = random_msrm(&mut rng, d, ks);
        let h: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = msrm_forward(&h, m, &params).map_err(|e| e.to_string())?;
        worst = worst.max(max_rel_err(&got.output, &naive_msrm(&h, m, &params)));
    }
    check(worst <= 1e-6, format!("max relative error {worst:e}"))?;
    within(t0.elapsed(), 30.0)?;
    Ok(format!("50 instances, max relative error {worst:.1e}"))
}

fn joint_of(
    h: &dmon::RelationshipTensor,
    y: &LabelMatrix,
    p: &DmonParams,
    lh: f64,
    lt: f64,
) -> f64 {
    let (zh, zt) = dmon_forward(h, p).unwrap();
    joint_loss(
        branch_loss(&zh, y).unwrap(),
        branch_loss(&zt, y).unwrap(),
        lh,
        lt,
    )
}

fn resume_at(params: DmonParams, config: &TrainConfig) -> CheckpointState {
    CheckpointState {
        adam: AdamState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            updates: 0,
        },
        params,
        step: 0,
        seed: config.seed,
        config_hash: config.hash(),
    }
}

fn c3_gradient_check() -> Outcome {
    let t0 = Instant::now();
    let (m, d, l) = (3, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut params = init_params(d, l, KS, 3).map_err(|e| e.to_string())?;
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|x| *x = rng.gen_range(-0.8..0.8));
    }
    let doc = EncodedDoc {
        doc_id: "gradcheck".into(),
        tensor: random_tensor(&mut rng, m, d),
        labels: random_labels(&mut rng, m, l),
    };
    let (lh, lt) = (0.3, 0.7);
    let config = TrainConfig {
        crop_mode: CropMode::Full,
        lambda_head: lh,
        lambda_tail: lt,
        embed_dim: d,
        ..TrainConfig::desk_scale()
    };
    let data = [doc];
    let trainer = Trainer::resume(config.clone(), &data, resume_at(params.clone(), &config))
        .map_err(|e| e.to_string())?;
    let (_, grad) = trainer.compute_gradients().map_err(|e| e.to_string())?;
    let analytic: Vec<f64> = grad
        .named_tensors()
        .into_iter()
        .flat_map(|(_, _, v)| v.to_vec())
        .collect();

    let eps = 1e-6;
    let mut numeric = Vec::with_capacity(analytic.len());
    let counts: Vec<usize> = params
        .named_tensors()
        .iter()
        .map(|(_, _, v)| v.len())
        .collect();
    for (t, &len) in counts.iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t][i] += eps;
            let mut minus = params.clone();
            minus.tensors_mut()[t][i] -= eps;
            let (y, h) = (&data[0].labels, &data[0].tensor);
            numeric.push(
                (joint_of(h, y, &plus, lh, lt) - joint_of(h, y, &minus, lh, lt)) / (2.0 * eps),
            );
        }
    }
    // Relative error with a 1e-6 floor on the denominator so parameters
    // whose gradient is zero compare on absolute error.
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    check(worst <= 1e-4, format!("max relative error {worst:e}"))?;
    within(t0.elapsed(), 60.0)?;
    Ok(format!(
        "{} parameters, max relative error {worst:.1e}",
        analytic.len()
    ))
}

fn random_document<R: Rng>(rng: &mut R, n: usize, space: &LabelSpace) -> Document {
    let mut relations = Vec::new();
    for h in 0..n {
        for t in 0..n {
            if h != t && rng.gen_bool(0.3) {
                let label = &space.labels[rng.gen_range(0..space.len() - 1)];
                relations.push(Relation::new(h, t, label.clone()));
            }
        }
    }
    Document {
        doc_id: "crop".into(),
        sentences: (0..n).map(|i| format!("s{i}")).collect(),
        relations,
    }
}

fn c4_crop_alignment() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let space = LabelSpace::support_attack();
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=n);
        let h = random_tensor(&mut rng, n, 2);
        let doc = random_document(&mut rng, n, &space);
        let y = build_label_matrix(&doc, &space).map_err(|e| e.to_string())?;
        let plan = sample_crop(n, m, &mut rng).map_err(|e| e.to_string())?;
        check(
            plan.is_sorted() && plan.len() == m,
            format!("case {case}: bad plan {:?}", plan.indices),
        )?;
        let (h2, y2) = apply_crop(&h, &y, &plan).map_err(|e| e.to_string())?;
        for (j, &a) in plan.indices.iter().enumerate() {
            for (k, &b) in plan.indices.iter().enumerate() {
                check(
                    h2.cell(j, k) == h.cell(a, b),
                    format!("case {case}: cell ({j},{k})"),
                )?;
            }
        }
        let position = |i: usize| plan.indices.iter().position(|&x| x == i);
        let mut induced: Vec<Relation> = doc
            .relations
            .iter()
            .filter_map(|r| {
                Some(Relation::new(
                    position(r.head)?,
                    position(r.tail)?,
                    r.label.clone(),
                ))
            })
            .collect();
        let mut recovered = y2.triples(&space);
        let key = |r: &Relation| (r.head, r.tail);
        induced.sort_by_key(key);
        recovered.sort_by_key(key);
        check(
            induced == recovered,
            format!("case {case}: induced sub-graph differs"),
        )?;
    }
    within(t0.elapsed(), 10.0)?;
    Ok(format!("1000 cases, {:.2}s", t0.elapsed().as_secs_f64()))
}

fn c5_fusion_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut cells, mut ties) = (0usize, 0usize);
    for pair in 0..1000 {
        let (m, l) = (rng.gen_range(1..=3), rng.gen_range(2..=5));
        let head: Vec<f64> = (0..m * m * l).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut tail: Vec<f64> = (0..m * m * l).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for c in 0..m * m {
            if rng.gen_bool(0.25) {
                tail[c * l..(c + 1) * l].copy_from_slice(&head[c * l..(c + 1) * l]);
            }
        }
        let zh = BranchLogits {
            m,
            l,
            branch: Branch::Head,
            values: head,
        };
        let zt = BranchLogits {
            m,
            l,
            branch: Branch::Tail,
            values: tail,
        };
        let fused = fuse(&zh, &zt).map_err(|e| e.to_string())?;
        for i in 0..m {
            for j in 0..m {
                let (a, b) = (zh.cell(i, j), zt.cell(i, j));
                let (mh, mt) = (sorted_margin(a), sorted_margin(b));
                let (want_src, want) = if mh >= mt {
                    (Branch::Head, first_argmax(a))
                } else {
                    (Branch::Tail, first_argmax(b))
                };
                if a == b {
                    ties += 1;
                }
                cells += 1;
                check(
                    fused.labels.get(i, j) == want && fused.source[i * m + j] == want_src,
                    format!("pair {pair} cell ({i},{j})"),
                )?;
            }
        }
    }
    within(t0.elapsed(), 5.0)?;
    Ok(format!(
        "1000 logit pairs, {cells} cells, {ties} exact ties"
    ))
}

fn c6_loss_identities() -> Outcome {
    check(
        joint_loss(1.0, 3.0, 0.5, 0.5) == 2.0,
        "joint_loss(1,3,.5,.5) != 2",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for l in [2usize, 3, 27] {
        let m = 4;
        let z = BranchLogits {
            m,
            l,
            branch: Branch::Head,
            values: vec![0.0; m * m * l],
        };
        let loss = branch_loss(&z, &random_labels(&mut rng, m, l)).map_err(|e| e.to_string())?;
        check(
            (loss - (l as f64).ln()).abs() <= 1e-9,
            format!("l={l}: loss {loss}"),
        )?;
    }
    let (space, train, _) = chain_splits();
    let config = TrainConfig {
        lambda_head: 1.0,
        lambda_tail: 0.0,
        total_steps: 5,
        ..TrainConfig::desk_scale()
    };
    let data = dmon::training::encode_corpus(
        &train[..4],
        &space,
        &config.backend().map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let mut trainer = Trainer::new(config, &data, space.len()).map_err(|e| e.to_string())?;
    while !trainer.is_done() {
        let (_, grad) = trainer.compute_gradients().map_err(|e| e.to_string())?;
        check(
            grad.tail
                .tensors()
                .iter()
                .all(|t| t.iter().all(|&g| g == 0.0)),
            "tail gradient nonzero",
        )?;
        let before = trainer.params().tail.clone();
        let head_before = trainer.params().head.clone();
        trainer.step().map_err(|e| e.to_string())?;
        check(trainer.params().tail == before, "tail parameters moved")?;
        check(
            trainer.params().head != head_before,
            "head parameters did not move",
        )?;
    }
    Ok("joint 2.0 exactly; ln(l) for l in {2,3,27}; tail frozen over 5 full steps".into())
}

fn c7_macro_f1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let space = LabelSpace::support_attack();
    let spec = ColumnSpec::abstrct(&space);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let docs = rng.gen_range(1..=4);
        let (mut preds, mut gold) = (Vec::new(), Vec::new());
        for _ in 0..docs {
            let n = rng.gen_range(1..=6);
            preds.push(random_labels(&mut rng, n, 3));
            gold.push(random_labels(&mut rng, n, 3));
        }
        let include = rng.gen_bool(0.2);
        let report = macro_f1(&preds, &gold, &space, &spec, include).map_err(|e| e.to_string())?;
        let oracle = brute_force_f1(&preds, &gold, 3, include);
        for (c, label) in space.labels.iter().enumerate() {
            worst = worst.max((report.per_class_f1[label] - oracle[c]).abs());
        }
        let mean = oracle.iter().sum::<f64>() / 3.0;
        worst = worst.max((report.average("F1").unwrap() - mean).abs());
        worst = worst.max((report.average("S-F1").unwrap() - oracle[0]).abs());
        worst = worst.max((report.average("A-F1").unwrap() - oracle[1]).abs());
        worst = worst.max((report.average("U-F1").unwrap() - oracle[2]).abs());
    }
    check(worst <= 1e-9, format!("max abs deviation {worst:e}"))?;

    let (_, train, _) = chain_splits();
    let gold: Vec<LabelMatrix> = train
        .iter()
        .map(|d| build_label_matrix(d, &space).unwrap())
        .collect();
    let perfect = macro_f1(&gold, &gold, &space, &spec, false).map_err(|e| e.to_string())?;
    check(
        perfect.averages.values().all(|&v| v == 1.0),
        "perfect prediction below 1.0",
    )?;
    let fine = LabelSpace::new(vec!["elab".into(), "cause".into(), "none".into()], 2).unwrap();
    let g = LabelMatrix {
        n: 3,
        values: vec![2, 0, 1, 1, 2, 0, 2, 2, 2],
    };
    let r = macro_f1(
        std::slice::from_ref(&g),
        std::slice::from_ref(&g),
        &fine,
        &ColumnSpec::scidtb(&fine),
        false,
    )
    .map_err(|e| e.to_string())?;
    check(
        r.averages.values().all(|&v| v == 1.0),
        "perfect scidtb columns below 1.0",
    )?;
    Ok(format!(
        "100 random corpora, max deviation {worst:.1e}; perfect predictions score 1.0"
    ))
}

struct Protocol {
    ablation: Table,
    sweep: Table,
    elapsed: Duration,
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn run_protocol() -> Result<Protocol, String> {
    let t0 = Instant::now();
    let (space, train, test) = chain_splits();
    let cfg = RunConfig::desk_scale();
    let data =
        Dataset::encode(&cfg.train, space, &train, None, &test).map_err(|e| e.to_string())?;
    let variants = [
        Variant::Full,
        Variant::NoHT,
        Variant::NoT,
        Variant::NoH,
        Variant::NoVoterH,
        Variant::NoVoterT,
        Variant::OrdAndRad,
    ];
    let ablation = ablate(&data, &cfg, &variants, &SEEDS).map_err(|e| e.to_string())?;
    let sweep = sweep(&data, &cfg, &[1, 3, 5, 8], &SEEDS).map_err(|e| e.to_string())?;
    check(
        ablation.failures.is_empty() && sweep.failures.is_empty(),
        "protocol runs failed",
    )?;
    Ok(Protocol {
        ablation,
        sweep,
        elapsed: t0.elapsed(),
    })
}

fn f1(table: &Table, row: &str) -> Result<f64, String> {
    table
        .row(row)
        .map(|r| r.headline())
        .ok_or_else(|| format!("missing row {row}"))
}

fn c8_tower_ablation(p: &Protocol) -> Outcome {
    let t = &p.ablation;
    let full = f1(t, "full")?;
    let none = f1(t, "no_HT")?;
    let singles = ["no_T", "no_H", "no_voter_h", "no_voter_t"]
        .iter()
        .map(|v| Ok((*v, f1(t, v)?)))
        .collect::<Result<Vec<_>, String>>()?;
    check(full > none, format!("full {full:.4} <= no_HT {none:.4}"))?;
    for (name, v) in &singles {
        check(full > *v, format!("full {full:.4} <= {name} {v:.4}"))?;
    }
    within(p.elapsed, 900.0)?;
    let listed: Vec<String> = singles.iter().map(|(n, v)| format!("{n} {v:.4}")).collect();
    Ok(format!(
        "full {full:.4} > no_HT {none:.4}; > {}; protocol {:.0}s",
        listed.join(", "),
        p.elapsed.as_secs_f64()
    ))
}

fn c9_shuffle_ablation(p: &Protocol) -> Outcome {
    let full = f1(&p.ablation, "full")?;
    let shuffled = f1(&p.ablation, "ord_and_rad")?;
    let drop = full - shuffled;
    check(drop >= 0.05, format!("drop {drop:.4} < 0.05"))?;
    Ok(format!(
        "full {full:.4}, ord_and_rad {shuffled:.4}, drop {:.1} points",
        drop * 100.0
    ))
}

fn c10_window_sweep(p: &Protocol) -> Outcome {
    let w1 = f1(&p.sweep, "1")?;
    let (best, best_f1) = ["3", "5", "8"]
        .iter()
        .map(|w| Ok((*w, f1(&p.sweep, w)?)))
        .collect::<Result<Vec<_>, String>>()?
        .into_iter()
        .fold(
            ("", f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    check(
        best_f1 > w1,
        format!("best window {best} F1 {best_f1:.4} <= window 1 {w1:.4}"),
    )?;
    let rows: Vec<String> = p
        .sweep
        .rows
        .iter()
        .map(|r| format!("{}:{:.4}", r.label, r.headline()))
        .collect();
    Ok(format!(
        "window {best} {best_f1:.4} > window 1 {w1:.4} ({})",
        rows.join(" ")
    ))
}

fn dmon(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dmon"))
        .current_dir(dir)
        .args(["--quiet", "--seed", "3"])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let (x, y) = (
        fs::read(a).map_err(|e| e.to_string())?,
        fs::read(b).map_err(|e| e.to_string())?,
    );
    check(
        x == y,
        format!("{} and {} differ", a.display(), b.display()),
    )
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let data = [
        "--train",
        "train.jsonl",
        "--test",
        "test.jsonl",
        "--steps",
        "300",
    ];
    for run in ["a", "b"] {
        dmon(
            dir,
            &["synth", "--docs", "20", "-o", &format!("{run}/train.jsonl")],
        )?;
        dmon(
            dir,
            &[
                "synth",
                "--docs",
                "8",
                "--max-sentences",
                "9",
                "-o",
                &format!("{run}/test.jsonl"),
            ],
        )?;
        let sub = dir.join(run);
        dmon(
            &sub,
            &[&["--out-dir", "t", "train"][..], &data[..]].concat(),
        )?;
        dmon(
            &sub,
            &[
                "--out-dir",
                "e",
                "eval",
                "--checkpoint",
                "t/checkpoint",
                "--corpus",
                "test.jsonl",
            ],
        )?;
        dmon(
            &sub,
            &[
                &["--out-dir", "s", "sweep", "--windows", "1,3"][..],
                &data[..],
            ]
            .concat(),
        )?;
        dmon(
            &sub,
            &[
                &[
                    "--out-dir",
                    "x",
                    "ablate",
                    "--variants",
                    "full,no_HT,ord_shuffle",
                ][..],
                &data[..],
            ]
            .concat(),
        )?;
    }
    let files = [
        "train.jsonl",
        "test.jsonl",
        "t/train_log.jsonl",
        "t/checkpoint/manifest.json",
        "e/metrics.json",
        "s/sweep.json",
        "s/sweep.csv",
        "x/ablate.json",
    ];
    for f in files {
        same_bytes(&dir.join("a").join(f), &dir.join("b").join(f))?;
    }
    Ok(format!(
        "synth, train, eval, sweep and ablate reruns byte-identical ({} files)",
        files.len()
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &dyn Fn() -> Outcome| {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {msg} [{secs:.1}s]");
            }
        }
    };
    report(1, "residual identity", &c1_residual_identity);
    report(2, "convolution oracle", &c2_convolution_oracle);
    report(3, "gradient check", &c3_gradient_check);
    report(4, "crop alignment", &c4_crop_alignment);
    report(5, "fusion oracle", &c5_fusion_oracle);
    report(6, "loss identities", &c6_loss_identities);
    report(7, "macro-F1 oracle", &c7_macro_f1_oracle);
    match run_protocol() {
        Ok(p) => {
            report(8, "tower ablation trend", &|| c8_tower_ablation(&p));
            report(9, "shuffle ablation trend", &|| c9_shuffle_ablation(&p));
            report(10, "window sweep trend", &|| c10_window_sweep(&p));
        }
        Err(e) => {
            for (id, name) in [
                (8, "tower ablation trend"),
                (9, "shuffle ablation trend"),
                (10, "window sweep trend"),
            ] {
                report(id, name, &|| Err(format!("protocol failed: {e}")));
            }
        }
    }
    report(11, "determinism", &c11_determinism);
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
