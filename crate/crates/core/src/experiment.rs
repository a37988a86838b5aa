//! Training-and-evaluation runs, ablation variants and window sweeps.
//!
//! Every variant is a transformation of one [`TrainConfig`] plus a
//! prediction mode, so all of them go through the same training and
//! inference code.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use plotters::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{Document, LabelMatrix, LabelSpace};
use crate::error::{ensure, Error, Result};
use crate::fusion::{predict_tensor, PredictionMode};
use crate::metrics::{macro_f1, report_csv, ColumnSpec, MetricsReport};
use crate::model::DmonParams;
use crate::training::{
    encode_corpus, train, CropMode, EncodedDoc, StepRecord, TrainConfig, TrainOutcome,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    /// Head tower's prediction everywhere.
    #[serde(rename = "no_voter_h")]
    NoVoterH,
    /// Tail tower's prediction everywhere.
    #[serde(rename = "no_voter_t")]
    NoVoterT,
    /// Tail tower removed: zero tail loss weight, head predictions.
    #[serde(rename = "no_T")]
    NoT,
    /// Head tower removed.
    #[serde(rename = "no_H")]
    NoH,
    /// Both convolution stacks bypassed; per-cell classifiers on raw pair
    /// embeddings.
    #[serde(rename = "no_HT")]
    NoHT,
    #[serde(rename = "ord_shuffle")]
    OrdShuffle,
    #[serde(rename = "rad_shuffle")]
    RadShuffle,
    #[serde(rename = "ord_and_rad")]
    OrdAndRad,
    /// No cropping: every step sees the whole document.
    #[serde(rename = "full_tensor_training")]
    FullTensorTraining,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Full,
        Variant::NoVoterH,
        Variant::NoVoterT,
        Variant::NoT,
        Variant::NoH,
        Variant::NoHT,
        Variant::OrdShuffle,
        Variant::RadShuffle,
        Variant::OrdAndRad,
        Variant::FullTensorTraining,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoVoterH => "no_voter_h",
            Variant::NoVoterT => "no_voter_t",
            Variant::NoT => "no_T",
            Variant::NoH => "no_H",
            Variant::NoHT => "no_HT",
            Variant::OrdShuffle => "ord_shuffle",
            Variant::RadShuffle => "rad_shuffle",
            Variant::OrdAndRad => "ord_and_rad",
            Variant::FullTensorTraining => "full_tensor_training",
        }
    }

    /// Training config and prediction mode for this variant.
    pub fn apply(
        self,
        base: &TrainConfig,
        prediction: PredictionMode,
    ) -> (TrainConfig, PredictionMode) {
        let mut cfg = base.clone();
        let mut mode = prediction;
        match self {
            Variant::Full => {}
            Variant::NoVoterH => mode = PredictionMode::HeadOnly,
            Variant::NoVoterT => mode = PredictionMode::TailOnly,
            Variant::NoT => {
                cfg.lambda_tail = 0.0;
                mode = PredictionMode::HeadOnly;
            }
            Variant::NoH => {
                cfg.lambda_head = 0.0;
                mode = PredictionMode::TailOnly;
            }
            Variant::NoHT => cfg.bypass_towers = true,
            Variant::OrdShuffle => cfg.crop_mode = CropMode::OrdShuffle,
            Variant::RadShuffle => cfg.crop_mode = CropMode::RadShuffle,
            Variant::OrdAndRad => cfg.crop_mode = CropMode::OrdAndRad,
            Variant::FullTensorTraining => cfg.crop_mode = CropMode::Full,
        }
        (cfg, mode)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Validation(format!(
                    "unknown variant {s:?}; valid variants: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Encoded splits of one experiment. Encoding depends only on the encoder
/// settings, so one dataset serves every variant and window size.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub space: LabelSpace,
    pub train: Vec<EncodedDoc>,
    pub valid: Option<Vec<EncodedDoc>>,
    pub test: Vec<EncodedDoc>,
}

impl Dataset {
    pub fn encode(
        config: &TrainConfig,
        space: LabelSpace,
        train: &[Document],
        valid: Option<&[Document]>,
        test: &[Document],
    ) -> Result<Self> {
        let backend = config.backend()?;
        Ok(Dataset {
            train: encode_corpus(train, &space, &backend)?,
            valid: valid
                .map(|v| encode_corpus(v, &space, &backend))
                .transpose()?,
            test: encode_corpus(test, &space, &backend)?,
            space,
        })
    }

    /// Reads and encodes the splits named in `cfg.data`; `test` is required.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let train = cfg.read_split("train")?;
        let valid = cfg
            .data
            .valid
            .as_ref()
            .map(|_| cfg.read_split("valid"))
            .transpose()?;
        let test = cfg.read_split("test")?;
        let space = cfg.label_space(&train)?;
        Dataset::encode(&cfg.train, space, &train, valid.as_deref(), &test)
    }
}

/// Full-tensor predictions for every document.
pub fn predict_all(
    docs: &[EncodedDoc],
    params: &DmonParams,
    space: &LabelSpace,
    bypass_towers: bool,
    mode: PredictionMode,
) -> Result<Vec<LabelMatrix>> {
    docs.par_iter()
        .map(|d| predict_tensor(&d.tensor, params, space, bypass_towers, mode).map(|p| p.labels))
        .collect()
}

pub fn evaluate(
    docs: &[EncodedDoc],
    params: &DmonParams,
    space: &LabelSpace,
    columns: &ColumnSpec,
    bypass_towers: bool,
    mode: PredictionMode,
    include_diagonal: bool,
) -> Result<MetricsReport> {
    let preds = predict_all(docs, params, space, bypass_towers, mode)?;
    let gold: Vec<LabelMatrix> = docs.iter().map(|d| d.labels.clone()).collect();
    macro_f1(&preds, &gold, space, columns, include_diagonal)
}

/// Outcome of [`fit`]: the final training state plus the parameters chosen
/// for evaluation.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub outcome: TrainOutcome,
    pub selected: DmonParams,
    pub selected_step: usize,
}

/// Trains on `data.train`. With a validation split and `eval_every > 0`,
/// keeps the parameters with the best validation headline F1 under
/// `mode`; otherwise keeps the final parameters.
pub fn fit(
    data: &Dataset,
    config: &TrainConfig,
    mode: PredictionMode,
    columns: &ColumnSpec,
) -> Result<Fitted> {
    let outcome = match (&data.valid, config.eval_every) {
        (Some(valid), every) if every > 0 => {
            let mut score = |p: &DmonParams| {
                evaluate(
                    valid,
                    p,
                    &data.space,
                    columns,
                    config.bypass_towers,
                    mode,
                    false,
                )
                .map(|r| r.headline())
            };
            train(&data.train, data.space.len(), config, Some(&mut score))?
        }
        _ => train(&data.train, data.space.len(), config, None)?,
    };
    let (selected_step, selected) = match &outcome.best {
        Some((step, _, p)) => (*step, p.clone()),
        None => (outcome.state.step, outcome.state.params.clone()),
    };
    Ok(Fitted {
        outcome,
        selected,
        selected_step,
    })
}

/// One trained and evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub window_size: usize,
    pub train_config_hash: String,
    pub selected_step: usize,
    pub final_loss: f64,
    pub report: MetricsReport,
}

pub fn run_variant(
    data: &Dataset,
    cfg: &RunConfig,
    variant: Variant,
    seed: u64,
) -> Result<RunResult> {
    let base = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let (train_cfg, mode) = variant.apply(&base, cfg.eval.prediction);
    let columns = ColumnSpec::named(&cfg.eval.columns, &data.space)?;
    let fitted = fit(data, &train_cfg, mode, &columns)?;
    let report = evaluate(
        &data.test,
        &fitted.selected,
        &data.space,
        &columns,
        train_cfg.bypass_towers,
        mode,
        cfg.eval.include_diagonal,
    )?;
    Ok(RunResult {
        variant,
        seed,
        window_size: train_cfg.window_size,
        train_config_hash: train_cfg.hash(),
        selected_step: fitted.selected_step,
        final_loss: fitted
            .outcome
            .log
            .last()
            .map_or(f64::NAN, |r: &StepRecord| r.loss),
        report,
    })
}

/// Seed-averaged report columns for one row of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub seeds: Vec<u64>,
    pub column_order: Vec<String>,
    /// Column means over seeds.
    pub averages: BTreeMap<String, f64>,
    pub runs: Vec<RunResult>,
}

impl SummaryRow {
    fn from_runs(label: String, runs: Vec<RunResult>) -> Self {
        let column_order = runs
            .first()
            .map(|r| r.report.column_order.clone())
            .unwrap_or_default();
        let averages = column_order
            .iter()
            .map(|c| {
                let mean =
                    runs.iter().map(|r| r.report.averages[c]).sum::<f64>() / runs.len() as f64;
                (c.clone(), mean)
            })
            .collect();
        SummaryRow {
            label,
            seeds: runs.iter().map(|r| r.seed).collect(),
            column_order,
            averages,
            runs,
        }
    }

    pub fn average(&self, column: &str) -> Option<f64> {
        self.averages.get(column).copied()
    }

    pub fn headline(&self) -> f64 {
        self.average("F1")
            .or_else(|| self.column_order.first().and_then(|c| self.average(c)))
            .unwrap_or(0.0)
    }
}

/// Consolidated ablation or sweep results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub kind: String,
    pub config_hash: String,
    pub rows: Vec<SummaryRow>,
    /// Runs that errored, as `label: message`; their rows are incomplete.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl Table {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Serialize(e.to_string()))
    }

    /// One line per row: the row label, the seed count, then every column.
    pub fn to_csv(&self) -> String {
        let key = if self.kind == "sweep" {
            "window_size"
        } else {
            "variant"
        };
        let mut out = String::new();
        if let Some(first) = self.rows.first() {
            let names: Vec<&str> = first.column_order.iter().map(String::as_str).collect();
            out.push_str(&format!("{key},seeds,{}\n", names.join(",")));
        }
        for row in &self.rows {
            let values: Vec<String> = row
                .column_order
                .iter()
                .map(|c| format!("{:.6}", row.averages[c]))
                .collect();
            out.push_str(&format!(
                "{},{},{}\n",
                row.label,
                row.seeds.len(),
                values.join(",")
            ));
        }
        out
    }
}

fn run_grid(
    data: &Dataset,
    jobs: Vec<(String, RunConfig, Variant, u64)>,
) -> Vec<(String, Result<RunResult>)> {
    jobs.into_par_iter()
        .map(|(label, cfg, variant, seed)| {
            let r = run_variant(data, &cfg, variant, seed);
            (label, r)
        })
        .collect()
}

fn group(
    kind: &str,
    cfg: &RunConfig,
    labels: &[String],
    results: Vec<(String, Result<RunResult>)>,
) -> Table {
    let mut failures = Vec::new();
    let mut by_label: Vec<Vec<RunResult>> = vec![Vec::new(); labels.len()];
    for (label, r) in results {
        match r {
            Ok(run) => {
                if let Some(k) = labels.iter().position(|l| *l == label) {
                    by_label[k].push(run);
                }
            }
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    let rows = labels
        .iter()
        .zip(by_label)
        .filter(|(_, runs)| !runs.is_empty())
        .map(|(label, runs)| SummaryRow::from_runs(label.clone(), runs))
        .collect();
    Table {
        kind: kind.into(),
        config_hash: cfg.hash(),
        rows,
        failures,
    }
}

/// Trains and evaluates every variant for every seed. Failed runs are
/// listed in [`Table::failures`].
pub fn ablate(
    data: &Dataset,
    cfg: &RunConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Table> {
    ensure!(!variants.is_empty(), "no variants given");
    ensure!(!seeds.is_empty(), "no seeds given");
    let mut jobs = Vec::new();
    for &v in variants {
        for &s in seeds {
            jobs.push((v.name().to_string(), cfg.clone(), v, s));
        }
    }
    let labels: Vec<String> = variants.iter().map(|v| v.name().to_string()).collect();
    Ok(group("ablate", cfg, &labels, run_grid(data, jobs)))
}

/// Full-variant runs at each window size.
pub fn sweep(
    data: &Dataset,
    cfg: &RunConfig,
    window_sizes: &[usize],
    seeds: &[u64],
) -> Result<Table> {
    ensure!(!window_sizes.is_empty(), "no window sizes given");
    ensure!(!seeds.is_empty(), "no seeds given");
    ensure!(
        window_sizes.iter().all(|&m| m >= 1),
        "window sizes must be at least 1"
    );
    let mut jobs = Vec::new();
    for &m in window_sizes {
        let mut c = cfg.clone();
        c.train.window_size = m;
        for &s in seeds {
            jobs.push((m.to_string(), c.clone(), Variant::Full, s));
        }
    }
    let labels: Vec<String> = window_sizes.iter().map(|m| m.to_string()).collect();
    Ok(group("sweep", cfg, &labels, run_grid(data, jobs)))
}

/// Line plot of headline F1 against window size.
pub fn plot_sweep(table: &Table, path: &Path) -> Result<()> {
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.label.parse::<f64>().ok().map(|m| (m, r.headline())))
        .collect();
    ensure!(!points.is_empty(), "nothing to plot");
    let x_max = points.iter().map(|p| p.0).fold(1.0, f64::max) + 1.0;
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..x_max, 0.0..1.0)?;
        chart
            .configure_mesh()
            .x_desc("window size")
            .y_desc("macro-F1")
            .draw()?;
        chart.draw_series(LineSeries::new(points.iter().copied(), &BLUE))?;
        chart.draw_series(points.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Writes `<stem>.json` and `<stem>.csv` under `dir`.
pub fn write_table(table: &Table, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, table.to_json()?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(())
}

/// Writes `metrics.json` and `metrics.csv` under `dir`.
pub fn write_report(report: &MetricsReport, config_hash: &str, dir: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Tagged<'a> {
        config_hash: &'a str,
        #[serde(flatten)]
        report: &'a MetricsReport,
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(&Tagged {
        config_hash,
        report,
    })
    .map_err(|e| Error::Serialize(e.to_string()))?;
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("metrics.csv");
    fs::write(&csv, report_csv(report)).map_err(|e| Error::io(&csv, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, PlantedRule, SynthSpec};

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(
                serde_json::to_string(&v).unwrap(),
                format!("\"{}\"", v.name())
            );
        }
        let err = "no_X".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("no_HT") && err.contains("full_tensor_training"));
    }

    #[test]
    fn variant_transformations() {
        let base = TrainConfig::default();
        let (c, m) = Variant::NoT.apply(&base, PredictionMode::Fused);
        assert_eq!(
            (c.lambda_tail, c.lambda_head, m),
            (0.0, 0.5, PredictionMode::HeadOnly)
        );
        let (c, m) = Variant::NoHT.apply(&base, PredictionMode::Fused);
        assert!(c.bypass_towers);
        assert_eq!(m, PredictionMode::Fused);
        let (c, _) = Variant::FullTensorTraining.apply(&base, PredictionMode::Fused);
        assert_eq!(c.crop_mode, CropMode::Full);
        let (c, m) = Variant::NoVoterT.apply(&base, PredictionMode::Fused);
        assert_eq!((c, m), (base.clone(), PredictionMode::TailOnly));
    }

    fn tiny() -> (Dataset, RunConfig) {
        let mut cfg = RunConfig::desk_scale();
        cfg.train.total_steps = 20;
        cfg.train.embed_dim = 4;
        let space = LabelSpace::support_attack();
        let docs =
            generate_synthetic_corpus(&SynthSpec::new(4, (3, 5), PlantedRule::Chain, 1)).unwrap();
        (
            Dataset::encode(&cfg.train, space, &docs, None, &docs).unwrap(),
            cfg,
        )
    }

    #[test]
    fn ablation_table_shape() {
        let (data, cfg) = tiny();
        let t = ablate(
            &data,
            &cfg,
            &[Variant::OrdShuffle, Variant::RadShuffle, Variant::OrdAndRad],
            &[0, 1],
        )
        .unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.runs.len() == 2));
        assert_eq!(t.to_csv().lines().count(), 4);
        assert!(ablate(&data, &cfg, &[], &[0]).is_err());
    }

    #[test]
    fn sweep_is_reproducible_and_plots() {
        let (data, cfg) = tiny();
        let a = sweep(&data, &cfg, &[1, 3], &[0]).unwrap();
        let b = sweep(&data, &cfg, &[1, 3], &[0]).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.rows[1].runs[0].window_size, 3);
        let dir = tempfile::tempdir().unwrap();
        let svg = dir.path().join("sweep.svg");
        plot_sweep(&a, &svg).unwrap();
        assert!(fs::read_to_string(svg).unwrap().contains("<svg"));
    }
}
