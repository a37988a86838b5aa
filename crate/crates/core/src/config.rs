//! TOML run configuration shared by the command-line entry points.
//!
//! ```toml
//! [train]
//! window_size = 13
//! base_lr = 0.002
//! total_steps = 2000
//!
//! [data]
//! train = "train.jsonl"
//! test = "test.jsonl"
//! format = "jsonl"
//! labels = ["support", "attack", "unrelated"]
//! no_relation = "unrelated"
//!
//! [eval]
//! columns = "abstrct"
//!
//! [sweep]
//! window_sizes = [1, 3, 5, 8]
//!
//! [ablate]
//! variants = ["full", "no_HT"]
//! seeds = [0, 1, 2]
//! ```
//!
//! Every field has a default; relative paths resolve against the config
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_corpus, CorpusFormat, Document, LabelSpace};
use crate::error::{ensure, Error, Result};
use crate::fusion::PredictionMode;
use crate::metrics::ColumnSpec;
use crate::training::{config_hash, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    /// Used for checkpoint selection when set.
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub format: String,
    /// Empty means: collect labels from the training documents.
    pub labels: Vec<String>,
    pub no_relation: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: None,
            valid: None,
            test: None,
            format: "jsonl".into(),
            labels: LabelSpace::support_attack().labels,
            no_relation: crate::corpus::UNRELATED.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Column preset: `abstrct`, `cdcp`, `scidtb` or `per_class`.
    pub columns: String,
    pub include_diagonal: bool,
    pub prediction: PredictionMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            columns: "abstrct".into(),
            include_diagonal: false,
            prediction: PredictionMode::Fused,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub window_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            window_sizes: vec![1, 3, 5, 8],
            seeds: vec![0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<String>,
    pub seeds: Vec<u64>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            variants: vec!["full".into(), "no_HT".into()],
            seeds: vec![0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
    pub ablate: AblateConfig,
}

impl RunConfig {
    /// Desk-scale training defaults with everything else at its default.
    pub fn desk_scale() -> Self {
        RunConfig {
            train: TrainConfig::desk_scale(),
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves the data paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.train, &mut cfg.data.valid, &mut cfg.data.test]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.data.format.parse::<CorpusFormat>()?;
        ensure!(
            self.sweep.window_sizes.iter().all(|&m| m >= 1),
            "sweep window sizes must be at least 1"
        );
        if !self.data.labels.is_empty() {
            let space = self.label_space_from_labels()?;
            ColumnSpec::named(&self.eval.columns, &space)?.validate(&space)?;
        }
        Ok(())
    }

    /// Hash over the complete configuration, echoed into every output.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn label_space_from_labels(&self) -> Result<LabelSpace> {
        let idx = self
            .data
            .labels
            .iter()
            .position(|l| *l == self.data.no_relation)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "no-relation label {:?} missing from labels {:?}",
                    self.data.no_relation, self.data.labels
                ))
            })?;
        LabelSpace::new(self.data.labels.clone(), idx)
    }

    /// The configured label space, or the one inferred from `docs`.
    pub fn label_space(&self, docs: &[Document]) -> Result<LabelSpace> {
        if self.data.labels.is_empty() {
            LabelSpace::from_documents(docs, &self.data.no_relation)
        } else {
            self.label_space_from_labels()
        }
    }

    pub fn format(&self) -> Result<CorpusFormat> {
        self.data.format.parse()
    }

    pub fn read_split(&self, which: &str) -> Result<Vec<Document>> {
        let path = match which {
            "train" => &self.data.train,
            "valid" => &self.data.valid,
            "test" => &self.data.test,
            other => return Err(Error::Validation(format!("unknown split {other:?}"))),
        };
        let path = path
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("config has no data.{which} path")))?;
        parse_corpus(path, self.format()?)
    }
}
