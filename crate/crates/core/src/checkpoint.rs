//! On-disk checkpoints: a `params.npz` archive with the parameters and
//! both Adam moments, and a `manifest.json` describing shapes and the run.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use ndarray_npy::{NpzReader, NpzWriter};
use serde::{Deserialize, Serialize};

use crate::corpus::LabelSpace;
use crate::error::{ensure, Error, Result};
use crate::fusion::PredictionMode;
use crate::model::DmonParams;
use crate::training::{AdamState, CheckpointState, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "dmon-checkpoint-v1";
pub const PARAMS_FILE: &str = "params.npz";
pub const MANIFEST_FILE: &str = "manifest.json";

const GROUPS: [&str; 3] = ["params", "adam_m", "adam_v"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub step: usize,
    pub seed: u64,
    pub config_hash: String,
    pub adam_updates: u64,
    pub embed_dim: usize,
    pub num_labels: usize,
    /// Kernel sizes of the five convolutions, in application order.
    pub kernel_sizes: [usize; 5],
    pub label_space: LabelSpace,
    pub train_config: TrainConfig,
    pub prediction: PredictionMode,
    pub tensors: BTreeMap<String, Vec<usize>>,
}

/// A checkpoint as loaded from disk.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub state: CheckpointState,
}

impl Checkpoint {
    pub fn params(&self) -> &DmonParams {
        &self.state.params
    }
}

pub fn save_checkpoint(
    dir: &Path,
    state: &CheckpointState,
    config: &TrainConfig,
    space: &LabelSpace,
    prediction: PredictionMode,
) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params_path = dir.join(PARAMS_FILE);
    let file = File::create(&params_path).map_err(|e| Error::io(&params_path, e))?;
    let mut npz = NpzWriter::new(file);
    let mut tensors = BTreeMap::new();
    for (group, p) in GROUPS
        .iter()
        .zip([&state.params, &state.adam.first, &state.adam.second])
    {
        for (name, shape, values) in p.named_tensors() {
            let arr = ArrayD::from_shape_vec(IxDyn(&shape), values.to_vec())
                .map_err(|e| Error::Validation(format!("{name}: {e}")))?;
            npz.add_array(format!("{group}/{name}"), &arr)
                .map_err(|e| Error::io(&params_path, std::io::Error::other(e)))?;
            if *group == "params" {
                tensors.insert(name, shape);
            }
        }
    }
    npz.finish()
        .map_err(|e| Error::io(&params_path, std::io::Error::other(e)))?;
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        step: state.step,
        seed: state.seed,
        config_hash: state.config_hash.clone(),
        adam_updates: state.adam.updates,
        embed_dim: state.params.dim(),
        num_labels: state.params.num_labels(),
        kernel_sizes: state.params.kernel_sizes(),
        label_space: space.clone(),
        train_config: config.clone(),
        prediction,
        tensors,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    ensure!(
        manifest.format == CHECKPOINT_FORMAT,
        "unsupported checkpoint format {:?} in {}",
        manifest.format,
        path.display()
    );
    ensure!(
        manifest.label_space.len() == manifest.num_labels,
        "manifest label space has {} labels but the model predicts {}",
        manifest.label_space.len(),
        manifest.num_labels
    );
    Ok(manifest)
}

fn read_group<R: std::io::Read + std::io::Seek>(
    npz: &mut NpzReader<R>,
    group: &str,
    manifest: &Manifest,
    path: &Path,
) -> Result<DmonParams> {
    let mut params = DmonParams::zeros(
        manifest.embed_dim,
        manifest.num_labels,
        manifest.kernel_sizes,
    );
    let names: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, s, _)| (n, s))
        .collect();
    for ((name, shape), slot) in names.iter().zip(params.tensors_mut()) {
        let key = format!("{group}/{name}");
        let arr: ArrayD<f64> = npz
            .by_name(&key)
            .map_err(|e| Error::parse(path.display().to_string(), format!("{key}: {e}")))?;
        ensure!(
            arr.shape() == shape.as_slice(),
            "{key} has shape {:?}, expected {:?}",
            arr.shape(),
            shape
        );
        ensure!(
            arr.iter().all(|x| x.is_finite()),
            "{key} holds non-finite values"
        );
        *slot = arr.iter().copied().collect();
    }
    Ok(params)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest = load_manifest(dir)?;
    let path = dir.join(PARAMS_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut npz = NpzReader::new(file)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let params = read_group(&mut npz, "params", &manifest, &path)?;
    let first = read_group(&mut npz, "adam_m", &manifest, &path)?;
    let second = read_group(&mut npz, "adam_v", &manifest, &path)?;
    let state = CheckpointState {
        params,
        adam: AdamState {
            first,
            second,
            updates: manifest.adam_updates,
        },
        step: manifest.step,
        seed: manifest.seed,
        config_hash: manifest.config_hash.clone(),
    };
    Ok(Checkpoint { manifest, state })
}
