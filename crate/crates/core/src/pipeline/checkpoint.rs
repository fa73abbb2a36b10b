//! Checkpoints: every tensor (parameters, batch-norm buffers, optimizer
//! moments) as consecutive ATNS records in `<stem>.atns`, described by a
//! JSON manifest `<stem>.json` listing names, kinds and shapes in order.

use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::numerics::atns::{read_tensor, write_tensor};
use crate::numerics::{DType, ParamStore, Scalar, Tensor};
use crate::optim::Adam;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Param,
    Buffer,
    AdamM,
    AdamV,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub kind: EntryKind,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub dtype: DType,
    /// Epochs completed.
    pub epoch: usize,
    pub adam_step: u64,
    pub best_val_dsc: f64,
    pub config: RunConfig,
    pub entries: Vec<Entry>,
}

/// Restored training state.
pub struct Checkpoint<S> {
    pub manifest: CheckpointManifest,
    pub store: ParamStore<S>,
    pub adam: Option<Adam<S>>,
}

pub fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("atns"), stem.with_extension("json"))
}

/// Writes `<stem>.atns` and `<stem>.json`.
pub fn save<S: Scalar>(
    stem: &Path,
    config: &RunConfig,
    store: &ParamStore<S>,
    adam: Option<&Adam<S>>,
    epoch: usize,
    best_val_dsc: f64,
) -> Result<()> {
    let (data_path, manifest_path) = paths(stem);
    if let Some(dir) = data_path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut entries = Vec::new();
    let mut tensors: Vec<&Tensor<S>> = Vec::new();
    let mut push = |name: &str, kind, t: &'_ Tensor<S>| {
        entries.push(Entry {
            name: name.to_string(),
            kind,
            shape: t.shape().to_vec(),
        });
    };
    for p in store.params() {
        push(&p.name, EntryKind::Param, &p.value);
        tensors.push(&p.value);
    }
    for b in store.buffers() {
        push(&b.name, EntryKind::Buffer, &b.value);
        tensors.push(&b.value);
    }
    if let Some(adam) = adam {
        for (p, m) in store.params().iter().zip(&adam.m) {
            push(&p.name, EntryKind::AdamM, m);
            tensors.push(m);
        }
        for (p, v) in store.params().iter().zip(&adam.v) {
            push(&p.name, EntryKind::AdamV, v);
            tensors.push(v);
        }
    }
    let file = std::fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = BufWriter::new(file);
    for t in tensors {
        write_tensor(&mut w, t)?;
    }
    w.flush().map_err(|e| Error::io(&data_path, e))?;

    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        dtype: S::DTYPE,
        epoch,
        adam_step: adam.map_or(0, |a| a.step),
        best_val_dsc,
        config: config.clone(),
        entries,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))
}

pub fn read_manifest(stem: &Path) -> Result<CheckpointManifest> {
    let (_, manifest_path) = paths(stem);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", manifest_path.display())))?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Manifest(format!("unsupported checkpoint format {}", m.format_version)));
    }
    Ok(m)
}

/// Loads a checkpoint into a freshly built `template` store, checking that
/// every name and shape matches. Optimizer moments are restored when present.
pub fn load<S: Scalar>(stem: &Path, template: &ParamStore<S>) -> Result<Checkpoint<S>> {
    let manifest = read_manifest(stem)?;
    let (data_path, _) = paths(stem);
    let file = std::fs::File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut r = BufReader::new(file);

    let mut store = template.clone();
    let n_params = store.params().len();
    let n_buffers = store.buffers().len();
    let has_adam = manifest.entries.len() == 2 * n_params + n_buffers + n_params;
    if manifest.entries.len() != n_params + n_buffers && !has_adam {
        return Err(Error::Manifest(format!(
            "checkpoint lists {} tensors; the model has {n_params} parameters and {n_buffers} buffers",
            manifest.entries.len()
        )));
    }
    let mut m = Vec::new();
    let mut v = Vec::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        let (t, _) = read_tensor::<S, _>(&mut r)?;
        if t.shape() != entry.shape.as_slice() {
            return Err(Error::Manifest(format!("record {i} ({}) has shape {:?}, manifest says {:?}", entry.name, t.shape(), entry.shape)));
        }
        let (expected_kind, slot) = if i < n_params {
            (EntryKind::Param, &store.params()[i])
        } else if i < n_params + n_buffers {
            (EntryKind::Buffer, &store.buffers()[i - n_params])
        } else if i < 2 * n_params + n_buffers {
            (EntryKind::AdamM, &store.params()[i - n_params - n_buffers])
        } else {
            (EntryKind::AdamV, &store.params()[i - 2 * n_params - n_buffers])
        };
        if entry.kind != expected_kind || entry.name != slot.name || entry.shape != slot.value.shape() {
            return Err(Error::Manifest(format!(
                "checkpoint entry {i} is {:?} '{}' {:?}, model expects {:?} '{}' {:?}",
                entry.kind,
                entry.name,
                entry.shape,
                expected_kind,
                slot.name,
                slot.value.shape()
            )));
        }
        match expected_kind {
            EntryKind::Param => store.params_mut()[i].value = t,
            EntryKind::Buffer => store.buffers_mut()[i - n_params].value = t,
            EntryKind::AdamM => m.push(t),
            EntryKind::AdamV => v.push(t),
        }
    }
    let adam = has_adam.then(|| Adam {
        config: manifest.config.optimizer.clone(),
        step: manifest.adam_step,
        m,
        v,
    });
    Ok(Checkpoint { manifest, store, adam })
}
