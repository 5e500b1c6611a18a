//! Dataset files: one header line with {action_spec, gamma, obs_dim,
//! metadata}, then one episode per line. Lines are JSON, so every f64
//! round-trips exactly and the records stay self-describing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::ActionSpec;
use crate::episode::{Episode, OfflineDataset};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    action_spec: ActionSpec,
    gamma: f64,
    obs_dim: usize,
    metadata: BTreeMap<String, String>,
}

pub fn dataset_to_string(dataset: &OfflineDataset) -> String {
    let header = DatasetHeader {
        action_spec: dataset.action_spec.clone(),
        gamma: dataset.gamma,
        obs_dim: dataset.obs_dim,
        metadata: dataset.metadata.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for ep in &dataset.episodes {
        out.push_str(&serde_json::to_string(ep).expect("episode serializes"));
        out.push('\n');
    }
    out
}

/// Parses and fully validates a dataset document. Structured for use on
/// untrusted input: any malformed line or broken invariant is an error,
/// never a panic.
pub fn dataset_from_str(text: &str) -> Result<OfflineDataset> {
    let mut lines = text.lines();
    let header_line = lines.next().ok_or(Error::DatasetParse {
        line: 1,
        msg: "empty document, expected a header line".into(),
    })?;
    let header: DatasetHeader =
        serde_json::from_str(header_line).map_err(|e| Error::DatasetParse {
            line: 1,
            msg: e.to_string(),
        })?;
    let mut episodes = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ep: Episode = serde_json::from_str(line).map_err(|e| Error::DatasetParse {
            line: idx + 2,
            msg: e.to_string(),
        })?;
        episodes.push(ep);
    }
    let dataset = OfflineDataset {
        episodes,
        action_spec: header.action_spec,
        gamma: header.gamma,
        obs_dim: header.obs_dim,
        metadata: header.metadata,
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn write_dataset(dataset: &OfflineDataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_string(dataset))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<OfflineDataset> {
    let text = fs::read_to_string(path)?;
    dataset_from_str(&text)
}
