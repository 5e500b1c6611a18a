//! Checkpoint files: a JSON header line {config, shape, layout, grad_step},
//! then the flat online parameters as one JSON array line, then the target
//! parameters. Text keeps the file greppable and f64-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::net::{ModelShape, SeqQModel};
use crate::model::params::{Layout, ParamVector};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    config: TrainConfig,
    shape: ModelShape,
    layout: Layout,
    grad_step: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: SeqQModel,
    pub target: ParamVector,
    pub grad_step: usize,
}

pub fn checkpoint_to_string(ck: &Checkpoint) -> String {
    let header = CheckpointHeader {
        config: ck.config.clone(),
        shape: ck.model.shape.clone(),
        layout: ck.model.params.layout.clone(),
        grad_step: ck.grad_step,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    out.push_str(&serde_json::to_string(&ck.model.params.data).expect("params serialize"));
    out.push('\n');
    out.push_str(&serde_json::to_string(&ck.target.data).expect("params serialize"));
    out.push('\n');
    out
}

pub fn checkpoint_from_str(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    let header: CheckpointHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| Error::CheckpointParse(format!("header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::CheckpointParse(e.to_string()))?;
    let expected = header.shape.layout();
    if header.layout != expected {
        return Err(Error::CheckpointParse(
            "layout does not match the model shape".into(),
        ));
    }
    let read_params = |what: &str, line: Option<&str>| -> Result<ParamVector> {
        let data: Vec<f64> = serde_json::from_str(line.unwrap_or_default())
            .map_err(|e| Error::CheckpointParse(format!("{what}: {e}")))?;
        if data.len() != expected.total {
            return Err(Error::CheckpointParse(format!(
                "{what}: {} values, layout wants {}",
                data.len(),
                expected.total
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::CheckpointParse(format!("{what}: non-finite value")));
        }
        Ok(ParamVector {
            layout: expected.clone(),
            data,
        })
    };
    let online = read_params("online params", lines.next())?;
    let target = read_params("target params", lines.next())?;
    Ok(Checkpoint {
        config: header.config,
        model: SeqQModel::from_params(header.shape, online)?,
        target,
        grad_step: header.grad_step,
    })
}

pub fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(ck))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::env::grid_pick_action_spec;

    fn checkpoint() -> Checkpoint {
        let shape = ModelShape::new(
            &grid_pick_action_spec(),
            6,
            1,
            &ModelConfig { width: 8, blocks: 1 },
        )
        .unwrap();
        let model = SeqQModel::init(shape, 3);
        let target = ParamVector::init(model.shape.layout(), 4);
        Checkpoint {
            config: TrainConfig::default(),
            model,
            target,
            grad_step: 1234,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = checkpoint();
        let text = checkpoint_to_string(&ck);
        let back = checkpoint_from_str(&text).unwrap();
        assert_eq!(back.model.params, ck.model.params);
        assert_eq!(back.target, ck.target);
        assert_eq!(back.grad_step, 1234);
        assert_eq!(back.config, ck.config);
        assert_eq!(checkpoint_to_string(&back), text);
    }

    #[test]
    fn malformed_checkpoints_are_errors() {
        assert!(checkpoint_from_str("").is_err());
        let ck = checkpoint();
        let text = checkpoint_to_string(&ck);
        // drop the target line
        let truncated: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(checkpoint_from_str(&truncated).is_err());
        // corrupt a parameter count
        let mut lines: Vec<&str> = text.lines().collect();
        let short = "[1.0, 2.0]";
        lines[1] = short;
        assert!(checkpoint_from_str(&lines.join("\n")).is_err());
    }
}
