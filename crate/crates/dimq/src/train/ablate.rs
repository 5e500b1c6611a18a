//! Ablation matrix: one-factor-at-a-time cells around a base
//! configuration, run over several seeds, with cached results for
//! duplicate cells.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::config::ConservatismMode;
use crate::episode::OfflineDataset;
use crate::error::Result;
use crate::train::trainer::{train_offline, TrainOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub name: String,
    pub conservatism: ConservatismMode,
    pub use_mc_max: bool,
    pub use_n_step: bool,
}

impl AblationCell {
    fn key(&self) -> (ConservatismMode, bool, bool) {
        (self.conservatism, self.use_mc_max, self.use_n_step)
    }
}

/// The cells the ablation study varies, relative to the full method.
pub fn default_cells() -> Vec<AblationCell> {
    vec![
        AblationCell {
            name: "full".into(),
            conservatism: ConservatismMode::Paper,
            use_mc_max: true,
            use_n_step: true,
        },
        AblationCell {
            name: "softmax-conservatism".into(),
            conservatism: ConservatismMode::Softmax,
            use_mc_max: true,
            use_n_step: true,
        },
        AblationCell {
            name: "no-conservatism".into(),
            conservatism: ConservatismMode::None,
            use_mc_max: true,
            use_n_step: true,
        },
        AblationCell {
            name: "no-mc-max".into(),
            conservatism: ConservatismMode::Paper,
            use_mc_max: false,
            use_n_step: true,
        },
        AblationCell {
            name: "one-step".into(),
            conservatism: ConservatismMode::Paper,
            use_mc_max: true,
            use_n_step: false,
        },
    ]
}

/// The raw conservatism x mc x n-step cross product.
pub fn full_matrix_cells() -> Vec<AblationCell> {
    let mut cells = Vec::new();
    for cons in [
        ConservatismMode::Paper,
        ConservatismMode::Softmax,
        ConservatismMode::None,
    ] {
        for mc in [true, false] {
            for n_step in [true, false] {
                cells.push(AblationCell {
                    name: format!(
                        "{}/mc-{}/{}",
                        match cons {
                            ConservatismMode::Paper => "paper",
                            ConservatismMode::Softmax => "softmax",
                            ConservatismMode::None => "none",
                        },
                        if mc { "on" } else { "off" },
                        if n_step { "n-step" } else { "one-step" }
                    ),
                    conservatism: cons,
                    use_mc_max: mc,
                    use_n_step: n_step,
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub final_success: f64,
    /// First grad step whose evaluation reached 90% of this run's final
    /// success rate.
    pub steps_to_90: Option<usize>,
    pub grad_steps: usize,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: AblationCell,
    pub runs: Vec<SeedRun>,
}

impl CellResult {
    pub fn mean_success(&self) -> f64 {
        self.runs.iter().map(|r| r.final_success).sum::<f64>() / self.runs.len() as f64
    }

    pub fn spread(&self) -> f64 {
        let mean = self.mean_success();
        let var = self
            .runs
            .iter()
            .map(|r| (r.final_success - mean).powi(2))
            .sum::<f64>()
            / self.runs.len() as f64;
        var.sqrt()
    }

    pub fn min_success(&self) -> f64 {
        self.runs.iter().map(|r| r.final_success).fold(f64::INFINITY, f64::min)
    }

    pub fn max_success(&self) -> f64 {
        self.runs.iter().map(|r| r.final_success).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_steps_to_90(&self) -> Option<f64> {
        let steps: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.steps_to_90.map(|s| s as f64))
            .collect();
        (steps.len() == self.runs.len())
            .then(|| steps.iter().sum::<f64>() / steps.len() as f64)
    }
}

/// First eval step at which success reaches 90% of the final value.
pub fn steps_to_90pct(history: &[(usize, f64)]) -> Option<usize> {
    let (_, last) = *history.last()?;
    let threshold = 0.9 * last;
    history
        .iter()
        .find(|&&(_, s)| s >= threshold)
        .map(|&(step, _)| step)
}

/// Runs every distinct cell over all seeds (duplicate cells share the same
/// runs rather than retraining) and returns per-cell aggregates.
pub fn run_ablation_matrix(
    dataset: &OfflineDataset,
    base: &TrainOptions,
    seeds: &[u64],
    cells: &[AblationCell],
) -> Result<Vec<CellResult>> {
    assert!(!seeds.is_empty(), "seeds must be non-empty");
    let mut unique: Vec<AblationCell> = Vec::new();
    for cell in cells {
        if !unique.iter().any(|c| c.key() == cell.key()) {
            unique.push(cell.clone());
        }
    }

    let jobs: Vec<(usize, u64)> = unique
        .iter()
        .enumerate()
        .flat_map(|(i, _)| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(cell_idx, seed)| {
            let cell = &unique[cell_idx];
            let mut opts = base.clone();
            opts.train.conservatism_mode = cell.conservatism;
            opts.train.use_mc_max = cell.use_mc_max;
            opts.train.use_n_step = cell.use_n_step;
            opts.train.seed = seed;
            let out = train_offline(dataset, &opts)?;
            Ok(SeedRun {
                seed,
                final_success: out.final_success().unwrap_or(0.0),
                steps_to_90: steps_to_90pct(&out.eval_history),
                grad_steps: out.state.grad_step,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let by_key: HashMap<(ConservatismMode, bool, bool), CellResult> = unique
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            (
                cell.key(),
                CellResult {
                    cell: cell.clone(),
                    runs: jobs
                        .iter()
                        .zip(&runs)
                        .filter(|((ci, _), _)| *ci == i)
                        .map(|(_, r)| r.clone())
                        .collect(),
                },
            )
        })
        .collect();

    // answer in the caller's order, duplicates served from the cache
    Ok(cells
        .iter()
        .map(|cell| {
            let cached = &by_key[&cell.key()];
            CellResult {
                cell: cell.clone(),
                runs: cached.runs.clone(),
            }
        })
        .collect())
}

/// Delimited table with a header row.
pub fn render_ablation_table(results: &[CellResult], provenance: &[String]) -> String {
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(
        "cell,conservatism,mc_max,n_step,seeds,mean_success,std_success,min_success,max_success,mean_steps_to_90,grad_steps\n",
    );
    for r in results {
        let steps90 = r
            .mean_steps_to_90()
            .map(|s| s.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:?},{},{},{},{},{},{},{},{},{}\n",
            r.cell.name,
            r.cell.conservatism,
            r.cell.use_mc_max,
            r.cell.use_n_step,
            r.runs.len(),
            r.mean_success(),
            r.spread(),
            r.min_success(),
            r.max_success(),
            steps90,
            r.runs.first().map(|x| x.grad_steps).unwrap_or(0),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EnvConfig, HarnessConfig, ModelConfig, TrainConfig};
    use crate::data::{generate_mixed_dataset, NoiseSpec};

    #[test]
    fn steps_to_90_picks_first_crossing() {
        let history = vec![(100, 0.1), (200, 0.5), (300, 0.75), (400, 0.8)];
        assert_eq!(steps_to_90pct(&history), Some(300));
        assert_eq!(steps_to_90pct(&[]), None);
        // flat-at-zero histories trivially cross at the first eval
        assert_eq!(steps_to_90pct(&[(50, 0.0), (100, 0.0)]), Some(50));
    }

    #[test]
    fn duplicate_cells_share_runs() {
        let ds = generate_mixed_dataset(
            EnvConfig::default(),
            10,
            0.5,
            NoiseSpec::default(),
            0.98,
            3,
        )
        .unwrap();
        let base = TrainOptions {
            train: TrainConfig {
                grad_steps: 4,
                batch_size: 4,
                ..TrainConfig::default()
            },
            model: ModelConfig { width: 8, blocks: 1 },
            env: EnvConfig::default(),
            harness: HarnessConfig {
                eval_every: 2,
                eval_episodes: 5,
                metrics_every: 0,
            },
        };
        let cell = AblationCell {
            name: "full".into(),
            conservatism: ConservatismMode::Paper,
            use_mc_max: true,
            use_n_step: true,
        };
        let twice = vec![cell.clone(), AblationCell { name: "full-again".into(), ..cell }];
        let results = run_ablation_matrix(&ds, &base, &[1, 2], &twice).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(
            results[0].runs.iter().map(|r| r.final_success).collect::<Vec<_>>(),
            results[1].runs.iter().map(|r| r.final_success).collect::<Vec<_>>()
        );
        let table = render_ablation_table(&results, &["seeds: 2".into()]);
        assert!(table.starts_with("# seeds: 2\ncell,"));
        assert_eq!(table.lines().count(), 4);
    }
}
