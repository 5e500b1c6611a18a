//! Flat parameter storage with a name -> (offset, shape) index. Gradients
//! and the EMA target copy use the identical layout, so optimizer and
//! target updates are plain elementwise loops over one array.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub entries: Vec<LayoutEntry>,
    pub total: usize,
}

impl Layout {
    pub fn build(shapes: &[(String, usize, usize)]) -> Layout {
        let mut entries = Vec::with_capacity(shapes.len());
        let mut offset = 0usize;
        for (name, rows, cols) in shapes {
            entries.push(LayoutEntry {
                name: name.clone(),
                offset,
                rows: *rows,
                cols: *cols,
            });
            offset += rows * cols;
        }
        Layout {
            entries,
            total: offset,
        }
    }

    pub fn find(&self, name: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// A resolved view into the flat array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRef {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> ParamVector {
        let data = vec![0.0; layout.total];
        ParamVector { layout, data }
    }

    /// Uniform +-1/sqrt(fan_in) per matrix; names containing ".b" (biases)
    /// start at zero.
    pub fn init(layout: Layout, seed: u64) -> ParamVector {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut data = vec![0.0; layout.total];
        for entry in &layout.entries {
            if entry.name.ends_with(".b") || entry.name.contains(".b_") {
                continue;
            }
            let bound = 1.0 / (entry.rows as f64).sqrt();
            for v in &mut data[entry.offset..entry.offset + entry.len()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        ParamVector { layout, data }
    }

    pub fn get(&self, name: &str) -> Result<ParamRef> {
        let entry = self
            .layout
            .find(name)
            .ok_or_else(|| Error::CheckpointParse(format!("unknown parameter {name:?}")))?;
        Ok(ParamRef {
            offset: entry.offset,
            rows: entry.rows,
            cols: entry.cols,
        })
    }

    pub fn slice(&self, r: ParamRef) -> &[f64] {
        &self.data[r.offset..r.offset + r.rows * r.cols]
    }

    pub fn slice_mut(&mut self, r: ParamRef) -> &mut [f64] {
        &mut self.data[r.offset..r.offset + r.rows * r.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// target <- (1 - rate) * target + rate * online, elementwise.
pub fn ema_update(target: &mut ParamVector, online: &ParamVector, rate: f64) -> Result<()> {
    if target.data.len() != online.data.len() || target.layout != online.layout {
        return Err(Error::LayoutMismatch {
            a: target.data.len(),
            b: online.data.len(),
        });
    }
    for (t, &o) in target.data.iter_mut().zip(&online.data) {
        *t = (1.0 - rate) * *t + rate * o;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout::build(&[
            ("a.w".to_string(), 2, 3),
            ("a.b".to_string(), 1, 3),
            ("c.w".to_string(), 4, 1),
        ])
    }

    #[test]
    fn layout_offsets_and_lookup() {
        let l = layout();
        assert_eq!(l.total, 6 + 3 + 4);
        assert_eq!(l.find("a.b").unwrap().offset, 6);
        assert!(l.find("missing").is_none());
    }

    #[test]
    fn init_zeroes_biases_and_bounds_weights() {
        let p = ParamVector::init(layout(), 1);
        let b = p.get("a.b").unwrap();
        assert!(p.slice(b).iter().all(|&v| v == 0.0));
        let w = p.get("a.w").unwrap();
        let bound = 1.0 / (2f64).sqrt();
        assert!(p.slice(w).iter().all(|&v| v.abs() < bound));
        assert!(p.slice(w).iter().any(|&v| v != 0.0));
        // seeded determinism
        assert_eq!(p, ParamVector::init(layout(), 1));
        assert_ne!(p.data, ParamVector::init(layout(), 2).data);
    }

    #[test]
    fn ema_moves_target_toward_online() {
        let mut target = ParamVector::zeros(layout());
        let mut online = ParamVector::zeros(layout());
        online.data.iter_mut().for_each(|v| *v = 1.0);
        ema_update(&mut target, &online, 0.01).unwrap();
        assert!(target.data.iter().all(|&v| (v - 0.01).abs() < 1e-15));
        // rate 1 copies, rate 0 freezes
        let mut t2 = ParamVector::zeros(layout());
        ema_update(&mut t2, &online, 1.0).unwrap();
        assert_eq!(t2.data, online.data);
        let mut t3 = ParamVector::zeros(layout());
        ema_update(&mut t3, &online, 0.0).unwrap();
        assert!(t3.data.iter().all(|&v| v == 0.0));

        let other = ParamVector::zeros(Layout::build(&[("x".into(), 1, 1)]));
        let mut bad = other.clone();
        assert!(ema_update(&mut bad, &online, 0.5).is_err());
    }
}
