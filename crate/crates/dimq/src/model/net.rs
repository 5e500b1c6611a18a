//! The sequence Q-model: observation tokens for a w-step state window
//! followed by the action tokens chosen so far, run through causal
//! self-attention blocks; a per-dimension sigmoid head turns the last
//! relevant token into bin values in (0,1).

use serde::{Deserialize, Serialize};

use crate::action::ActionSpec;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::params::{Layout, ParamRef, ParamVector};
use crate::model::tape::{NodeId, Tape};

/// Everything that determines the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub obs_dim: usize,
    pub window: usize,
    pub bins: Vec<u16>,
    pub width: usize,
    pub blocks: usize,
}

impl ModelShape {
    pub fn new(spec: &ActionSpec, obs_dim: usize, window: usize, model: &ModelConfig) -> Result<Self> {
        spec.validate()?;
        model.validate()?;
        if obs_dim == 0 || window == 0 {
            return Err(Error::InvalidConfig(
                "obs_dim and window must be >= 1".into(),
            ));
        }
        Ok(ModelShape {
            obs_dim,
            window,
            bins: spec.bins.clone(),
            width: model.width,
            blocks: model.blocks,
        })
    }

    pub fn num_dims(&self) -> usize {
        self.bins.len()
    }

    pub fn layout(&self) -> Layout {
        let d = self.width;
        let mut shapes: Vec<(String, usize, usize)> = vec![
            ("obs.w".into(), self.obs_dim, d),
            ("obs.b".into(), 1, d),
            ("pos".into(), self.window + self.num_dims(), d),
        ];
        for (i, &n) in self.bins.iter().enumerate() {
            shapes.push((format!("embed{i}"), n as usize, d));
        }
        for l in 0..self.blocks {
            for proj in ["q", "k", "v", "o"] {
                shapes.push((format!("blk{l}.attn.{proj}.w"), d, d));
                shapes.push((format!("blk{l}.attn.{proj}.b"), 1, d));
            }
            shapes.push((format!("blk{l}.ff1.w"), d, 2 * d));
            shapes.push((format!("blk{l}.ff1.b"), 1, 2 * d));
            shapes.push((format!("blk{l}.ff2.w"), 2 * d, d));
            shapes.push((format!("blk{l}.ff2.b"), 1, d));
        }
        for (i, &n) in self.bins.iter().enumerate() {
            shapes.push((format!("head{i}.w"), d, n as usize));
            shapes.push((format!("head{i}.b"), 1, n as usize));
        }
        Layout::build(&shapes)
    }
}

/// Logit and sigmoid output nodes of one dimension's head.
#[derive(Debug, Clone, Copy)]
pub struct HeadOut {
    pub logits: NodeId,
    pub q: NodeId,
}

#[derive(Debug, Clone)]
pub struct SeqQModel {
    pub shape: ModelShape,
    pub params: ParamVector,
}

impl SeqQModel {
    pub fn init(shape: ModelShape, seed: u64) -> SeqQModel {
        let params = ParamVector::init(shape.layout(), seed);
        SeqQModel { shape, params }
    }

    pub fn from_params(shape: ModelShape, params: ParamVector) -> Result<SeqQModel> {
        if params.layout != shape.layout() {
            return Err(Error::LayoutMismatch {
                a: shape.layout().total,
                b: params.data.len(),
            });
        }
        Ok(SeqQModel { shape, params })
    }

    /// Same architecture evaluated under a different parameter vector
    /// (e.g. the EMA target copy).
    pub fn with_params<'a>(&'a self, params: &'a ParamVector) -> SeqQModelView<'a> {
        SeqQModelView {
            shape: &self.shape,
            params,
        }
    }

    pub fn view(&self) -> SeqQModelView<'_> {
        SeqQModelView {
            shape: &self.shape,
            params: &self.params,
        }
    }

    pub fn forward_dim(&self, window: &[Vec<f64>], pads: &[bool], action: &[u16], dim: usize) -> Result<Vec<f64>> {
        self.view().forward_dim(window, pads, action, dim)
    }

    pub fn greedy_decode(&self, window: &[Vec<f64>], pads: &[bool]) -> Result<Vec<u16>> {
        self.view().greedy_decode(window, pads)
    }
}

/// Borrowed (shape, params) pair; all forward passes go through this.
#[derive(Debug, Clone, Copy)]
pub struct SeqQModelView<'a> {
    pub shape: &'a ModelShape,
    pub params: &'a ParamVector,
}

impl<'a> SeqQModelView<'a> {
    fn param(&self, name: &str) -> ParamRef {
        self.params
            .get(name)
            .expect("layout is derived from the shape")
    }

    fn check_inputs(&self, window: &[Vec<f64>], pads: &[bool], action: &[u16], dims_needed: usize) -> Result<()> {
        let s = self.shape;
        if window.len() != s.window || pads.len() != s.window {
            return Err(Error::InvalidConfig(format!(
                "window has {} slots, model expects {}",
                window.len(),
                s.window
            )));
        }
        if window.iter().any(|o| o.len() != s.obs_dim) {
            return Err(Error::InvalidConfig(format!(
                "observation width mismatch (expected {})",
                s.obs_dim
            )));
        }
        if action.len() < dims_needed {
            return Err(Error::PrefixMismatch {
                dim: dims_needed,
                got: action.len(),
                want: dims_needed,
            });
        }
        for (j, &bin) in action.iter().take(dims_needed).enumerate() {
            if bin >= s.bins[j] {
                return Err(Error::BinOutOfRange {
                    dim: j,
                    bin,
                    bins: s.bins[j],
                });
            }
        }
        Ok(())
    }

    /// Builds the token sequence [states, a^0..a^{prefix-1}] and runs the
    /// blocks; returns the final token matrix node.
    fn encode(&self, tape: &mut Tape<'a>, window: &[Vec<f64>], pads: &[bool], action: &[u16], prefix: usize) -> NodeId {
        let s = self.shape;
        let d = s.width;
        let w = s.window;
        let tokens = w + prefix;

        // state tokens: tanh(obs * W + b)
        let flat: Vec<f64> = window.iter().flat_map(|o| o.iter().copied()).collect();
        let obs = tape.constant(w, s.obs_dim, flat);
        let ow = tape.param(self.param("obs.w"));
        let ob = tape.param(self.param("obs.b"));
        let enc = tape.matmul(obs, ow);
        let enc = tape.add_row_broadcast(enc, ob);
        let state_tokens = tape.tanh(enc);

        // action tokens: one embedding row per already-chosen dimension
        let mut parts = vec![state_tokens];
        for (j, &bin) in action.iter().take(prefix).enumerate() {
            let table = tape.param(self.param(&format!("embed{j}")));
            parts.push(tape.gather_rows(table, vec![bin as usize]));
        }
        let x = if parts.len() == 1 {
            parts[0]
        } else {
            tape.concat_rows(parts)
        };

        // positional encodings for the slots actually present
        let pos_table = tape.param(self.param("pos"));
        let pos = tape.gather_rows(pos_table, (0..tokens).collect());
        let mut x = tape.add(x, pos);

        // strictly causal mask that also hides padded state slots as keys
        let mut mask = vec![false; tokens * tokens];
        for q in 0..tokens {
            for k in 0..=q {
                let key_padded = k < w && pads[k];
                mask[q * tokens + k] = !key_padded;
            }
        }

        let scale = 1.0 / (d as f64).sqrt();
        for l in 0..s.blocks {
            let name = |p: &str| format!("blk{l}.attn.{p}");
            let wq = tape.param(self.param(&format!("{}.w", name("q"))));
            let bq = tape.param(self.param(&format!("{}.b", name("q"))));
            let wk = tape.param(self.param(&format!("{}.w", name("k"))));
            let bk = tape.param(self.param(&format!("{}.b", name("k"))));
            let wv = tape.param(self.param(&format!("{}.w", name("v"))));
            let bv = tape.param(self.param(&format!("{}.b", name("v"))));
            let wo = tape.param(self.param(&format!("{}.w", name("o"))));
            let bo = tape.param(self.param(&format!("{}.b", name("o"))));

            let q = tape.matmul(x, wq);
            let q = tape.add_row_broadcast(q, bq);
            let k = tape.matmul(x, wk);
            let k = tape.add_row_broadcast(k, bk);
            let v = tape.matmul(x, wv);
            let v = tape.add_row_broadcast(v, bv);
            let scores = tape.matmul_nt(q, k);
            let scores = tape.scale(scores, scale);
            let attn = tape.masked_softmax(scores, mask.clone());
            let mixed = tape.matmul(attn, v);
            let out = tape.matmul(mixed, wo);
            let out = tape.add_row_broadcast(out, bo);
            x = tape.add(x, out);

            let w1 = tape.param(self.param(&format!("blk{l}.ff1.w")));
            let b1 = tape.param(self.param(&format!("blk{l}.ff1.b")));
            let w2 = tape.param(self.param(&format!("blk{l}.ff2.w")));
            let b2 = tape.param(self.param(&format!("blk{l}.ff2.b")));
            let h = tape.matmul(x, w1);
            let h = tape.add_row_broadcast(h, b1);
            let h = tape.tanh(h);
            let f = tape.matmul(h, w2);
            let f = tape.add_row_broadcast(f, b2);
            x = tape.add(x, f);
        }
        x
    }

    fn head(&self, tape: &mut Tape<'a>, x: NodeId, row: usize, dim: usize) -> HeadOut {
        let h = tape.select_row(x, row);
        let hw = tape.param(self.param(&format!("head{dim}.w")));
        let hb = tape.param(self.param(&format!("head{dim}.b")));
        let logits = tape.matmul(h, hw);
        let logits = tape.add_row_broadcast(logits, hb);
        let q = tape.sigmoid(logits);
        HeadOut { logits, q }
    }

    /// One pass over the full token sequence; thanks to the causal mask the
    /// token at position w-1+i already encodes exactly (states, a^{0..i-1}),
    /// so every dimension's head can read off one shared encoding.
    pub fn forward_all(&self, tape: &mut Tape<'a>, window: &[Vec<f64>], pads: &[bool], action: &[u16]) -> Result<Vec<HeadOut>> {
        let d_a = self.shape.num_dims();
        self.check_inputs(window, pads, action, d_a - 1)?;
        let x = self.encode(tape, window, pads, action, d_a - 1);
        let w = self.shape.window;
        Ok((0..d_a).map(|i| self.head(tape, x, w - 1 + i, i)).collect())
    }

    /// Q-values for one dimension given the prefix `action[..dim]`; entries
    /// of `action` at or past `dim` are ignored.
    pub fn forward_dim(&self, window: &[Vec<f64>], pads: &[bool], action: &[u16], dim: usize) -> Result<Vec<f64>> {
        if dim >= self.shape.num_dims() {
            return Err(Error::DimOutOfRange {
                dim,
                num_dims: self.shape.num_dims(),
            });
        }
        self.check_inputs(window, pads, action, dim)?;
        let mut tape = Tape::new(self.params);
        let x = self.encode(&mut tape, window, pads, action, dim);
        let out = self.head(&mut tape, x, self.shape.window - 1 + dim, dim);
        Ok(tape.value(out.q).data.clone())
    }

    /// Per-dimension argmax decode; ties break toward the lowest bin.
    pub fn greedy_decode(&self, window: &[Vec<f64>], pads: &[bool]) -> Result<Vec<u16>> {
        let mut chosen: Vec<u16> = Vec::with_capacity(self.shape.num_dims());
        for dim in 0..self.shape.num_dims() {
            let q = self.forward_dim(window, pads, &chosen, dim)?;
            let mut best = 0usize;
            for (b, &v) in q.iter().enumerate() {
                if v > q[best] {
                    best = b;
                }
            }
            chosen.push(best as u16);
        }
        Ok(chosen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_shape() -> ModelShape {
        ModelShape {
            obs_dim: 3,
            window: 2,
            bins: vec![3, 2, 4],
            width: 8,
            blocks: 2,
        }
    }

    fn toy_inputs() -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            vec![vec![0.0, 0.0, 0.0], vec![0.3, 0.7, 0.1]],
            vec![true, false],
        )
    }

    #[test]
    fn outputs_strictly_in_unit_interval() {
        let model = SeqQModel::init(toy_shape(), 3);
        let (window, pads) = toy_inputs();
        for dim in 0..3 {
            let q = model.forward_dim(&window, &pads, &[1, 1, 1], dim).unwrap();
            assert_eq!(q.len(), model.shape.bins[dim] as usize);
            assert!(q.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zeroed_head_gives_exactly_half() {
        let mut model = SeqQModel::init(toy_shape(), 3);
        for name in ["head0.w", "head0.b"] {
            let r = model.params.get(name).unwrap();
            model.params.slice_mut(r).fill(0.0);
        }
        let (window, pads) = toy_inputs();
        let q = model.forward_dim(&window, &pads, &[], 0).unwrap();
        assert!(q.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn padded_slot_content_is_invisible() {
        let model = SeqQModel::init(toy_shape(), 5);
        let (window, pads) = toy_inputs();
        let mut scrambled = window.clone();
        scrambled[0] = vec![9.0, -4.0, 2.5];
        for dim in 0..3 {
            let a = model.forward_dim(&window, &pads, &[2, 1, 3], dim).unwrap();
            let b = model.forward_dim(&scrambled, &pads, &[2, 1, 3], dim).unwrap();
            assert_eq!(a, b, "dim {dim}");
        }
    }

    #[test]
    fn later_action_entries_do_not_change_earlier_dims() {
        let model = SeqQModel::init(toy_shape(), 7);
        let (window, pads) = toy_inputs();
        let base = [0u16, 1, 0];
        for dim in 0..3 {
            let a = model.forward_dim(&window, &pads, &base, dim).unwrap();
            let mut later = base;
            for j in dim..3 {
                later[j] = (base[j] + 1) % model.shape.bins[j];
            }
            let b = model.forward_dim(&window, &pads, &later, dim).unwrap();
            assert_eq!(a, b, "dim {dim}");
        }
    }

    #[test]
    fn fused_pass_matches_per_dim_passes_bit_exactly() {
        let model = SeqQModel::init(toy_shape(), 11);
        let (window, pads) = toy_inputs();
        let action = [2u16, 0, 3];
        let mut tape = Tape::new(&model.params);
        let heads = model.view().forward_all(&mut tape, &window, &pads, &action).unwrap();
        for (dim, head) in heads.iter().enumerate() {
            let fused = tape.value(head.q).data.clone();
            let single = model.forward_dim(&window, &pads, &action, dim).unwrap();
            assert_eq!(fused, single, "dim {dim}");
        }
    }

    #[test]
    fn greedy_decode_is_deterministic_and_respects_rigging() {
        let mut model = SeqQModel::init(toy_shape(), 13);
        let (window, pads) = toy_inputs();
        let a = model.greedy_decode(&window, &pads).unwrap();
        let b = model.greedy_decode(&window, &pads).unwrap();
        assert_eq!(a, b);

        // rig every head so bin 1 dominates
        for dim in 0..3 {
            let wr = model.params.get(&format!("head{dim}.w")).unwrap();
            model.params.slice_mut(wr).fill(0.0);
            let br = model.params.get(&format!("head{dim}.b")).unwrap();
            let bias = model.params.slice_mut(br);
            bias.fill(0.0);
            bias[1] = 5.0;
        }
        assert_eq!(model.greedy_decode(&window, &pads).unwrap(), vec![1, 1, 1]);

        // all-equal heads tie-break to bin 0
        for dim in 0..3 {
            let br = model.params.get(&format!("head{dim}.b")).unwrap();
            model.params.slice_mut(br).fill(0.0);
        }
        assert_eq!(model.greedy_decode(&window, &pads).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn argmax_choice_invariant_under_monotone_transform() {
        // the decode rule only compares values, so any strictly increasing
        // map applied to one dimension's Q-vector picks the same bin; this
        // is what lets BC decode over raw logits with the same code path
        let argmax = |v: &[f64]| {
            let mut best = 0usize;
            for (b, &x) in v.iter().enumerate() {
                if x > v[best] {
                    best = b;
                }
            }
            best
        };
        let model = SeqQModel::init(toy_shape(), 19);
        let (window, pads) = toy_inputs();
        for dim in 0..3 {
            let q = model.forward_dim(&window, &pads, &[1, 0, 2], dim).unwrap();
            let mapped: Vec<f64> = q.iter().map(|&x| (3.0 * x).exp() - 0.5).collect();
            assert_eq!(argmax(&q), argmax(&mapped));
            // sigmoid is monotone: logits and q agree on the argmax
            let logit: Vec<f64> = q.iter().map(|&x| (x / (1.0 - x)).ln()).collect();
            assert_eq!(argmax(&q), argmax(&logit));
        }
    }

    #[test]
    fn decode_matches_exhaustive_prefix_sweep() {
        // brute-force oracle: enumerate bins dimension by dimension along
        // the greedy path, querying forward_dim directly
        let model = SeqQModel::init(toy_shape(), 17);
        let (window, pads) = toy_inputs();
        let decoded = model.greedy_decode(&window, &pads).unwrap();
        let mut prefix: Vec<u16> = Vec::new();
        for dim in 0..3 {
            let mut best_bin = 0u16;
            let mut best_val = f64::NEG_INFINITY;
            for bin in 0..model.shape.bins[dim] {
                let mut trial = prefix.clone();
                trial.push(bin);
                // value of taking `bin` = the Q the head assigns it
                let q = model.forward_dim(&window, &pads, &trial, dim).unwrap();
                if q[bin as usize] > best_val {
                    best_val = q[bin as usize];
                    best_bin = bin;
                }
            }
            assert_eq!(decoded[dim], best_bin, "dim {dim}");
            prefix.push(best_bin);
        }
    }

    #[test]
    fn input_validation() {
        let model = SeqQModel::init(toy_shape(), 1);
        let (window, pads) = toy_inputs();
        assert!(matches!(
            model.forward_dim(&window, &pads, &[], 2),
            Err(Error::PrefixMismatch { .. })
        ));
        assert!(matches!(
            model.forward_dim(&window, &pads, &[9, 9], 2),
            Err(Error::BinOutOfRange { .. })
        ));
        assert!(model.forward_dim(&window[..1], &pads[..1], &[], 0).is_err());
    }
}
