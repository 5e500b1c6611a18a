//! Q-values over (state, action-prefix) nodes.
//!
//! For an action space with bins (N_1, ..., N_d), every state owns one node
//! per prefix a^{1:i}, 1 <= i <= d. Nodes of one level are stored
//! contiguously in mixed-radix order, which makes "children of a prefix" a
//! contiguous run; iteration/serialization order is depth-first by
//! dimension with bins ascending.

use rand::Rng;

use crate::action::ActionSpec;
use crate::error::{Error, Result};

/// Node layout of the prefix tree for one action spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QShape {
    pub dims: Vec<u16>,
    /// Number of nodes per level (level = prefix length - 1).
    pub level_sizes: Vec<usize>,
    /// Offset of each level within a state block.
    pub level_offsets: Vec<usize>,
    /// Total nodes per state.
    pub stride: usize,
}

impl QShape {
    pub fn of(spec: &ActionSpec) -> QShape {
        let dims = spec.bins.clone();
        let mut level_sizes = Vec::with_capacity(dims.len());
        let mut size = 1usize;
        for &n in &dims {
            size *= n as usize;
            level_sizes.push(size);
        }
        let mut level_offsets = Vec::with_capacity(dims.len());
        let mut off = 0usize;
        for &sz in &level_sizes {
            level_offsets.push(off);
            off += sz;
        }
        QShape {
            dims,
            level_sizes,
            level_offsets,
            stride: off,
        }
    }

    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    /// Mixed-radix rank of a prefix within its level.
    pub fn prefix_rank(&self, prefix: &[u16]) -> usize {
        prefix
            .iter()
            .zip(&self.dims)
            .fold(0usize, |acc, (&b, &n)| acc * n as usize + b as usize)
    }

    /// Offset of a prefix node within a state block.
    pub fn node_offset(&self, prefix: &[u16]) -> usize {
        debug_assert!(!prefix.is_empty() && prefix.len() <= self.dims.len());
        self.level_offsets[prefix.len() - 1] + self.prefix_rank(prefix)
    }
}

/// Values over every (state, action-prefix) node.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub num_states: usize,
    shape: QShape,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, spec: &ActionSpec) -> QTable {
        let shape = QShape::of(spec);
        let values = vec![0.0; num_states * shape.stride];
        QTable {
            num_states,
            shape,
            values,
        }
    }

    pub fn random<R: Rng>(num_states: usize, spec: &ActionSpec, scale: f64, rng: &mut R) -> QTable {
        let mut q = QTable::zeros(num_states, spec);
        for v in &mut q.values {
            *v = rng.gen_range(-scale..scale);
        }
        q
    }

    pub fn shape(&self) -> &QShape {
        &self.shape
    }

    pub fn same_nodes(&self, other: &QTable) -> bool {
        self.num_states == other.num_states && self.shape == other.shape
    }

    pub fn get(&self, state: usize, prefix: &[u16]) -> f64 {
        self.values[state * self.shape.stride + self.shape.node_offset(prefix)]
    }

    pub fn set(&mut self, state: usize, prefix: &[u16], value: f64) {
        self.values[state * self.shape.stride + self.shape.node_offset(prefix)] = value;
    }

    pub fn state_block(&self, state: usize) -> &[f64] {
        &self.values[state * self.shape.stride..(state + 1) * self.shape.stride]
    }

    pub(crate) fn state_block_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.values[state * self.shape.stride..(state + 1) * self.shape.stride]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Max over first-dimension nodes: the state value implied by the table.
    pub fn root_max(&self, state: usize) -> f64 {
        let block = self.state_block(state);
        let n = self.shape.dims[0] as usize;
        block[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm distance to another table on the same node set.
    pub fn sup_dist(&self, other: &QTable) -> Result<f64> {
        if !self.same_nodes(other) {
            return Err(Error::NodeSetMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Visits every node in depth-first order (state-major, bins ascending).
    pub fn for_each_node_dfs(&self, mut f: impl FnMut(usize, &[u16], f64)) {
        let d = self.shape.num_dims();
        let mut prefix: Vec<u16> = Vec::with_capacity(d);
        for state in 0..self.num_states {
            self.dfs(state, &mut prefix, &mut f);
        }
    }

    fn dfs(&self, state: usize, prefix: &mut Vec<u16>, f: &mut impl FnMut(usize, &[u16], f64)) {
        if prefix.len() == self.shape.num_dims() {
            return;
        }
        let n = self.shape.dims[prefix.len()];
        for b in 0..n {
            prefix.push(b);
            f(state, prefix, self.get(state, prefix));
            self.dfs(state, prefix, f);
            prefix.pop();
        }
    }
}
