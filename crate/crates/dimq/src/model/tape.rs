//! A small reverse-mode differentiation tape over row-major f64 matrices.
//!
//! Forward calls record one node per operation; `backward` seeds output
//! gradients and sweeps the tape in reverse, accumulating parameter
//! gradients directly into a flat buffer laid out like the ParamVector.
//! The op set is exactly what the sequence Q-model needs.

use crate::model::params::{ParamRef, ParamVector};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        debug_assert_eq!(rows * cols, data.len());
        Tensor { rows, cols, data }
    }

}

#[derive(Debug, Clone)]
enum Op {
    /// Input data; no gradient flows out.
    Constant,
    /// View of a parameter slice; backward accumulates at `offset`.
    Param { offset: usize },
    /// (m,k) x (k,n)
    MatMul { a: NodeId, b: NodeId },
    /// (m,k) x (n,k)^T
    MatMulNT { a: NodeId, b: NodeId },
    /// (m,n) + (1,n) broadcast over rows
    AddRowBroadcast { a: NodeId, bias: NodeId },
    Add { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    Tanh { a: NodeId },
    /// Numerically-stable sigmoid clamped into the open interval (0,1).
    Sigmoid { a: NodeId },
    /// Row-wise softmax over entries whose mask bit is set; masked entries
    /// produce exactly 0 and a fully-masked row is all zeros.
    MaskedSoftmax { a: NodeId, mask: Vec<bool> },
    /// Rows gathered from a (param) table; backward scatter-adds.
    GatherRows { table: NodeId, idx: Vec<usize> },
    /// Vertically stacks matrices with equal column counts.
    ConcatRows { parts: Vec<NodeId> },
    /// One row of a as a (1, cols) matrix.
    SelectRow { a: NodeId, row: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

pub struct Tape<'p> {
    params: &'p ParamVector,
    nodes: Vec<Node>,
}

fn sigmoid_scalar(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // keep outputs strictly inside (0,1) even at saturation
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamVector) -> Tape<'p> {
        Tape {
            params,
            nodes: Vec::with_capacity(96),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> NodeId {
        self.push(Op::Constant, Tensor::new(rows, cols, data))
    }

    pub fn param(&mut self, r: ParamRef) -> NodeId {
        let value = Tensor::new(r.rows, r.cols, self.params.slice(r).to_vec());
        self.push(Op::Param { offset: r.offset }, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        debug_assert_eq!(ta.cols, tb.rows);
        let (m, k, n) = (ta.rows, ta.cols, tb.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = ta.data[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &tb.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += aip * brow[j];
                }
            }
        }
        self.push(Op::MatMul { a, b }, Tensor::new(m, n, out))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        debug_assert_eq!(ta.cols, tb.cols);
        let (m, k, n) = (ta.rows, ta.cols, tb.rows);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ta.data[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &tb.data[j * k..(j + 1) * k];
                out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            }
        }
        self.push(Op::MatMulNT { a, b }, Tensor::new(m, n, out))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[b].value);
        debug_assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols));
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let t = Tensor::new(ta.rows, ta.cols, data);
        self.push(Op::Add { a, b }, t)
    }

    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (ta, tb) = (&self.nodes[a].value, &self.nodes[bias].value);
        debug_assert_eq!(tb.rows, 1);
        debug_assert_eq!(ta.cols, tb.cols);
        let mut data = ta.data.clone();
        for row in data.chunks_mut(ta.cols) {
            for (v, b) in row.iter_mut().zip(&tb.data) {
                *v += b;
            }
        }
        let t = Tensor::new(ta.rows, ta.cols, data);
        self.push(Op::AddRowBroadcast { a, bias }, t)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let ta = &self.nodes[a].value;
        let t = Tensor::new(ta.rows, ta.cols, ta.data.iter().map(|x| x * c).collect());
        self.push(Op::Scale { a, c }, t)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let ta = &self.nodes[a].value;
        let t = Tensor::new(ta.rows, ta.cols, ta.data.iter().map(|x| x.tanh()).collect());
        self.push(Op::Tanh { a }, t)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let ta = &self.nodes[a].value;
        let t = Tensor::new(
            ta.rows,
            ta.cols,
            ta.data.iter().map(|&x| sigmoid_scalar(x)).collect(),
        );
        self.push(Op::Sigmoid { a }, t)
    }

    pub fn masked_softmax(&mut self, a: NodeId, mask: Vec<bool>) -> NodeId {
        let ta = &self.nodes[a].value;
        debug_assert_eq!(mask.len(), ta.data.len());
        let (rows, cols) = (ta.rows, ta.cols);
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = &ta.data[i * cols..(i + 1) * cols];
            let mrow = &mask[i * cols..(i + 1) * cols];
            let mut max = f64::NEG_INFINITY;
            for (v, &keep) in row.iter().zip(mrow) {
                if keep && *v > max {
                    max = *v;
                }
            }
            if max == f64::NEG_INFINITY {
                continue; // fully masked row stays zero
            }
            let orow = &mut out[i * cols..(i + 1) * cols];
            let mut sum = 0.0;
            for j in 0..cols {
                if mrow[j] {
                    let e = (row[j] - max).exp();
                    orow[j] = e;
                    sum += e;
                }
            }
            for j in 0..cols {
                orow[j] /= sum;
            }
        }
        self.push(Op::MaskedSoftmax { a, mask }, Tensor::new(rows, cols, out))
    }

    pub fn gather_rows(&mut self, table: NodeId, idx: Vec<usize>) -> NodeId {
        let tt = &self.nodes[table].value;
        let cols = tt.cols;
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &r in &idx {
            data.extend_from_slice(&tt.data[r * cols..(r + 1) * cols]);
        }
        let t = Tensor::new(idx.len(), cols, data);
        self.push(Op::GatherRows { table, idx }, t)
    }

    pub fn concat_rows(&mut self, parts: Vec<NodeId>) -> NodeId {
        debug_assert!(!parts.is_empty());
        let cols = self.nodes[parts[0]].value.cols;
        let rows = parts.iter().map(|&p| self.nodes[p].value.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in &parts {
            let t = &self.nodes[p].value;
            debug_assert_eq!(t.cols, cols);
            data.extend_from_slice(&t.data);
        }
        self.push(Op::ConcatRows { parts }, Tensor::new(rows, cols, data))
    }

    pub fn select_row(&mut self, a: NodeId, row: usize) -> NodeId {
        let ta = &self.nodes[a].value;
        let data = ta.data[row * ta.cols..(row + 1) * ta.cols].to_vec();
        let t = Tensor::new(1, ta.cols, data);
        self.push(Op::SelectRow { a, row }, t)
    }

    /// Reverse sweep. `seeds` supplies dL/d(node) for any subset of nodes;
    /// parameter gradients are accumulated into `grad_out`, which must have
    /// the ParamVector's length.
    pub fn backward(&self, seeds: &[(NodeId, Vec<f64>)], grad_out: &mut [f64]) {
        debug_assert_eq!(grad_out.len(), self.params.len());
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.data.len()])
            .collect();
        for (id, seed) in seeds {
            debug_assert_eq!(seed.len(), grads[*id].len());
            for (g, s) in grads[*id].iter_mut().zip(seed) {
                *g += s;
            }
        }
        for id in (0..self.nodes.len()).rev() {
            if grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            let grad = std::mem::take(&mut grads[id]);
            let node = &self.nodes[id];
            match &node.op {
                Op::Constant => {}
                Op::Param { offset } => {
                    for (g, out) in grad.iter().zip(&mut grad_out[*offset..]) {
                        *out += g;
                    }
                }
                Op::MatMul { a, b } => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                    // dA += dC * B^T
                    {
                        let ga = &mut grads[*a];
                        for i in 0..m {
                            for p in 0..k {
                                let mut acc = 0.0;
                                let grow = &grad[i * n..(i + 1) * n];
                                let brow = &tb.data[p * n..(p + 1) * n];
                                for j in 0..n {
                                    acc += grow[j] * brow[j];
                                }
                                ga[i * k + p] += acc;
                            }
                        }
                    }
                    // dB += A^T * dC
                    {
                        let gb = &mut grads[*b];
                        for p in 0..k {
                            for i in 0..m {
                                let aip = ta.data[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                let grow = &grad[i * n..(i + 1) * n];
                                let gbrow = &mut gb[p * n..(p + 1) * n];
                                for j in 0..n {
                                    gbrow[j] += aip * grow[j];
                                }
                            }
                        }
                    }
                }
                Op::MatMulNT { a, b } => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (ta.rows, ta.cols, tb.rows);
                    // C = A B^T: dA += dC * B ; dB += dC^T * A
                    {
                        let ga = &mut grads[*a];
                        for i in 0..m {
                            let grow = &grad[i * n..(i + 1) * n];
                            let garow = &mut ga[i * k..(i + 1) * k];
                            for j in 0..n {
                                let g = grow[j];
                                if g == 0.0 {
                                    continue;
                                }
                                let brow = &tb.data[j * k..(j + 1) * k];
                                for p in 0..k {
                                    garow[p] += g * brow[p];
                                }
                            }
                        }
                    }
                    {
                        let gb = &mut grads[*b];
                        for j in 0..n {
                            let gbrow = &mut gb[j * k..(j + 1) * k];
                            for i in 0..m {
                                let g = grad[i * n + j];
                                if g == 0.0 {
                                    continue;
                                }
                                let arow = &ta.data[i * k..(i + 1) * k];
                                for p in 0..k {
                                    gbrow[p] += g * arow[p];
                                }
                            }
                        }
                    }
                }
                Op::AddRowBroadcast { a, bias } => {
                    let cols = node.value.cols;
                    for (g, ga) in grad.iter().zip(grads[*a].iter_mut()) {
                        *ga += g;
                    }
                    let gb = &mut grads[*bias];
                    for row in grad.chunks(cols) {
                        for (gbj, g) in gb.iter_mut().zip(row) {
                            *gbj += g;
                        }
                    }
                }
                Op::Add { a, b } => {
                    for (g, ga) in grad.iter().zip(grads[*a].iter_mut()) {
                        *ga += g;
                    }
                    for (g, gb) in grad.iter().zip(grads[*b].iter_mut()) {
                        *gb += g;
                    }
                }
                Op::Scale { a, c } => {
                    for (g, ga) in grad.iter().zip(grads[*a].iter_mut()) {
                        *ga += g * c;
                    }
                }
                Op::Tanh { a } => {
                    for ((g, y), ga) in grad
                        .iter()
                        .zip(&node.value.data)
                        .zip(grads[*a].iter_mut())
                    {
                        *ga += g * (1.0 - y * y);
                    }
                }
                Op::Sigmoid { a } => {
                    for ((g, y), ga) in grad
                        .iter()
                        .zip(&node.value.data)
                        .zip(grads[*a].iter_mut())
                    {
                        *ga += g * y * (1.0 - y);
                    }
                }
                Op::MaskedSoftmax { a, mask } => {
                    let cols = node.value.cols;
                    let ga = &mut grads[*a];
                    for i in 0..node.value.rows {
                        let y = &node.value.data[i * cols..(i + 1) * cols];
                        let g = &grad[i * cols..(i + 1) * cols];
                        let dot: f64 = y.iter().zip(g).map(|(yv, gv)| yv * gv).sum();
                        let mrow = &mask[i * cols..(i + 1) * cols];
                        let garow = &mut ga[i * cols..(i + 1) * cols];
                        for j in 0..cols {
                            if mrow[j] {
                                garow[j] += y[j] * (g[j] - dot);
                            }
                        }
                    }
                }
                Op::GatherRows { table, idx } => {
                    let cols = node.value.cols;
                    let gt = &mut grads[*table];
                    for (out_row, &src_row) in idx.iter().enumerate() {
                        let g = &grad[out_row * cols..(out_row + 1) * cols];
                        let dst = &mut gt[src_row * cols..(src_row + 1) * cols];
                        for (d, gv) in dst.iter_mut().zip(g) {
                            *d += gv;
                        }
                    }
                }
                Op::ConcatRows { parts } => {
                    let cols = node.value.cols;
                    let mut row = 0usize;
                    for &p in parts {
                        let rows = self.nodes[p].value.rows;
                        let g = &grad[row * cols..(row + rows) * cols];
                        for (gp, gv) in grads[p].iter_mut().zip(g) {
                            *gp += gv;
                        }
                        row += rows;
                    }
                }
                Op::SelectRow { a, row } => {
                    let cols = node.value.cols;
                    let ga = &mut grads[*a][row * cols..(row + 1) * cols];
                    for (g, gv) in ga.iter_mut().zip(&grad) {
                        *g += gv;
                    }
                }
            }
        }
    }
}
