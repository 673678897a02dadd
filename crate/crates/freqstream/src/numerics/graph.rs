//! Reverse-mode automatic differentiation over a recorded operation tape.
//!
//! Every forward pass builds a fresh [`Graph`]. All recorded values are
//! 2-D row-major matrices; sequence and batch axes are handled by the
//! callers (layers build one node per timestep or per batch element).

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddScalar(NodeId),
    MulScalar(NodeId, f64),
    Matmul(NodeId, NodeId),
    /// Broadcast-add a `[1, n]` row vector to every row of a `[m, n]` matrix.
    AddRowVec(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Abs(NodeId),
    SoftThreshold(NodeId, NodeId),
    SoftmaxRows(NodeId),
    MeanAll(NodeId),
    ConcatCols(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    /// Collect row `row` of each source into one output row per source.
    GatherRow(Vec<NodeId>, usize),
    /// Training-mode batch normalization over rows, per column.
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
    },
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
    /// Saved intermediates for ops whose backward needs them.
    aux: Vec<f64>,
}

/// Operation tape. One forward pass per instance.
pub struct Graph {
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &str, detail: String) -> Error {
    Error::ShapeMismatch {
        op: op.into(),
        detail,
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, _requires_grad: bool) -> NodeId {
        debug_assert_eq!(rows * cols, value.len());
        let id = NodeId(self.nodes.len());
        let n = value.len();
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: vec![0.0; n],
            op,
            aux: Vec::new(),
        });
        id
    }

    /// A differentiable leaf holding a copy of `t` (flattened to 2-D).
    pub fn leaf(&mut self, t: &Tensor) -> Result<NodeId> {
        let (r, c) = t.dims2()?;
        Ok(self.push(r, c, t.data.clone(), Op::Leaf, true))
    }

    /// A constant leaf: no gradient is accumulated for it.
    pub fn constant(&mut self, t: &Tensor) -> Result<NodeId> {
        let (r, c) = t.dims2()?;
        Ok(self.push(r, c, t.data.clone(), Op::Leaf, false))
    }

    pub fn constant_from(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<NodeId> {
        if rows * cols != data.len() {
            return Err(shape_err(
                "constant",
                format!("{}x{} != {} elements", rows, cols, data.len()),
            ));
        }
        Ok(self.push(rows, cols, data, Op::Leaf, false))
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    fn same_shape(&self, op: &str, a: NodeId, b: NodeId) -> Result<(usize, usize)> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if (ra, ca) != (rb, cb) {
            return Err(shape_err(op, format!("{}x{} vs {}x{}", ra, ca, rb, cb)));
        }
        Ok((ra, ca))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("add", a, b)?;
        let v: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(r, c, v, Op::Add(a, b), true))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let v: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(r, c, v, Op::Sub(a, b), true))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let v: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(r, c, v, Op::Mul(a, b), true))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x + s).collect();
        self.push(r, c, v, Op::AddScalar(a), true)
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x * s).collect();
        self.push(r, c, v, Op::MulScalar(a, s), true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.shape(a);
        let (kb, n) = self.shape(b);
        if k != kb {
            return Err(shape_err("matmul", format!("{}x{} * {}x{}", m, k, kb, n)));
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += x * brow[j];
                }
            }
        }
        Ok(self.push(m, n, out, Op::Matmul(a, b), true))
    }

    pub fn add_row_vec(&mut self, a: NodeId, v: NodeId) -> Result<NodeId> {
        let (m, n) = self.shape(a);
        let (rv, cv) = self.shape(v);
        if rv != 1 || cv != n {
            return Err(shape_err(
                "add_row_vec",
                format!("matrix {}x{}, row vector {}x{}", m, n, rv, cv),
            ));
        }
        let av = &self.nodes[a.0].value;
        let vv = &self.nodes[v.0].value;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = av[i * n + j] + vv[j];
            }
        }
        Ok(self.push(m, n, out, Op::AddRowVec(a, v), true))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        self.push(r, c, v, Op::Sigmoid(a), true)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(r, c, v, Op::Tanh(a), true)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.max(0.0)).collect();
        self.push(r, c, v, Op::Relu(a), true)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.abs()).collect();
        self.push(r, c, v, Op::Abs(a), true)
    }

    /// Elementwise soft threshold `sign(x) * max(|x| - tau, 0)`.
    ///
    /// Gradient w.r.t. `x` is 1 outside the dead zone and 0 inside;
    /// gradient w.r.t. `tau` is `-sign(x)` outside and 0 inside.
    pub fn soft_threshold(&mut self, x: NodeId, tau: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("soft_threshold", x, tau)?;
        let xv = &self.nodes[x.0].value;
        let tv = &self.nodes[tau.0].value;
        if let Some(t) = tv.iter().find(|t| **t < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "soft_threshold requires tau >= 0, got {}",
                t
            )));
        }
        let v: Vec<f64> = xv
            .iter()
            .zip(tv)
            .map(|(&x, &t)| {
                if x > t {
                    x - t
                } else if x < -t {
                    x + t
                } else {
                    0.0
                }
            })
            .collect();
        Ok(self.push(r, c, v, Op::SoftThreshold(x, tau), true))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &av[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - m).exp();
                out[i * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                out[i * c + j] /= sum;
            }
        }
        self.push(r, c, out, Op::SoftmaxRows(a), true)
    }

    /// Mean over all elements, producing a `[1,1]` scalar node.
    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.nodes[a.0].value.len();
        let s: f64 = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s / n as f64], Op::MeanAll(a), true)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ra != rb {
            return Err(shape_err("concat_cols", format!("{} rows vs {} rows", ra, rb)));
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let n = ca + cb;
        let mut out = vec![0.0; ra * n];
        for i in 0..ra {
            out[i * n..i * n + ca].copy_from_slice(&av[i * ca..(i + 1) * ca]);
            out[i * n + ca..(i + 1) * n].copy_from_slice(&bv[i * cb..(i + 1) * cb]);
        }
        Ok(self.push(ra, n, out, Op::ConcatCols(a, b), true))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(shape_err(
                "slice_cols",
                format!("slice [{}, {}) of {} columns", start, start + len, c),
            ));
        }
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r * len];
        for i in 0..r {
            out[i * len..(i + 1) * len].copy_from_slice(&av[i * c + start..i * c + start + len]);
        }
        Ok(self.push(r, len, out, Op::SliceCols(a, start, len), true))
    }

    /// Stack row `row` of each source matrix into a new matrix with one
    /// output row per source. All sources must share column count.
    pub fn gather_row(&mut self, srcs: &[NodeId], row: usize) -> Result<NodeId> {
        if srcs.is_empty() {
            return Err(Error::InvalidArgument("gather_row: empty source list".into()));
        }
        let (_, c) = self.shape(srcs[0]);
        let mut out = Vec::with_capacity(srcs.len() * c);
        for &s in srcs {
            let (rs, cs) = self.shape(s);
            if cs != c {
                return Err(shape_err("gather_row", format!("{} cols vs {} cols", cs, c)));
            }
            if row >= rs {
                return Err(shape_err("gather_row", format!("row {} of {} rows", row, rs)));
            }
            out.extend_from_slice(&self.nodes[s.0].value[row * c..(row + 1) * c]);
        }
        Ok(self.push(srcs.len(), c, out, Op::GatherRow(srcs.to_vec(), row), true))
    }

    /// Training-mode batch normalization: per-column standardization over
    /// rows with learned affine `gamma`, `beta` (both `[1, c]`).
    pub fn batch_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let (m, c) = self.shape(x);
        for (name, id) in [("gamma", gamma), ("beta", beta)] {
            let (r, cc) = self.shape(id);
            if r != 1 || cc != c {
                return Err(shape_err(
                    "batch_norm",
                    format!("{} must be 1x{}, got {}x{}", name, c, r, cc),
                ));
            }
        }
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gamma.0].value;
        let bv = &self.nodes[beta.0].value;
        let mut xhat = vec![0.0; m * c];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; m * c];
        for j in 0..c {
            let mut mean = 0.0;
            for i in 0..m {
                mean += xv[i * c + j];
            }
            mean /= m as f64;
            let mut var = 0.0;
            for i in 0..m {
                let d = xv[i * c + j] - mean;
                var += d * d;
            }
            var /= m as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[j] = is;
            for i in 0..m {
                let xh = (xv[i * c + j] - mean) * is;
                xhat[i * c + j] = xh;
                out[i * c + j] = gv[j] * xh + bv[j];
            }
        }
        let id = self.push(m, c, out, Op::BatchNorm { x, gamma, beta }, true);
        let node = &mut self.nodes[id.0];
        node.aux = xhat;
        node.aux.extend_from_slice(&inv_std);
        Ok(id)
    }

    /// Reverse pass from a scalar output. Populates gradients on every
    /// node; leaves created with [`Graph::leaf`] receive `d(output)/d(leaf)`.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        let n = &self.nodes[output.0];
        if n.rows * n.cols != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward requires a scalar output, got {}x{}",
                n.rows, n.cols
            )));
        }
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[output.0].grad[0] = 1.0;

        // Nodes are recorded in topological order by construction.
        for idx in (0..=output.0).rev() {
            let op = self.nodes[idx].op.clone();
            let gy = std::mem::take(&mut self.nodes[idx].grad);
            if gy.iter().all(|&g| g == 0.0) {
                self.nodes[idx].grad = gy;
                continue;
            }
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.accum(a, &gy, |g, _| g);
                    self.accum(b, &gy, |g, _| g);
                }
                Op::Sub(a, b) => {
                    self.accum(a, &gy, |g, _| g);
                    self.accum(b, &gy, |g, _| -g);
                }
                Op::Mul(a, b) => {
                    let bv = self.nodes[b.0].value.clone();
                    self.accum_with(a, &gy, &bv);
                    let av = self.nodes[a.0].value.clone();
                    self.accum_with(b, &gy, &av);
                }
                Op::AddScalar(a) => self.accum(a, &gy, |g, _| g),
                Op::MulScalar(a, s) => self.accum(a, &gy, move |g, _| g * s),
                Op::Matmul(a, b) => self.backward_matmul(a, b, idx, &gy),
                Op::AddRowVec(a, v) => {
                    self.accum(a, &gy, |g, _| g);
                    let (m, c) = self.shape(a);
                    let gv = &mut self.nodes[v.0].grad;
                    for i in 0..m {
                        for j in 0..c {
                            gv[j] += gy[i * c + j];
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    let s = self.nodes[idx].value.clone();
                    self.accum(a, &gy, move |g, i| g * s[i] * (1.0 - s[i]));
                }
                Op::Tanh(a) => {
                    let t = self.nodes[idx].value.clone();
                    self.accum(a, &gy, move |g, i| g * (1.0 - t[i] * t[i]));
                }
                Op::Relu(a) => {
                    let x = self.nodes[a.0].value.clone();
                    self.accum(a, &gy, move |g, i| if x[i] > 0.0 { g } else { 0.0 });
                }
                Op::Abs(a) => {
                    let x = self.nodes[a.0].value.clone();
                    self.accum(a, &gy, move |g, i| g * x[i].signum() * if x[i] == 0.0 { 0.0 } else { 1.0 });
                }
                Op::SoftThreshold(x, tau) => {
                    let xv = self.nodes[x.0].value.clone();
                    let tv = self.nodes[tau.0].value.clone();
                    {
                        let gx = &mut self.nodes[x.0].grad;
                        for i in 0..gy.len() {
                            if xv[i].abs() > tv[i] {
                                gx[i] += gy[i];
                            }
                        }
                    }
                    let gt = &mut self.nodes[tau.0].grad;
                    for i in 0..gy.len() {
                        if xv[i] > tv[i] {
                            gt[i] -= gy[i];
                        } else if xv[i] < -tv[i] {
                            gt[i] += gy[i];
                        }
                    }
                }
                Op::SoftmaxRows(a) => {
                    let (r, c) = self.shape(a);
                    let s = self.nodes[idx].value.clone();
                    let ga = &mut self.nodes[a.0].grad;
                    for i in 0..r {
                        let mut dot = 0.0;
                        for j in 0..c {
                            dot += gy[i * c + j] * s[i * c + j];
                        }
                        for j in 0..c {
                            ga[i * c + j] += s[i * c + j] * (gy[i * c + j] - dot);
                        }
                    }
                }
                Op::MeanAll(a) => {
                    let n = self.nodes[a.0].value.len() as f64;
                    let g = gy[0] / n;
                    let ga = &mut self.nodes[a.0].grad;
                    ga.iter_mut().for_each(|x| *x += g);
                }
                Op::ConcatCols(a, b) => {
                    let (ra, ca) = self.shape(a);
                    let (_, cb) = self.shape(b);
                    let n = ca + cb;
                    {
                        let ga = &mut self.nodes[a.0].grad;
                        for i in 0..ra {
                            for j in 0..ca {
                                ga[i * ca + j] += gy[i * n + j];
                            }
                        }
                    }
                    let gb = &mut self.nodes[b.0].grad;
                    for i in 0..ra {
                        for j in 0..cb {
                            gb[i * cb + j] += gy[i * n + ca + j];
                        }
                    }
                }
                Op::SliceCols(a, start, len) => {
                    let (r, c) = self.shape(a);
                    let ga = &mut self.nodes[a.0].grad;
                    for i in 0..r {
                        for j in 0..len {
                            ga[i * c + start + j] += gy[i * len + j];
                        }
                    }
                }
                Op::GatherRow(srcs, row) => {
                    let (_, c) = self.shape(srcs[0]);
                    for (i, &s) in srcs.iter().enumerate() {
                        let gs = &mut self.nodes[s.0].grad;
                        for j in 0..c {
                            gs[row * c + j] += gy[i * c + j];
                        }
                    }
                }
                Op::BatchNorm { x, gamma, beta, .. } => {
                    let (m, c) = self.shape(x);
                    let aux = std::mem::take(&mut self.nodes[idx].aux);
                    let (xhat, inv_std) = aux.split_at(m * c);
                    let gv = self.nodes[gamma.0].value.clone();
                    for j in 0..c {
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        let mut dgamma = 0.0;
                        let mut dbeta = 0.0;
                        for i in 0..m {
                            let dy = gy[i * c + j];
                            let dxhat = dy * gv[j];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat[i * c + j];
                            dgamma += dy * xhat[i * c + j];
                            dbeta += dy;
                        }
                        let mf = m as f64;
                        for i in 0..m {
                            let dxhat = gy[i * c + j] * gv[j];
                            let dx = inv_std[j] / mf
                                * (mf * dxhat - sum_dxhat - xhat[i * c + j] * sum_dxhat_xhat);
                            self.nodes[x.0].grad[i * c + j] += dx;
                        }
                        self.nodes[gamma.0].grad[j] += dgamma;
                        self.nodes[beta.0].grad[j] += dbeta;
                    }
                    self.nodes[idx].aux = {
                        let mut a = xhat.to_vec();
                        a.extend_from_slice(inv_std);
                        a
                    };
                }
            }
            self.nodes[idx].grad = gy;
        }
        Ok(())
    }

    fn accum<F: Fn(f64, usize) -> f64>(&mut self, target: NodeId, gy: &[f64], f: F) {
        let g = &mut self.nodes[target.0].grad;
        for i in 0..gy.len() {
            g[i] += f(gy[i], i);
        }
    }

    fn accum_with(&mut self, target: NodeId, gy: &[f64], factor: &[f64]) {
        let g = &mut self.nodes[target.0].grad;
        for i in 0..gy.len() {
            g[i] += gy[i] * factor[i];
        }
    }

    fn backward_matmul(&mut self, a: NodeId, b: NodeId, _out: usize, gy: &[f64]) {
        let (m, k) = self.shape(a);
        let (_, n) = self.shape(b);
        // dA = gY * B^T
        {
            let bv = self.nodes[b.0].value.clone();
            let ga = &mut self.nodes[a.0].grad;
            for i in 0..m {
                for p in 0..k {
                    let mut acc = 0.0;
                    let brow = &bv[p * n..(p + 1) * n];
                    let grow = &gy[i * n..(i + 1) * n];
                    for j in 0..n {
                        acc += grow[j] * brow[j];
                    }
                    ga[i * k + p] += acc;
                }
            }
        }
        // dB = A^T * gY
        let av = self.nodes[a.0].value.clone();
        let gb = &mut self.nodes[b.0].grad;
        for p in 0..k {
            for i in 0..m {
                let x = av[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let grow = &gy[i * n..(i + 1) * n];
                let brow = &mut gb[p * n..(p + 1) * n];
                for j in 0..n {
                    brow[j] += x * grow[j];
                }
            }
        }
    }

    /// Copy a leaf's accumulated gradient back into a tensor.
    pub fn write_grad(&self, id: NodeId, t: &mut Tensor) {
        t.grad = Some(self.nodes[id.0].grad.clone());
    }
}
