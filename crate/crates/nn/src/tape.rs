use rand::Rng;

use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::{matmul_at_into, matmul_bt_into, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

#[derive(Debug)]
enum Op<F> {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId, Broadcast),
    Mul(NodeId, NodeId),
    Scale(NodeId, F),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize),
    SliceRows(NodeId, usize),
    Reshape(NodeId),
    Softmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<F>,
        inv_std: Vec<F>,
    },
    Relu(NodeId),
    Gather(NodeId, Vec<usize>),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<F>,
        scale: F,
    },
    PairScores(NodeId, NodeId),
    PairMix(NodeId, NodeId),
    GroupedRowDot(NodeId, NodeId),
    Sum(NodeId),
    Dropout(NodeId, Vec<F>),
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
}

/// Record of a forward computation.
///
/// Nodes are appended in evaluation order, so a reverse sweep over the node
/// list visits every consumer before its inputs.
#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

/// Gradients of one backward sweep.
#[derive(Debug)]
pub struct Gradients<F> {
    node_grads: Vec<Option<Tensor<F>>>,
    params: Vec<(NodeId, ParamId)>,
}

impl<F: Real> Gradients<F> {
    pub fn wrt(&self, node: NodeId) -> Option<&Tensor<F>> {
        self.node_grads.get(node.0).and_then(Option::as_ref)
    }

    /// Adds every parameter-leaf gradient into `store`. A parameter inserted
    /// on the tape several times receives the sum.
    pub fn accumulate_into(&self, store: &mut ParamStore<F>) {
        for &(node, pid) in &self.params {
            if let Some(g) = &self.node_grads[node.0] {
                store.get_mut(pid).grad.add_assign(g);
            }
        }
    }
}

fn mismatch<F: Real>(op: &'static str, a: &Tensor<F>, b: &Tensor<F>) -> NnError {
    NnError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn dims<F: Real>(t: &Tensor<F>, op: &'static str) -> Result<(usize, usize)> {
    t.dims2().ok_or_else(|| t.rank_error(op))
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        &self.nodes[id.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> F {
        self.nodes[id.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, name: &'static str) -> Result<NodeId> {
        value.ensure_finite(name)?;
        self.nodes.push(Node { value, op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Result<NodeId> {
        self.push(value, Op::Leaf, "constant")
    }

    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> NodeId {
        // Parameters are kept finite by construction; skip the scan.
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).transpose2()?;
        self.push(out, Op::Transpose(a), "transpose")
    }

    /// `a · bᵀ · scale`, the dot-product attention logits.
    pub fn scaled_dot(&mut self, a: NodeId, b: NodeId, scale: F) -> Result<NodeId> {
        let bt = self.transpose(b)?;
        let prod = self.matmul(a, bt)?;
        self.scale(prod, scale)
    }

    /// Element-wise sum. `b` may match `a` exactly, be a row vector, a column
    /// vector, or a single value.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, n) = dims(va, "add")?;
        let mode = if va.shape() == vb.shape() {
            Broadcast::Same
        } else if vb.len() == 1 {
            Broadcast::Scalar
        } else {
            match vb.dims2() {
                Some((1, c)) if c == n => Broadcast::Row,
                Some((r, 1)) if r == m => Broadcast::Col,
                _ => return Err(mismatch("add", va, vb)),
            }
        };
        let bd = vb.data();
        let mut out = va.clone();
        let od = out.data_mut();
        match mode {
            Broadcast::Same => od.iter_mut().zip(bd).for_each(|(o, &x)| *o += x),
            Broadcast::Scalar => od.iter_mut().for_each(|o| *o += bd[0]),
            Broadcast::Row => {
                for row in od.chunks_mut(n) {
                    row.iter_mut().zip(bd).for_each(|(o, &x)| *o += x);
                }
            }
            Broadcast::Col => {
                for (row, &x) in od.chunks_mut(n).zip(bd) {
                    row.iter_mut().for_each(|o| *o += x);
                }
            }
        }
        self.push(out, Op::Add(a, b, mode), "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("mul", va, vb));
        }
        let mut out = va.clone();
        out.data_mut()
            .iter_mut()
            .zip(vb.data())
            .for_each(|(o, &x)| *o *= x);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: NodeId, s: F) -> Result<NodeId> {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s), "scale")
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = self.value(parts[0]);
        let (rows, _) = dims(first, "concat_cols")?;
        let mut total = 0;
        for &p in parts {
            let v = self.value(p);
            let (r, c) = dims(v, "concat_cols")?;
            if r != rows {
                return Err(mismatch("concat_cols", first, v));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(&[rows, total], data)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = self.value(parts[0]);
        let (_, cols) = dims(first, "concat_rows")?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            let (r, c) = dims(v, "concat_rows")?;
            if c != cols {
                return Err(mismatch("concat_rows", first, v));
            }
            rows += r;
            data.extend_from_slice(v.data());
        }
        let out = Tensor::new(&[rows, cols], data)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let v = self.value(a);
        let (rows, cols) = dims(v, "slice_cols")?;
        if start >= end || end > cols {
            return Err(NnError::IndexOutOfRange {
                op: "slice_cols",
                index: end,
                bound: cols,
            });
        }
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&v.row(r)[start..end]);
        }
        let out = Tensor::new(&[rows, end - start], data)?;
        self.push(out, Op::SliceCols(a, start), "slice_cols")
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let v = self.value(a);
        let (rows, cols) = dims(v, "slice_rows")?;
        if start >= end || end > rows {
            return Err(NnError::IndexOutOfRange {
                op: "slice_rows",
                index: end,
                bound: rows,
            });
        }
        let out = Tensor::new(&[end - start, cols], v.data()[start * cols..end * cols].to_vec())?;
        self.push(out, Op::SliceRows(a, start), "slice_rows")
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.value(a).reshaped(shape)?;
        self.push(out, Op::Reshape(a), "reshape")
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.softmax_impl(a, false)
    }

    /// Row-wise softmax where row `i` only covers columns `0..=i`.
    pub fn causal_softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.softmax_impl(a, true)
    }

    fn softmax_impl(&mut self, a: NodeId, causal: bool) -> Result<NodeId> {
        let v = self.value(a);
        let (_, cols) = dims(v, "softmax")?;
        let mut out = Tensor::zeros(v.shape());
        for (i, (src, dst)) in v
            .data()
            .chunks(cols)
            .zip(out.data_mut().chunks_mut(cols))
            .enumerate()
        {
            let width = if causal { (i + 1).min(cols) } else { cols };
            softmax_into(&src[..width], &mut dst[..width]);
        }
        self.push(out, Op::Softmax(a), "softmax")
    }

    /// Per-row normalization followed by gain and bias (both row vectors).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: F) -> Result<NodeId> {
        let vx = self.value(x);
        let (rows, cols) = dims(vx, "layer_norm")?;
        let (vg, vb) = (self.value(gain), self.value(bias));
        if vg.len() != cols {
            return Err(mismatch("layer_norm", vx, vg));
        }
        if vb.len() != cols {
            return Err(mismatch("layer_norm", vx, vb));
        }
        let n = F::lit(cols as f64);
        let mut xhat = vec![F::zero(); rows * cols];
        let mut inv_std = vec![F::zero(); rows];
        let mut out = Tensor::zeros(vx.shape());
        for r in 0..rows {
            let row = vx.row(r);
            let mean = row.iter().copied().sum::<F>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
            let is = F::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for c in 0..cols {
                let h = (row[c] - mean) * is;
                xhat[r * cols + c] = h;
                out.data_mut()[r * cols + c] = h * vg.data()[c] + vb.data()[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            "layer_norm",
        )
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).map(|v| if v > F::zero() { v } else { F::zero() });
        self.push(out, Op::Relu(a), "relu")
    }

    /// Selects rows of a matrix; with a parameter table this is the embedding
    /// lookup.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let v = self.value(table);
        let (rows, cols) = dims(v, "gather_rows")?;
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(NnError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    bound: rows,
                });
            }
            data.extend_from_slice(v.row(i));
        }
        let out = Tensor::new(&[indices.len(), cols], data)?;
        self.push(out, Op::Gather(table, indices.to_vec()), "gather_rows")
    }

    pub fn embedding(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        self.gather_rows(table, indices)
    }

    /// Negative log-likelihood of `targets` under a row-wise softmax of
    /// `logits`, reduced to a scalar. An empty batch yields zero.
    pub fn cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        reduction: Reduction,
    ) -> Result<NodeId> {
        let v = self.value(logits);
        let (rows, cols) = dims(v, "cross_entropy")?;
        if rows != targets.len() && !(targets.is_empty() && v.is_empty()) {
            return Err(NnError::ShapeMismatch {
                op: "cross_entropy",
                left: v.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let scale = match reduction {
            Reduction::Sum => F::one(),
            Reduction::Mean if targets.is_empty() => F::zero(),
            Reduction::Mean => F::one() / F::lit(targets.len() as f64),
        };
        let mut probs = vec![F::zero(); targets.len() * cols];
        let mut total = F::zero();
        for (r, &t) in targets.iter().enumerate() {
            if t >= cols {
                return Err(NnError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: t,
                    bound: cols,
                });
            }
            let row = v.row(r);
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<F>().ln();
            total += lse - row[t];
            for c in 0..cols {
                probs[r * cols + c] = (row[c] - lse).exp();
            }
        }
        let out = Tensor::scalar(total * scale);
        self.push(
            out,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                scale,
            },
            "cross_entropy",
        )
    }

    /// `out[i, j] = q[i] · r[i*M + j]` for `q: [N, d]`, `r: [N*M, d]`.
    pub fn pair_scores(&mut self, q: NodeId, r: NodeId) -> Result<NodeId> {
        let (vq, vr) = (self.value(q), self.value(r));
        let (n, d) = dims(vq, "pair_scores")?;
        let (nr, dr) = dims(vr, "pair_scores")?;
        if n == 0 || d != dr || nr % n != 0 {
            return Err(mismatch("pair_scores", vq, vr));
        }
        let m = nr / n;
        let mut out = vec![F::zero(); n * m];
        for i in 0..n {
            let qi = vq.row(i);
            for j in 0..m {
                out[i * m + j] = dot(qi, vr.row(i * m + j));
            }
        }
        let out = Tensor::new(&[n, m], out)?;
        self.push(out, Op::PairScores(q, r), "pair_scores")
    }

    /// `out[i] = Σ_j a[i, j] · r[i*M + j]` for `a: [N, M]`, `r: [N*M, d]`.
    pub fn pair_mix(&mut self, a: NodeId, r: NodeId) -> Result<NodeId> {
        let (va, vr) = (self.value(a), self.value(r));
        let (n, m) = dims(va, "pair_mix")?;
        let (nr, d) = dims(vr, "pair_mix")?;
        if nr != n * m {
            return Err(mismatch("pair_mix", va, vr));
        }
        let mut out = vec![F::zero(); n * d];
        for i in 0..n {
            let orow = &mut out[i * d..(i + 1) * d];
            for j in 0..m {
                let w = va.data()[i * m + j];
                for (o, &x) in orow.iter_mut().zip(vr.row(i * m + j)) {
                    *o += w * x;
                }
            }
        }
        let out = Tensor::new(&[n, d], out)?;
        self.push(out, Op::PairMix(a, r), "pair_mix")
    }

    /// `out[a, g] = Σ_q t[a, g*d + q] · m[a, q]` for `t: [A, G*d]`, `m: [A, d]`.
    pub fn grouped_row_dot(&mut self, t: NodeId, m: NodeId) -> Result<NodeId> {
        let (vt, vm) = (self.value(t), self.value(m));
        let (a, gd) = dims(vt, "grouped_row_dot")?;
        let (am, d) = dims(vm, "grouped_row_dot")?;
        if a != am || d == 0 || gd % d != 0 {
            return Err(mismatch("grouped_row_dot", vt, vm));
        }
        let g = gd / d;
        let mut out = vec![F::zero(); a * g];
        for r in 0..a {
            let trow = vt.row(r);
            let mrow = vm.row(r);
            for k in 0..g {
                out[r * g + k] = dot(&trow[k * d..(k + 1) * d], mrow);
            }
        }
        let out = Tensor::new(&[a, g], out)?;
        self.push(out, Op::GroupedRowDot(t, m), "grouped_row_dot")
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let total = self.value(a).data().iter().copied().sum::<F>();
        self.push(Tensor::scalar(total), Op::Sum(a), "sum")
    }

    /// Inverted dropout. A zero rate records nothing and returns `a`.
    pub fn dropout<R: Rng>(&mut self, a: NodeId, rate: F, rng: &mut R) -> Result<NodeId> {
        if rate <= F::zero() {
            return Ok(a);
        }
        let keep = F::one() - rate;
        let scale = F::one() / keep;
        let keep_p = keep.to_f64_lossy();
        let v = self.value(a);
        let mask: Vec<F> = (0..v.len())
            .map(|_| {
                if rng.gen::<f64>() < keep_p {
                    scale
                } else {
                    F::zero()
                }
            })
            .collect();
        let mut out = v.clone();
        out.data_mut()
            .iter_mut()
            .zip(&mask)
            .for_each(|(o, &m)| *o *= m);
        self.push(out, Op::Dropout(a, mask), "dropout")
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<F>> {
        let root_val = self.value(root);
        if root_val.len() != 1 {
            return Err(NnError::NonScalarRoot(root_val.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(root_val.shape(), F::one()));
        let mut params = Vec::new();

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if let Op::Param(pid) = node.op {
                params.push((NodeId(idx), pid));
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        params.reverse();
        Ok(Gradients {
            node_grads: grads,
            params,
        })
    }

    /// Backward sweep that adds parameter gradients straight into `store`.
    pub fn backward_into(&self, root: NodeId, store: &mut ParamStore<F>) -> Result<()> {
        self.backward(root)?.accumulate_into(store);
        Ok(())
    }

    fn backprop_node(
        &self,
        node: &Node<F>,
        g: &Tensor<F>,
        grads: &mut [Option<Tensor<F>>],
    ) -> Result<()> {
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = dims(va, "matmul")?;
                let (_, n) = dims(vb, "matmul")?;
                let mut da = vec![F::zero(); m * k];
                matmul_bt_into(gd, vb.data(), &mut da, m, n, k);
                let mut db = vec![F::zero(); k * n];
                matmul_at_into(va.data(), gd, &mut db, m, k, n);
                accumulate(grads, *a, va.shape(), da);
                accumulate(grads, *b, vb.shape(), db);
            }
            Op::Transpose(a) => {
                let va = self.value(*a);
                let dt = g.transpose2()?;
                accumulate(grads, *a, va.shape(), dt.into_data());
            }
            Op::Add(a, b, mode) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, va.shape(), gd.to_vec());
                let (_, n) = dims(va, "add")?;
                let db = match mode {
                    Broadcast::Same => gd.to_vec(),
                    Broadcast::Scalar => vec![gd.iter().copied().sum()],
                    Broadcast::Row => {
                        let mut acc = vec![F::zero(); n];
                        for row in gd.chunks(n) {
                            acc.iter_mut().zip(row).for_each(|(s, &x)| *s += x);
                        }
                        acc
                    }
                    Broadcast::Col => gd.chunks(n).map(|row| row.iter().copied().sum()).collect(),
                };
                accumulate(grads, *b, vb.shape(), db);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let da = gd.iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
                let db = gd.iter().zip(va.data()).map(|(&x, &y)| x * y).collect();
                accumulate(grads, *a, va.shape(), da);
                accumulate(grads, *b, vb.shape(), db);
            }
            Op::Scale(a, s) => {
                let da = gd.iter().map(|&x| x * *s).collect();
                accumulate(grads, *a, self.value(*a).shape(), da);
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = dims(g, "concat_cols")?;
                let mut offset = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let (_, c) = dims(vp, "concat_cols")?;
                    let mut dp = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        dp.extend_from_slice(&gd[r * total + offset..r * total + offset + c]);
                    }
                    accumulate(grads, p, vp.shape(), dp);
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let len = vp.len();
                    accumulate(grads, p, vp.shape(), gd[offset..offset + len].to_vec());
                    offset += len;
                }
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let (rows, cols) = dims(va, "slice_cols")?;
                let (_, w) = dims(g, "slice_cols")?;
                let mut da = vec![F::zero(); rows * cols];
                for r in 0..rows {
                    da[r * cols + start..r * cols + start + w].copy_from_slice(&gd[r * w..(r + 1) * w]);
                }
                accumulate(grads, *a, va.shape(), da);
            }
            Op::SliceRows(a, start) => {
                let va = self.value(*a);
                let (_, cols) = dims(va, "slice_rows")?;
                let mut da = vec![F::zero(); va.len()];
                da[start * cols..start * cols + gd.len()].copy_from_slice(gd);
                accumulate(grads, *a, va.shape(), da);
            }
            Op::Reshape(a) => {
                accumulate(grads, *a, self.value(*a).shape(), gd.to_vec());
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let (_, cols) = dims(y, "softmax")?;
                let mut da = vec![F::zero(); y.len()];
                for ((yr, gr), dr) in y
                    .data()
                    .chunks(cols)
                    .zip(gd.chunks(cols))
                    .zip(da.chunks_mut(cols))
                {
                    let inner = dot(yr, gr);
                    for c in 0..cols {
                        dr[c] = yr[c] * (gr[c] - inner);
                    }
                }
                accumulate(grads, *a, y.shape(), da);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let vx = self.value(*x);
                let vg = self.value(*gain);
                let (rows, cols) = dims(vx, "layer_norm")?;
                let n = F::lit(cols as f64);
                let mut dx = vec![F::zero(); rows * cols];
                let mut dgain = vec![F::zero(); cols];
                let mut dbias = vec![F::zero(); cols];
                let mut dxhat = vec![F::zero(); cols];
                for r in 0..rows {
                    let gr = &gd[r * cols..(r + 1) * cols];
                    let hr = &xhat[r * cols..(r + 1) * cols];
                    let mut sum_d = F::zero();
                    let mut sum_dh = F::zero();
                    for c in 0..cols {
                        dgain[c] += gr[c] * hr[c];
                        dbias[c] += gr[c];
                        dxhat[c] = gr[c] * vg.data()[c];
                        sum_d += dxhat[c];
                        sum_dh += dxhat[c] * hr[c];
                    }
                    let k = inv_std[r] / n;
                    for c in 0..cols {
                        dx[r * cols + c] = k * (n * dxhat[c] - sum_d - hr[c] * sum_dh);
                    }
                }
                accumulate(grads, *x, vx.shape(), dx);
                accumulate(grads, *gain, vg.shape(), dgain);
                accumulate(grads, *bias, self.value(*bias).shape(), dbias);
            }
            Op::Relu(a) => {
                let y = node.value.data();
                let da = gd
                    .iter()
                    .zip(y)
                    .map(|(&d, &v)| if v > F::zero() { d } else { F::zero() })
                    .collect();
                accumulate(grads, *a, node.value.shape(), da);
            }
            Op::Gather(table, indices) => {
                let vt = self.value(*table);
                let (_, cols) = dims(vt, "gather_rows")?;
                let mut dt = vec![F::zero(); vt.len()];
                for (k, &i) in indices.iter().enumerate() {
                    for c in 0..cols {
                        dt[i * cols + c] += gd[k * cols + c];
                    }
                }
                accumulate(grads, *table, vt.shape(), dt);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                scale,
            } => {
                let vl = self.value(*logits);
                let cols = vl.cols();
                let up = gd[0] * *scale;
                let mut dl = vec![F::zero(); vl.len()];
                for (r, &t) in targets.iter().enumerate() {
                    for c in 0..cols {
                        dl[r * cols + c] = probs[r * cols + c] * up;
                    }
                    dl[r * cols + t] -= up;
                }
                accumulate(grads, *logits, vl.shape(), dl);
            }
            Op::PairScores(q, r) => {
                let (vq, vr) = (self.value(*q), self.value(*r));
                let (n, d) = dims(vq, "pair_scores")?;
                let m = vr.rows() / n;
                let mut dq = vec![F::zero(); n * d];
                let mut dr = vec![F::zero(); vr.len()];
                for i in 0..n {
                    let qi = vq.row(i);
                    for j in 0..m {
                        let w = gd[i * m + j];
                        let rrow = vr.row(i * m + j);
                        let base = (i * m + j) * d;
                        for c in 0..d {
                            dq[i * d + c] += w * rrow[c];
                            dr[base + c] += w * qi[c];
                        }
                    }
                }
                accumulate(grads, *q, vq.shape(), dq);
                accumulate(grads, *r, vr.shape(), dr);
            }
            Op::PairMix(a, r) => {
                let (va, vr) = (self.value(*a), self.value(*r));
                let (n, m) = dims(va, "pair_mix")?;
                let d = vr.cols();
                let mut da = vec![F::zero(); n * m];
                let mut dr = vec![F::zero(); vr.len()];
                for i in 0..n {
                    let grow = &gd[i * d..(i + 1) * d];
                    for j in 0..m {
                        let w = va.data()[i * m + j];
                        da[i * m + j] = dot(grow, vr.row(i * m + j));
                        let base = (i * m + j) * d;
                        for c in 0..d {
                            dr[base + c] += w * grow[c];
                        }
                    }
                }
                accumulate(grads, *a, va.shape(), da);
                accumulate(grads, *r, vr.shape(), dr);
            }
            Op::GroupedRowDot(t, m) => {
                let (vt, vm) = (self.value(*t), self.value(*m));
                let (a, gdim) = dims(vt, "grouped_row_dot")?;
                let d = vm.cols();
                let groups = gdim / d;
                let mut dt = vec![F::zero(); vt.len()];
                let mut dm = vec![F::zero(); vm.len()];
                for r in 0..a {
                    let trow = vt.row(r);
                    let mrow = vm.row(r);
                    for k in 0..groups {
                        let w = gd[r * groups + k];
                        for q in 0..d {
                            dt[r * gdim + k * d + q] = w * mrow[q];
                            dm[r * d + q] += w * trow[k * d + q];
                        }
                    }
                }
                accumulate(grads, *t, vt.shape(), dt);
                accumulate(grads, *m, vm.shape(), dm);
            }
            Op::Sum(a) => {
                let va = self.value(*a);
                accumulate(grads, *a, va.shape(), vec![gd[0]; va.len()]);
            }
            Op::Dropout(a, mask) => {
                let da = gd.iter().zip(mask).map(|(&x, &m)| x * m).collect();
                accumulate(grads, *a, node.value.shape(), da);
            }
        }
        Ok(())
    }
}

fn accumulate<F: Real>(grads: &mut [Option<Tensor<F>>], id: NodeId, shape: &[usize], data: Vec<F>) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(data) {
                *e += d;
            }
        }
        slot @ None => {
            // Shapes are fixed by the forward op.
            *slot = Some(Tensor::new(shape, data).expect("gradient shape"));
        }
    }
}

#[inline]
fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn softmax_into<F: Real>(src: &[F], dst: &mut [F]) {
    let max = src.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (s - max).exp();
        total += *d;
    }
    for d in dst.iter_mut() {
        *d /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> Tensor<f64> {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn softmax_of_constant_row_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![3.0; 4]])).unwrap();
        let y = tape.softmax_rows(x).unwrap();
        for &p in tape.value(y).data() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape
            .constant(mat(&[vec![1.0, -2.0, 30.0], vec![-700.0, 0.0, 5.5]]))
            .unwrap();
        let y = tape.softmax_rows(x).unwrap();
        for row in tape.value(y).data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn causal_softmax_masks_future_columns() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![1.0, 2.0], vec![1.0, 2.0]])).unwrap();
        let y = tape.causal_softmax_rows(x).unwrap();
        assert_eq!(tape.value(y).row(0), &[1.0, 0.0]);
        assert!((tape.value(y).row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_matches_hand_computation() {
        // logits (2, 0, 0), target 0: loss = ln(e^2 + 2) - 2.
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![2.0, 0.0, 0.0]])).unwrap();
        let l = tape.cross_entropy(x, &[0], Reduction::Mean).unwrap();
        let expected = (2f64.exp() + 2.0).ln() - 2.0;
        assert!((tape.scalar(l) - expected).abs() < 1e-15);
        assert!((expected - 0.2395447).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_gradient_is_probs_minus_onehot() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![0.5, -1.0, 2.0]])).unwrap();
        let l = tape.cross_entropy(x, &[1], Reduction::Sum).unwrap();
        let grads = tape.backward(l).unwrap();
        let g = grads.wrt(x).unwrap();
        let z: f64 = [0.5f64, -1.0, 2.0].iter().map(|v| v.exp()).sum();
        let expected = [0.5f64.exp() / z, (-1f64).exp() / z - 1.0, 2f64.exp() / z];
        for (a, b) in g.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        let s = tape.sum(x).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn repeated_use_sums_gradients() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![1.5, -2.0]])).unwrap();
        let y = tape.mul(x, x).unwrap();
        let s = tape.sum(y).unwrap();
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[3.0, -4.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![1.0, 2.0]])).unwrap();
        assert!(matches!(tape.backward(x), Err(NnError::NonScalarRoot(_))));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::<f64>::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::<f64>::zeros(&[2, 2])).unwrap();
        let err = tape.add(a, b).unwrap_err();
        assert_eq!(
            err,
            NnError::ShapeMismatch {
                op: "add",
                left: vec![2, 3],
                right: vec![2, 2]
            }
        );
        assert!(err.to_string().contains("add"));
    }

    #[test]
    fn non_finite_values_are_detected() {
        let mut tape = Tape::new();
        let err = tape
            .constant(Tensor::new(&[1], vec![f64::NAN]).unwrap())
            .unwrap_err();
        assert!(matches!(err, NnError::NonFinite { .. }));
        let a = tape.constant(Tensor::scalar(f64::MAX)).unwrap();
        assert!(matches!(tape.scale(a, 10.0), Err(NnError::NonFinite { op: "scale" })));
    }

    #[test]
    fn broadcast_add_row_col_scalar() {
        let mut tape = Tape::new();
        let a = tape.constant(mat(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        let row = tape.constant(Tensor::new(&[2], vec![10.0, 20.0]).unwrap()).unwrap();
        let col = tape.constant(mat(&[vec![100.0], vec![200.0]])).unwrap();
        let s = tape.constant(Tensor::scalar(0.5)).unwrap();
        let r = tape.add(a, row).unwrap();
        assert_eq!(tape.value(r).data(), &[11.0, 22.0, 13.0, 24.0]);
        let c = tape.add(a, col).unwrap();
        assert_eq!(tape.value(c).data(), &[101.0, 102.0, 203.0, 204.0]);
        let k = tape.add(a, s).unwrap();
        assert_eq!(tape.value(k).data(), &[1.5, 2.5, 3.5, 4.5]);
    }

    #[test]
    fn cross_entropy_rejects_out_of_vocabulary_target() {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[vec![0.0, 0.0]])).unwrap();
        assert!(matches!(
            tape.cross_entropy(x, &[2], Reduction::Mean),
            Err(NnError::IndexOutOfRange { .. })
        ));
    }
}
