//! Reverse-mode tape over [`Tensor`] values.
#![allow(clippy::needless_range_loop)]
//!
//! Forward evaluation appends nodes; each node stores its value and a
//! closure that routes the output gradient to its parents. Because the tape
//! is append-only, parents always precede children, so the backward pass is
//! a single reverse sweep without an explicit topological sort.

use std::collections::BTreeMap;

use super::tensor::{ParameterMap, Tensor};
use super::{softmax_into, LOG_CLAMP_EPS};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

type Sink<'a> = dyn FnMut(NodeId, Tensor) + 'a;
type Backward = Box<dyn Fn(&Tensor, &mut Sink)>;

struct Node {
    value: Tensor,
    backward: Option<Backward>,
}

/// A single forward evaluation: build ops, call [`Graph::backward`] once on a
/// scalar node, read gradients.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, NodeId>,
}

/// Node handles for bound parameters, keyed by path.
pub struct BoundParams {
    ids: BTreeMap<String, NodeId>,
}

impl BoundParams {
    pub fn get(&self, path: &str) -> NodeId {
        *self
            .ids
            .get(path)
            .unwrap_or_else(|| panic!("parameter {path} not bound"))
    }

    /// Rebinds a path to a different node (used by gradient checks to swap
    /// one parameter for an explicit leaf).
    pub fn set(&mut self, path: impl Into<String>, id: NodeId) {
        self.ids.insert(path.into(), id);
    }
}

/// Gradients of one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `id`; `None` when no path
    /// connects them.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, backward: Option<Backward>) -> NodeId {
        self.nodes.push(Node { value, backward });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts an input value with no parents.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, None)
    }

    /// Inserts a leaf registered under a parameter path.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> NodeId {
        let id = self.leaf(value);
        let name = name.into();
        let prior = self.params.insert(name.clone(), id);
        assert!(prior.is_none(), "parameter {name} bound twice");
        id
    }

    /// Binds every entry of a parameter map as a leaf.
    pub fn bind(&mut self, params: &ParameterMap) -> BoundParams {
        let mut ids = BTreeMap::new();
        for (path, tensor) in params.iter() {
            ids.insert(path.clone(), self.param(path.clone(), tensor.clone()));
        }
        BoundParams { ids }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    /// Elementwise sum of two same-shape nodes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).add(self.value(b));
        self.push(
            value,
            Some(Box::new(move |g, sink| {
                sink(a, g.clone());
                sink(b, g.clone());
            })),
        )
    }

    /// Elementwise sum of any number of same-shape nodes.
    pub fn add_n(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "add_n of nothing");
        let shape = self.value(ids[0]).shape().to_vec();
        let mut data = vec![0.0; self.value(ids[0]).len()];
        for &id in ids {
            let v = self.value(id);
            assert_eq!(v.shape(), &shape[..], "shape mismatch in add_n");
            for (acc, x) in data.iter_mut().zip(v.data()) {
                *acc += x;
            }
        }
        let ids = ids.to_vec();
        self.push(
            Tensor::from_raw(shape, data),
            Some(Box::new(move |g, sink| {
                for &id in &ids {
                    sink(id, g.clone());
                }
            })),
        )
    }

    /// Elementwise (Hadamard) product of two same-shape nodes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a).clone();
        let vb = self.value(b).clone();
        assert_eq!(va.shape(), vb.shape(), "shape mismatch in mul");
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        self.push(
            Tensor::from_raw(va.shape().to_vec(), data),
            Some(Box::new(move |g, sink| {
                let ga = g
                    .data()
                    .iter()
                    .zip(vb.data())
                    .map(|(gi, y)| gi * y)
                    .collect();
                let gb = g
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(gi, x)| gi * x)
                    .collect();
                sink(a, Tensor::from_raw(g.shape().to_vec(), ga));
                sink(b, Tensor::from_raw(g.shape().to_vec(), gb));
            })),
        )
    }

    /// Elementwise `k * x + c`.
    pub fn scale_shift(&mut self, x: NodeId, k: f64, c: f64) -> NodeId {
        let v = self.value(x);
        let data = v.data().iter().map(|a| k * a + c).collect();
        self.push(
            Tensor::from_raw(v.shape().to_vec(), data),
            Some(Box::new(move |g, sink| {
                let gx = g.data().iter().map(|gi| k * gi).collect();
                sink(x, Tensor::from_raw(g.shape().to_vec(), gx));
            })),
        )
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let out: Vec<f64> = v.data().iter().map(|a| a.tanh()).collect();
        let shape = v.shape().to_vec();
        let captured = out.clone();
        self.push(
            Tensor::from_raw(shape, out),
            Some(Box::new(move |g, sink| {
                let gx = g
                    .data()
                    .iter()
                    .zip(&captured)
                    .map(|(gi, y)| gi * (1.0 - y * y))
                    .collect();
                sink(x, Tensor::from_raw(g.shape().to_vec(), gx));
            })),
        )
    }

    /// `ln` of the input clamped into `[LOG_CLAMP_EPS, 1 - LOG_CLAMP_EPS]`.
    /// The gradient is zero where the clamp is active.
    pub fn log_clamped(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        let lo = LOG_CLAMP_EPS;
        let hi = 1.0 - LOG_CLAMP_EPS;
        let out = v.data().iter().map(|a| a.clamp(lo, hi).ln()).collect();
        self.push(
            Tensor::from_raw(v.shape().to_vec(), out),
            Some(Box::new(move |g, sink| {
                let gx = g
                    .data()
                    .iter()
                    .zip(v.data())
                    .map(|(gi, a)| if *a >= lo && *a <= hi { gi / a } else { 0.0 })
                    .collect();
                sink(x, Tensor::from_raw(g.shape().to_vec(), gx));
            })),
        )
    }

    /// Numerically stable softmax over a rank-1 node.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.shape().len(), 1, "softmax expects a vector");
        let mut out = vec![0.0; v.len()];
        softmax_into(v.data(), &mut out);
        let y = out.clone();
        self.push(
            Tensor::from_raw(vec![v.len()], out),
            Some(Box::new(move |g, sink| {
                sink(x, Tensor::from_raw(vec![y.len()], softmax_grad(g.data(), &y)));
            })),
        )
    }

    /// Row-wise softmax over a rank-2 node.
    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let (r, c) = (v.rows(), v.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            softmax_into(v.row(i), &mut out[i * c..(i + 1) * c]);
        }
        let y = out.clone();
        self.push(
            Tensor::from_raw(vec![r, c], out),
            Some(Box::new(move |g, sink| {
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let row = softmax_grad(&g.data()[i * c..(i + 1) * c], &y[i * c..(i + 1) * c]);
                    gx[i * c..(i + 1) * c].copy_from_slice(&row);
                }
                sink(x, Tensor::from_raw(vec![r, c], gx));
            })),
        )
    }

    /// `W x + b` for a matrix `w: [m, n]`, vector `x: [n]`, bias `b: [m]`.
    pub fn affine_vec(&mut self, w: NodeId, x: NodeId, b: NodeId) -> NodeId {
        let vw = self.value(w).clone();
        let vx = self.value(x).clone();
        let vb = self.value(b).clone();
        let (m, n) = (vw.rows(), vw.cols());
        assert_eq!(vx.shape(), [n], "affine_vec input shape");
        assert_eq!(vb.shape(), [m], "affine_vec bias shape");
        let mut out = vb.data().to_vec();
        for i in 0..m {
            let mut acc = 0.0;
            let row = vw.row(i);
            for j in 0..n {
                acc += row[j] * vx.data()[j];
            }
            out[i] += acc;
        }
        self.push(
            Tensor::from_raw(vec![m], out),
            Some(Box::new(move |g, sink| {
                let gd = g.data();
                let mut gw = vec![0.0; m * n];
                let mut gx = vec![0.0; n];
                for i in 0..m {
                    let row = vw.row(i);
                    for j in 0..n {
                        gw[i * n + j] = gd[i] * vx.data()[j];
                        gx[j] += gd[i] * row[j];
                    }
                }
                sink(w, Tensor::from_raw(vec![m, n], gw));
                sink(x, Tensor::from_raw(vec![n], gx));
                sink(b, Tensor::from_raw(vec![m], gd.to_vec()));
            })),
        )
    }

    /// Applies `W x_t + b` to every row of `x: [r, n]`, yielding `[r, m]`.
    pub fn affine_rows(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let vx = self.value(x).clone();
        let vw = self.value(w).clone();
        let vb = self.value(b).clone();
        let (r, n) = (vx.rows(), vx.cols());
        let (m, wn) = (vw.rows(), vw.cols());
        assert_eq!(n, wn, "affine_rows width mismatch");
        assert_eq!(vb.shape(), [m], "affine_rows bias shape");
        let mut out = vec![0.0; r * m];
        for t in 0..r {
            let xt = vx.row(t);
            for i in 0..m {
                let row = vw.row(i);
                let mut acc = vb.data()[i];
                for j in 0..n {
                    acc += xt[j] * row[j];
                }
                out[t * m + i] = acc;
            }
        }
        self.push(
            Tensor::from_raw(vec![r, m], out),
            Some(Box::new(move |g, sink| {
                let gd = g.data();
                let mut gx = vec![0.0; r * n];
                let mut gw = vec![0.0; m * n];
                let mut gb = vec![0.0; m];
                for t in 0..r {
                    let xt = vx.row(t);
                    for i in 0..m {
                        let go = gd[t * m + i];
                        gb[i] += go;
                        let row = vw.row(i);
                        for j in 0..n {
                            gx[t * n + j] += go * row[j];
                            gw[i * n + j] += go * xt[j];
                        }
                    }
                }
                sink(x, Tensor::from_raw(vec![r, n], gx));
                sink(w, Tensor::from_raw(vec![m, n], gw));
                sink(b, Tensor::from_raw(vec![m], gb));
            })),
        )
    }

    /// Matrix product `a b` for `a: [r, k]`, `b: [k, c]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a).clone();
        let vb = self.value(b).clone();
        let (r, k) = (va.rows(), va.cols());
        let (kb, c) = (vb.rows(), vb.cols());
        assert_eq!(k, kb, "matmul inner dimension mismatch");
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let ar = va.row(i);
            for m in 0..k {
                let av = ar[m];
                if av == 0.0 {
                    continue;
                }
                let br = vb.row(m);
                for j in 0..c {
                    out[i * c + j] += av * br[j];
                }
            }
        }
        self.push(
            Tensor::from_raw(vec![r, c], out),
            Some(Box::new(move |g, sink| {
                let gd = g.data();
                // da = g b^T, db = a^T g
                let mut ga = vec![0.0; r * k];
                let mut gb = vec![0.0; k * c];
                for i in 0..r {
                    for m in 0..k {
                        let mut acc = 0.0;
                        let br = vb.row(m);
                        for j in 0..c {
                            acc += gd[i * c + j] * br[j];
                        }
                        ga[i * k + m] = acc;
                    }
                }
                for m in 0..k {
                    for i in 0..r {
                        let av = va.row(i)[m];
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..c {
                            gb[m * c + j] += av * gd[i * c + j];
                        }
                    }
                }
                sink(a, Tensor::from_raw(vec![r, k], ga));
                sink(b, Tensor::from_raw(vec![k, c], gb));
            })),
        )
    }

    /// Matrix product against a transposed right factor: `a b^T` for
    /// `a: [r, k]`, `b: [c, k]`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.value(a).clone();
        let vb = self.value(b).clone();
        let (r, k) = (va.rows(), va.cols());
        let (c, kb) = (vb.rows(), vb.cols());
        assert_eq!(k, kb, "matmul_nt inner dimension mismatch");
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let ar = va.row(i);
            for j in 0..c {
                let br = vb.row(j);
                let mut acc = 0.0;
                for m in 0..k {
                    acc += ar[m] * br[m];
                }
                out[i * c + j] = acc;
            }
        }
        self.push(
            Tensor::from_raw(vec![r, c], out),
            Some(Box::new(move |g, sink| {
                let gd = g.data();
                // da = g b, db = g^T a
                let mut ga = vec![0.0; r * k];
                let mut gb = vec![0.0; c * k];
                for i in 0..r {
                    for j in 0..c {
                        let go = gd[i * c + j];
                        if go == 0.0 {
                            continue;
                        }
                        let br = vb.row(j);
                        let ar = va.row(i);
                        for m in 0..k {
                            ga[i * k + m] += go * br[m];
                            gb[j * k + m] += go * ar[m];
                        }
                    }
                }
                sink(a, Tensor::from_raw(vec![r, k], ga));
                sink(b, Tensor::from_raw(vec![c, k], gb));
            })),
        )
    }

    /// Weighted sum of rows: `sum_i w_i x_i` for `x: [n, d]`, `w: [n]`.
    pub fn weighted_sum(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let vx = self.value(x).clone();
        let vw = self.value(w).clone();
        let (n, d) = (vx.rows(), vx.cols());
        assert_eq!(vw.shape(), [n], "weighted_sum weight shape");
        let mut out = vec![0.0; d];
        for i in 0..n {
            let wi = vw.data()[i];
            for (o, v) in out.iter_mut().zip(vx.row(i)) {
                *o += wi * v;
            }
        }
        self.push(
            Tensor::from_raw(vec![d], out),
            Some(Box::new(move |g, sink| {
                let gd = g.data();
                let mut gx = vec![0.0; n * d];
                let mut gw = vec![0.0; n];
                for i in 0..n {
                    let wi = vw.data()[i];
                    let row = vx.row(i);
                    let mut acc = 0.0;
                    for j in 0..d {
                        gx[i * d + j] = wi * gd[j];
                        acc += row[j] * gd[j];
                    }
                    gw[i] = acc;
                }
                sink(x, Tensor::from_raw(vec![n, d], gx));
                sink(w, Tensor::from_raw(vec![n], gw));
            })),
        )
    }

    /// Stacks rank-1 nodes of equal length into a matrix, one per row.
    pub fn stack_rows(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "stack_rows of nothing");
        let d = self.value(ids[0]).len();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let v = self.value(id);
            assert_eq!(v.shape(), [d], "stack_rows shape mismatch");
            data.extend_from_slice(v.data());
        }
        let n = ids.len();
        let ids = ids.to_vec();
        self.push(
            Tensor::from_raw(vec![n, d], data),
            Some(Box::new(move |g, sink| {
                for (i, &id) in ids.iter().enumerate() {
                    sink(id, Tensor::from_raw(vec![d], g.row(i).to_vec()));
                }
            })),
        )
    }

    /// Stacks scalar nodes into a vector.
    pub fn stack_scalars(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "stack_scalars of nothing");
        let data: Vec<f64> = ids.iter().map(|&id| self.value(id).as_scalar()).collect();
        let ids = ids.to_vec();
        self.push(
            Tensor::from_raw(vec![ids.len()], data),
            Some(Box::new(move |g, sink| {
                for (i, &id) in ids.iter().enumerate() {
                    sink(id, Tensor::scalar(g.data()[i]));
                }
            })),
        )
    }

    /// Rows `start..end` of a rank-2 node.
    pub fn slice_rows(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(x);
        let (n, d) = (v.rows(), v.cols());
        assert!(start <= end && end <= n, "slice_rows out of range");
        let data = v.data()[start * d..end * d].to_vec();
        self.push(
            Tensor::from_raw(vec![end - start, d], data),
            Some(Box::new(move |g, sink| {
                let mut gx = vec![0.0; n * d];
                gx[start * d..end * d].copy_from_slice(g.data());
                sink(x, Tensor::from_raw(vec![n, d], gx));
            })),
        )
    }

    /// Elements `start..end` of a rank-1 node.
    pub fn slice_vec(&mut self, x: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.shape().len(), 1, "slice_vec expects a vector");
        let n = v.len();
        assert!(start <= end && end <= n, "slice_vec out of range");
        let data = v.data()[start..end].to_vec();
        self.push(
            Tensor::from_raw(vec![end - start], data),
            Some(Box::new(move |g, sink| {
                let mut gx = vec![0.0; n];
                gx[start..end].copy_from_slice(g.data());
                sink(x, Tensor::from_raw(vec![n], gx));
            })),
        )
    }

    /// Row lookup `x[idx_i]` for `x: [v, d]`; repeated indices accumulate
    /// gradient.
    pub fn gather_rows(&mut self, x: NodeId, indices: &[usize]) -> NodeId {
        let v = self.value(x);
        let (rows, d) = (v.rows(), v.cols());
        let mut data = Vec::with_capacity(indices.len() * d);
        for &idx in indices {
            assert!(idx < rows, "gather_rows index {idx} out of {rows}");
            data.extend_from_slice(v.row(idx));
        }
        let n = indices.len();
        let indices = indices.to_vec();
        self.push(
            Tensor::from_raw(vec![n, d], data),
            Some(Box::new(move |g, sink| {
                let mut gx = vec![0.0; rows * d];
                for (i, &idx) in indices.iter().enumerate() {
                    for (acc, gv) in gx[idx * d..(idx + 1) * d].iter_mut().zip(g.row(i)) {
                        *acc += gv;
                    }
                }
                sink(x, Tensor::from_raw(vec![rows, d], gx));
            })),
        )
    }

    /// Sum of every element, as a scalar.
    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let total: f64 = v.data().iter().sum();
        let shape = v.shape().to_vec();
        let n = v.len();
        self.push(
            Tensor::scalar(total),
            Some(Box::new(move |g, sink| {
                let gv = g.as_scalar();
                sink(x, Tensor::from_raw(shape.clone(), vec![gv; n]));
            })),
        )
    }

    /// Mean of every element, as a scalar.
    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).len();
        assert!(n > 0, "mean_all of empty tensor");
        let s = self.sum_all(x);
        self.scale_shift(s, 1.0 / n as f64, 0.0)
    }

    /// Element `i` of a rank-1 node, as a scalar.
    pub fn pick(&mut self, x: NodeId, i: usize) -> NodeId {
        let v = self.value(x);
        assert_eq!(v.shape().len(), 1, "pick expects a vector");
        let n = v.len();
        assert!(i < n, "pick index out of range");
        let value = v.data()[i];
        self.push(
            Tensor::scalar(value),
            Some(Box::new(move |g, sink| {
                let mut gx = vec![0.0; n];
                gx[i] = g.as_scalar();
                sink(x, Tensor::from_raw(vec![n], gx));
            })),
        )
    }

    /// Same data, new shape; element count must not change.
    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self.value(x);
        assert_eq!(
            shape.iter().product::<usize>(),
            v.len(),
            "reshape element count mismatch"
        );
        let old_shape = v.shape().to_vec();
        let data = v.data().to_vec();
        self.push(
            Tensor::from_raw(shape, data),
            Some(Box::new(move |g, sink| {
                sink(x, Tensor::from_raw(old_shape.clone(), g.data().to_vec()));
            })),
        )
    }

    /// Elementwise clamp into `[LOG_CLAMP_EPS, 1 - LOG_CLAMP_EPS]` with
    /// pass-through gradient inside the interval.
    pub fn clamp_unit(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        let lo = LOG_CLAMP_EPS;
        let hi = 1.0 - LOG_CLAMP_EPS;
        let out = v.data().iter().map(|a| a.clamp(lo, hi)).collect();
        self.push(
            Tensor::from_raw(v.shape().to_vec(), out),
            Some(Box::new(move |g, sink| {
                let gx = g
                    .data()
                    .iter()
                    .zip(v.data())
                    .map(|(gi, a)| if *a >= lo && *a <= hi { *gi } else { 0.0 })
                    .collect();
                sink(x, Tensor::from_raw(g.shape().to_vec(), gx));
            })),
        )
    }

    /// Runs the reverse sweep from a scalar root.
    pub fn backward(&self, root: NodeId) -> Gradients {
        assert!(
            self.value(root).is_scalar(),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let g = match &grads[i] {
                Some(g) => g.clone(),
                None => continue,
            };
            if let Some(backward) = &self.nodes[i].backward {
                backward(&g, &mut |pid: NodeId, contrib: Tensor| {
                    debug_assert!(pid.0 < i, "gradient flowing forward on the tape");
                    match &mut grads[pid.0] {
                        Some(existing) => *existing = existing.add(&contrib),
                        slot @ None => *slot = Some(contrib),
                    }
                });
            }
        }
        Gradients { grads }
    }
}

fn softmax_grad(g: &[f64], y: &[f64]) -> Vec<f64> {
    let s: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
    g.iter().zip(y).map(|(gi, yi)| yi * (gi - s)).collect()
}
