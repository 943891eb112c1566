use super::ops::{self, Geometry, Padding};
use super::{gemm, Float, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

enum Op<T> {
    Leaf,
    Conv { x: NodeId, w: NodeId, b: Option<NodeId>, geom: Geometry, cout: usize, cols: Vec<T> },
    Depthwise { x: NodeId, w: NodeId, geom: Geometry },
    Dense { x: NodeId, w: NodeId, b: Option<NodeId> },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Sub { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Reshape { x: NodeId },
    MaxPool { x: NodeId, argmax: Vec<usize> },
    Bce { p: NodeId, labels: Vec<T>, eps: T },
    SumSquares { xs: Vec<NodeId>, scale: T },
    AddScalars { xs: Vec<NodeId> },
    WeightedSum { x: NodeId, coeffs: Vec<T> },
}

struct Node<T> {
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of tensor operations.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    values: Vec<Tensor<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Float> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::InvalidShape(format!("{op}: {a:?} vs {b:?}")));
    }
    Ok(())
}

impl<T: Float> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), values: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op, requires_grad });
        self.values.push(value);
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, true)
    }

    /// Constant leaf.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.values[id.0].shape()
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads[id.0].as_ref()
    }

    pub fn take_grad(&mut self, id: NodeId) -> Option<Tensor<T>> {
        self.grads[id.0].take()
    }

    /// Cross-correlation with `w: [Cout, Cin, k, k]` and optional `b: [Cout]`.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>, stride: usize, padding: Padding) -> Result<NodeId> {
        let ws = self.shape(w).to_vec();
        let [cout, cin, k, k2] = ws[..] else {
            return Err(Error::InvalidShape(format!("conv2d kernel must be [Cout,Cin,k,k], got {ws:?}")));
        };
        if k != k2 {
            return Err(Error::InvalidShape(format!("conv2d kernel must be square, got {ws:?}")));
        }
        let geom = Geometry::new(self.shape(x), k, stride, padding)?;
        if geom.c != cin {
            return Err(Error::InvalidShape(format!("conv2d: input has {} channels, kernel expects {cin}", geom.c)));
        }
        if let Some(b) = b {
            same_shape("conv2d bias", self.shape(b), &[cout])?;
        }
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        let keep = self.nodes[w.0].requires_grad;
        let (out, cols) = ops::conv_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            cout,
            keep,
        );
        let value = Tensor::new(vec![geom.n, cout, geom.oh, geom.ow], out)?;
        Ok(self.push(value, Op::Conv { x, w, b, geom, cout, cols }, rg))
    }

    /// Per-channel spatial convolution with `w: [C, 1, k, k]`.
    pub fn depthwise_conv2d(&mut self, x: NodeId, w: NodeId, stride: usize, padding: Padding) -> Result<NodeId> {
        let ws = self.shape(w).to_vec();
        let [c, 1, k, k2] = ws[..] else {
            return Err(Error::InvalidShape(format!("depthwise kernel must be [C,1,k,k], got {ws:?}")));
        };
        if k != k2 {
            return Err(Error::InvalidShape(format!("depthwise kernel must be square, got {ws:?}")));
        }
        let geom = Geometry::new(self.shape(x), k, stride, padding)?;
        if geom.c != c {
            return Err(Error::InvalidShape(format!("depthwise: input has {} channels, kernel {c}", geom.c)));
        }
        let out = ops::depthwise_forward(&geom, self.value(x).data(), self.value(w).data());
        let value = Tensor::new(vec![geom.n, c, geom.oh, geom.ow], out)?;
        let rg = self.rg(&[x, w]);
        Ok(self.push(value, Op::Depthwise { x, w, geom }, rg))
    }

    /// Depthwise `k×k` then pointwise `1×1` (`w_point: [Cout, Cin, 1, 1]`).
    pub fn separable_conv2d(
        &mut self,
        x: NodeId,
        w_depth: NodeId,
        w_point: NodeId,
        b: Option<NodeId>,
        stride: usize,
        padding: Padding,
    ) -> Result<NodeId> {
        let d = self.depthwise_conv2d(x, w_depth, stride, padding)?;
        self.conv2d(d, w_point, b, 1, Padding::Valid)
    }

    /// `x: [N, F]`, `w: [F, M]`, `b: [M]`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        let ([n, f], [f2, m]) = (&xs[..], &ws[..]) else {
            return Err(Error::InvalidShape(format!("dense: x {xs:?}, w {ws:?}")));
        };
        if f != f2 {
            return Err(Error::InvalidShape(format!("dense: x {xs:?}, w {ws:?}")));
        }
        let (n, f, m) = (*n, *f, *m);
        let mut out = vec![T::zero(); n * m];
        let mut deps = vec![x, w];
        if let Some(b) = b {
            same_shape("dense bias", self.shape(b), &[m])?;
            for row in out.chunks_mut(m) {
                row.copy_from_slice(self.value(b).data());
            }
            deps.push(b);
        }
        gemm(n, f, m, self.value(x).data(), false, self.value(w).data(), false, T::one(), &mut out);
        let rg = self.rg(&deps);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::Dense { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let data = v.data().iter().map(|&a| if a > T::zero() { a } else { T::zero() }).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(value, Op::Relu { x }, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let one = T::one();
        let data = v
            .data()
            .iter()
            .map(|&a| {
                if a >= T::zero() {
                    one / (one + (-a).exp())
                } else {
                    let e = a.exp();
                    e / (one + e)
                }
            })
            .collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[x]);
        self.push(value, Op::Sigmoid { x }, rg)
    }

    fn zip(&mut self, a: NodeId, b: NodeId, name: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        same_shape(name, self.shape(a), self.shape(b))?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(self.shape(a).to_vec(), data)
    }

    /// `a − b`, elementwise.
    pub fn subtract(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip(a, b, "subtract", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Sub { a, b }, rg))
    }

    /// `a + b`, elementwise (skip connections).
    pub fn residual_add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip(a, b, "residual_add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Add { a, b }, rg))
    }

    /// Collapse all but the leading dimension.
    pub fn flatten(&mut self, x: NodeId) -> NodeId {
        let s = self.shape(x);
        let n = s[0];
        let rest = s[1..].iter().product();
        self.reshape(x, &[n, rest]).expect("flatten preserves size")
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Reshape { x }, rg))
    }

    pub fn max_pool(&mut self, x: NodeId, k: usize, stride: usize, padding: Padding) -> Result<NodeId> {
        let geom = Geometry::new(self.shape(x), k, stride, padding)?;
        let (out, argmax) = ops::maxpool_forward(&geom, self.value(x).data());
        let value = Tensor::new(vec![geom.n, geom.c, geom.oh, geom.ow], out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::MaxPool { x, argmax }, rg))
    }

    /// Mean binary cross-entropy of probabilities `p` against 0/1 labels,
    /// with `p` clamped to `[eps, 1 − eps]`.
    pub fn bce(&mut self, p: NodeId, labels: &[T], eps: T) -> Result<NodeId> {
        let pv = self.value(p);
        if pv.len() != labels.len() || labels.is_empty() {
            return Err(Error::InvalidShape(format!("bce: {} predictions, {} labels", pv.len(), labels.len())));
        }
        let one = T::one();
        let mut total = T::zero();
        for (&pi, &y) in pv.data().iter().zip(labels) {
            let q = pi.max(eps).min(one - eps);
            total += -(y * q.ln() + (one - y) * (one - q).ln());
        }
        let loss = total / T::c(labels.len() as f64);
        let rg = self.rg(&[p]);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { p, labels: labels.to_vec(), eps }, rg))
    }

    /// `lambda · Σ‖x‖²` over the given tensors.
    pub fn l2_penalty(&mut self, xs: &[NodeId], lambda: T) -> NodeId {
        let s: T = xs.iter().map(|&x| self.value(x).sum_squares()).sum();
        let rg = self.rg(xs);
        self.push(Tensor::scalar(lambda * s), Op::SumSquares { xs: xs.to_vec(), scale: lambda }, rg)
    }

    /// Sum of scalar nodes.
    pub fn add_scalars(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let mut s = T::zero();
        for &x in xs {
            let v = self.value(x);
            if v.len() != 1 {
                return Err(Error::InvalidShape(format!("add_scalars: node has shape {:?}", v.shape())));
            }
            s += v.data()[0];
        }
        let rg = self.rg(xs);
        Ok(self.push(Tensor::scalar(s), Op::AddScalars { xs: xs.to_vec() }, rg))
    }

    /// `Σ cᵢ·xᵢ`; projects any tensor to a scalar.
    pub fn weighted_sum(&mut self, x: NodeId, coeffs: &[T]) -> Result<NodeId> {
        let v = self.value(x);
        if v.len() != coeffs.len() {
            return Err(Error::InvalidShape(format!("weighted_sum: {} values, {} coeffs", v.len(), coeffs.len())));
        }
        let s = v.data().iter().zip(coeffs).map(|(&a, &c)| a * c).sum();
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, coeffs: coeffs.to_vec() }, rg))
    }

    /// Reverse sweep from a scalar node. Gradients accumulate on every node
    /// that requires them; call on a fresh graph for each loss.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidShape(format!("backward needs a scalar, got {:?}", self.shape(loss))));
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        let mut sink = Sink { nodes: &self.nodes, values: &self.values, grads: &mut self.grads };
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(dy) = sink.grads[i].take() else { continue };
            backprop(&node.op, &self.values[i], &dy, &mut sink);
            sink.grads[i] = Some(dy);
        }
        Ok(())
    }
}

struct Sink<'a, T> {
    nodes: &'a [Node<T>],
    values: &'a [Tensor<T>],
    grads: &'a mut [Option<Tensor<T>>],
}

/// Gradient buffer of an input node, allocated on first use; `None` if the
/// input does not need a gradient.
fn grad_of<'s, T: Float>(sink: &'s mut Sink<'_, T>, id: NodeId) -> Option<&'s mut [T]> {
    if !sink.nodes[id.0].requires_grad {
        return None;
    }
    let shape = sink.values[id.0].shape();
    Some(sink.grads[id.0].get_or_insert_with(|| Tensor::zeros(shape)).data_mut())
}

fn backprop<T: Float>(op: &Op<T>, out: &Tensor<T>, dy: &Tensor<T>, nodes: &mut Sink<'_, T>) {
    let dyv = dy.data();
    let values = nodes.values;
    match op {
        Op::Leaf => {}
        Op::Conv { x, w, b, geom, cout, cols } => {
            let xv = &values[x.0];
            let wv = &values[w.0];
            if let Some(b) = b {
                if let Some(db) = grad_of(nodes, *b) {
                    ops::conv_backward(geom, &[], &[], &[], *cout, dyv, None, None, Some(db));
                }
            }
            if let Some(dw) = grad_of(nodes, *w) {
                ops::conv_backward(geom, xv.data(), cols, &[], *cout, dyv, None, Some(dw), None);
            }
            if let Some(dx) = grad_of(nodes, *x) {
                ops::conv_backward(geom, &[], &[], wv.data(), *cout, dyv, Some(dx), None, None);
            }
        }
        Op::Depthwise { x, w, geom } => {
            let xv = &values[x.0];
            let wv = &values[w.0];
            if let Some(dw) = grad_of(nodes, *w) {
                ops::depthwise_backward(geom, xv.data(), wv.data(), dyv, None, Some(dw));
            }
            if let Some(dx) = grad_of(nodes, *x) {
                ops::depthwise_backward(geom, xv.data(), wv.data(), dyv, Some(dx), None);
            }
        }
        Op::Dense { x, w, b } => {
            let xv = &values[x.0];
            let wv = &values[w.0];
            let (n, f) = (xv.shape()[0], xv.shape()[1]);
            let m = wv.shape()[1];
            if let Some(b) = b {
                if let Some(db) = grad_of(nodes, *b) {
                    for row in dyv.chunks(m) {
                        for (d, &g) in db.iter_mut().zip(row) {
                            *d += g;
                        }
                    }
                }
            }
            if let Some(dw) = grad_of(nodes, *w) {
                gemm(f, n, m, xv.data(), true, dyv, false, T::one(), dw);
            }
            if let Some(dx) = grad_of(nodes, *x) {
                gemm(n, m, f, dyv, false, wv.data(), true, T::one(), dx);
            }
        }
        Op::Relu { x } => {
            if let Some(dx) = grad_of(nodes, *x) {
                for ((d, &g), &o) in dx.iter_mut().zip(dyv).zip(out.data()) {
                    if o > T::zero() {
                        *d += g;
                    }
                }
            }
        }
        Op::Sigmoid { x } => {
            if let Some(dx) = grad_of(nodes, *x) {
                for ((d, &g), &s) in dx.iter_mut().zip(dyv).zip(out.data()) {
                    *d += g * s * (T::one() - s);
                }
            }
        }
        Op::Sub { a, b } | Op::Add { a, b } => {
            let sign = if matches!(op, Op::Sub { .. }) { -T::one() } else { T::one() };
            if let Some(da) = grad_of(nodes, *a) {
                for (d, &g) in da.iter_mut().zip(dyv) {
                    *d += g;
                }
            }
            if let Some(db) = grad_of(nodes, *b) {
                for (d, &g) in db.iter_mut().zip(dyv) {
                    *d += sign * g;
                }
            }
        }
        Op::Reshape { x } => {
            if let Some(dx) = grad_of(nodes, *x) {
                for (d, &g) in dx.iter_mut().zip(dyv) {
                    *d += g;
                }
            }
        }
        Op::MaxPool { x, argmax } => {
            if let Some(dx) = grad_of(nodes, *x) {
                for (&i, &g) in argmax.iter().zip(dyv) {
                    dx[i] += g;
                }
            }
        }
        Op::Bce { p, labels, eps } => {
            let pv = &values[p.0];
            if let Some(dp) = grad_of(nodes, *p) {
                let one = T::one();
                let scale = dyv[0] / T::c(labels.len() as f64);
                for ((d, &pi), &y) in dp.iter_mut().zip(pv.data()).zip(labels) {
                    if pi >= *eps && pi <= one - *eps {
                        *d += scale * (-y / pi + (one - y) / (one - pi));
                    }
                }
            }
        }
        Op::SumSquares { xs, scale } => {
            let two = T::c(2.0) * *scale * dyv[0];
            for x in xs {
                let xv = &values[x.0];
                if let Some(dx) = grad_of(nodes, *x) {
                    for (d, &v) in dx.iter_mut().zip(xv.data()) {
                        *d += two * v;
                    }
                }
            }
        }
        Op::AddScalars { xs } => {
            for x in xs {
                if let Some(dx) = grad_of(nodes, *x) {
                    dx[0] += dyv[0];
                }
            }
        }
        Op::WeightedSum { x, coeffs } => {
            if let Some(dx) = grad_of(nodes, *x) {
                for (d, &c) in dx.iter_mut().zip(coeffs) {
                    *d += dyv[0] * c;
                }
            }
        }
    }
}
