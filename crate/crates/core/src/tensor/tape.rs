use crate::error::{Error, Result};

use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Abs(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Concat(Vec<Var>),
    WeightedSum { items: Vec<Var>, weights: Var },
    Dot(Var, Var),
    Sum(Var),
    Mean(Var),
    CrossEntropy { logits: Var, label: usize },
    Slice { src: Var, start: usize },
    Row { src: Var, row: usize },
    Scale(Var, f64),
    StraightThrough { relaxed: Var },
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// Ordered record of executed operations.
///
/// Inputs always precede the operations that consume them, so the record
/// order is a topological order and a single reverse sweep is enough.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every tracked node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }
}

fn is_vector(shape: &[usize]) -> bool {
    shape.len() == 1
}

fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        &self.nodes[var.0].shape
    }

    /// The single value of a scalar node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value[0]
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].tracked
    }

    pub fn to_tensor(&self, var: Var) -> Tensor {
        let node = &self.nodes[var.0];
        Tensor {
            shape: node.shape.clone(),
            data: node.value.clone(),
            grad: None,
        }
    }

    fn leaf_node(&mut self, shape: Vec<usize>, value: Vec<f64>, tracked: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op: Op::Leaf,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a tensor; it is tracked for gradients iff it has a grad slot.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        self.leaf_node(tensor.shape.clone(), tensor.data.clone(), tensor.requires_grad())
    }

    /// Records a gradient-tracking copy of `tensor`.
    pub fn param(&mut self, tensor: &Tensor) -> Var {
        self.leaf_node(tensor.shape.clone(), tensor.data.clone(), true)
    }

    pub fn constant(&mut self, tensor: &Tensor) -> Var {
        self.leaf_node(tensor.shape.clone(), tensor.data.clone(), false)
    }

    /// Records a constant vector. Values must be finite.
    pub fn constant_vec(&mut self, values: Vec<f64>) -> Result<Var> {
        if values.is_empty() {
            return Err(Error::InvalidTensor("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "constant" });
        }
        Ok(self.leaf_node(vec![values.len()], values, false))
    }

    fn push(&mut self, name: &'static str, shape: Vec<usize>, value: Vec<f64>, op: Op, inputs: &[Var]) -> Result<Var> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        self.nodes.push(Node {
            shape,
            value,
            op,
            tracked,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::ShapeMismatch {
            op,
            left: self.nodes[a.0].shape.clone(),
            right: self.nodes[b.0].shape.clone(),
        }
    }

    fn require_vector(&self, op: &'static str, a: Var) -> Result<()> {
        if is_vector(&self.nodes[a.0].shape) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                op,
                left: self.nodes[a.0].shape.clone(),
                right: vec![self.nodes[a.0].value.len()],
            })
        }
    }

    /// `matrix · vector` for a matrix of shape `[rows, cols]` and a vector of
    /// length `cols`.
    pub fn matvec(&mut self, matrix: Var, vector: Var) -> Result<Var> {
        let ms = &self.nodes[matrix.0].shape;
        let vs = &self.nodes[vector.0].shape;
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(self.mismatch("matvec", matrix, vector));
        }
        let (rows, cols) = (ms[0], ms[1]);
        let m = &self.nodes[matrix.0].value;
        let x = &self.nodes[vector.0].value;
        let out: Vec<f64> = (0..rows)
            .map(|r| m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        self.push("matvec", vec![rows], out, Op::MatVec(matrix, vector), &[matrix, vector])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = &self.nodes[a.0].shape;
        let sb = &self.nodes[b.0].shape;
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.mismatch("matmul", a, b));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = av[i * k + p];
                for j in 0..n {
                    out[i * n + j] += aip * bv[p * n + j];
                }
            }
        }
        self.push("matmul", vec![m, n], out, Op::MatMul(a, b), &[a, b])
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(self.mismatch(name, a, b));
        }
        let out = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(name, shape, out, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let out = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(name, shape, out, op, &[a])
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary("abs", a, f64::abs, Op::Abs(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary("log", a, f64::ln, Op::Log(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary("scale", a, |x| x * factor, Op::Scale(a, factor))
    }

    /// Softmax over a vector, computed with max-subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.require_vector("softmax", a)?;
        let mut out = self.nodes[a.0].value.clone();
        softmax_in_place(&mut out);
        let shape = self.nodes[a.0].shape.clone();
        self.push("softmax", shape, out, Op::Softmax(a), &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.require_vector("log_softmax", a)?;
        let lse = log_sum_exp(&self.nodes[a.0].value);
        let out = self.nodes[a.0].value.iter().map(|x| x - lse).collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push("log_softmax", shape, out, Op::LogSoftmax(a), &[a])
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::InvalidTensor("concat of zero vectors".into()));
        }
        let mut out = Vec::new();
        for &p in parts {
            self.require_vector("concat", p)?;
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        let len = out.len();
        self.push("concat", vec![len], out, Op::Concat(parts.to_vec()), parts)
    }

    /// `Σ_k weights[k] · items[k]` for equally shaped vectors.
    pub fn weighted_sum(&mut self, items: &[Var], weights: Var) -> Result<Var> {
        self.require_vector("weighted_sum", weights)?;
        if items.is_empty() || self.nodes[weights.0].value.len() != items.len() {
            return Err(Error::ShapeMismatch {
                op: "weighted_sum",
                left: vec![items.len()],
                right: self.nodes[weights.0].shape.clone(),
            });
        }
        let shape = self.nodes[items[0].0].shape.clone();
        let mut out = vec![0.0; self.nodes[items[0].0].value.len()];
        for (k, &item) in items.iter().enumerate() {
            if self.nodes[item.0].shape != shape {
                return Err(self.mismatch("weighted_sum", items[0], item));
            }
            let w = self.nodes[weights.0].value[k];
            for (o, x) in out.iter_mut().zip(&self.nodes[item.0].value) {
                *o += w * x;
            }
        }
        let mut inputs = items.to_vec();
        inputs.push(weights);
        self.push(
            "weighted_sum",
            shape,
            out,
            Op::WeightedSum {
                items: items.to_vec(),
                weights,
            },
            &inputs,
        )
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if !is_vector(&self.nodes[a.0].shape) || self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(self.mismatch("dot", a, b));
        }
        let out: f64 = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .sum();
        self.push("dot", vec![1], vec![out], Op::Dot(a, b), &[a, b])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out: f64 = self.nodes[a.0].value.iter().sum();
        self.push("sum", vec![1], vec![out], Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = &self.nodes[a.0].value;
        let out = v.iter().sum::<f64>() / v.len() as f64;
        self.push("mean", vec![1], vec![out], Op::Mean(a), &[a])
    }

    /// `-log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        self.require_vector("cross_entropy", logits)?;
        let v = &self.nodes[logits.0].value;
        if label >= v.len() {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                left: self.nodes[logits.0].shape.clone(),
                right: vec![label],
            });
        }
        let out = log_sum_exp(v) - v[label];
        self.push("cross_entropy", vec![1], vec![out], Op::CrossEntropy { logits, label }, &[logits])
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        self.require_vector("slice", src)?;
        let v = &self.nodes[src.0].value;
        if len == 0 || start + len > v.len() {
            return Err(Error::ShapeMismatch {
                op: "slice",
                left: self.nodes[src.0].shape.clone(),
                right: vec![start, start + len],
            });
        }
        let out = v[start..start + len].to_vec();
        self.push("slice", vec![len], out, Op::Slice { src, start }, &[src])
    }

    /// Row `row` of a matrix, as a vector.
    pub fn row(&mut self, src: Var, row: usize) -> Result<Var> {
        let shape = &self.nodes[src.0].shape;
        if shape.len() != 2 || row >= shape[0] {
            return Err(Error::ShapeMismatch {
                op: "row",
                left: shape.clone(),
                right: vec![row],
            });
        }
        let cols = shape[1];
        let out = self.nodes[src.0].value[row * cols..(row + 1) * cols].to_vec();
        self.push("row", vec![cols], out, Op::Row { src, row }, &[src])
    }

    /// Straight-through estimator node.
    ///
    /// The forward value is `hard + (relaxed - anchor)`; with no anchor it is
    /// exactly `hard`. The backward pass routes the incoming gradient to
    /// `relaxed` unchanged. Supplying `anchor = value(relaxed)` from an
    /// earlier evaluation turns the node into a smooth surrogate whose true
    /// derivative equals the straight-through gradient, which is what makes
    /// finite-difference checks through discrete selections possible.
    pub fn straight_through(&mut self, relaxed: Var, hard: &[f64], anchor: Option<&[f64]>) -> Result<Var> {
        self.require_vector("straight_through", relaxed)?;
        let p = &self.nodes[relaxed.0].value;
        if hard.len() != p.len() || anchor.is_some_and(|a| a.len() != p.len()) {
            return Err(Error::ShapeMismatch {
                op: "straight_through",
                left: self.nodes[relaxed.0].shape.clone(),
                right: vec![hard.len()],
            });
        }
        let out = match anchor {
            None => hard.to_vec(),
            Some(anchor) => hard
                .iter()
                .zip(p)
                .zip(anchor)
                .map(|((h, p), a)| h + (p - a))
                .collect(),
        };
        let shape = self.nodes[relaxed.0].shape.clone();
        self.push("straight_through", shape, out, Op::StraightThrough { relaxed }, &[relaxed])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = &self.nodes[loss.0].shape;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::NonScalarLoss(shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].tracked {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { op: "backward" });
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[var.0].tracked {
            return;
        }
        let slot = grads[var.0].get_or_insert_with(|| vec![0.0; self.nodes[var.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            &Op::MatVec(m, x) => {
                let cols = self.nodes[m.0].shape[1];
                let mv = &self.nodes[m.0].value;
                let xv = &self.nodes[x.0].value;
                self.accumulate(grads, m, |gm| {
                    for (r, gr) in g.iter().enumerate() {
                        for (c, xc) in xv.iter().enumerate() {
                            gm[r * cols + c] += gr * xc;
                        }
                    }
                });
                self.accumulate(grads, x, |gx| {
                    for (r, gr) in g.iter().enumerate() {
                        for (c, gxc) in gx.iter_mut().enumerate() {
                            *gxc += mv[r * cols + c] * gr;
                        }
                    }
                });
            }
            &Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                self.accumulate(grads, a, |ga| {
                    for r in 0..m {
                        for p in 0..k {
                            ga[r * k + p] += (0..n).map(|j| g[r * n + j] * bv[p * n + j]).sum::<f64>();
                        }
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for r in 0..m {
                        for p in 0..k {
                            let arp = av[r * k + p];
                            for j in 0..n {
                                gb[p * n + j] += arp * g[r * n + j];
                            }
                        }
                    }
                });
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, |ga| add_into(ga, g));
                self.accumulate(grads, b, |gb| add_into(gb, g));
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, |ga| add_into(ga, g));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(g).for_each(|(d, s)| *d -= s));
            }
            &Op::Mul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                        *d += gi * bi;
                    }
                });
                self.accumulate(grads, b, |gb| {
                    for ((d, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                        *d += gi * ai;
                    }
                });
            }
            &Op::Abs(a) => {
                let av = &self.nodes[a.0].value;
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), x) in ga.iter_mut().zip(g).zip(av) {
                        // subgradient 0 at the kink
                        let sign = if *x > 0.0 {
                            1.0
                        } else if *x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *d += gi * sign;
                    }
                });
            }
            &Op::Sigmoid(a) => self.accumulate(grads, a, |ga| {
                for ((d, gi), s) in ga.iter_mut().zip(g).zip(out) {
                    *d += gi * s * (1.0 - s);
                }
            }),
            &Op::Tanh(a) => self.accumulate(grads, a, |ga| {
                for ((d, gi), t) in ga.iter_mut().zip(g).zip(out) {
                    *d += gi * (1.0 - t * t);
                }
            }),
            &Op::Relu(a) => {
                let av = &self.nodes[a.0].value;
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), x) in ga.iter_mut().zip(g).zip(av) {
                        if *x > 0.0 {
                            *d += gi;
                        }
                    }
                });
            }
            &Op::Exp(a) => self.accumulate(grads, a, |ga| {
                for ((d, gi), e) in ga.iter_mut().zip(g).zip(out) {
                    *d += gi * e;
                }
            }),
            &Op::Log(a) => {
                let av = &self.nodes[a.0].value;
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), x) in ga.iter_mut().zip(g).zip(av) {
                        *d += gi / x;
                    }
                });
            }
            &Op::Softmax(a) => {
                let gs: f64 = g.iter().zip(out).map(|(gi, s)| gi * s).sum();
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), s) in ga.iter_mut().zip(g).zip(out) {
                        *d += s * (gi - gs);
                    }
                });
            }
            &Op::LogSoftmax(a) => {
                let total: f64 = g.iter().sum();
                self.accumulate(grads, a, |ga| {
                    for ((d, gi), l) in ga.iter_mut().zip(g).zip(out) {
                        *d += gi - l.exp() * total;
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    self.accumulate(grads, p, |gp| add_into(gp, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::WeightedSum { items, weights } => {
                let wv = &self.nodes[weights.0].value;
                for (k, &item) in items.iter().enumerate() {
                    let w = wv[k];
                    self.accumulate(grads, item, |gi| {
                        for (d, s) in gi.iter_mut().zip(g) {
                            *d += w * s;
                        }
                    });
                }
                self.accumulate(grads, *weights, |gw| {
                    for (k, &item) in items.iter().enumerate() {
                        gw[k] += self.nodes[item.0].value.iter().zip(g).map(|(x, s)| x * s).sum::<f64>();
                    }
                });
            }
            &Op::Dot(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(bv).for_each(|(d, y)| *d += g[0] * y));
                self.accumulate(grads, b, |gb| gb.iter_mut().zip(av).for_each(|(d, x)| *d += g[0] * x));
            }
            &Op::Sum(a) => self.accumulate(grads, a, |ga| ga.iter_mut().for_each(|d| *d += g[0])),
            &Op::Mean(a) => {
                let n = self.nodes[a.0].value.len() as f64;
                self.accumulate(grads, a, |ga| ga.iter_mut().for_each(|d| *d += g[0] / n));
            }
            &Op::CrossEntropy { logits, label } => {
                let mut p = self.nodes[logits.0].value.clone();
                softmax_in_place(&mut p);
                p[label] -= 1.0;
                self.accumulate(grads, logits, |gl| {
                    gl.iter_mut().zip(&p).for_each(|(d, pi)| *d += g[0] * pi);
                });
            }
            &Op::Slice { src, start } => {
                self.accumulate(grads, src, |gs| add_into(&mut gs[start..start + g.len()], g));
            }
            &Op::Row { src, row } => {
                let cols = self.nodes[src.0].shape[1];
                self.accumulate(grads, src, |gs| add_into(&mut gs[row * cols..(row + 1) * cols], g));
            }
            &Op::Scale(a, factor) => {
                self.accumulate(grads, a, |ga| ga.iter_mut().zip(g).for_each(|(d, gi)| *d += gi * factor));
            }
            &Op::StraightThrough { relaxed } => {
                self.accumulate(grads, relaxed, |gr| add_into(gr, g));
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
