//! Tape of recorded tensor operations and the reverse sweep over it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Lower clamp applied by [`Graph::log`]; `exp(-745)` is the smallest positive subnormal.
pub const LOG_FLOOR: f64 = -745.0;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    OuterAdd(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Reshape(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Sum(Var),
    Mean(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Softmax { input: Var, axis: usize },
    LogSoftmax { input: Var, axis: usize },
    LayerNorm { input: Var, inv_std: Vec<f64> },
    Dropout { input: Var, mask: Vec<f64> },
    L2Diff(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// A single-use computation graph over a borrowed [`ParamStore`].
pub struct Graph<'p> {
    params: &'p ParamStore,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    consumed: bool,
    log_clamps: usize,
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect()).expect("same shape")
}

/// `c[m,n] += a[m,k] * b[k,n]`
fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self::with_seed(params, 0)
    }

    /// A graph whose dropout masks are drawn from a stream seeded with `seed`.
    pub fn with_seed(params: &'p ParamStore, seed: u64) -> Self {
        Self {
            params,
            param_vars: vec![None; params.len()],
            nodes: Vec::with_capacity(256),
            rng: ChaCha8Rng::seed_from_u64(seed),
            consumed: false,
            log_clamps: 0,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of times [`Graph::log`] hit its lower clamp.
    pub fn log_clamps(&self) -> usize {
        self.log_clamps
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant leaf; receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let v = self.push(self.params.value(id).clone(), Op::Param(id));
        self.param_vars[id.index()] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2("matmul")?;
        let (k2, n) = tb.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(ta.data(), tb.data(), &mut out, m, k, n);
        let t = Tensor::matrix(m, n, out)?;
        Ok(self.push(t, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("add", self.value(a), self.value(b))?;
        let t = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("sub", self.value(a), self.value(b))?;
        let t = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("mul", self.value(a), self.value(b))?;
        let t = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(t, Op::Mul(a, b)))
    }

    /// Add a `[1, n]` row to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (tm, tr) = (self.value(m), self.value(row));
        let (rows, n) = tm.dims2("add_row")?;
        if tr.shape() != [1, n] {
            return Err(Error::shape("add_row", tm.shape(), tr.shape()));
        }
        let mut out = tm.data().to_vec();
        for r in 0..rows {
            for (o, b) in out[r * n..(r + 1) * n].iter_mut().zip(tr.data()) {
                *o += b;
            }
        }
        let t = Tensor::matrix(rows, n, out)?;
        Ok(self.push(t, Op::AddRow(m, row)))
    }

    /// `out[i, j] = col[i, 0] + row[0, j]` for a `[n, 1]` column and `[1, m]` row.
    pub fn outer_add(&mut self, col: Var, row: Var) -> Result<Var> {
        let (tc, tr) = (self.value(col), self.value(row));
        let (n, one) = tc.dims2("outer_add")?;
        let (one2, m) = tr.dims2("outer_add")?;
        if one != 1 || one2 != 1 {
            return Err(Error::shape("outer_add", tc.shape(), tr.shape()));
        }
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let c = tc.data()[i];
            out.extend(tr.data().iter().map(|r| c + r));
        }
        let t = Tensor::matrix(n, m, out)?;
        Ok(self.push(t, Op::OuterAdd(col, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = map(self.value(a), |x| x * s);
        self.push(t, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let t = map(self.value(a), |x| x + s);
        self.push(t, Op::AddScalar(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", &base, &[axis]));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.value(*v).shape();
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !ok {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let t = Tensor::new(shape, out)?;
        Ok(self.push(
            t,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if axis >= t.rank() || start + len > t.shape()[axis] {
            return Err(Error::shape("slice", t.shape(), &[axis, start, len]));
        }
        let (outer, alen, inner) = t.lanes(axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * alen * inner + start * inner;
            out.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Slice { input: a, axis, start }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = map(self.value(a), sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = map(self.value(a), f64::tanh);
        self.push(t, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = map(self.value(a), |x| x.max(0.0));
        self.push(t, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let t = map(self.value(a), |x| if x >= 0.0 { x } else { slope * x });
        self.push(t, Op::LeakyRelu(a, slope))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let t = map(self.value(a), softplus);
        self.push(t, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = map(self.value(a), f64::exp);
        self.push(t, Op::Exp(a))
    }

    /// Natural log, clamped below at [`LOG_FLOOR`]; clamped entries get zero gradient.
    pub fn log(&mut self, a: Var) -> Var {
        let mut clamps = 0;
        let t = map(self.value(a), |x| {
            let l = x.ln();
            if l.is_nan() || l < LOG_FLOOR {
                LOG_FLOOR
            } else {
                l
            }
        });
        clamps += t.data().iter().filter(|&&l| l == LOG_FLOOR).count();
        self.log_clamps += clamps;
        self.push(t, Op::Log(a))
    }

    fn softmax_lanes(t: &Tensor, axis: usize, log: bool) -> Tensor {
        let (outer, len, inner) = t.lanes(axis);
        let mut out = vec![0.0; t.numel()];
        let x = t.data();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| o * len * inner + k * inner + i;
                let max = (0..len).map(|k| x[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..len).map(|k| (x[idx(k)] - max).exp()).sum();
                let lz = z.ln();
                for k in 0..len {
                    let d = x[idx(k)] - max;
                    out[idx(k)] = if log { d - lz } else { d.exp() / z };
                }
            }
        }
        Tensor::new(t.shape().to_vec(), out).expect("same shape")
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        if axis >= t.rank() {
            return Err(Error::shape("softmax", t.shape(), &[axis]));
        }
        let out = Self::softmax_lanes(t, axis, false);
        Ok(self.push(out, Op::Softmax { input: a, axis }))
    }

    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        if axis >= t.rank() {
            return Err(Error::shape("log_softmax", t.shape(), &[axis]));
        }
        let out = Self::softmax_lanes(t, axis, true);
        Ok(self.push(out, Op::LogSoftmax { input: a, axis }))
    }

    /// Normalize over the last axis to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let rank = t.rank();
        if rank == 0 {
            return Err(Error::shape("layer_norm", t.shape(), &[]));
        }
        let (outer, len, _) = t.lanes(rank - 1);
        let mut out = vec![0.0; t.numel()];
        let mut inv_std = Vec::with_capacity(outer);
        for o in 0..outer {
            let x = &t.data()[o * len..(o + 1) * len];
            let mean = x.iter().sum::<f64>() / len as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (y, v) in out[o * len..(o + 1) * len].iter_mut().zip(x) {
                *y = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let out = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(out, Op::LayerNorm { input: a, inv_std }))
    }

    /// Inverted dropout: in training, zero each entry with probability `p` and
    /// scale survivors by `1 / (1 - p)`. Identity when `train` is false.
    pub fn dropout(&mut self, a: Var, p: f64, train: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if !train || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.value(a).numel();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let t = self.value(a);
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout { input: a, mask }))
    }

    /// `sum((a - b)^2)` as a scalar.
    pub fn l2_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("l2_diff", self.value(a), self.value(b))?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::L2Diff(a, b)))
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients {
            grads: vec![None; self.params.len()],
        };

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, contrib: Vec<f64>| match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(&contrib).for_each(|(e, c)| *e += c),
                slot @ None => *slot = Some(contrib),
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let shape = node.value.shape().to_vec();
                    out.grads[id.index()] = Some(Tensor::new(shape, g)?);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (val(*a), val(*b));
                    let (m, k) = ta.dims2("matmul")?;
                    let n = tb.shape()[1];
                    // dA = G * B^T
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * tb.data()[p * n + j];
                            }
                            da[i * k + p] = s;
                        }
                    }
                    // dB = A^T * G
                    let mut db = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let av = ta.data()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += av * g[i * n + j];
                            }
                        }
                    }
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.iter().map(|x| -x).collect());
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.iter().zip(val(*b).data()).map(|(g, y)| g * y).collect();
                    let db = g.iter().zip(val(*a).data()).map(|(g, x)| g * x).collect();
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::AddRow(m, row) => {
                    let n = val(*row).numel();
                    let mut dr = vec![0.0; n];
                    for chunk in g.chunks(n) {
                        dr.iter_mut().zip(chunk).for_each(|(d, c)| *d += c);
                    }
                    acc(*row, dr);
                    acc(*m, g);
                }
                Op::OuterAdd(col, row) => {
                    let n = val(*col).numel();
                    let m = val(*row).numel();
                    let mut dc = vec![0.0; n];
                    let mut dr = vec![0.0; m];
                    for i in 0..n {
                        for j in 0..m {
                            dc[i] += g[i * m + j];
                            dr[j] += g[i * m + j];
                        }
                    }
                    acc(*col, dc);
                    acc(*row, dr);
                }
                Op::Scale(a, s) => acc(*a, g.iter().map(|x| x * s).collect()),
                Op::AddScalar(a) | Op::Reshape(a) => acc(*a, g),
                Op::Concat { inputs, axis } => {
                    let shape = node.value.shape();
                    let outer: usize = shape[..*axis].iter().product();
                    let inner: usize = shape[axis + 1..].iter().product();
                    let total = shape[*axis];
                    let mut offset = 0;
                    for v in inputs {
                        let len = val(*v).shape()[*axis];
                        let mut d = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = o * total * inner + offset * inner;
                            d.extend_from_slice(&g[base..base + len * inner]);
                        }
                        offset += len;
                        acc(*v, d);
                    }
                }
                Op::Slice { input, axis, start } => {
                    let t = val(*input);
                    let (outer, alen, inner) = t.lanes(*axis);
                    let len = node.value.shape()[*axis];
                    let mut d = vec![0.0; t.numel()];
                    for o in 0..outer {
                        let src = o * len * inner;
                        let dst = o * alen * inner + start * inner;
                        d[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                    }
                    acc(*input, d);
                }
                Op::Sum(a) => acc(*a, vec![g[0]; val(*a).numel()]),
                Op::Mean(a) => {
                    let n = val(*a).numel();
                    acc(*a, vec![g[0] / n as f64; n]);
                }
                Op::Sigmoid(a) => {
                    let d = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(g, s)| g * s * (1.0 - s))
                        .collect();
                    acc(*a, d);
                }
                Op::Tanh(a) => {
                    let d = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(g, t)| g * (1.0 - t * t))
                        .collect();
                    acc(*a, d);
                }
                Op::Relu(a) => {
                    let d = g
                        .iter()
                        .zip(val(*a).data())
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    acc(*a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let d = g
                        .iter()
                        .zip(val(*a).data())
                        .map(|(g, x)| if *x >= 0.0 { *g } else { g * slope })
                        .collect();
                    acc(*a, d);
                }
                Op::Softplus(a) => {
                    let d = g
                        .iter()
                        .zip(val(*a).data())
                        .map(|(g, x)| g * sigmoid(*x))
                        .collect();
                    acc(*a, d);
                }
                Op::Exp(a) => {
                    let d = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(g, e)| g * e)
                        .collect();
                    acc(*a, d);
                }
                Op::Log(a) => {
                    let d = g
                        .iter()
                        .zip(val(*a).data())
                        .zip(node.value.data())
                        .map(|((g, x), l)| if *l == LOG_FLOOR { 0.0 } else { g / x })
                        .collect();
                    acc(*a, d);
                }
                Op::Softmax { input, axis } => {
                    let y = &node.value;
                    let (outer, len, inner) = y.lanes(*axis);
                    let mut d = vec![0.0; y.numel()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |k: usize| o * len * inner + k * inner + i;
                            let dot: f64 = (0..len).map(|k| g[idx(k)] * y.data()[idx(k)]).sum();
                            for k in 0..len {
                                d[idx(k)] = y.data()[idx(k)] * (g[idx(k)] - dot);
                            }
                        }
                    }
                    acc(*input, d);
                }
                Op::LogSoftmax { input, axis } => {
                    let y = &node.value;
                    let (outer, len, inner) = y.lanes(*axis);
                    let mut d = vec![0.0; y.numel()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |k: usize| o * len * inner + k * inner + i;
                            let gs: f64 = (0..len).map(|k| g[idx(k)]).sum();
                            for k in 0..len {
                                d[idx(k)] = g[idx(k)] - y.data()[idx(k)].exp() * gs;
                            }
                        }
                    }
                    acc(*input, d);
                }
                Op::LayerNorm { input, inv_std } => {
                    let y = &node.value;
                    let len = *y.shape().last().expect("rank >= 1");
                    let mut d = vec![0.0; y.numel()];
                    for (o, is) in inv_std.iter().enumerate() {
                        let r = o * len..(o + 1) * len;
                        let (gy, yh) = (&g[r.clone()], &y.data()[r.clone()]);
                        let mg = gy.iter().sum::<f64>() / len as f64;
                        let mgy = gy.iter().zip(yh).map(|(a, b)| a * b).sum::<f64>() / len as f64;
                        for ((dx, gv), yv) in d[r].iter_mut().zip(gy).zip(yh) {
                            *dx = is * (gv - mg - yv * mgy);
                        }
                    }
                    acc(*input, d);
                }
                Op::Dropout { input, mask } => {
                    acc(*input, g.iter().zip(mask).map(|(g, m)| g * m).collect());
                }
                Op::L2Diff(a, b) => {
                    let da: Vec<f64> = val(*a)
                        .data()
                        .iter()
                        .zip(val(*b).data())
                        .map(|(x, y)| 2.0 * g[0] * (x - y))
                        .collect();
                    acc(*b, da.iter().map(|x| -x).collect());
                    acc(*a, da);
                }
            }
        }
        Ok(out)
    }
}
