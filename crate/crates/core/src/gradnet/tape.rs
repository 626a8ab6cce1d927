//! Operation tape and reverse sweep.
//!
//! Every primitive pushes one node holding its forward value plus whatever it needs
//! to run its adjoint. Nodes are appended in evaluation order, so walking the list
//! backwards is a valid reverse topological order.

use rand::Rng;

use super::tensor::{axpy, dot, Tensor};
use crate::error::{Error, Result};
use crate::sigcore::fft_in_place;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;
pub const BCE_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Running batch-norm statistics carried between passes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

struct LstmCache {
    n: usize,
    steps: usize,
    hidden: usize,
    input: usize,
    /// activated gates i, f, g, o per (n, t): `4H` each
    gates: Vec<f64>,
    /// cell state per (n, t)
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
}

struct SpecCache {
    len: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    total: Vec<f64>,
    phat: Vec<f64>,
    target: Vec<f64>,
}

enum Op {
    Leaf,
    Conv1d { x: Var, w: Var, b: Var },
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64>, train: bool },
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    MaxPool2 { x: Var, argmax: Vec<usize> },
    Upsample2(Var),
    Dense { x: Var, w: Var, b: Var },
    Lstm { x: Var, w_ih: Var, w_hh: Var, b: Var, cache: Box<LstmCache> },
    Dropout { x: Var, mask: Option<Vec<f64>> },
    Reshape(Var),
    Concat { parts: Vec<Var>, widths: Vec<usize> },
    WeightedSum(Vec<(Var, f64)>),
    DotConst { x: Var, w: Vec<f64> },
    Bce { pred: Var, labels: Vec<f64> },
    CrossEntropy { logits: Var, classes: Vec<usize>, probs: Vec<f64> },
    PearsonLoss { x: Var, target: Vec<f64> },
    SpectralDivergence { x: Var, cache: Box<SpecCache> },
    NegLogVar { x: Var, eps: f64 },
    RowAffine { x: Var, rho: Vec<f64>, scale: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zeros if nothing flowed into it.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `(n, c, l)` for a rank-2 `[C, L]` or rank-3 `[N, C, L]` tensor.
fn seq_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [c, l] => Ok((1, c, l)),
        [n, c, l] => Ok((n, c, l)),
        _ => Err(Error::ShapeMismatch(format!(
            "expected [C, L] or [N, C, L], got {shape:?}"
        ))),
    }
}

/// Rows are everything before the last axis (or the whole tensor for rank 1),
/// except that `[N, C, L]` is read as N rows of `C*L`.
fn row_dims(shape: &[usize]) -> (usize, usize) {
    match *shape {
        [f] => (1, f),
        [n, f] => (n, f),
        [n, c, l] => (n, c * l),
        _ => {
            let last = *shape.last().unwrap_or(&1);
            (shape.iter().product::<usize>() / last.max(1), last)
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(t) => t.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input (parameter or probe).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push_raw(t, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push_raw(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push_raw(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|&v| self.needs(v));
        self.push_raw(value, op, needs)
    }

    /// Same-length 1-D cross-correlation with zero padding of `(K-1)/2` per side.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (n, cin, l) = seq_dims(&xs)?;
        let (cout, wcin, k) = match *self.value(w).shape() {
            [a, b, c] => (a, b, c),
            ref s => return Err(Error::ShapeMismatch(format!("conv kernel {s:?}"))),
        };
        if wcin != cin || k % 2 == 0 || self.value(b).shape() != [cout] {
            return Err(Error::ShapeMismatch(format!(
                "conv input {xs:?}, kernel {:?}, bias {:?} (kernel width must be odd)",
                self.value(w).shape(),
                self.value(b).shape()
            )));
        }
        let pad = (k / 2) as isize;
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; n * cout * l];
        for ni in 0..n {
            for co in 0..cout {
                let orow = &mut out[(ni * cout + co) * l..(ni * cout + co + 1) * l];
                orow.iter_mut().for_each(|v| *v = bd[co]);
                for ci in 0..cin {
                    let xrow = &xd[(ni * cin + ci) * l..(ni * cin + ci + 1) * l];
                    for kk in 0..k {
                        let wv = wd[(co * cin + ci) * k + kk];
                        let s = kk as isize - pad;
                        let (lo, hi) = shifted_range(l, s);
                        if lo < hi {
                            let xs = (lo as isize + s) as usize;
                            axpy(wv, &xrow[xs..xs + (hi - lo)], &mut orow[lo..hi]);
                        }
                    }
                }
            }
        }
        let shape = if xs.len() == 2 { vec![cout, l] } else { vec![n, cout, l] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Conv1d { x, w, b }, &[x, w, b]))
    }

    /// Per-channel batch normalization over every `(n, l)` position.
    pub fn batchnorm1d(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: Mode,
        stats: &mut RunningStats,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (n, c, l) = seq_dims(&xs)?;
        if self.value(gamma).shape() != [c]
            || self.value(beta).shape() != [c]
            || stats.mean.len() != c
            || stats.var.len() != c
        {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm over {c} channels with gamma {:?}",
                self.value(gamma).shape()
            )));
        }
        let m = n * l;
        let train = mode == Mode::Train;
        if train && m < 2 {
            return Err(Error::DegenerateBatch(m));
        }
        let xd = self.value(x).data();
        let gd = self.value(gamma).data();
        let bd = self.value(beta).data();
        let mut xhat = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; c];
        let mut out = vec![0.0; xd.len()];
        for ch in 0..c {
            let rows = (0..n).map(|ni| (ni * c + ch) * l);
            let (mu, inv) = if train {
                let mut s = 0.0;
                for r in rows.clone() {
                    s += xd[r..r + l].iter().sum::<f64>();
                }
                let mu = s / m as f64;
                let mut v = 0.0;
                for r in rows.clone() {
                    v += xd[r..r + l].iter().map(|x| (x - mu) * (x - mu)).sum::<f64>();
                }
                let var = v / m as f64;
                stats.mean[ch] = BN_MOMENTUM * stats.mean[ch] + (1.0 - BN_MOMENTUM) * mu;
                stats.var[ch] = BN_MOMENTUM * stats.var[ch] + (1.0 - BN_MOMENTUM) * var;
                (mu, 1.0 / (var + BN_EPS).sqrt())
            } else {
                (stats.mean[ch], 1.0 / (stats.var[ch] + BN_EPS).sqrt())
            };
            inv_std[ch] = inv;
            for r in rows {
                for i in r..r + l {
                    let h = (xd[i] - mu) * inv;
                    xhat[i] = h;
                    out[i] = gd[ch] * h + bd[ch];
                }
            }
        }
        let value = Tensor::new(xs, out)?;
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            },
            &[x, gamma, beta],
        ))
    }

    fn map_unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(value, op, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map_unary(
            x,
            move |v| if v > 0.0 { v } else { slope * v },
            Op::LeakyRelu(x, slope),
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map_unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map_unary(x, f64::tanh, Op::Tanh(x))
    }

    /// Non-overlapping pairwise max along the last axis; ties pick the earlier index.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape().to_vec();
        let l = *shape.last().unwrap();
        if !l.is_multiple_of(2) {
            return Err(Error::OddLength(l));
        }
        let d = t.data();
        let mut out = Vec::with_capacity(d.len() / 2);
        let mut argmax = Vec::with_capacity(d.len() / 2);
        for i in (0..d.len()).step_by(2) {
            let j = if d[i] >= d[i + 1] { i } else { i + 1 };
            out.push(d[j]);
            argmax.push(j);
        }
        let mut oshape = shape;
        *oshape.last_mut().unwrap() = l / 2;
        let value = Tensor::new(oshape, out)?;
        Ok(self.push(value, Op::MaxPool2 { x, argmax }, &[x]))
    }

    /// Nearest-neighbour doubling along the last axis.
    pub fn upsample2(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() *= 2;
        let out = t.data().iter().flat_map(|&v| [v, v]).collect();
        let value = Tensor::new(shape, out).expect("doubled shape");
        self.push(value, Op::Upsample2(x), &[x])
    }

    /// `y = W x + b` for `x` of shape `[F]` or `[N, F]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (n, f) = match *xs {
            [f] => (1, f),
            [n, f] => (n, f),
            _ => return Err(Error::ShapeMismatch(format!("dense input {xs:?}"))),
        };
        let (m, wf) = match *self.value(w).shape() {
            [m, wf] => (m, wf),
            ref s => return Err(Error::ShapeMismatch(format!("dense weight {s:?}"))),
        };
        if wf != f || self.value(b).shape() != [m] {
            return Err(Error::ShapeMismatch(format!(
                "dense input {xs:?} vs weight {:?}, bias {:?}",
                self.value(w).shape(),
                self.value(b).shape()
            )));
        }
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; n * m];
        for ni in 0..n {
            let xr = &xd[ni * f..(ni + 1) * f];
            for mi in 0..m {
                out[ni * m + mi] = dot(&wd[mi * f..(mi + 1) * f], xr) + bd[mi];
            }
        }
        let shape = if xs.len() == 1 { vec![m] } else { vec![n, m] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Dense { x, w, b }, &[x, w, b]))
    }

    /// Single-layer LSTM over `[L, D]` or `[N, L, D]`, zero initial state, gates
    /// ordered i, f, g, o in the weight rows. Returns the full hidden sequence.
    pub fn lstm(&mut self, x: Var, w_ih: Var, w_hh: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (n, steps, input) = seq_dims(&xs)?;
        let hidden = match *self.value(w_hh).shape() {
            [g, h] if g == 4 * h => h,
            ref s => return Err(Error::ShapeMismatch(format!("lstm recurrent weight {s:?}"))),
        };
        if self.value(w_ih).shape() != [4 * hidden, input] || self.value(b).shape() != [4 * hidden]
        {
            return Err(Error::ShapeMismatch(format!(
                "lstm input {xs:?}, w_ih {:?}, bias {:?}, hidden {hidden}",
                self.value(w_ih).shape(),
                self.value(b).shape()
            )));
        }
        let h4 = 4 * hidden;
        let xd = self.value(x).data();
        let wi = self.value(w_ih).data();
        let wh = self.value(w_hh).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; n * steps * hidden];
        let mut gates = vec![0.0; n * steps * h4];
        let mut cell = vec![0.0; n * steps * hidden];
        let mut tanh_cell = vec![0.0; n * steps * hidden];
        let zeros = vec![0.0; hidden];
        let mut z = vec![0.0; h4];
        for ni in 0..n {
            for t in 0..steps {
                let xt = &xd[(ni * steps + t) * input..(ni * steps + t + 1) * input];
                let base = ni * steps + t;
                let (h_prev, c_prev) = if t == 0 {
                    (&zeros[..], &zeros[..])
                } else {
                    (
                        &out[(base - 1) * hidden..base * hidden],
                        &cell[(base - 1) * hidden..base * hidden],
                    )
                };
                for j in 0..h4 {
                    z[j] = bd[j]
                        + dot(&wi[j * input..(j + 1) * input], xt)
                        + dot(&wh[j * hidden..(j + 1) * hidden], h_prev);
                }
                let g = &mut gates[base * h4..(base + 1) * h4];
                let mut c_new = vec![0.0; hidden];
                for u in 0..hidden {
                    let ig = sigmoid(z[u]);
                    let fg = sigmoid(z[hidden + u]);
                    let gg = z[2 * hidden + u].tanh();
                    let og = sigmoid(z[3 * hidden + u]);
                    g[u] = ig;
                    g[hidden + u] = fg;
                    g[2 * hidden + u] = gg;
                    g[3 * hidden + u] = og;
                    c_new[u] = fg * c_prev[u] + ig * gg;
                }
                for u in 0..hidden {
                    let tc = c_new[u].tanh();
                    tanh_cell[base * hidden + u] = tc;
                    cell[base * hidden + u] = c_new[u];
                    out[base * hidden + u] = g[3 * hidden + u] * tc;
                }
            }
        }
        let shape = if xs.len() == 2 {
            vec![steps, hidden]
        } else {
            vec![n, steps, hidden]
        };
        let value = Tensor::new(shape, out)?;
        let cache = Box::new(LstmCache {
            n,
            steps,
            hidden,
            input,
            gates,
            cell,
            tanh_cell,
        });
        Ok(self.push(
            value,
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                cache,
            },
            &[x, w_ih, w_hh, b],
        ))
    }

    /// Inverted dropout: in `Train`, zero each element with probability `p` and
    /// scale survivors by `1/(1-p)`; identity in `Eval`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let t = self.value(x).clone();
        if mode == Mode::Eval || p == 0.0 {
            return Ok(self.push(t, Op::Dropout { x, mask: None }, &[x]));
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { x, mask: Some(mask) }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(x), &[x]))
    }

    /// Concatenates `[F_i]` or `[N, F_i]` tensors along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("concat of nothing".into()))?;
        let rank = self.value(*first).rank();
        let n = if rank == 2 { self.value(*first).shape()[0] } else { 1 };
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            match (rank, s) {
                (1, [f]) => widths.push(*f),
                (2, [pn, f]) if *pn == n => widths.push(*f),
                _ => return Err(Error::ShapeMismatch(format!("concat part {s:?}"))),
            }
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for ni in 0..n {
            for (&p, &f) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[ni * f..(ni + 1) * f]);
            }
        }
        let shape = if rank == 1 { vec![total] } else { vec![n, total] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                widths,
            },
            parts,
        ))
    }

    /// `sum_i w_i * x_i` over same-shaped tensors.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let (v0, _) = *terms
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty weighted sum".into()))?;
        let shape = self.value(v0).shape().to_vec();
        let mut out = vec![0.0; self.value(v0).len()];
        for &(v, w) in terms {
            if self.value(v).shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "weighted sum of {shape:?} and {:?}",
                    self.value(v).shape()
                )));
            }
            axpy(w, self.value(v).data(), &mut out);
        }
        let value = Tensor::new(shape, out)?;
        let inputs: Vec<Var> = terms.iter().map(|t| t.0).collect();
        Ok(self.push(value, Op::WeightedSum(terms.to_vec()), &inputs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.weighted_sum(&[(a, 1.0), (b, 1.0)])
    }

    /// Scalar `sum_i x_i * w_i` against constant weights.
    pub fn dot_const(&mut self, x: Var, w: &[f64]) -> Result<Var> {
        if self.value(x).len() != w.len() {
            return Err(Error::ShapeMismatch(format!(
                "dot of {} values with {} weights",
                self.value(x).len(),
                w.len()
            )));
        }
        let v = dot(self.value(x).data(), w);
        Ok(self.push(Tensor::scalar(v), Op::DotConst { x, w: w.to_vec() }, &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let w = vec![1.0; self.value(x).len()];
        self.dot_const(x, &w).expect("matching length")
    }

    /// Mean binary cross-entropy with predictions clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce(&mut self, pred: Var, labels: &[f64]) -> Result<Var> {
        let p = self.value(pred).data();
        if p.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "bce over {} predictions and {} labels",
                p.len(),
                labels.len()
            )));
        }
        let loss = p
            .iter()
            .zip(labels)
            .map(|(&pv, &y)| {
                let q = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
            })
            .sum::<f64>()
            / p.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
            &[pred],
        ))
    }

    /// Mean softmax cross-entropy of `[C]` or `[N, C]` logits.
    pub fn cross_entropy(&mut self, logits: Var, classes: &[usize]) -> Result<Var> {
        let (n, c) = row_dims(self.value(logits).shape());
        if classes.len() != n || classes.iter().any(|&k| k >= c) {
            return Err(Error::ShapeMismatch(format!(
                "cross-entropy over {n}x{c} logits with classes {classes:?}"
            )));
        }
        let d = self.value(logits).data();
        let mut probs = vec![0.0; n * c];
        let mut loss = 0.0;
        for ni in 0..n {
            let row = &d[ni * c..(ni + 1) * c];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            for k in 0..c {
                probs[ni * c + k] = (row[k] - mx).exp() / z;
            }
            loss += -(row[classes[ni]] - mx - z.ln());
        }
        Ok(self.push(
            Tensor::scalar(loss / n as f64),
            Op::CrossEntropy {
                logits,
                classes: classes.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    /// Mean over rows of `1 - CC(row, target_row)`; zero-variance rows count as CC = 0.
    pub fn pearson_loss(&mut self, x: Var, target: &[f64]) -> Result<Var> {
        let (n, l) = row_dims(self.value(x).shape());
        if target.len() != n * l {
            return Err(Error::ShapeMismatch("pearson target length".into()));
        }
        let d = self.value(x).data();
        let loss = (0..n)
            .map(|r| {
                1.0 - crate::sigcore::pearson_unchecked(&d[r * l..(r + 1) * l], &target[r * l..(r + 1) * l])
            })
            .sum::<f64>()
            / n as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::PearsonLoss {
                x,
                target: target.to_vec(),
            },
            &[x],
        ))
    }

    /// Mean over rows of the mean squared difference between sum-normalized power
    /// spectra (DC excluded) of `x` and `target`.
    pub fn spectral_divergence(&mut self, x: Var, target: &[f64]) -> Result<Var> {
        let (n, l) = row_dims(self.value(x).shape());
        if target.len() != n * l {
            return Err(Error::ShapeMismatch("spectral target length".into()));
        }
        if !l.is_power_of_two() || l < 2 {
            return Err(Error::NonPowerOfTwoLength(l));
        }
        let k = l / 2;
        let d = self.value(x).data();
        let mut re = d.to_vec();
        let mut im = vec![0.0; n * l];
        let mut total = vec![0.0; n];
        let mut phat = vec![0.0; n * k];
        let mut tnorm = vec![0.0; n * k];
        let mut loss = 0.0;
        for r in 0..n {
            let (rr, ii) = (&mut re[r * l..(r + 1) * l], &mut im[r * l..(r + 1) * l]);
            fft_in_place(rr, ii, false);
            let p: Vec<f64> = (1..=k).map(|j| rr[j] * rr[j] + ii[j] * ii[j]).collect();
            let s: f64 = p.iter().sum();
            total[r] = s;
            if s > 0.0 {
                for j in 0..k {
                    phat[r * k + j] = p[j] / s;
                }
            }
            let t = normalized_spectrum(&target[r * l..(r + 1) * l]);
            tnorm[r * k..(r + 1) * k].copy_from_slice(&t);
            loss += (0..k)
                .map(|j| (phat[r * k + j] - t[j]).powi(2))
                .sum::<f64>()
                / k as f64;
        }
        let cache = Box::new(SpecCache {
            len: l,
            re,
            im,
            total,
            phat,
            target: tnorm,
        });
        Ok(self.push(
            Tensor::scalar(loss / n as f64),
            Op::SpectralDivergence { x, cache },
            &[x],
        ))
    }

    /// Mean over rows of `-ln(Var(row) + eps)`.
    pub fn neg_log_var(&mut self, x: Var, eps: f64) -> Var {
        let (n, l) = row_dims(self.value(x).shape());
        let d = self.value(x).data();
        let loss = (0..n)
            .map(|r| -(crate::sigcore::variance(&d[r * l..(r + 1) * l]) + eps).ln())
            .sum::<f64>()
            / n as f64;
        self.push(Tensor::scalar(loss), Op::NegLogVar { x, eps }, &[x])
    }

    /// Per-row `scale * ((x - mean(x)) * rho[r] + mean(x) + mu[r])`.
    pub fn row_affine(&mut self, x: Var, rho: &[f64], mu: &[f64], scale: f64) -> Result<Var> {
        let (n, l) = row_dims(self.value(x).shape());
        if rho.len() != n || mu.len() != n {
            return Err(Error::ShapeMismatch("row affine coefficients".into()));
        }
        let t = self.value(x);
        let d = t.data();
        let mut out = vec![0.0; d.len()];
        for r in 0..n {
            let row = &d[r * l..(r + 1) * l];
            let m = crate::sigcore::mean(row);
            for (o, &v) in out[r * l..(r + 1) * l].iter_mut().zip(row) {
                *o = scale * ((v - m) * rho[r] + m + mu[r]);
            }
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(
            value,
            Op::RowAffine {
                x,
                rho: rho.to_vec(),
                scale,
            },
            &[x],
        ))
    }

    /// Reverse sweep from a single-element output.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        if self.value(out).len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar, got {:?}",
                self.value(out).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::filled(self.value(out).shape(), 1.0));
        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
        }
        Ok(Grads {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn zeros_like(&self, v: Var) -> Tensor {
        Tensor::zeros(self.value(v).shape())
    }

    fn send(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if self.needs(v) {
            accumulate(grads, v, g);
        }
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b } => {
                let (n, cin, l) = seq_dims(self.value(*x).shape()).unwrap();
                let ws = self.value(*w).shape();
                let (cout, k) = (ws[0], ws[2]);
                let pad = (k / 2) as isize;
                let xd = self.value(*x).data();
                let wd = self.value(*w).data();
                let mut dx = self.zeros_like(*x);
                let mut dw = self.zeros_like(*w);
                let mut db = self.zeros_like(*b);
                let want_x = self.needs(*x);
                for ni in 0..n {
                    for co in 0..cout {
                        let grow = &gd[(ni * cout + co) * l..(ni * cout + co + 1) * l];
                        db.data_mut()[co] += grow.iter().sum::<f64>();
                        for ci in 0..cin {
                            let xoff = (ni * cin + ci) * l;
                            for kk in 0..k {
                                let s = kk as isize - pad;
                                let (lo, hi) = shifted_range(l, s);
                                if lo >= hi {
                                    continue;
                                }
                                let xs = xoff + (lo as isize + s) as usize;
                                let widx = (co * cin + ci) * k + kk;
                                dw.data_mut()[widx] += dot(&grow[lo..hi], &xd[xs..xs + hi - lo]);
                                if want_x {
                                    axpy(wd[widx], &grow[lo..hi], &mut dx.data_mut()[xs..xs + hi - lo]);
                                }
                            }
                        }
                    }
                }
                if want_x {
                    self.send(grads, *x, dx);
                }
                self.send(grads, *w, dw);
                self.send(grads, *b, db);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let (n, c, l) = seq_dims(self.value(*x).shape()).unwrap();
                let m = (n * l) as f64;
                let gam = self.value(*gamma).data();
                let mut dx = self.zeros_like(*x);
                let mut dgam = vec![0.0; c];
                let mut dbet = vec![0.0; c];
                for ch in 0..c {
                    let (mut sg, mut sgx) = (0.0, 0.0);
                    for ni in 0..n {
                        let r = (ni * c + ch) * l;
                        sg += gd[r..r + l].iter().sum::<f64>();
                        sgx += dot(&gd[r..r + l], &xhat[r..r + l]);
                    }
                    dgam[ch] = sgx;
                    dbet[ch] = sg;
                    let scale = gam[ch] * inv_std[ch];
                    for ni in 0..n {
                        let r = (ni * c + ch) * l;
                        for i in r..r + l {
                            dx.data_mut()[i] = if *train {
                                scale * (gd[i] - sg / m - xhat[i] * sgx / m)
                            } else {
                                scale * gd[i]
                            };
                        }
                    }
                }
                self.send(grads, *x, dx);
                self.send(grads, *gamma, Tensor::vector(&dgam));
                self.send(grads, *beta, Tensor::vector(&dbet));
            }
            Op::Relu(x) => {
                let xd = self.value(*x).data();
                let d = gd.iter().zip(xd).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 });
                self.send(grads, *x, self.like(*x, d.collect()));
            }
            Op::LeakyRelu(x, slope) => {
                let xd = self.value(*x).data();
                let d = gd.iter().zip(xd).map(|(g, &v)| if v > 0.0 { *g } else { slope * g });
                self.send(grads, *x, self.like(*x, d.collect()));
            }
            Op::Sigmoid(x) => {
                let yd = node.value.data();
                let d = gd.iter().zip(yd).map(|(g, y)| g * y * (1.0 - y));
                self.send(grads, *x, self.like(*x, d.collect()));
            }
            Op::Tanh(x) => {
                let yd = node.value.data();
                let d = gd.iter().zip(yd).map(|(g, y)| g * (1.0 - y * y));
                self.send(grads, *x, self.like(*x, d.collect()));
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = self.zeros_like(*x);
                for (gv, &j) in gd.iter().zip(argmax) {
                    dx.data_mut()[j] += gv;
                }
                self.send(grads, *x, dx);
            }
            Op::Upsample2(x) => {
                let d = gd.chunks_exact(2).map(|p| p[0] + p[1]).collect();
                self.send(grads, *x, self.like(*x, d));
            }
            Op::Dense { x, w, b } => {
                let xs = self.value(*x).shape();
                let f = *xs.last().unwrap();
                let n = self.value(*x).len() / f;
                let m = self.value(*b).len();
                let xd = self.value(*x).data();
                let wd = self.value(*w).data();
                let mut dx = self.zeros_like(*x);
                let mut dw = self.zeros_like(*w);
                let mut db = self.zeros_like(*b);
                for ni in 0..n {
                    for mi in 0..m {
                        let gv = gd[ni * m + mi];
                        db.data_mut()[mi] += gv;
                        axpy(gv, &xd[ni * f..(ni + 1) * f], &mut dw.data_mut()[mi * f..(mi + 1) * f]);
                        axpy(gv, &wd[mi * f..(mi + 1) * f], &mut dx.data_mut()[ni * f..(ni + 1) * f]);
                    }
                }
                self.send(grads, *x, dx);
                self.send(grads, *w, dw);
                self.send(grads, *b, db);
            }
            Op::Lstm {
                x,
                w_ih,
                w_hh,
                b,
                cache,
            } => {
                let (dx, dwi, dwh, db) = self.lstm_backward(node, *x, *w_ih, *w_hh, cache, gd);
                self.send(grads, *x, dx);
                self.send(grads, *w_ih, dwi);
                self.send(grads, *w_hh, dwh);
                self.send(grads, *b, db);
            }
            Op::Dropout { x, mask } => {
                let d = match mask {
                    Some(m) => gd.iter().zip(m).map(|(g, m)| g * m).collect(),
                    None => gd.to_vec(),
                };
                self.send(grads, *x, self.like(*x, d));
            }
            Op::Reshape(x) => {
                self.send(grads, *x, self.like(*x, gd.to_vec()));
            }
            Op::Concat { parts, widths } => {
                let total: usize = widths.iter().sum();
                let n = gd.len() / total;
                let mut off = 0;
                for (&p, &f) in parts.iter().zip(widths) {
                    let mut d = Vec::with_capacity(n * f);
                    for ni in 0..n {
                        d.extend_from_slice(&gd[ni * total + off..ni * total + off + f]);
                    }
                    self.send(grads, p, self.like(p, d));
                    off += f;
                }
            }
            Op::WeightedSum(terms) => {
                for &(v, w) in terms {
                    let d = gd.iter().map(|g| g * w).collect();
                    self.send(grads, v, self.like(v, d));
                }
            }
            Op::DotConst { x, w } => {
                let s = gd[0];
                let d = w.iter().map(|w| w * s).collect();
                self.send(grads, *x, self.like(*x, d));
            }
            Op::Bce { pred, labels } => {
                let s = gd[0] / labels.len() as f64;
                let p = self.value(*pred).data();
                let d = p
                    .iter()
                    .zip(labels)
                    .map(|(&pv, &y)| {
                        if pv <= BCE_CLAMP || pv >= 1.0 - BCE_CLAMP {
                            0.0
                        } else {
                            s * (pv - y) / (pv * (1.0 - pv))
                        }
                    })
                    .collect();
                self.send(grads, *pred, self.like(*pred, d));
            }
            Op::CrossEntropy {
                logits,
                classes,
                probs,
            } => {
                let n = classes.len();
                let c = probs.len() / n;
                let s = gd[0] / n as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * s).collect();
                for (ni, &k) in classes.iter().enumerate() {
                    d[ni * c + k] -= s;
                }
                self.send(grads, *logits, self.like(*logits, d));
            }
            Op::PearsonLoss { x, target } => {
                let (n, l) = row_dims(self.value(*x).shape());
                let xd = self.value(*x).data();
                let s = gd[0] / n as f64;
                let mut d = vec![0.0; n * l];
                for r in 0..n {
                    pearson_grad(
                        &xd[r * l..(r + 1) * l],
                        &target[r * l..(r + 1) * l],
                        -s,
                        &mut d[r * l..(r + 1) * l],
                    );
                }
                self.send(grads, *x, self.like(*x, d));
            }
            Op::SpectralDivergence { x, cache } => {
                let d = spectral_grad(cache, gd[0]);
                self.send(grads, *x, self.like(*x, d));
            }
            Op::NegLogVar { x, eps } => {
                let (n, l) = row_dims(self.value(*x).shape());
                let xd = self.value(*x).data();
                let s = gd[0] / n as f64;
                let mut d = vec![0.0; n * l];
                for r in 0..n {
                    let row = &xd[r * l..(r + 1) * l];
                    let m = crate::sigcore::mean(row);
                    let v = crate::sigcore::variance(row);
                    let c = -s / (v + eps) * 2.0 / l as f64;
                    for (o, &xv) in d[r * l..(r + 1) * l].iter_mut().zip(row) {
                        *o = c * (xv - m);
                    }
                }
                self.send(grads, *x, self.like(*x, d));
            }
            Op::RowAffine { x, rho, scale } => {
                let (n, l) = row_dims(self.value(*x).shape());
                let mut d = vec![0.0; n * l];
                for r in 0..n {
                    let grow = &gd[r * l..(r + 1) * l];
                    let gm = crate::sigcore::mean(grow);
                    for (o, gv) in d[r * l..(r + 1) * l].iter_mut().zip(grow) {
                        *o = scale * (rho[r] * gv + (1.0 - rho[r]) * gm);
                    }
                }
                self.send(grads, *x, self.like(*x, d));
            }
        }
    }

    fn like(&self, v: Var, data: Vec<f64>) -> Tensor {
        Tensor::new(self.value(v).shape().to_vec(), data).expect("gradient matches value shape")
    }

    #[allow(clippy::type_complexity)]
    fn lstm_backward(
        &self,
        node: &Node,
        x: Var,
        w_ih: Var,
        w_hh: Var,
        cache: &LstmCache,
        gd: &[f64],
    ) -> (Tensor, Tensor, Tensor, Tensor) {
        let LstmCache {
            n,
            steps,
            hidden: h,
            input: d,
            ..
        } = *cache;
        let h4 = 4 * h;
        let xd = self.value(x).data();
        let wi = self.value(w_ih).data();
        let wh = self.value(w_hh).data();
        let out = node.value.data();
        let mut dx = vec![0.0; xd.len()];
        let mut dwi = vec![0.0; wi.len()];
        let mut dwh = vec![0.0; wh.len()];
        let mut db = vec![0.0; h4];
        let zeros = vec![0.0; h];
        let mut dz = vec![0.0; h4];
        for ni in 0..n {
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for t in (0..steps).rev() {
                let base = ni * steps + t;
                let gates = &cache.gates[base * h4..(base + 1) * h4];
                let tc = &cache.tanh_cell[base * h..(base + 1) * h];
                let (h_prev, c_prev) = if t == 0 {
                    (&zeros[..], &zeros[..])
                } else {
                    (
                        &out[(base - 1) * h..base * h],
                        &cache.cell[(base - 1) * h..base * h],
                    )
                };
                for u in 0..h {
                    let (ig, fg, gg, og) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
                    let dh = gd[base * h + u] + dh_next[u];
                    let dc = dh * og * (1.0 - tc[u] * tc[u]) + dc_next[u];
                    dz[u] = dc * gg * ig * (1.0 - ig);
                    dz[h + u] = dc * c_prev[u] * fg * (1.0 - fg);
                    dz[2 * h + u] = dc * ig * (1.0 - gg * gg);
                    dz[3 * h + u] = dh * tc[u] * og * (1.0 - og);
                    dc_next[u] = dc * fg;
                }
                let xt = &xd[base * d..(base + 1) * d];
                dh_next.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..h4 {
                    let z = dz[j];
                    if z == 0.0 {
                        continue;
                    }
                    db[j] += z;
                    axpy(z, xt, &mut dwi[j * d..(j + 1) * d]);
                    axpy(z, h_prev, &mut dwh[j * h..(j + 1) * h]);
                    axpy(z, &wi[j * d..(j + 1) * d], &mut dx[base * d..(base + 1) * d]);
                    axpy(z, &wh[j * h..(j + 1) * h], &mut dh_next);
                }
            }
        }
        (
            self.like(x, dx),
            self.like(w_ih, dwi),
            self.like(w_hh, dwh),
            Tensor::vector(&db),
        )
    }
}

/// Output index range `[lo, hi)` whose shifted input `l + s` stays in bounds.
fn shifted_range(l: usize, s: isize) -> (usize, usize) {
    let lo = (-s).max(0) as usize;
    let hi = (l as isize - s.max(0)).max(0) as usize;
    (lo.min(l), hi)
}

/// Writes `scale * dCC/dx` into `out`.
fn pearson_grad(x: &[f64], t: &[f64], scale: f64, out: &mut [f64]) {
    let mx = crate::sigcore::mean(x);
    let mt = crate::sigcore::mean(t);
    let (mut sxt, mut sxx, mut stt) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(t) {
        sxt += (a - mx) * (b - mt);
        sxx += (a - mx) * (a - mx);
        stt += (b - mt) * (b - mt);
    }
    if sxx == 0.0 || stt == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let norm = (sxx * stt).sqrt();
    let cc = sxt / norm;
    for ((o, a), b) in out.iter_mut().zip(x).zip(t) {
        *o = scale * ((b - mt) / norm - cc * (a - mx) / sxx);
    }
}

/// Sum-normalized power spectrum of bins `1..=L/2`.
pub(crate) fn normalized_spectrum(x: &[f64]) -> Vec<f64> {
    let l = x.len();
    let mut re = x.to_vec();
    let mut im = vec![0.0; l];
    fft_in_place(&mut re, &mut im, false);
    let p: Vec<f64> = (1..=l / 2).map(|j| re[j] * re[j] + im[j] * im[j]).collect();
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter().map(|v| v / s).collect()
    } else {
        vec![0.0; p.len()]
    }
}

fn spectral_grad(c: &SpecCache, upstream: f64) -> Vec<f64> {
    let l = c.len;
    let k = l / 2;
    let n = c.total.len();
    let mut out = vec![0.0; n * l];
    let scale = upstream / n as f64;
    for r in 0..n {
        let s = c.total[r];
        if s <= 0.0 {
            continue;
        }
        let ph = &c.phat[r * k..(r + 1) * k];
        let th = &c.target[r * k..(r + 1) * k];
        // dL/dphat, then through the sum normalization to dL/dP
        let gh: Vec<f64> = (0..k)
            .map(|j| scale * 2.0 * (ph[j] - th[j]) / k as f64)
            .collect();
        let proj: f64 = gh.iter().zip(ph).map(|(g, p)| g * p).sum();
        let mut zr = vec![0.0; l];
        let mut zi = vec![0.0; l];
        for j in 0..k {
            let hp = (gh[j] - proj) / s;
            let bin = j + 1;
            zr[bin] = 2.0 * hp * c.re[r * l + bin];
            zi[bin] = 2.0 * hp * c.im[r * l + bin];
        }
        fft_in_place(&mut zr, &mut zi, true);
        out[r * l..(r + 1) * l].copy_from_slice(&zr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_range_bounds() {
        assert_eq!(shifted_range(5, 0), (0, 5));
        assert_eq!(shifted_range(5, -2), (2, 5));
        assert_eq!(shifted_range(5, 2), (0, 3));
        assert_eq!(shifted_range(2, 3), (0, 0));
    }

    #[test]
    fn conv_hand_example() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![1, 3], vec![1., 2., 3.]).unwrap());
        let w = t.leaf(Tensor::new(vec![1, 1, 3], vec![1., 0., -1.]).unwrap());
        let b = t.leaf(Tensor::vector(&[0.0]));
        let y = t.conv1d(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[-2., -2., 2.]);
    }

    #[test]
    fn conv_delta_and_bias() {
        let mut t = Tape::new();
        let data = vec![0.5, -1.0, 2.0, 4.0, 1.5];
        let x = t.leaf(Tensor::new(vec![1, 5], data.clone()).unwrap());
        let w = t.leaf(Tensor::new(vec![1, 1, 5], vec![0., 0., 1., 0., 0.]).unwrap());
        let b = t.leaf(Tensor::vector(&[0.0]));
        let y = t.conv1d(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), data.as_slice());

        let w0 = t.leaf(Tensor::zeros(&[2, 1, 3]));
        let b0 = t.leaf(Tensor::vector(&[1.5, -2.0]));
        let y0 = t.conv1d(x, w0, b0).unwrap();
        assert_eq!(&t.value(y0).data()[..5], &[1.5; 5]);
        assert_eq!(&t.value(y0).data()[5..], &[-2.0; 5]);
    }

    #[test]
    fn even_kernel_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(&[1, 4]));
        let w = t.leaf(Tensor::zeros(&[1, 1, 2]));
        let b = t.leaf(Tensor::zeros(&[1]));
        assert!(matches!(t.conv1d(x, w, b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn activations() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[-1.0, 2.0, 0.0, -2.0]));
        let r = t.relu(x);
        let s = t.sigmoid(x);
        let l = t.leaky_relu(x, 0.2);
        assert_eq!(t.value(r).data(), &[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(t.value(s).data()[2], 0.5);
        assert!((t.value(l).data()[3] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn maxpool_routes_to_argmax() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[1., 3., 2., 2.]));
        let y = t.maxpool2(x).unwrap();
        assert_eq!(t.value(y).data(), &[3., 2.]);
        let o = t.dot_const(y, &[1.0, 0.0]).unwrap();
        let g = t.backward(o).unwrap();
        assert_eq!(g.wrt(x).data(), &[0., 1., 0., 0.]);
        let o2 = t.dot_const(y, &[0.0, 1.0]).unwrap();
        let g2 = t.backward(o2).unwrap();
        assert_eq!(g2.wrt(x).data(), &[0., 0., 1., 0.]);
        let odd = t.leaf(Tensor::vector(&[1., 2., 3.]));
        assert!(matches!(t.maxpool2(odd), Err(Error::OddLength(3))));
    }

    #[test]
    fn upsample_then_pool_is_identity() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[1., 2.]));
        let u = t.upsample2(x);
        assert_eq!(t.value(u).data(), &[1., 1., 2., 2.]);
        let p = t.maxpool2(u).unwrap();
        assert_eq!(t.value(p).data(), &[1., 2.]);
    }

    #[test]
    fn dense_identity_and_constant() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[1., -2., 3.]));
        let eye = t.leaf(Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap());
        let zb = t.leaf(Tensor::zeros(&[3]));
        let y = t.dense(x, eye, zb).unwrap();
        assert_eq!(t.value(y).data(), &[1., -2., 3.]);
        let zw = t.leaf(Tensor::zeros(&[2, 3]));
        let cb = t.leaf(Tensor::vector(&[4.0, 5.0]));
        let y2 = t.dense(x, zw, cb).unwrap();
        assert_eq!(t.value(y2).data(), &[4.0, 5.0]);
    }

    #[test]
    fn lstm_zero_weights_zero_hidden() {
        let (l, d, h) = (6, 3, 4);
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(&[l, d]));
        let wi = t.leaf(Tensor::zeros(&[4 * h, d]));
        let wh = t.leaf(Tensor::zeros(&[4 * h, h]));
        let mut bias = vec![0.0; 4 * h];
        bias[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        let b = t.leaf(Tensor::vector(&bias));
        let y = t.lstm(x, wi, wh, b).unwrap();
        assert_eq!(t.value(y).shape(), &[l, h]);
        assert!(t.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batchnorm_gamma_zero_gives_beta() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![2, 4], vec![1., 5., 2., 8., -1., 0., 3., 3.]).unwrap());
        let g = t.leaf(Tensor::zeros(&[2]));
        let b = t.leaf(Tensor::vector(&[0.25, -3.0]));
        let mut stats = RunningStats::new(2);
        let y = t.batchnorm1d(x, g, b, Mode::Train, &mut stats).unwrap();
        assert_eq!(&t.value(y).data()[..4], &[0.25; 4]);
        assert_eq!(&t.value(y).data()[4..], &[-3.0; 4]);
    }

    #[test]
    fn batchnorm_standardized_input_passes_through() {
        // zero mean, unit population variance per channel
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![1, 4], vec![1., -1., 1., -1.]).unwrap());
        let g = t.leaf(Tensor::vector(&[1.0]));
        let b = t.leaf(Tensor::vector(&[0.0]));
        let mut stats = RunningStats::new(1);
        let y = t.batchnorm1d(x, g, b, Mode::Train, &mut stats).unwrap();
        let expect = 1.0 / (1.0 + BN_EPS).sqrt();
        for (o, i) in t.value(y).data().iter().zip([1., -1., 1., -1.]) {
            assert!((o - i * expect).abs() < 1e-15);
            assert!((o - i).abs() < 1e-5);
        }
        // running statistics moved 10% toward the batch
        assert!((stats.var[0] - 1.0).abs() < 1e-15);
        assert_eq!(stats.mean[0], 0.0);
    }

    #[test]
    fn batchnorm_needs_two_positions() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::zeros(&[1, 1]));
        let g = t.leaf(Tensor::vector(&[1.0]));
        let b = t.leaf(Tensor::vector(&[0.0]));
        let mut stats = RunningStats::new(1);
        assert!(matches!(
            t.batchnorm1d(x, g, b, Mode::Train, &mut stats),
            Err(Error::DegenerateBatch(1))
        ));
        assert!(t.batchnorm1d(x, g, b, Mode::Eval, &mut stats).is_ok());
    }

    #[test]
    fn dropout_identities() {
        let mut rng = rand::rng();
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[1., 2., 3.]));
        let a = t.dropout(x, 0.0, Mode::Train, &mut rng).unwrap();
        let b = t.dropout(x, 0.7, Mode::Eval, &mut rng).unwrap();
        assert_eq!(t.value(a).data(), &[1., 2., 3.]);
        assert_eq!(t.value(b).data(), &[1., 2., 3.]);
        assert!(matches!(
            t.dropout(x, 1.0, Mode::Train, &mut rng),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn bce_values() {
        let mut t = Tape::new();
        let p = t.leaf(Tensor::vector(&[0.5]));
        let l = t.bce(p, &[1.0]).unwrap();
        assert!((t.value(l).item() - std::f64::consts::LN_2).abs() < 1e-15);
        let q = t.leaf(Tensor::vector(&[1.0 - 1e-7]));
        let l2 = t.bce(q, &[1.0]).unwrap();
        assert!((t.value(l2).item() - 1e-7).abs() < 1e-12);
        let r = t.leaf(Tensor::vector(&[1.0]));
        let l3 = t.bce(r, &[1.0]).unwrap();
        assert!((t.value(l3).item() - 1e-7).abs() < 1e-12);
    }

    #[test]
    fn fan_out_accumulates_exactly() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[0.3, -0.7, 1.1]));
        let s1 = t.sigmoid(x);
        let one = t.sum(s1);
        let g1 = t.backward(one).unwrap().wrt(x);

        let mut t2 = Tape::new();
        let x2 = t2.leaf(Tensor::vector(&[0.3, -0.7, 1.1]));
        let a = t2.sigmoid(x2);
        let b = t2.sigmoid(x2);
        let s = t2.add(a, b).unwrap();
        let two = t2.sum(s);
        let g2 = t2.backward(two).unwrap().wrt(x2);
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(&[1.0, 2.0]));
        assert!(t.backward(x).is_err());
    }
}
