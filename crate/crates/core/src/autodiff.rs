//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! Activations are `(channels, time)` matrices. Conv kernels are stored as
//! `(out, in * kernel)` so a convolution is one matrix product against an
//! im2col buffer. Column vectors `(n, 1)` carry per-channel parameters.

use std::f64::consts::{LN_10, PI};
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const NORM_EPS: f64 = 1e-5;

static NEXT_GRAPH: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of one particular [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: usize,
    graph: u64,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d { x: usize, w: usize, kernel: usize, stride: usize },
    SharedConv { x: usize, w: usize, kernel: usize, stride: usize },
    Abs(usize),
    Gelu(usize),
    /// Statistics over time per channel.
    GroupNorm { x: usize, scale: usize, offset: usize, xhat: Array2<f64>, inv_std: Vec<f64> },
    /// Statistics over channels per frame.
    LayerNorm { x: usize, scale: usize, offset: usize, xhat: Array2<f64>, inv_std: Vec<f64> },
    Linear { x: usize, w: usize, b: Option<usize> },
    RowAffine { x: usize, scale: usize, offset: usize },
    Log10 { x: usize, eps: f64 },
    Add(usize, usize),
    Mul(usize, usize),
    Sum(usize),
    SliceCols { x: usize, start: usize },
    Mse { a: usize, target: Array2<f64> },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// A recorded forward computation.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients returned by [`Graph::backward`], indexed by the leaf [`Var`]s.
#[derive(Debug)]
pub struct Gradients {
    graph: u64,
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of a leaf created with [`Graph::param`]. Parameters that do
    /// not influence the loss get a zero gradient.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        if v.graph != self.graph {
            return None;
        }
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        if v.graph != self.graph {
            return None;
        }
        self.grads.get_mut(v.id).and_then(|g| g.take())
    }
}

fn im2col(x: ArrayView2<f64>, kernel: usize, stride: usize, t_out: usize) -> Array2<f64> {
    let c_in = x.nrows();
    let mut cols = Array2::zeros((c_in * kernel, t_out));
    for ci in 0..c_in {
        let row = x.row(ci);
        for k in 0..kernel {
            let mut dst = cols.row_mut(ci * kernel + k);
            for t in 0..t_out {
                dst[t] = row[t * stride + k];
            }
        }
    }
    cols
}

fn col2im_add(dcols: &Array2<f64>, dx: &mut Array2<f64>, kernel: usize, stride: usize, t_out: usize) {
    for ci in 0..dx.nrows() {
        for k in 0..kernel {
            let src = dcols.row(ci * kernel + k);
            let mut dst = dx.row_mut(ci);
            for t in 0..t_out {
                dst[t * stride + k] += src[t];
            }
        }
    }
}

/// Columns are `c * t_out + t` so one product applies every shared filter
/// to every channel.
fn shared_im2col(x: ArrayView2<f64>, kernel: usize, stride: usize, t_out: usize) -> Array2<f64> {
    let channels = x.nrows();
    let mut cols = Array2::zeros((kernel, channels * t_out));
    for c in 0..channels {
        let row = x.row(c);
        for k in 0..kernel {
            for t in 0..t_out {
                cols[[k, c * t_out + t]] = row[t * stride + k];
            }
        }
    }
    cols
}

pub fn conv_output_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    if len < kernel || stride == 0 {
        None
    } else {
        Some((len - kernel) / stride + 1)
    }
}

fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)) + x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Normalizes each row of `x`; returns (xhat, inv_std per row).
fn normalize_rows(x: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>) {
    let n = x.ncols() as f64;
    let mut xhat = x.to_owned();
    let mut inv = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * is);
        inv.push(is);
    }
    (xhat, inv)
}

/// Backward of row normalization given `dxhat`.
fn normalize_rows_backward(xhat: ArrayView2<f64>, inv_std: &[f64], dxhat: ArrayView2<f64>) -> Array2<f64> {
    let n = xhat.ncols() as f64;
    let mut dx = Array2::zeros(xhat.dim());
    for (r, &inv) in inv_std.iter().enumerate() {
        let (xh, dh) = (xhat.row(r), dxhat.row(r));
        let sum_d = dh.sum();
        let sum_dx = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>();
        let scale = inv / n;
        let mut out = dx.row_mut(r);
        for t in 0..xh.len() {
            out[t] = scale * (n * dh[t] - sum_d - xh[t] * sum_dx);
        }
    }
    dx
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            id: self.nodes.len() - 1,
            graph: self.id,
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.graph, self.id, "variable belongs to another graph");
        v.id
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[self.idx(v)].value
    }

    /// Signs of every `abs` input recorded so far, in recording order.
    /// Two passes whose signatures differ lie on opposite sides of a kink.
    pub fn kink_signature(&self) -> Vec<i8> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Abs(x) => Some(&self.nodes[x].value),
                _ => None,
            })
            .flat_map(|v| v.iter().map(|&x| sign(x) as i8))
            .collect()
    }

    pub fn into_value(mut self, v: Var) -> Array2<f64> {
        let i = self.idx(v);
        std::mem::take(&mut self.nodes[i].value)
    }

    /// Valid strided cross-correlation without bias.
    /// `x: (c_in, T)`, `w: (c_out, c_in * kernel)`.
    pub fn conv1d(&mut self, x: Var, w: Var, kernel: usize, stride: usize) -> Result<Var> {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let xv = &self.nodes[xi].value;
        let wv = &self.nodes[wi].value;
        if wv.ncols() != xv.nrows() * kernel {
            return Err(Error::ShapeMismatch(format!(
                "conv kernel {:?} vs input channels {} x kernel {kernel}",
                wv.dim(),
                xv.nrows()
            )));
        }
        let t_out = conv_output_len(xv.ncols(), kernel, stride).ok_or(Error::InputTooShort {
            needed: kernel,
            got: xv.ncols(),
        })?;
        let cols = im2col(xv.view(), kernel, stride, t_out);
        let y = wv.dot(&cols);
        let rg = self.rg(&[xi, wi]);
        Ok(self.push(y, Op::Conv1d { x: xi, w: wi, kernel, stride }, rg))
    }

    /// Applies each row of `w: (filters, kernel)` to every channel of
    /// `x: (channels, T)` separately. Output row `f * channels + c`.
    pub fn shared_conv(&mut self, x: Var, w: Var, kernel: usize, stride: usize) -> Result<Var> {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let xv = &self.nodes[xi].value;
        let wv = &self.nodes[wi].value;
        if wv.ncols() != kernel {
            return Err(Error::ShapeMismatch(format!(
                "shared filters {:?} vs kernel {kernel}",
                wv.dim()
            )));
        }
        let t_out = conv_output_len(xv.ncols(), kernel, stride).ok_or(Error::InputTooShort {
            needed: kernel,
            got: xv.ncols(),
        })?;
        let channels = xv.nrows();
        let filters = wv.nrows();
        let y_all = wv.dot(&shared_im2col(xv.view(), kernel, stride, t_out));
        let mut y = Array2::zeros((filters * channels, t_out));
        for f in 0..filters {
            for c in 0..channels {
                y.row_mut(f * channels + c)
                    .assign(&y_all.row(f).slice(ndarray::s![c * t_out..(c + 1) * t_out]));
            }
        }
        let rg = self.rg(&[xi, wi]);
        Ok(self.push(y, Op::SharedConv { x: xi, w: wi, kernel, stride }, rg))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let xi = self.idx(x);
        let y = self.nodes[xi].value.mapv(f64::abs);
        let rg = self.rg(&[xi]);
        self.push(y, Op::Abs(xi), rg)
    }

    /// Exact (erf) GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let xi = self.idx(x);
        let y = self.nodes[xi].value.mapv(gelu);
        let rg = self.rg(&[xi]);
        self.push(y, Op::Gelu(xi), rg)
    }

    /// Per-channel normalization over time, `scale`/`offset: (c, 1)`.
    pub fn group_norm(&mut self, x: Var, scale: Var, offset: Var) -> Result<Var> {
        let (xi, si, oi) = (self.idx(x), self.idx(scale), self.idx(offset));
        let (xhat, inv_std) = normalize_rows(self.nodes[xi].value.view());
        let y = self.affine_rows(&xhat, si, oi)?;
        let rg = self.rg(&[xi, si, oi]);
        Ok(self.push(y, Op::GroupNorm { x: xi, scale: si, offset: oi, xhat, inv_std }, rg))
    }

    /// Per-frame normalization over channels, `scale`/`offset: (c, 1)`.
    pub fn layer_norm(&mut self, x: Var, scale: Var, offset: Var) -> Result<Var> {
        let (xi, si, oi) = (self.idx(x), self.idx(scale), self.idx(offset));
        let (xhat_t, inv_std) = normalize_rows(self.nodes[xi].value.t());
        let xhat = xhat_t.reversed_axes();
        let y = self.affine_rows(&xhat, si, oi)?;
        let rg = self.rg(&[xi, si, oi]);
        Ok(self.push(y, Op::LayerNorm { x: xi, scale: si, offset: oi, xhat, inv_std }, rg))
    }

    fn affine_rows(&self, x: &Array2<f64>, si: usize, oi: usize) -> Result<Array2<f64>> {
        let s = &self.nodes[si].value;
        let o = &self.nodes[oi].value;
        if s.dim() != (x.nrows(), 1) || o.dim() != (x.nrows(), 1) {
            return Err(Error::ShapeMismatch(format!(
                "affine parameters {:?}/{:?} for {} channels",
                s.dim(),
                o.dim(),
                x.nrows()
            )));
        }
        Ok(x * s + o)
    }

    /// Per-row scale and offset, `(c, 1)` each.
    pub fn row_affine(&mut self, x: Var, scale: Var, offset: Var) -> Result<Var> {
        let (xi, si, oi) = (self.idx(x), self.idx(scale), self.idx(offset));
        let y = self.affine_rows(&self.nodes[xi].value, si, oi)?;
        let rg = self.rg(&[xi, si, oi]);
        Ok(self.push(y, Op::RowAffine { x: xi, scale: si, offset: oi }, rg))
    }

    /// `w · x + b` with `w: (d, c)`, `b: (d, 1)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xi, wi) = (self.idx(x), self.idx(w));
        let bi = b.map(|b| self.idx(b));
        let (xv, wv) = (&self.nodes[xi].value, &self.nodes[wi].value);
        if wv.ncols() != xv.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "linear {:?} applied to {:?}",
                wv.dim(),
                xv.dim()
            )));
        }
        let mut y = wv.dot(xv);
        if let Some(bi) = bi {
            let bv = &self.nodes[bi].value;
            if bv.dim() != (y.nrows(), 1) {
                return Err(Error::ShapeMismatch(format!("bias {:?}", bv.dim())));
            }
            y += bv;
        }
        let mut deps = vec![xi, wi];
        deps.extend(bi);
        let rg = self.rg(&deps);
        Ok(self.push(y, Op::Linear { x: xi, w: wi, b: bi }, rg))
    }

    /// `log10(x + eps)`.
    pub fn log10(&mut self, x: Var, eps: f64) -> Var {
        let xi = self.idx(x);
        let y = self.nodes[xi].value.mapv(|v| (v + eps).log10());
        let rg = self.rg(&[xi]);
        self.push(y, Op::Log10 { x: xi, eps }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.same_shape(ai, bi)?;
        let y = &self.nodes[ai].value + &self.nodes[bi].value;
        let rg = self.rg(&[ai, bi]);
        Ok(self.push(y, Op::Add(ai, bi), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        self.same_shape(ai, bi)?;
        let y = &self.nodes[ai].value * &self.nodes[bi].value;
        let rg = self.rg(&[ai, bi]);
        Ok(self.push(y, Op::Mul(ai, bi), rg))
    }

    fn same_shape(&self, a: usize, b: usize) -> Result<()> {
        let (da, db) = (self.nodes[a].value.dim(), self.nodes[b].value.dim());
        if da != db {
            return Err(Error::ShapeMismatch(format!("{da:?} vs {db:?}")));
        }
        Ok(())
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let xi = self.idx(x);
        let y = Array2::from_elem((1, 1), self.nodes[xi].value.sum());
        let rg = self.rg(&[xi]);
        self.push(y, Op::Sum(xi), rg)
    }

    /// Columns `start..start + len` (a window of frames).
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xi = self.idx(x);
        let xv = &self.nodes[xi].value;
        if start + len > xv.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "columns {start}..{} of {}",
                start + len,
                xv.ncols()
            )));
        }
        let y = xv.slice(ndarray::s![.., start..start + len]).to_owned();
        let rg = self.rg(&[xi]);
        Ok(self.push(y, Op::SliceCols { x: xi, start }, rg))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, a: Var, target: Array2<f64>) -> Result<Var> {
        let ai = self.idx(a);
        let av = &self.nodes[ai].value;
        if av.dim() != target.dim() {
            return Err(Error::ShapeMismatch(format!(
                "prediction {:?} vs target {:?}",
                av.dim(),
                target.dim()
            )));
        }
        let n = av.len() as f64;
        let loss = av
            .iter()
            .zip(target.iter())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let rg = self.rg(&[ai]);
        Ok(self.push(Array2::from_elem((1, 1), loss), Op::Mse { a: ai, target }, rg))
    }

    /// Reverse sweep from a scalar `loss`; consumes the graph.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if loss.graph != self.id || loss.id >= self.nodes.len() {
            return Err(Error::NoGraph);
        }
        if self.nodes[loss.id].value.dim() != (1, 1) {
            return Err(Error::NoGraph);
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], nodes: &[Node], i: usize, g: Array2<f64>) {
            if !nodes[i].requires_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.id).rev() {
            if !nodes[i].requires_grad {
                continue;
            }
            if matches!(nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            match &nodes[i].op {
                Op::Leaf => unreachable!(),
                Op::Conv1d { x, w, kernel, stride } => {
                    let xv = &nodes[*x].value;
                    let t_out = dy.ncols();
                    let cols = im2col(xv.view(), *kernel, *stride, t_out);
                    if nodes[*w].requires_grad {
                        acc(&mut grads, &nodes, *w, dy.dot(&cols.t()));
                    }
                    if nodes[*x].requires_grad {
                        let dcols = nodes[*w].value.t().dot(&dy);
                        let mut dx = Array2::zeros(xv.dim());
                        col2im_add(&dcols, &mut dx, *kernel, *stride, t_out);
                        acc(&mut grads, &nodes, *x, dx);
                    }
                }
                Op::SharedConv { x, w, kernel, stride } => {
                    let xv = &nodes[*x].value;
                    let (channels, t_out) = (xv.nrows(), dy.ncols());
                    let filters = nodes[*w].value.nrows();
                    let mut dy_all = Array2::zeros((filters, channels * t_out));
                    for f in 0..filters {
                        for c in 0..channels {
                            dy_all
                                .row_mut(f)
                                .slice_mut(ndarray::s![c * t_out..(c + 1) * t_out])
                                .assign(&dy.row(f * channels + c));
                        }
                    }
                    if nodes[*w].requires_grad {
                        let cols = shared_im2col(xv.view(), *kernel, *stride, t_out);
                        acc(&mut grads, &nodes, *w, dy_all.dot(&cols.t()));
                    }
                    if nodes[*x].requires_grad {
                        let dcols = nodes[*w].value.t().dot(&dy_all);
                        let mut dx = Array2::zeros(xv.dim());
                        for c in 0..channels {
                            for k in 0..*kernel {
                                for t in 0..t_out {
                                    dx[[c, t * stride + k]] += dcols[[k, c * t_out + t]];
                                }
                            }
                        }
                        acc(&mut grads, &nodes, *x, dx);
                    }
                }
                Op::Abs(x) => {
                    let dx = &dy * &nodes[*x].value.mapv(sign);
                    acc(&mut grads, &nodes, *x, dx);
                }
                Op::Gelu(x) => {
                    let dx = &dy * &nodes[*x].value.mapv(gelu_derivative);
                    acc(&mut grads, &nodes, *x, dx);
                }
                Op::GroupNorm { x, scale, offset, xhat, inv_std } => {
                    let s = &nodes[*scale].value;
                    if nodes[*scale].requires_grad {
                        acc(&mut grads, &nodes, *scale, (&dy * xhat).sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if nodes[*offset].requires_grad {
                        acc(&mut grads, &nodes, *offset, dy.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if nodes[*x].requires_grad {
                        let dxhat = &dy * s;
                        acc(&mut grads, &nodes, *x, normalize_rows_backward(xhat.view(), inv_std, dxhat.view()));
                    }
                }
                Op::LayerNorm { x, scale, offset, xhat, inv_std } => {
                    let s = &nodes[*scale].value;
                    if nodes[*scale].requires_grad {
                        acc(&mut grads, &nodes, *scale, (&dy * xhat).sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if nodes[*offset].requires_grad {
                        acc(&mut grads, &nodes, *offset, dy.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if nodes[*x].requires_grad {
                        let dxhat = &dy * s;
                        let dx_t = normalize_rows_backward(xhat.t(), inv_std, dxhat.t());
                        acc(&mut grads, &nodes, *x, dx_t.reversed_axes());
                    }
                }
                Op::RowAffine { x, scale, offset } => {
                    let s = &nodes[*scale].value;
                    if nodes[*scale].requires_grad {
                        let g = (&dy * &nodes[*x].value).sum_axis(Axis(1)).insert_axis(Axis(1));
                        acc(&mut grads, &nodes, *scale, g);
                    }
                    if nodes[*offset].requires_grad {
                        acc(&mut grads, &nodes, *offset, dy.sum_axis(Axis(1)).insert_axis(Axis(1)));
                    }
                    if nodes[*x].requires_grad {
                        acc(&mut grads, &nodes, *x, &dy * s);
                    }
                }
                Op::Linear { x, w, b } => {
                    if nodes[*w].requires_grad {
                        acc(&mut grads, &nodes, *w, dy.dot(&nodes[*x].value.t()));
                    }
                    if let Some(b) = b {
                        if nodes[*b].requires_grad {
                            acc(&mut grads, &nodes, *b, dy.sum_axis(Axis(1)).insert_axis(Axis(1)));
                        }
                    }
                    if nodes[*x].requires_grad {
                        acc(&mut grads, &nodes, *x, nodes[*w].value.t().dot(&dy));
                    }
                }
                Op::Log10 { x, eps } => {
                    let dx = &dy * &nodes[*x].value.mapv(|v| 1.0 / ((v + eps) * LN_10));
                    acc(&mut grads, &nodes, *x, dx);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, &nodes, *a, dy.clone());
                    acc(&mut grads, &nodes, *b, dy);
                }
                Op::Mul(a, b) => {
                    let da = &dy * &nodes[*b].value;
                    let db = &dy * &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, da);
                    acc(&mut grads, &nodes, *b, db);
                }
                Op::Sum(x) => {
                    let g = dy[[0, 0]];
                    acc(&mut grads, &nodes, *x, Array2::from_elem(nodes[*x].value.dim(), g));
                }
                Op::SliceCols { x, start } => {
                    let mut dx = Array2::zeros(nodes[*x].value.dim());
                    dx.slice_mut(ndarray::s![.., *start..*start + dy.ncols()]).assign(&dy);
                    acc(&mut grads, &nodes, *x, dx);
                }
                Op::Mse { a, target } => {
                    let av = &nodes[*a].value;
                    let scale = 2.0 * dy[[0, 0]] / av.len() as f64;
                    acc(&mut grads, &nodes, *a, (av - target) * scale);
                }
            }
        }

        // Leaves that require grad but were never reached get zeros.
        for (i, node) in nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[i].is_none() {
                grads[i] = Some(Array2::zeros(node.value.dim()));
            }
        }
        Ok(Gradients {
            graph: self.id,
            grads,
        })
    }
}
