//! Dense f64 tensors with reverse-mode differentiation on a tape.
//!
//! A `Tape` is an append-only arena of nodes; every operation records its
//! inputs and output so `backward` can sweep the arena in reverse and
//! accumulate gradients. Shapes are explicit extent lists: matrices are
//! `[rows, cols]`, feature maps are `[channels, height, width]`, scalars are
//! `[1]`. All data is 64-bit so finite-difference checks can run at tight
//! tolerances.
//!
//! Gradients only flow where they are needed: a node "requires" gradient if
//! any of its inputs does, and backward skips contributions into inputs that
//! do not. Binding a frozen network's weights as non-requiring leaves
//! therefore differentiates through it for free.
//!
//! Convolution output sizes follow the usual floor rule
//! `(in + 2*pad - k) / stride + 1`, which is what makes a 3x3 stride-2
//! pad-1 block halve even extents (and hold 1x1 maps at 1x1).

use crate::error::{Error, Result};

/// Handle to a tape node. Only meaningful for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// Add a length-r bias vector to every column of an (r, c) matrix.
    BiasCol(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    /// Softmax down each column of a 2-D matrix.
    SoftmaxAxis0(Var),
    /// Layer normalization down each column, with trainable per-row scale
    /// and shift. Forward-pass statistics are cached for the backward sweep.
    LayerNormAxis0 { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Conv2d { x: Var, w: Var, stride: usize, pad: usize },
    Upsample2x(Var),
    ConcatChannels(Vec<Var>),
    SliceCols { x: Var, from: usize, to: usize },
    ConcatCols(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    Mean(Var),
    Sum(Var),
    /// Mean binary cross entropy against a constant target, probabilities
    /// clamped to [1e-7, 1 - 1e-7] (gradient zero where the clamp binds).
    Bce { p: Var, target: Vec<f64> },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    requires: bool,
}

pub const BCE_CLAMP: f64 = 1e-7;

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    pub fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            for g in &mut n.grad {
                *g = 0.0;
            }
        }
    }

    /// Column sums of every softmax node recorded on the tape, in order.
    /// Useful for auditing that attention maps are column-stochastic.
    pub fn softmax_column_sums(&self) -> Vec<f64> {
        let mut sums = Vec::new();
        for n in &self.nodes {
            if let Op::SoftmaxAxis0(_) = n.op {
                let (r, c) = (n.shape[0], n.shape[1]);
                for j in 0..c {
                    sums.push((0..r).map(|i| n.value[i * c + j]).sum());
                }
            }
        }
        sums
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, requires: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let grad = vec![0.0; value.len()];
        self.nodes.push(Node { op, shape, value, grad, requires });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(&self, op: &str, detail: String) -> Error {
        Error::InvalidInput(format!("{op}: {detail}"))
    }

    // ── leaves ───────────────────────────────────────────────────────────

    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>, requires: bool) -> Result<Var> {
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(self.shape_err("leaf", format!("extents must be positive, got {shape:?}")));
        }
        if numel(shape) != data.len() {
            return Err(self.shape_err(
                "leaf",
                format!("shape {shape:?} wants {} values, got {}", numel(shape), data.len()),
            ));
        }
        Ok(self.push(Op::Leaf, shape.to_vec(), data, requires))
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        self.leaf(shape, data, false)
    }

    // ── elementwise and linear ops ───────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.shape_err("matmul", format!("incompatible shapes {sa:?} x {sb:?}")));
        }
        let (r, k, c) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for kk in 0..k {
                let aik = va[i * k + kk];
                if aik == 0.0 {
                    continue;
                }
                let brow = &vb[kk * c..(kk + 1) * c];
                let orow = &mut out[i * c..(i + 1) * c];
                for j in 0..c {
                    orow[j] += aik * brow[j];
                }
            }
        }
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Op::Matmul(a, b), vec![r, c], out, req))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            let msg = format!("mismatched shapes {:?} vs {:?}", self.shape(a), self.shape(b));
            return Err(self.shape_err("add", msg));
        }
        let out: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Op::Add(a, b), shape, out, req))
    }

    /// a - b, as a composite of scale and add.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            let msg = format!("mismatched shapes {:?} vs {:?}", self.shape(a), self.shape(b));
            return Err(self.shape_err("mul", msg));
        }
        let out: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Op::Mul(a, b), shape, out, req))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        let req = self.requires(x);
        Ok(self.push(Op::Scale(x, c), shape, out, req))
    }

    pub fn bias_col(&mut self, x: Var, b: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        if sx.len() != 2 || sb.len() != 1 || sb[0] != sx[0] {
            return Err(self.shape_err(
                "bias_col",
                format!("matrix {sx:?} cannot take per-row bias {sb:?}"),
            ));
        }
        let (r, c) = (sx[0], sx[1]);
        let (vx, vb) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = vx[i * c + j] + vb[i];
            }
        }
        let req = self.requires(x) || self.requires(b);
        Ok(self.push(Op::BiasCol(x, b), vec![r, c], out, req))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        let req = self.requires(x);
        Ok(self.push(Op::Relu(x), shape, out, req))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self.nodes[x.0]
            .value
            .iter()
            .map(|&v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            })
            .collect();
        let shape = self.shape(x).to_vec();
        let req = self.requires(x);
        Ok(self.push(Op::Sigmoid(x), shape, out, req))
    }

    pub fn softmax_axis0(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 2 {
            return Err(self.shape_err("softmax_axis0", format!("wants a matrix, got {sx:?}")));
        }
        let (r, c) = (sx[0], sx[1]);
        let vx = &self.nodes[x.0].value;
        let mut out = vec![0.0; r * c];
        for j in 0..c {
            let mut hi = f64::NEG_INFINITY;
            for i in 0..r {
                hi = hi.max(vx[i * c + j]);
            }
            let mut total = 0.0;
            for i in 0..r {
                let e = (vx[i * c + j] - hi).exp();
                out[i * c + j] = e;
                total += e;
            }
            for i in 0..r {
                out[i * c + j] /= total;
            }
        }
        let req = self.requires(x);
        Ok(self.push(Op::SoftmaxAxis0(x), vec![r, c], out, req))
    }

    /// Normalize each column to zero mean and unit variance (epsilon-guarded),
    /// then apply the per-row affine `gamma * xhat + beta`.
    pub fn layer_norm_axis0(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (sx, sg, sb) = (self.shape(x), self.shape(gamma), self.shape(beta));
        if sx.len() != 2 || sg != [sx[0]] || sb != [sx[0]] {
            return Err(self.shape_err(
                "layer_norm_axis0",
                format!("matrix {sx:?} wants length-{} gamma/beta, got {sg:?}/{sb:?}", sx[0]),
            ));
        }
        let (r, c) = (sx[0], sx[1]);
        let vx = &self.nodes[x.0].value;
        let (vg, vb) = (&self.nodes[gamma.0].value, &self.nodes[beta.0].value);
        let mut out = vec![0.0; r * c];
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; c];
        for j in 0..c {
            let mut mean = 0.0;
            for i in 0..r {
                mean += vx[i * c + j];
            }
            mean /= r as f64;
            let mut var = 0.0;
            for i in 0..r {
                let d = vx[i * c + j] - mean;
                var += d * d;
            }
            var /= r as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[j] = inv;
            for i in 0..r {
                let xh = (vx[i * c + j] - mean) * inv;
                xhat[i * c + j] = xh;
                out[i * c + j] = vg[i] * xh + vb[i];
            }
        }
        let req = self.requires(x) || self.requires(gamma) || self.requires(beta);
        Ok(self.push(
            Op::LayerNormAxis0 { x, gamma, beta, xhat, inv_std },
            vec![r, c],
            out,
            req,
        ))
    }

    // ── spatial ops ──────────────────────────────────────────────────────

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 3 || sw.len() != 4 || sw[1] != sx[0] {
            return Err(self.shape_err(
                "conv2d",
                format!("input {sx:?} does not match kernel {sw:?} (want [ci,h,w] x [co,ci,k,k])"),
            ));
        }
        if sw[2] != sw[3] || stride == 0 {
            return Err(self.shape_err(
                "conv2d",
                format!("kernel must be square with positive stride, got {sw:?} stride {stride}"),
            ));
        }
        let (ci, h, w_in) = (sx[0], sx[1], sx[2]);
        let (co, k) = (sw[0], sw[2]);
        if h + 2 * pad < k || w_in + 2 * pad < k {
            return Err(self.shape_err(
                "conv2d",
                format!("kernel {k} exceeds padded input {h}x{w_in} (pad {pad})"),
            ));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (w_in + 2 * pad - k) / stride + 1;
        let vx = &self.nodes[x.0].value;
        let vw = &self.nodes[w.0].value;
        let mut out = vec![0.0; co * ho * wo];
        for oc in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ic in 0..ci {
                        let xbase = ic * h * w_in;
                        let wbase = (oc * ci + ic) * k * k;
                        for ky in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * w_in;
                            let wrow = wbase + ky * k;
                            for kx in 0..k {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix >= w_in as isize {
                                    continue;
                                }
                                acc += vx[xrow + ix as usize] * vw[wrow + kx];
                            }
                        }
                    }
                    out[(oc * ho + oy) * wo + ox] = acc;
                }
            }
        }
        let req = self.requires(x) || self.requires(w);
        Ok(self.push(Op::Conv2d { x, w, stride, pad }, vec![co, ho, wo], out, req))
    }

    /// Nearest-neighbor upsampling by 2 in both spatial dimensions.
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 3 {
            return Err(self.shape_err("upsample2x", format!("wants [c,h,w], got {sx:?}")));
        }
        let (c, h, w) = (sx[0], sx[1], sx[2]);
        let vx = &self.nodes[x.0].value;
        let (ho, wo) = (2 * h, 2 * w);
        let mut out = vec![0.0; c * ho * wo];
        for ch in 0..c {
            for y in 0..ho {
                for xq in 0..wo {
                    out[(ch * ho + y) * wo + xq] = vx[(ch * h + y / 2) * w + xq / 2];
                }
            }
        }
        let req = self.requires(x);
        Ok(self.push(Op::Upsample2x(x), vec![c, ho, wo], out, req))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(self.shape_err("concat_channels", "needs at least one input".into()));
        }
        let first = self.shape(parts[0]).to_vec();
        if first.len() != 3 {
            return Err(self.shape_err("concat_channels", format!("wants [c,h,w], got {first:?}")));
        }
        let (h, w) = (first[1], first[2]);
        let mut c_total = 0;
        for &p in parts {
            let sp = self.shape(p);
            if sp.len() != 3 || sp[1] != h || sp[2] != w {
                return Err(self.shape_err(
                    "concat_channels",
                    format!("spatial mismatch: {sp:?} vs expected [_, {h}, {w}]"),
                ));
            }
            c_total += sp[0];
        }
        let mut out = Vec::with_capacity(c_total * h * w);
        for &p in parts {
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        let req = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(Op::ConcatChannels(parts.to_vec()), vec![c_total, h, w], out, req))
    }

    pub fn slice_cols(&mut self, x: Var, from: usize, to: usize) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 2 || from >= to || to > sx[1] {
            return Err(self.shape_err(
                "slice_cols",
                format!("range {from}..{to} invalid for matrix {sx:?}"),
            ));
        }
        let (r, c) = (sx[0], sx[1]);
        let vx = &self.nodes[x.0].value;
        let width = to - from;
        let mut out = Vec::with_capacity(r * width);
        for i in 0..r {
            out.extend_from_slice(&vx[i * c + from..i * c + to]);
        }
        let req = self.requires(x);
        Ok(self.push(Op::SliceCols { x, from, to }, vec![r, width], out, req))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(self.shape_err("concat_cols", "needs at least one input".into()));
        }
        let r = self.shape(parts[0])[0];
        let mut c_total = 0;
        for &p in parts {
            let sp = self.shape(p);
            if sp.len() != 2 || sp[0] != r {
                return Err(self.shape_err(
                    "concat_cols",
                    format!("row mismatch: {sp:?} vs expected [{r}, _]"),
                ));
            }
            c_total += sp[1];
        }
        let mut out = Vec::with_capacity(r * c_total);
        for i in 0..r {
            for &p in parts {
                let cp = self.shape(p)[1];
                let vp = &self.nodes[p.0].value;
                out.extend_from_slice(&vp[i * cp..(i + 1) * cp]);
            }
        }
        let req = parts.iter().any(|&p| self.requires(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), vec![r, c_total], out, req))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.nodes[x.0].value.len() || shape.iter().any(|&e| e == 0) {
            return Err(self.shape_err(
                "reshape",
                format!("{:?} cannot become {shape:?}", self.shape(x)),
            ));
        }
        let out = self.nodes[x.0].value.clone();
        let req = self.requires(x);
        Ok(self.push(Op::Reshape(x), shape.to_vec(), out, req))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 2 {
            return Err(self.shape_err("transpose", format!("wants a matrix, got {sx:?}")));
        }
        let (r, c) = (sx[0], sx[1]);
        let vx = &self.nodes[x.0].value;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = vx[i * c + j];
            }
        }
        let req = self.requires(x);
        Ok(self.push(Op::Transpose(x), vec![c, r], out, req))
    }

    // ── reductions and losses ────────────────────────────────────────────

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.nodes[x.0].value.len() as f64;
        let m = self.nodes[x.0].value.iter().sum::<f64>() / n;
        let req = self.requires(x);
        Ok(self.push(Op::Mean(x), vec![1], vec![m], req))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.nodes[x.0].value.iter().sum::<f64>();
        let req = self.requires(x);
        Ok(self.push(Op::Sum(x), vec![1], vec![s], req))
    }

    /// Sum of squared entries, as mul followed by sum.
    pub fn sum_sq(&mut self, x: Var) -> Result<Var> {
        let sq = self.mul(x, x)?;
        self.sum(sq)
    }

    /// Fully connected layer `W x + b`, as matmul followed by bias_col.
    pub fn linear(&mut self, w: Var, b: Var, x: Var) -> Result<Var> {
        let wx = self.matmul(w, x)?;
        self.bias_col(wx, b)
    }

    /// Mean binary cross entropy of predictions `p` against a constant
    /// target of the same length.
    pub fn bce(&mut self, p: Var, target: &[f64]) -> Result<Var> {
        if self.nodes[p.0].value.len() != target.len() {
            return Err(self.shape_err(
                "bce",
                format!("{} predictions vs {} targets", self.nodes[p.0].value.len(), target.len()),
            ));
        }
        if target.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(self.shape_err("bce", "targets must lie in [0, 1]".into()));
        }
        let n = target.len() as f64;
        let mut loss = 0.0;
        for (v, t) in self.nodes[p.0].value.iter().zip(target) {
            let pc = v.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        }
        loss /= n;
        let req = self.requires(p);
        Ok(self.push(Op::Bce { p, target: target.to_vec() }, vec![1], vec![loss], req))
    }

    // ── backward ─────────────────────────────────────────────────────────

    /// Accumulate d loss / d leaf into every requiring node's grad buffer.
    ///
    /// Leaf gradients accumulate across repeated calls; interior nodes are
    /// working buffers and reset at every call, so each backward pass
    /// contributes exactly one unit of seed.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        for node in &mut self.nodes {
            if !matches!(node.op, Op::Leaf) {
                node.grad.fill(0.0);
            }
        }
        self.nodes[loss.0].grad[0] += 1.0;
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires {
                continue;
            }
            let contributions = self.contributions(i);
            for (target, delta) in contributions {
                let g = &mut self.nodes[target].grad;
                for (gi, di) in g.iter_mut().zip(&delta) {
                    *gi += di;
                }
            }
        }
        Ok(())
    }

    /// Gradient contributions of node `i` into each of its requiring inputs.
    fn contributions(&self, i: usize) -> Vec<(usize, Vec<f64>)> {
        let node = &self.nodes[i];
        let gy = &node.grad;
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        let want = |v: Var| self.nodes[v.0].requires;

        match &node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (r, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let c = self.nodes[b.0].shape[1];
                if want(*a) {
                    let vb = &self.nodes[b.0].value;
                    let mut da = vec![0.0; r * k];
                    for ii in 0..r {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            for j in 0..c {
                                acc += gy[ii * c + j] * vb[kk * c + j];
                            }
                            da[ii * k + kk] = acc;
                        }
                    }
                    out.push((a.0, da));
                }
                if want(*b) {
                    let va = &self.nodes[a.0].value;
                    let mut db = vec![0.0; k * c];
                    for kk in 0..k {
                        for ii in 0..r {
                            let aik = va[ii * k + kk];
                            if aik == 0.0 {
                                continue;
                            }
                            for j in 0..c {
                                db[kk * c + j] += aik * gy[ii * c + j];
                            }
                        }
                    }
                    out.push((b.0, db));
                }
            }
            Op::Add(a, b) => {
                if want(*a) {
                    out.push((a.0, gy.clone()));
                }
                if want(*b) {
                    out.push((b.0, gy.clone()));
                }
            }
            Op::Mul(a, b) => {
                if want(*a) {
                    let vb = &self.nodes[b.0].value;
                    out.push((a.0, gy.iter().zip(vb).map(|(g, v)| g * v).collect()));
                }
                if want(*b) {
                    let va = &self.nodes[a.0].value;
                    out.push((b.0, gy.iter().zip(va).map(|(g, v)| g * v).collect()));
                }
            }
            Op::Scale(x, c) => {
                if want(*x) {
                    out.push((x.0, gy.iter().map(|g| g * c).collect()));
                }
            }
            Op::BiasCol(x, b) => {
                let (r, c) = (node.shape[0], node.shape[1]);
                if want(*x) {
                    out.push((x.0, gy.clone()));
                }
                if want(*b) {
                    let mut db = vec![0.0; r];
                    for i2 in 0..r {
                        for j in 0..c {
                            db[i2] += gy[i2 * c + j];
                        }
                    }
                    out.push((b.0, db));
                }
            }
            Op::Relu(x) => {
                if want(*x) {
                    let vx = &self.nodes[x.0].value;
                    out.push((
                        x.0,
                        gy.iter().zip(vx).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect(),
                    ));
                }
            }
            Op::Sigmoid(x) => {
                if want(*x) {
                    let vy = &node.value;
                    out.push((x.0, gy.iter().zip(vy).map(|(g, y)| g * y * (1.0 - y)).collect()));
                }
            }
            Op::SoftmaxAxis0(x) => {
                if want(*x) {
                    let (r, c) = (node.shape[0], node.shape[1]);
                    let vy = &node.value;
                    let mut dx = vec![0.0; r * c];
                    for j in 0..c {
                        let mut dot = 0.0;
                        for i2 in 0..r {
                            dot += gy[i2 * c + j] * vy[i2 * c + j];
                        }
                        for i2 in 0..r {
                            dx[i2 * c + j] = vy[i2 * c + j] * (gy[i2 * c + j] - dot);
                        }
                    }
                    out.push((x.0, dx));
                }
            }
            Op::LayerNormAxis0 { x, gamma, beta, xhat, inv_std } => {
                let (r, c) = (node.shape[0], node.shape[1]);
                let vg = &self.nodes[gamma.0].value;
                if want(*beta) {
                    let mut db = vec![0.0; r];
                    for i2 in 0..r {
                        for j in 0..c {
                            db[i2] += gy[i2 * c + j];
                        }
                    }
                    out.push((beta.0, db));
                }
                if want(*gamma) {
                    let mut dg = vec![0.0; r];
                    for i2 in 0..r {
                        for j in 0..c {
                            dg[i2] += gy[i2 * c + j] * xhat[i2 * c + j];
                        }
                    }
                    out.push((gamma.0, dg));
                }
                if want(*x) {
                    let rn = r as f64;
                    let mut dx = vec![0.0; r * c];
                    for j in 0..c {
                        let mut mean_a = 0.0;
                        let mut mean_ax = 0.0;
                        for i2 in 0..r {
                            let a = gy[i2 * c + j] * vg[i2];
                            mean_a += a;
                            mean_ax += a * xhat[i2 * c + j];
                        }
                        mean_a /= rn;
                        mean_ax /= rn;
                        for i2 in 0..r {
                            let a = gy[i2 * c + j] * vg[i2];
                            dx[i2 * c + j] =
                                inv_std[j] * (a - mean_a - xhat[i2 * c + j] * mean_ax);
                        }
                    }
                    out.push((x.0, dx));
                }
            }
            Op::Conv2d { x, w, stride, pad } => {
                let sx = &self.nodes[x.0].shape;
                let sw = &self.nodes[w.0].shape;
                let (ci, h, w_in) = (sx[0], sx[1], sx[2]);
                let (co, k) = (sw[0], sw[2]);
                let (ho, wo) = (node.shape[1], node.shape[2]);
                let vx = &self.nodes[x.0].value;
                let vw = &self.nodes[w.0].value;
                let want_x = want(*x);
                let want_w = want(*w);
                let mut dx = if want_x { vec![0.0; ci * h * w_in] } else { Vec::new() };
                let mut dw = if want_w { vec![0.0; co * ci * k * k] } else { Vec::new() };
                for oc in 0..co {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let g = gy[(oc * ho + oy) * wo + ox];
                            if g == 0.0 {
                                continue;
                            }
                            for ic in 0..ci {
                                let xbase = ic * h * w_in;
                                let wbase = (oc * ci + ic) * k * k;
                                for ky in 0..k {
                                    let iy = (oy * stride + ky) as isize - *pad as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    let xrow = xbase + iy as usize * w_in;
                                    let wrow = wbase + ky * k;
                                    for kx in 0..k {
                                        let ix = (ox * stride + kx) as isize - *pad as isize;
                                        if ix < 0 || ix >= w_in as isize {
                                            continue;
                                        }
                                        if want_x {
                                            dx[xrow + ix as usize] += g * vw[wrow + kx];
                                        }
                                        if want_w {
                                            dw[wrow + kx] += g * vx[xrow + ix as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if want_x {
                    out.push((x.0, dx));
                }
                if want_w {
                    out.push((w.0, dw));
                }
            }
            Op::Upsample2x(x) => {
                if want(*x) {
                    let sx = &self.nodes[x.0].shape;
                    let (c, h, w) = (sx[0], sx[1], sx[2]);
                    let (ho, wo) = (2 * h, 2 * w);
                    let mut dx = vec![0.0; c * h * w];
                    for ch in 0..c {
                        for y in 0..ho {
                            for xq in 0..wo {
                                dx[(ch * h + y / 2) * w + xq / 2] += gy[(ch * ho + y) * wo + xq];
                            }
                        }
                    }
                    out.push((x.0, dx));
                }
            }
            Op::ConcatChannels(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    if want(p) {
                        out.push((p.0, gy[offset..offset + len].to_vec()));
                    }
                    offset += len;
                }
            }
            Op::SliceCols { x, from, to } => {
                if want(*x) {
                    let sx = &self.nodes[x.0].shape;
                    let (r, c) = (sx[0], sx[1]);
                    let width = to - from;
                    let mut dx = vec![0.0; r * c];
                    for i2 in 0..r {
                        for j in 0..width {
                            dx[i2 * c + from + j] = gy[i2 * width + j];
                        }
                    }
                    out.push((x.0, dx));
                }
            }
            Op::ConcatCols(parts) => {
                let r = node.shape[0];
                let c_total = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let cp = self.nodes[p.0].shape[1];
                    if want(p) {
                        let mut dp = vec![0.0; r * cp];
                        for i2 in 0..r {
                            dp[i2 * cp..(i2 + 1) * cp].copy_from_slice(
                                &gy[i2 * c_total + offset..i2 * c_total + offset + cp],
                            );
                        }
                        out.push((p.0, dp));
                    }
                    offset += cp;
                }
            }
            Op::Reshape(x) => {
                if want(*x) {
                    out.push((x.0, gy.clone()));
                }
            }
            Op::Transpose(x) => {
                if want(*x) {
                    let (c, r) = (node.shape[0], node.shape[1]);
                    let mut dx = vec![0.0; r * c];
                    for i2 in 0..c {
                        for j in 0..r {
                            dx[j * c + i2] = gy[i2 * r + j];
                        }
                    }
                    out.push((x.0, dx));
                }
            }
            Op::Mean(x) => {
                if want(*x) {
                    let n = self.nodes[x.0].value.len();
                    let g = gy[0] / n as f64;
                    out.push((x.0, vec![g; n]));
                }
            }
            Op::Sum(x) => {
                if want(*x) {
                    let n = self.nodes[x.0].value.len();
                    out.push((x.0, vec![gy[0]; n]));
                }
            }
            Op::Bce { p, target } => {
                if want(*p) {
                    let vp = &self.nodes[p.0].value;
                    let n = target.len() as f64;
                    let g = gy[0] / n;
                    let dp: Vec<f64> = vp
                        .iter()
                        .zip(target)
                        .map(|(&v, &t)| {
                            if v <= BCE_CLAMP || v >= 1.0 - BCE_CLAMP {
                                0.0
                            } else {
                                g * (-t / v + (1.0 - t) / (1.0 - v))
                            }
                        })
                        .collect();
                    out.push((p.0, dp));
                }
            }
        }
        out
    }
}
