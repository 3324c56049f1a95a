//! Tape of recorded operations and the reverse sweep over it.

use super::conv::{conv_backward_bias, conv_backward_input, conv_backward_weight, conv_forward, ConvGeometry};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// A convolution executed on the tape, kept for MAC auditing.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvRecord {
    pub transposed: bool,
    /// Geometry of the underlying (non-transposed) convolution.
    pub geometry: ConvGeometry,
    pub macs: u64,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Option<Var>, g: ConvGeometry },
    ConvTranspose { x: Var, w: Var, b: Option<Var>, g: ConvGeometry },
    MaxPool { x: Var, argmax: Vec<usize> },
    /// Pointwise map with stored local derivative.
    Pointwise { x: Var, deriv: Vec<f64> },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Reshape(Var),
    Swap01(Var),
    Stack(Vec<Var>),
    Select { x: Var, index: usize },
    Softmax0(Var),
    Sum0(Var),
    Bce { pred: Var, target: Tensor, active: Vec<bool> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only tape. Nodes are created in topological order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    convs: Vec<ConvRecord>,
}

/// Gradients indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

fn check_finite(t: &Tensor, op: &'static str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

fn dims4(t: &Tensor, what: &str) -> Result<(usize, [usize; 3])> {
    match *t.shape() {
        [c, d, h, w] => Ok((c, [d, h, w])),
        [c, h, w] => Ok((c, [1, h, w])),
        ref s => Err(Error::ShapeMismatch(format!("{what}: expected [C, H, W] or [C, D, H, W], got {s:?}"))),
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var], name: &'static str) -> Result<Var> {
        check_finite(&value, name)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Differentiable input (parameters).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable input (data).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Convolutions executed so far, in order.
    pub fn conv_records(&self) -> &[ConvRecord] {
        &self.convs
    }

    pub fn total_conv_macs(&self) -> u64 {
        self.convs.iter().map(|r| r.macs).sum()
    }

    fn conv_common(&mut self, x: Var, w: Var, b: Option<Var>, g: ConvGeometry, transposed: bool, three_d: bool) -> Result<Var> {
        let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        let bias = b.map(|b| self.nodes[b.0].value.data());
        let (y, out_c, out_dims, macs) = if transposed {
            // The stored geometry is the adjoint conv: its output side is our input.
            let y = conv_backward_input(&g, xv.data(), wv.data());
            let mut y = y;
            if let Some(bias) = bias {
                for (c, chunk) in y.chunks_mut(g.in_len()).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += bias[c]);
                }
            }
            (y, g.c_in, g.in_dims, (g.c_out * g.out_len() * g.c_in * g.kernel_len()) as u64)
        } else {
            let y = conv_forward(&g, xv.data(), wv.data(), bias);
            (y, g.c_out, g.out_dims, (g.c_out * g.out_len() * g.c_in * g.kernel_len()) as u64)
        };
        let shape = if three_d { vec![out_c, out_dims[0], out_dims[1], out_dims[2]] } else { vec![out_c, out_dims[1], out_dims[2]] };
        let value = Tensor::new(shape, y)?;
        self.convs.push(ConvRecord { transposed, geometry: g, macs });
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        let op = if transposed { Op::ConvTranspose { x, w, b, g } } else { Op::Conv { x, w, b, g } };
        self.push(value, op, &inputs, if transposed { "conv_transpose3d" } else { "conv" })
    }

    fn check_bias(&self, b: Option<Var>, channels: usize) -> Result<()> {
        if let Some(b) = b {
            if self.shape(b) != [channels] {
                return Err(Error::ShapeMismatch(format!("bias shape {:?}, expected [{channels}]", self.shape(b))));
            }
        }
        Ok(())
    }

    /// 2D cross-correlation: `x [C_in, H, W]`, `w [C_out, C_in, kh, kw]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let (ci, [d, h, wd]) = dims4(self.value(x), "conv2d input")?;
        if self.shape(x).len() != 3 || d != 1 {
            return Err(Error::ShapeMismatch(format!("conv2d input must be [C, H, W], got {:?}", self.shape(x))));
        }
        let &[co, wci, kh, kw] = self.shape(w) else {
            return Err(Error::ShapeMismatch(format!("conv2d weight must be [C_out, C_in, kh, kw], got {:?}", self.shape(w))));
        };
        if wci != ci {
            return Err(Error::ShapeMismatch(format!("conv2d: input has {ci} channels, weight expects {wci}")));
        }
        self.check_bias(b, co)?;
        let g = ConvGeometry::conv(ci, co, [1, h, wd], [1, kh, kw], [1, stride, stride], [0, padding, padding])?;
        self.conv_common(x, w, b, g, false, false)
    }

    /// 3D cross-correlation: `x [C_in, D, H, W]`, `w [C_out, C_in, kd, kh, kw]`, per-axis stride and padding.
    pub fn conv3d(&mut self, x: Var, w: Var, b: Option<Var>, stride: [usize; 3], padding: [usize; 3]) -> Result<Var> {
        let &[ci, d, h, wd] = self.shape(x) else {
            return Err(Error::ShapeMismatch(format!("conv3d input must be [C, D, H, W], got {:?}", self.shape(x))));
        };
        let &[co, wci, kd, kh, kw] = self.shape(w) else {
            return Err(Error::ShapeMismatch(format!("conv3d weight must be 5-D, got {:?}", self.shape(w))));
        };
        if wci != ci {
            return Err(Error::ShapeMismatch(format!("conv3d: input has {ci} channels, weight expects {wci}")));
        }
        self.check_bias(b, co)?;
        let g = ConvGeometry::conv(ci, co, [d, h, wd], [kd, kh, kw], stride, padding)?;
        self.conv_common(x, w, b, g, false, true)
    }

    /// Transposed 3D convolution: `x [C_in, D, H, W]`, `w [C_in, C_out, kd, kh, kw]`,
    /// output extent `(D - 1)·s - 2p + k` per axis.
    pub fn conv_transpose3d(&mut self, x: Var, w: Var, b: Option<Var>, stride: [usize; 3], padding: [usize; 3]) -> Result<Var> {
        let &[ci, d, h, wd] = self.shape(x) else {
            return Err(Error::ShapeMismatch(format!("conv_transpose3d input must be [C, D, H, W], got {:?}", self.shape(x))));
        };
        let &[wci, co, kd, kh, kw] = self.shape(w) else {
            return Err(Error::ShapeMismatch(format!("conv_transpose3d weight must be 5-D, got {:?}", self.shape(w))));
        };
        if wci != ci {
            return Err(Error::ShapeMismatch(format!("conv_transpose3d: input has {ci} channels, weight expects {wci}")));
        }
        self.check_bias(b, co)?;
        // Adjoint conv maps [co, big] -> [ci, small]; its weight layout [ci, co, k] matches ours.
        let g = ConvGeometry::transposed(ci, co, [d, h, wd], [kd, kh, kw], stride, padding)?;
        self.conv_common(x, w, b, g, true, true)
    }

    /// Max pooling over `[C, H, W]` (2D window) or `[C, D, H, W]` (3D window), no padding.
    /// Ties go to the lowest linear index in the window.
    pub fn maxpool(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let xv = self.value(x);
        let three_d = xv.shape().len() == 4;
        let (c, dims) = dims4(xv, "maxpool input")?;
        let k = if three_d { [window; 3] } else { [1, window, window] };
        let s = if three_d { [stride; 3] } else { [1, stride, stride] };
        let g = ConvGeometry::conv(c, c, dims, k, s, [0; 3])?;
        let [od, oh, ow] = g.out_dims;
        let [_, ih, iw] = dims;
        let mut out = Vec::with_capacity(c * g.out_len());
        let mut argmax = Vec::with_capacity(c * g.out_len());
        for ch in 0..c {
            for z in 0..od {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut best = (f64::NEG_INFINITY, 0usize);
                        for a in 0..k[0] {
                            for b in 0..k[1] {
                                for cc in 0..k[2] {
                                    let idx = ((ch * dims[0] + z * s[0] + a) * ih + y * s[1] + b) * iw + xx * s[2] + cc;
                                    let v = xv.data()[idx];
                                    if v > best.0 {
                                        best = (v, idx);
                                    }
                                }
                            }
                        }
                        out.push(best.0);
                        argmax.push(best.1);
                    }
                }
            }
        }
        let shape = if three_d { vec![c, od, oh, ow] } else { vec![c, oh, ow] };
        let value = Tensor::new(shape, out)?;
        self.push(value, Op::MaxPool { x, argmax }, &[x], "maxpool")
    }

    /// Pointwise `f` with derivative `df`, both evaluated at the input.
    pub fn map_pointwise(&mut self, x: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, name: &'static str) -> Result<Var> {
        let xv = self.value(x);
        let value = xv.map(&f);
        let deriv = xv.data().iter().map(|&v| df(v)).collect();
        self.push(value, Op::Pointwise { x, deriv }, &[x], name)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map_pointwise(x, |v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 }, "relu")
    }

    pub fn elu(&mut self, x: Var, alpha: f64) -> Result<Var> {
        self.map_pointwise(
            x,
            move |v| if v > 0.0 { v } else { alpha * v.exp_m1() },
            move |v| if v > 0.0 { 1.0 } else { alpha * v.exp() },
            "elu",
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map_pointwise(x, sigmoid, |v| sigmoid(v) * (1.0 - sigmoid(v)), "sigmoid")
    }

    /// `ln(p / (1 - p))`, the inverse of the sigmoid.
    pub fn logit(&mut self, x: Var) -> Result<Var> {
        self.map_pointwise(x, |p| (p / (1.0 - p)).ln(), |p| 1.0 / (p * (1.0 - p)), "logit")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Add(a, b), &[a, b], "add")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "mul")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(value, Op::Mul(a, b), &[a, b], "mul")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * s);
        self.push(value, Op::Scale(x, s), &[x], "scale")
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(value, Op::Sum(x), &[x], "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        self.push(value, Op::Reshape(x), &[x], "reshape")
    }

    /// Exchanges the two leading axes: `[A, B, ...] -> [B, A, ...]`.
    pub fn swap01(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::ShapeMismatch(format!("swap01 needs rank >= 2, got {shape:?}")));
        }
        let value = Tensor::new(swapped_shape(&shape), swap_leading(self.value(x).data(), &shape))?;
        self.push(value, Op::Swap01(x), &[x], "swap01")
    }

    /// Clamp to `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        self.map_pointwise(x, move |v| v.clamp(lo, hi), move |v| if v < lo || v > hi { 0.0 } else { 1.0 }, "clamp")
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| Error::ShapeMismatch("stack of nothing".into()))?;
        let shape = self.shape(*first).to_vec();
        let mut data = Vec::with_capacity(shape.iter().product::<usize>() * xs.len());
        for &x in xs {
            same_shape(self.value(*first), self.value(x), "stack")?;
            data.extend_from_slice(self.value(x).data());
        }
        let mut out_shape = vec![xs.len()];
        out_shape.extend(shape);
        let value = Tensor::new(out_shape, data)?;
        self.push(value, Op::Stack(xs.to_vec()), xs, "stack")
    }

    /// Slice `index` along the leading axis.
    pub fn select(&mut self, x: Var, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 || index >= shape[0] {
            return Err(Error::ShapeMismatch(format!("select {index} from {shape:?}")));
        }
        let n: usize = shape[1..].iter().product();
        let data = self.value(x).data()[index * n..(index + 1) * n].to_vec();
        let value = Tensor::new(shape[1..].to_vec(), data)?;
        self.push(value, Op::Select { x, index }, &[x], "select")
    }

    /// Softmax across the leading axis, independently at every trailing position.
    pub fn softmax0(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let v = shape[0];
        let n: usize = shape[1..].iter().product();
        let xd = self.value(x).data();
        let mut out = vec![0.0; v * n];
        for i in 0..n {
            let m = (0..v).map(|k| xd[k * n + i]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..v).map(|k| (xd[k * n + i] - m).exp()).sum();
            for k in 0..v {
                out[k * n + i] = (xd[k * n + i] - m).exp() / z;
            }
        }
        let value = Tensor::new(shape, out)?;
        self.push(value, Op::Softmax0(x), &[x], "softmax")
    }

    /// Sum across the leading axis.
    pub fn sum0(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::ShapeMismatch(format!("sum0 needs rank >= 2, got {shape:?}")));
        }
        let n: usize = shape[1..].iter().product();
        let xd = self.value(x).data();
        let out = (0..n).map(|i| (0..shape[0]).map(|k| xd[k * n + i]).sum()).collect();
        let value = Tensor::new(shape[1..].to_vec(), out)?;
        self.push(value, Op::Sum0(x), &[x], "sum0")
    }

    /// Mean voxel binary cross-entropy with predictions clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        same_shape(self.value(pred), target, "bce")?;
        let p = self.value(pred).data();
        let mut active = Vec::with_capacity(p.len());
        let mut total = 0.0;
        for (&pi, &gi) in p.iter().zip(target.data()) {
            let pc = pi.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            active.push(pc == pi);
            total -= gi * pc.ln() + (1.0 - gi) * (1.0 - pc).ln();
        }
        let value = Tensor::scalar(total / p.len() as f64);
        self.push(value, Op::Bce { pred, target: target.clone(), active }, &[pred], "bce")
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(Error::NotScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[id].take() else { continue };
            self.backprop(node, &gy, &mut grads)?;
            grads[id] = Some(gy);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop(&self, node: &Node, gy: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut send = |v: Var, data: Vec<f64>| -> Result<()> {
            if self.wants(v) {
                let t = Tensor::new(self.shape(v).to_vec(), data)?;
                accumulate(&mut grads[v.0], t);
            }
            Ok(())
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, g } => {
                if self.wants(*x) {
                    send(*x, conv_backward_input(g, gy.data(), self.value(*w).data()))?;
                }
                if self.wants(*w) {
                    send(*w, conv_backward_weight(g, self.value(*x).data(), gy.data()))?;
                }
                if let Some(b) = b {
                    send(*b, conv_backward_bias(g, gy.data()))?;
                }
            }
            Op::ConvTranspose { x, w, b, g } => {
                // y = Aᵀx with A the stored conv: dx = A·gy, dw from the conv weight rule with roles swapped.
                if self.wants(*x) {
                    send(*x, conv_forward(g, gy.data(), self.value(*w).data(), None))?;
                }
                if self.wants(*w) {
                    send(*w, conv_backward_weight(g, gy.data(), self.value(*x).data()))?;
                }
                if let Some(b) = b {
                    let bias: Vec<f64> = gy.data().chunks(g.in_len()).map(|c| c.iter().sum()).collect();
                    send(*b, bias)?;
                }
            }
            Op::MaxPool { x, argmax } => {
                let mut gx = vec![0.0; self.value(*x).numel()];
                for (&i, &g) in argmax.iter().zip(gy.data()) {
                    gx[i] += g;
                }
                send(*x, gx)?;
            }
            Op::Pointwise { x, deriv } => send(*x, gy.data().iter().zip(deriv).map(|(g, d)| g * d).collect())?,
            Op::Add(a, b) => {
                send(*a, gy.data().to_vec())?;
                send(*b, gy.data().to_vec())?;
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                send(*a, gy.data().iter().zip(bv).map(|(g, y)| g * y).collect())?;
                send(*b, gy.data().iter().zip(av).map(|(g, x)| g * x).collect())?;
            }
            Op::Scale(x, s) => send(*x, gy.data().iter().map(|g| g * s).collect())?,
            Op::Sum(x) => send(*x, vec![gy.item(); self.value(*x).numel()])?,
            Op::Reshape(x) => send(*x, gy.data().to_vec())?,
            Op::Swap01(x) => send(*x, swap_leading(gy.data(), gy.shape()))?,
            Op::Stack(xs) => {
                let n = gy.numel() / xs.len();
                for (k, &x) in xs.iter().enumerate() {
                    send(x, gy.data()[k * n..(k + 1) * n].to_vec())?;
                }
            }
            Op::Select { x, index } => {
                let mut gx = vec![0.0; self.value(*x).numel()];
                let n = gy.numel();
                gx[index * n..(index + 1) * n].copy_from_slice(gy.data());
                send(*x, gx)?;
            }
            Op::Softmax0(x) => {
                let s = node.value.data();
                let v = node.value.shape()[0];
                let n = s.len() / v;
                let mut gx = vec![0.0; s.len()];
                for i in 0..n {
                    let dot: f64 = (0..v).map(|k| s[k * n + i] * gy.data()[k * n + i]).sum();
                    for k in 0..v {
                        gx[k * n + i] = s[k * n + i] * (gy.data()[k * n + i] - dot);
                    }
                }
                send(*x, gx)?;
            }
            Op::Sum0(x) => {
                let v = self.shape(*x)[0];
                let mut gx = Vec::with_capacity(gy.numel() * v);
                for _ in 0..v {
                    gx.extend_from_slice(gy.data());
                }
                send(*x, gx)?;
            }
            Op::Bce { pred, target, active } => {
                let p = self.value(*pred).data();
                let n = p.len() as f64;
                let g = gy.item();
                let gx = p
                    .iter()
                    .zip(target.data())
                    .zip(active)
                    .map(|((&pi, &ti), &on)| if on { g * (-ti / pi + (1.0 - ti) / (1.0 - pi)) / n } else { 0.0 })
                    .collect();
                send(*pred, gx)?;
            }
        }
        Ok(())
    }
}

fn swapped_shape(shape: &[usize]) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.swap(0, 1);
    s
}

fn swap_leading(data: &[f64], shape: &[usize]) -> Vec<f64> {
    let (a, b) = (shape[0], shape[1]);
    let n: usize = shape[2..].iter().product();
    let mut out = Vec::with_capacity(data.len());
    for j in 0..b {
        for i in 0..a {
            out.extend_from_slice(&data[(i * b + j) * n..(i * b + j + 1) * n]);
        }
    }
    out
}

/// Lower clamp applied to BCE predictions.
pub const BCE_CLAMP: f64 = 1e-7;

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
