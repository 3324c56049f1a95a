//! Direct-loop 3D convolution kernels. 2D convolutions use depth 1.
//!
//! Layouts: input `[C_in, D, H, W]`, conv weight `[C_out, C_in, kd, kh, kw]`,
//! transposed-conv weight `[C_in, C_out, kd, kh, kw]`. Every output element is
//! accumulated in a fixed order (input channel, then kernel taps), so results
//! do not depend on how output channels are scheduled across threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Shapes of one convolution: `x` is the dense side, `y` the strided side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub in_dims: [usize; 3],
    pub out_dims: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl ConvGeometry {
    /// Forward convolution geometry; the output extent must be integral.
    pub fn conv(c_in: usize, c_out: usize, in_dims: [usize; 3], kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let mut out_dims = [0; 3];
        for a in 0..3 {
            if stride[a] == 0 || kernel[a] == 0 {
                return Err(Error::ShapeMismatch("kernel and stride must be positive".into()));
            }
            let span = in_dims[a] + 2 * padding[a];
            if span < kernel[a] || (span - kernel[a]) % stride[a] != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "axis {a}: input {} with kernel {}, stride {}, padding {} gives a non-integral output",
                    in_dims[a], kernel[a], stride[a], padding[a]
                )));
            }
            out_dims[a] = (span - kernel[a]) / stride[a] + 1;
        }
        Ok(ConvGeometry { c_in, c_out, in_dims, out_dims, kernel, stride, padding })
    }

    /// Geometry of the convolution whose adjoint is a transposed convolution
    /// mapping `[c_in_t, small]` to `[c_out_t, (small-1)s - 2p + k]`.
    pub fn transposed(c_in_t: usize, c_out_t: usize, small: [usize; 3], kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let mut big = [0; 3];
        for a in 0..3 {
            let full = (small[a] - 1) * stride[a] + kernel[a];
            if stride[a] == 0 || kernel[a] == 0 || full <= 2 * padding[a] {
                return Err(Error::ShapeMismatch(format!("axis {a}: transposed convolution output would be empty")));
            }
            big[a] = full - 2 * padding[a];
        }
        let g = ConvGeometry::conv(c_out_t, c_in_t, big, kernel, stride, padding)?;
        if g.out_dims != small {
            return Err(Error::ShapeMismatch(format!("transposed convolution does not invert: {small:?} vs {:?}", g.out_dims)));
        }
        Ok(g)
    }

    pub fn in_len(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel.iter().product()
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel_len()
    }

    /// Output indices `o` along axis `a` for which `o*s + k - p` is inside the input.
    fn valid(&self, a: usize, k: usize) -> std::ops::Range<usize> {
        let (s, p, n) = (self.stride[a] as isize, self.padding[a] as isize, self.in_dims[a] as isize);
        let k = k as isize;
        let lo = if p - k > 0 { (p - k + s - 1) / s } else { 0 };
        let hi = if n - 1 + p - k < 0 { 0 } else { ((n - 1 + p - k) / s + 1).min(self.out_dims[a] as isize) };
        lo as usize..(hi.max(lo)) as usize
    }

    #[inline]
    fn src(&self, a: usize, o: usize, k: usize) -> usize {
        o * self.stride[a] + k - self.padding[a]
    }
}

/// `y[co] = b[co] + Σ_ci Σ_k w[co,ci,k] · x[ci, o*s + k - p]`.
pub fn conv_forward(g: &ConvGeometry, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let (ol, il, kl) = (g.out_len(), g.in_len(), g.kernel_len());
    let [_, oh, ow] = g.out_dims;
    let [_, ih, iw] = g.in_dims;
    let [kd, kh, kw] = g.kernel;
    let mut y = vec![0.0; g.c_out * ol];
    y.par_chunks_mut(ol).enumerate().for_each(|(co, out)| {
        if let Some(b) = bias {
            out.fill(b[co]);
        }
        for ci in 0..g.c_in {
            let xin = &x[ci * il..(ci + 1) * il];
            let wbase = (co * g.c_in + ci) * kl;
            for a in 0..kd {
                let rd = g.valid(0, a);
                for b in 0..kh {
                    let rh = g.valid(1, b);
                    for c in 0..kw {
                        let rw = g.valid(2, c);
                        let wv = w[wbase + (a * kh + b) * kw + c];
                        for od in rd.clone() {
                            let id = g.src(0, od, a);
                            for oh_ in rh.clone() {
                                let ih_ = g.src(1, oh_, b);
                                let orow = (od * oh + oh_) * ow;
                                let irow = (id * ih + ih_) * iw;
                                for ow_ in rw.clone() {
                                    out[orow + ow_] += wv * xin[irow + g.src(2, ow_, c)];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    y
}

/// Adjoint of [`conv_forward`] with respect to `x`: scatters `gy` back through `w`.
pub fn conv_backward_input(g: &ConvGeometry, gy: &[f64], w: &[f64]) -> Vec<f64> {
    let (ol, il, kl) = (g.out_len(), g.in_len(), g.kernel_len());
    let [_, oh, ow] = g.out_dims;
    let [_, ih, iw] = g.in_dims;
    let [kd, kh, kw] = g.kernel;
    let mut gx = vec![0.0; g.c_in * il];
    gx.par_chunks_mut(il).enumerate().for_each(|(ci, gin)| {
        for co in 0..g.c_out {
            let gout = &gy[co * ol..(co + 1) * ol];
            let wbase = (co * g.c_in + ci) * kl;
            for a in 0..kd {
                let rd = g.valid(0, a);
                for b in 0..kh {
                    let rh = g.valid(1, b);
                    for c in 0..kw {
                        let rw = g.valid(2, c);
                        let wv = w[wbase + (a * kh + b) * kw + c];
                        for od in rd.clone() {
                            let id = g.src(0, od, a);
                            for oh_ in rh.clone() {
                                let ih_ = g.src(1, oh_, b);
                                let orow = (od * oh + oh_) * ow;
                                let irow = (id * ih + ih_) * iw;
                                for ow_ in rw.clone() {
                                    gin[irow + g.src(2, ow_, c)] += wv * gout[orow + ow_];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    gx
}

/// Gradient of [`conv_forward`] with respect to `w`.
pub fn conv_backward_weight(g: &ConvGeometry, x: &[f64], gy: &[f64]) -> Vec<f64> {
    let (ol, il, kl) = (g.out_len(), g.in_len(), g.kernel_len());
    let [_, oh, ow] = g.out_dims;
    let [_, ih, iw] = g.in_dims;
    let [kd, kh, kw] = g.kernel;
    let mut gw = vec![0.0; g.weight_len()];
    gw.par_chunks_mut(g.c_in * kl).enumerate().for_each(|(co, gwc)| {
        let gout = &gy[co * ol..(co + 1) * ol];
        for ci in 0..g.c_in {
            let xin = &x[ci * il..(ci + 1) * il];
            for a in 0..kd {
                let rd = g.valid(0, a);
                for b in 0..kh {
                    let rh = g.valid(1, b);
                    for c in 0..kw {
                        let rw = g.valid(2, c);
                        let mut acc = 0.0;
                        for od in rd.clone() {
                            let id = g.src(0, od, a);
                            for oh_ in rh.clone() {
                                let ih_ = g.src(1, oh_, b);
                                let orow = (od * oh + oh_) * ow;
                                let irow = (id * ih + ih_) * iw;
                                for ow_ in rw.clone() {
                                    acc += gout[orow + ow_] * xin[irow + g.src(2, ow_, c)];
                                }
                            }
                        }
                        gwc[ci * kl + (a * kh + b) * kw + c] = acc;
                    }
                }
            }
        }
    });
    gw
}

/// Per-channel sum of `gy`: the bias gradient.
pub fn conv_backward_bias(g: &ConvGeometry, gy: &[f64]) -> Vec<f64> {
    gy.chunks(g.out_len()).map(|c| c.iter().sum()).collect()
}

/// Reference forward: one accumulator per output element, bounds-checked taps
/// visited in the same order as [`conv_forward`].
pub fn conv_forward_reference(g: &ConvGeometry, x: &[f64], w: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let [od_, oh_, ow_] = g.out_dims;
    let [id_, ih_, iw_] = g.in_dims;
    let [kd, kh, kw] = g.kernel;
    let mut y = vec![0.0; g.c_out * g.out_len()];
    for co in 0..g.c_out {
        for od in 0..od_ {
            for oh in 0..oh_ {
                for ow in 0..ow_ {
                    let mut acc = bias.map_or(0.0, |b| b[co]);
                    for ci in 0..g.c_in {
                        for a in 0..kd {
                            for b in 0..kh {
                                for c in 0..kw {
                                    let d = (od * g.stride[0] + a) as isize - g.padding[0] as isize;
                                    let h = (oh * g.stride[1] + b) as isize - g.padding[1] as isize;
                                    let wi = (ow * g.stride[2] + c) as isize - g.padding[2] as isize;
                                    if d < 0 || h < 0 || wi < 0 || d >= id_ as isize || h >= ih_ as isize || wi >= iw_ as isize {
                                        continue;
                                    }
                                    let xi = ((ci * id_ + d as usize) * ih_ + h as usize) * iw_ + wi as usize;
                                    let wj = (((co * g.c_in + ci) * kd + a) * kh + b) * kw + c;
                                    acc += w[wj] * x[xi];
                                }
                            }
                        }
                    }
                    y[((co * od_ + od) * oh_ + oh) * ow_ + ow] = acc;
                }
            }
        }
    }
    y
}
