//! Per-layer parameter and multiply-accumulate accounting.

use serde::{Deserialize, Serialize};

use super::conv::ConvGeometry;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    Conv3d,
    ConvTranspose3d,
    Maxpool,
    FullyConnected,
    Elementwise,
}

/// Shape description of one layer. Spatial dims are `[D, H, W]`; 2D layers use `D = 1`
/// and fully connected layers use `[1, 1, 1]` with the feature counts in the channels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub in_dims: [usize; 3],
    pub out_dims: [usize; 3],
    pub bias: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub params: u64,
    pub macs: u64,
    /// Non-multiply work: comparisons for pooling, one per element for pointwise maps.
    pub ops: u64,
}

impl std::ops::Add for LayerCost {
    type Output = LayerCost;
    fn add(self, o: LayerCost) -> LayerCost {
        LayerCost { params: self.params + o.params, macs: self.macs + o.macs, ops: self.ops + o.ops }
    }
}

impl std::iter::Sum for LayerCost {
    fn sum<I: Iterator<Item = LayerCost>>(iter: I) -> LayerCost {
        iter.fold(LayerCost::default(), |a, b| a + b)
    }
}

fn shape_err(e: Error) -> Error {
    match e {
        Error::ShapeMismatch(m) => Error::InvalidSpec(m),
        other => other,
    }
}

impl LayerSpec {
    pub fn conv2d(c_in: usize, c_out: usize, in_hw: [usize; 2], k: usize, stride: usize, padding: usize) -> Result<Self> {
        let g = ConvGeometry::conv(c_in, c_out, [1, in_hw[0], in_hw[1]], [1, k, k], [1, stride, stride], [0, padding, padding])
            .map_err(shape_err)?;
        Ok(Self::from_geometry(LayerKind::Conv2d, &g))
    }

    pub fn conv3d(c_in: usize, c_out: usize, in_dims: [usize; 3], kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let g = ConvGeometry::conv(c_in, c_out, in_dims, kernel, stride, padding).map_err(shape_err)?;
        Ok(Self::from_geometry(LayerKind::Conv3d, &g))
    }

    pub fn conv_transpose3d(c_in: usize, c_out: usize, in_dims: [usize; 3], kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let g = ConvGeometry::transposed(c_in, c_out, in_dims, kernel, stride, padding).map_err(shape_err)?;
        Ok(LayerSpec {
            kind: LayerKind::ConvTranspose3d,
            in_channels: c_in,
            out_channels: c_out,
            kernel,
            stride,
            padding,
            in_dims,
            out_dims: g.in_dims,
            bias: true,
        })
    }

    /// Pooling with a cubic window when `three_d`, otherwise a square window over H, W.
    pub fn maxpool(channels: usize, in_dims: [usize; 3], window: usize, stride: usize, three_d: bool) -> Result<Self> {
        let (k, s) = if three_d { ([window; 3], [stride; 3]) } else { ([1, window, window], [1, stride, stride]) };
        let g = ConvGeometry::conv(channels, channels, in_dims, k, s, [0; 3]).map_err(shape_err)?;
        let mut spec = Self::from_geometry(LayerKind::Maxpool, &g);
        spec.bias = false;
        Ok(spec)
    }

    pub fn fully_connected(inputs: usize, outputs: usize) -> Self {
        LayerSpec {
            kind: LayerKind::FullyConnected,
            in_channels: inputs,
            out_channels: outputs,
            kernel: [1; 3],
            stride: [1; 3],
            padding: [0; 3],
            in_dims: [1; 3],
            out_dims: [1; 3],
            bias: true,
        }
    }

    pub fn elementwise(channels: usize, dims: [usize; 3]) -> Self {
        LayerSpec {
            kind: LayerKind::Elementwise,
            in_channels: channels,
            out_channels: channels,
            kernel: [1; 3],
            stride: [1; 3],
            padding: [0; 3],
            in_dims: dims,
            out_dims: dims,
            bias: false,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    fn from_geometry(kind: LayerKind, g: &ConvGeometry) -> Self {
        LayerSpec {
            kind,
            in_channels: g.c_in,
            out_channels: g.c_out,
            kernel: g.kernel,
            stride: g.stride,
            padding: g.padding,
            in_dims: g.in_dims,
            out_dims: g.out_dims,
            bias: true,
        }
    }

    fn kernel_volume(&self) -> u64 {
        self.kernel.iter().product::<usize>() as u64
    }

    /// Re-derives the output dims and rejects inconsistent specs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be positive".into());
        }
        if self.in_dims.contains(&0) || self.out_dims.contains(&0) {
            return bad("spatial dims must be positive".into());
        }
        let expect = match self.kind {
            LayerKind::Conv2d | LayerKind::Conv3d | LayerKind::Maxpool => {
                if self.kind == LayerKind::Conv2d && (self.in_dims[0] != 1 || self.kernel[0] != 1) {
                    return bad("conv2d must have depth 1".into());
                }
                if self.kind == LayerKind::Maxpool && self.in_channels != self.out_channels {
                    return bad("pooling preserves channels".into());
                }
                ConvGeometry::conv(self.in_channels, self.out_channels, self.in_dims, self.kernel, self.stride, self.padding)
                    .map_err(shape_err)?
                    .out_dims
            }
            LayerKind::ConvTranspose3d => {
                ConvGeometry::transposed(self.in_channels, self.out_channels, self.in_dims, self.kernel, self.stride, self.padding)
                    .map_err(shape_err)?
                    .in_dims
            }
            LayerKind::FullyConnected => [1; 3],
            LayerKind::Elementwise => {
                if self.in_channels != self.out_channels {
                    return bad("elementwise layers preserve channels".into());
                }
                self.in_dims
            }
        };
        if expect != self.out_dims {
            return bad(format!("{:?}: output dims {:?}, shape arithmetic gives {expect:?}", self.kind, self.out_dims));
        }
        Ok(())
    }
}

/// Multiplies performed by the layer: conv-like layers count every kernel tap
/// (padding included) per output element; transposed convolutions count every
/// scattered tap per input element.
pub fn mac_count(layer: &LayerSpec) -> Result<u64> {
    Ok(layer_cost(layer)?.macs)
}

pub fn layer_cost(layer: &LayerSpec) -> Result<LayerCost> {
    layer.validate()?;
    let prod = |d: [usize; 3]| d.iter().product::<usize>() as u64;
    let (ci, co) = (layer.in_channels as u64, layer.out_channels as u64);
    let bias = if layer.bias { co } else { 0 };
    let cost = match layer.kind {
        LayerKind::Conv2d | LayerKind::Conv3d => LayerCost {
            params: co * ci * layer.kernel_volume() + bias,
            macs: prod(layer.out_dims) * co * ci * layer.kernel_volume(),
            ops: 0,
        },
        LayerKind::ConvTranspose3d => LayerCost {
            params: ci * co * layer.kernel_volume() + bias,
            macs: prod(layer.in_dims) * ci * co * layer.kernel_volume(),
            ops: 0,
        },
        LayerKind::FullyConnected => LayerCost { params: ci * co + bias, macs: ci * co, ops: 0 },
        LayerKind::Maxpool => LayerCost { params: 0, macs: 0, ops: prod(layer.out_dims) * co * (layer.kernel_volume() - 1) },
        LayerKind::Elementwise => LayerCost { params: 0, macs: 0, ops: prod(layer.out_dims) * co },
    };
    Ok(cost)
}
