//! Conv1d / dense / ReLU primitives with their backward passes.

use crate::error::{Error, Result};
use crate::quadnet::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Linear network; used to check that averaging commutes with inference.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative, with the ReLU subgradient at exactly zero taken as zero.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

pub fn relu(z: &Tensor) -> Tensor {
    z.map(|v| v.max(0.0))
}

/// Valid (unpadded) 1-D cross-correlation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `[out_channels, in_channels, kernel]`
    pub weight: Tensor,
    /// `[out_channels]`
    pub bias: Tensor,
    pub stride: usize,
}

impl ConvLayer {
    pub fn new(weight: Tensor, bias: Tensor, stride: usize) -> Result<Self> {
        let l = ConvLayer { weight, bias, stride };
        l.validate()?;
        Ok(l)
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        ConvLayer {
            weight: Tensor::zeros(&[out_channels, in_channels, kernel]),
            bias: Tensor::zeros(&[out_channels]),
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.weight.shape();
        if s.len() != 3 || s.contains(&0) {
            return Err(Error::Shape(format!("conv kernel shape {s:?} is not [out, in, k]")));
        }
        if self.bias.shape() != [s[0]] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {} output channels",
                self.bias.shape(),
                s[0]
            )));
        }
        if self.stride == 0 {
            return Err(Error::Shape("conv stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        conv_output_len(input_len, self.kernel(), self.stride)
    }
}

pub fn conv_output_len(input_len: usize, kernel: usize, stride: usize) -> Option<usize> {
    if input_len < kernel || stride == 0 {
        None
    } else {
        Some((input_len - kernel) / stride + 1)
    }
}

/// `x` is channels-first `[C_in, L]`; the result is `[C_out, L']`.
pub fn conv1d_forward(x: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    layer.validate()?;
    let s = x.shape();
    if s.len() != 2 || s[0] != layer.in_channels() {
        return Err(Error::Shape(format!(
            "conv input {s:?} does not have {} channels",
            layer.in_channels()
        )));
    }
    let l_out = layer.output_len(s[1]).ok_or_else(|| {
        Error::Shape(format!("input length {} shorter than kernel {}", s[1], layer.kernel()))
    })?;
    let mut out = vec![0.0; layer.out_channels() * l_out];
    conv_forward_raw(x.data(), s[1], layer, l_out, &mut out);
    Tensor::new(vec![layer.out_channels(), l_out], out)
}

pub(crate) fn conv_forward_raw(x: &[f64], l_in: usize, layer: &ConvLayer, l_out: usize, out: &mut [f64]) {
    let (c_out, c_in, k) = (layer.out_channels(), layer.in_channels(), layer.kernel());
    let (w, b, stride) = (layer.weight.data(), layer.bias.data(), layer.stride);
    for o in 0..c_out {
        let row = &mut out[o * l_out..(o + 1) * l_out];
        row.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..c_in {
            let xc = &x[c * l_in..(c + 1) * l_in];
            for kk in 0..k {
                let wv = w[(o * c_in + c) * k + kk];
                if stride == 1 {
                    for (r, xv) in row.iter_mut().zip(&xc[kk..kk + l_out]) {
                        *r += wv * xv;
                    }
                } else {
                    for (j, r) in row.iter_mut().enumerate() {
                        *r += wv * xc[j * stride + kk];
                    }
                }
            }
        }
    }
}

/// Accumulate parameter gradients and (optionally) write the input gradient.
pub(crate) fn conv_backward_raw(
    x: &[f64],
    l_in: usize,
    layer: &ConvLayer,
    grad_out: &[f64],
    l_out: usize,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_x: Option<&mut [f64]>,
) {
    let (c_out, c_in, k) = (layer.out_channels(), layer.in_channels(), layer.kernel());
    let (w, stride) = (layer.weight.data(), layer.stride);
    for o in 0..c_out {
        let g = &grad_out[o * l_out..(o + 1) * l_out];
        grad_b[o] += g.iter().sum::<f64>();
        for c in 0..c_in {
            let xc = &x[c * l_in..(c + 1) * l_in];
            for kk in 0..k {
                let acc: f64 = if stride == 1 {
                    g.iter().zip(&xc[kk..kk + l_out]).map(|(a, b)| a * b).sum()
                } else {
                    g.iter().enumerate().map(|(j, a)| a * xc[j * stride + kk]).sum()
                };
                grad_w[(o * c_in + c) * k + kk] += acc;
            }
        }
    }
    if let Some(gx) = grad_x {
        gx.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..c_out {
            let g = &grad_out[o * l_out..(o + 1) * l_out];
            for c in 0..c_in {
                let gxc = &mut gx[c * l_in..(c + 1) * l_in];
                for kk in 0..k {
                    let wv = w[(o * c_in + c) * k + kk];
                    if stride == 1 {
                        for (d, a) in gxc[kk..kk + l_out].iter_mut().zip(g) {
                            *d += wv * a;
                        }
                    } else {
                        for (j, a) in g.iter().enumerate() {
                            gxc[j * stride + kk] += wv * a;
                        }
                    }
                }
            }
        }
    }
}

/// Fully connected layer `W h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let l = DenseLayer { weight, bias };
        l.validate()?;
        Ok(l)
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.weight.shape();
        if s.len() != 2 || s[0] == 0 || s[1] == 0 {
            return Err(Error::Shape(format!("dense weight shape {s:?} is not [out, in]")));
        }
        if self.bias.shape() != [s[0]] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {} outputs",
                self.bias.shape(),
                s[0]
            )));
        }
        Ok(())
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// `h` may have any shape; it is read flat.
pub fn dense_forward(h: &Tensor, layer: &DenseLayer) -> Result<Tensor> {
    layer.validate()?;
    if h.len() != layer.inputs() {
        return Err(Error::Shape(format!(
            "dense input has {} values, layer expects {}",
            h.len(),
            layer.inputs()
        )));
    }
    let mut out = vec![0.0; layer.outputs()];
    dense_forward_raw(h.data(), layer, &mut out);
    Tensor::from_vec(out)
}

pub(crate) fn dense_forward_raw(h: &[f64], layer: &DenseLayer, out: &mut [f64]) {
    let n_in = layer.inputs();
    let (w, b) = (layer.weight.data(), layer.bias.data());
    for (o, v) in out.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *v = b[o] + row.iter().zip(h).map(|(a, x)| a * x).sum::<f64>();
    }
}

pub(crate) fn dense_backward_raw(
    h: &[f64],
    layer: &DenseLayer,
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_h: Option<&mut [f64]>,
) {
    let n_in = layer.inputs();
    let w = layer.weight.data();
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        if g != 0.0 {
            for (d, x) in grad_w[o * n_in..(o + 1) * n_in].iter_mut().zip(h) {
                *d += g * x;
            }
        }
    }
    if let Some(gh) = grad_h {
        gh.iter_mut().for_each(|v| *v = 0.0);
        for (o, &g) in grad_out.iter().enumerate() {
            if g != 0.0 {
                for (d, a) in gh.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *d += a * g;
                }
            }
        }
    }
}
