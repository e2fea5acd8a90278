//! Layer stack, shape chain, forward pass and exact reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadnet::layers::{
    conv_backward_raw, conv_forward_raw, conv_output_len, dense_backward_raw, dense_forward_raw,
    Activation, ConvLayer, DenseLayer,
};
use crate::quadnet::tensor::Tensor;
use crate::window::{Window, CHANNELS, WINDOW_SIZE};

pub const QUADNET_CONV_LAYERS: usize = 7;
pub const QUADNET_DENSE_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Layer widths. The final dense layer always has one output and is not
/// listed in `dense_hidden`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_channels: usize,
    pub input_len: usize,
    pub conv: Vec<ConvSpec>,
    pub dense_hidden: Vec<usize>,
}

impl ArchSpec {
    /// Seven conv layers 6→32→32→64→64→128→128→128 (kernel 3, the last two
    /// with stride 2), then dense 128·26→128→64→1.
    pub fn canonical() -> Self {
        let c = |out_channels, stride| ConvSpec {
            out_channels,
            kernel: 3,
            stride,
        };
        ArchSpec {
            input_channels: CHANNELS,
            input_len: WINDOW_SIZE,
            conv: vec![c(32, 1), c(32, 1), c(64, 1), c(64, 1), c(128, 1), c(128, 2), c(128, 2)],
            dense_hidden: vec![128, 64],
        }
    }

    /// Same 7+3 layout with narrower layers and early striding; roughly 30x
    /// cheaper per window than [`ArchSpec::canonical`].
    pub fn compact() -> Self {
        let c = |out_channels, kernel, stride| ConvSpec {
            out_channels,
            kernel,
            stride,
        };
        ArchSpec {
            input_channels: CHANNELS,
            input_len: WINDOW_SIZE,
            conv: vec![
                c(16, 5, 2),
                c(16, 3, 1),
                c(32, 3, 2),
                c(32, 3, 1),
                c(32, 3, 2),
                c(32, 3, 1),
                c(32, 3, 1),
            ],
            dense_hidden: vec![32, 16],
        }
    }

    /// Temporal length and channel count after every conv layer.
    pub fn shape_chain(&self) -> Result<Vec<(usize, usize)>> {
        if self.input_channels == 0 || self.input_len == 0 {
            return Err(Error::Shape("input must have at least one channel and sample".into()));
        }
        let mut chain = vec![(self.input_channels, self.input_len)];
        for (i, c) in self.conv.iter().enumerate() {
            let (_, len) = *chain.last().unwrap();
            if c.out_channels == 0 || c.kernel == 0 || c.stride == 0 {
                return Err(Error::Shape(format!("conv layer {i} has a zero dimension: {c:?}")));
            }
            let out = conv_output_len(len, c.kernel, c.stride).ok_or_else(|| {
                Error::Shape(format!(
                    "conv layer {i}: input length {len} shorter than kernel {}",
                    c.kernel
                ))
            })?;
            chain.push((c.out_channels, out));
        }
        if let Some(i) = self.dense_hidden.iter().position(|&w| w == 0) {
            return Err(Error::Shape(format!("dense layer {i} has zero width")));
        }
        Ok(chain)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let (c, l) = *self.shape_chain()?.last().unwrap();
        Ok(c * l)
    }

    pub fn validate_quadnet(&self) -> Result<()> {
        self.shape_chain()?;
        if self.conv.len() != QUADNET_CONV_LAYERS || self.dense_hidden.len() + 1 != QUADNET_DENSE_LAYERS {
            return Err(Error::Shape(format!(
                "QuadNet needs {QUADNET_CONV_LAYERS} conv and {QUADNET_DENSE_LAYERS} dense layers, got {} and {}",
                self.conv.len(),
                self.dense_hidden.len() + 1
            )));
        }
        if self.input_channels != CHANNELS || self.input_len != WINDOW_SIZE {
            return Err(Error::Shape(format!(
                "QuadNet input must be {WINDOW_SIZE}x{CHANNELS}, got {}x{}",
                self.input_len, self.input_channels
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> Result<usize> {
        let chain = self.shape_chain()?;
        let conv: usize = self
            .conv
            .iter()
            .zip(&chain)
            .map(|(c, (cin, _))| c.out_channels * (cin * c.kernel + 1))
            .sum();
        let mut n_in = self.flatten_len()?;
        let mut dense = 0;
        for &w in self.dense_hidden.iter().chain(std::iter::once(&1)) {
            dense += w * (n_in + 1);
            n_in = w;
        }
        Ok(conv + dense)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: ArchSpec,
    pub conv: Vec<ConvLayer>,
    pub dense: Vec<DenseLayer>,
    pub activation: Activation,
}

/// One gradient tensor per parameter tensor, in [`Network::param_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            tensors: net.params().iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }
}

impl Network {
    /// All-zero parameters with the layout of `arch`.
    pub fn zeros(arch: &ArchSpec) -> Result<Self> {
        let chain = arch.shape_chain()?;
        let conv = arch
            .conv
            .iter()
            .zip(&chain)
            .map(|(c, &(cin, _))| ConvLayer::zeros(cin, c.out_channels, c.kernel, c.stride))
            .collect();
        let mut n_in = arch.flatten_len()?;
        let mut dense = Vec::new();
        for &w in arch.dense_hidden.iter().chain(std::iter::once(&1)) {
            dense.push(DenseLayer::zeros(n_in, w));
            n_in = w;
        }
        Ok(Network {
            arch: arch.clone(),
            conv,
            dense,
            activation: Activation::Relu,
        })
    }

    /// He-style uniform fan-in initialization, zero biases.
    pub fn init(arch: &ArchSpec, seed: u64) -> Result<Self> {
        let mut net = Network::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut Tensor, fan_in: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            w.data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-limit..limit));
        };
        for l in &mut net.conv {
            let fan_in = l.in_channels() * l.kernel();
            fill(&mut l.weight, fan_in);
        }
        for l in &mut net.dense {
            let fan_in = l.inputs();
            fill(&mut l.weight, fan_in);
        }
        Ok(net)
    }

    /// Initialized network that additionally must have the 7-conv, 3-dense
    /// QuadNet structure on 120x6 input.
    pub fn quadnet(arch: &ArchSpec, seed: u64) -> Result<Self> {
        arch.validate_quadnet()?;
        Network::init(arch, seed)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.conv.len() {
            names.push(format!("conv{i}.weight"));
            names.push(format!("conv{i}.bias"));
        }
        for i in 0..self.dense.len() {
            names.push(format!("dense{i}.weight"));
            names.push(format!("dense{i}.bias"));
        }
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = Vec::new();
        for l in &self.conv {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        for l in &self.dense {
            v.push(&l.weight);
            v.push(&l.bias);
        }
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for l in &mut self.conv {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        for l in &mut self.dense {
            v.push(&mut l.weight);
            v.push(&mut l.bias);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Check every layer against the architecture's shape chain.
    pub fn validate(&self) -> Result<()> {
        let reference = Network::zeros(&self.arch)?;
        if self.conv.len() != reference.conv.len() || self.dense.len() != reference.dense.len() {
            return Err(Error::Shape("layer count does not match architecture".into()));
        }
        for (l, r) in self.conv.iter().zip(&reference.conv) {
            l.validate()?;
            if l.weight.shape() != r.weight.shape() || l.stride != r.stride {
                return Err(Error::Shape(format!(
                    "conv layer {:?}/{} does not match expected {:?}/{}",
                    l.weight.shape(),
                    l.stride,
                    r.weight.shape(),
                    r.stride
                )));
            }
        }
        for (l, r) in self.dense.iter().zip(&reference.dense) {
            l.validate()?;
            if l.weight.shape() != r.weight.shape() {
                return Err(Error::Shape(format!(
                    "dense layer {:?} does not match expected {:?}",
                    l.weight.shape(),
                    r.weight.shape()
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let want = self.arch.input_channels * self.arch.input_len;
        if x.len() != want {
            return Err(Error::Shape(format!(
                "network input has {} values, architecture expects {}x{}",
                x.len(),
                self.arch.input_channels,
                self.arch.input_len
            )));
        }
        Ok(())
    }

    /// Forward pass on a channels-first `[C, L]` input.
    pub fn forward_input(&self, x: &Tensor) -> Result<f64> {
        self.check_input(x.data())?;
        Ok(self.run_forward(x.data(), None))
    }

    fn run_forward(&self, x: &[f64], mut cache: Option<&mut Cache>) -> f64 {
        let act = self.activation;
        let mut len = self.arch.input_len;
        let mut h = x.to_vec();
        for layer in &self.conv {
            let l_out = layer.output_len(len).expect("shape chain validated");
            let mut z = vec![0.0; layer.out_channels() * l_out];
            conv_forward_raw(&h, len, layer, l_out, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(std::mem::replace(&mut h, a));
                c.lens.push(len);
                c.pre.push(z);
            } else {
                h = a;
            }
            len = l_out;
        }
        let last = self.dense.len() - 1;
        for (i, layer) in self.dense.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs()];
            dense_forward_raw(&h, layer, &mut z);
            let a: Vec<f64> = if i == last {
                z.clone()
            } else {
                z.iter().map(|&v| act.apply(v)).collect()
            };
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(std::mem::replace(&mut h, a));
                c.pre.push(z);
            } else {
                h = a;
            }
        }
        h[0]
    }

    /// Accumulate the gradient of `weight * (y - target)^2` for one example
    /// into `grads` and return the residual `y - target`.
    fn run_backward(&self, x: &[f64], target: f64, weight: f64, grads: &mut Gradients) -> f64 {
        let mut cache = Cache::default();
        let r = self.run_forward(x, Some(&mut cache)) - target;
        let d_out = 2.0 * weight * r;
        let act = self.activation;
        let n_conv = self.conv.len();
        let last = self.dense.len() - 1;
        let mut g = vec![d_out];
        for (i, layer) in self.dense.iter().enumerate().rev() {
            if i != last {
                for (gv, &z) in g.iter_mut().zip(&cache.pre[n_conv + i]) {
                    *gv *= act.derivative(z);
                }
            }
            let need_input = i > 0 || n_conv > 0;
            let mut gh = vec![0.0; if need_input { layer.inputs() } else { 0 }];
            let (gw, gb) = pair_mut(&mut grads.tensors, 2 * (n_conv + i));
            dense_backward_raw(
                &cache.inputs[n_conv + i],
                layer,
                &g,
                gw,
                gb,
                need_input.then_some(gh.as_mut_slice()),
            );
            g = gh;
        }
        for (i, layer) in self.conv.iter().enumerate().rev() {
            for (gv, &z) in g.iter_mut().zip(&cache.pre[i]) {
                *gv *= act.derivative(z);
            }
            let l_in = cache.lens[i];
            let l_out = layer.output_len(l_in).expect("shape chain validated");
            let mut gx = vec![0.0; if i > 0 { layer.in_channels() * l_in } else { 0 }];
            let (gw, gb) = pair_mut(&mut grads.tensors, 2 * i);
            conv_backward_raw(
                &cache.inputs[i],
                l_in,
                layer,
                &g,
                l_out,
                gw,
                gb,
                (i > 0).then_some(gx.as_mut_slice()),
            );
            g = gx;
        }
        r
    }

    /// Mean squared error over a batch of channels-first inputs and the
    /// exact gradient of that mean.
    pub fn loss_and_grad(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(f64, Gradients)> {
        let (r, g) = self.residuals_and_grad(inputs, targets)?;
        Ok((r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64, g))
    }

    /// Per-example residuals `y - target` and the batch-mean MSE gradient.
    pub fn residuals_and_grad(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(Vec<f64>, Gradients)> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::Shape(format!(
                "batch has {} inputs and {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let w = 1.0 / inputs.len() as f64;
        let mut grads = Gradients::zeros_like(self);
        let residuals = inputs
            .iter()
            .zip(targets)
            .map(|(x, &t)| self.run_backward(x, t, w, &mut grads))
            .collect();
        Ok((residuals, grads))
    }

    /// Mean squared error without gradients.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<f64> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::Shape(format!(
                "batch has {} inputs and {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let mut sum = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            let r = self.run_forward(x, None) - t;
            sum += r * r;
        }
        Ok(sum / inputs.len() as f64)
    }

    /// Forward pass on raw channels-first data.
    pub fn forward_raw(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.run_forward(x, None))
    }
}

fn pair_mut(t: &mut [Tensor], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = t[i..].split_at_mut(1);
    (a[0].data_mut(), b[0].data_mut())
}

/// Channels-first copy of a window: `out[c * L + j] = x[j][c]`.
pub fn window_to_input(w: &Window) -> Vec<f64> {
    let len = w.x.len();
    let mut out = vec![0.0; CHANNELS * len];
    for (j, row) in w.x.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c * len + j] = *v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub checked: usize,
}

/// Compare the analytic gradient of the batch loss with central differences
/// on every parameter.
pub fn grad_check(net: &Network, inputs: &[&[f64]], targets: &[f64], eps: f64) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("grad_check step must be positive, got {eps}")));
    }
    let (_, grads) = net.loss_and_grad(inputs, targets)?;
    let analytic = grads.flat();
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        checked: 0,
    };
    let mut flat_index = 0;
    let n_tensors = probe.params().len();
    for ti in 0..n_tensors {
        let len = probe.params()[ti].len();
        for j in 0..len {
            let orig = probe.params()[ti].data()[j];
            probe.params_mut()[ti].data_mut()[j] = orig + eps;
            let up = probe.loss(inputs, targets)?;
            probe.params_mut()[ti].data_mut()[j] = orig - eps;
            let down = probe.loss(inputs, targets)?;
            probe.params_mut()[ti].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[flat_index];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = flat_index;
            }
            report.checked += 1;
            flat_index += 1;
        }
    }
    Ok(report)
}

/// Per-layer activations kept for the backward pass.
#[derive(Default)]
struct Cache {
    /// Input to every layer, conv layers first.
    inputs: Vec<Vec<f64>>,
    /// Temporal input length of each conv layer.
    lens: Vec<usize>,
    /// Pre-activation output of every layer.
    pre: Vec<Vec<f64>>,
}

impl Network {
    /// Predict from a 120x6 window (time-major, transposed internally).
    pub fn forward(&self, window: &Window) -> Result<f64> {
        if window.x.len() != self.arch.input_len {
            return Err(Error::Shape(format!(
                "window has {} samples, network expects {}",
                window.x.len(),
                self.arch.input_len
            )));
        }
        self.forward_raw(&window_to_input(window))
    }

    /// Batch loss and gradients over windows labelled with `y`.
    pub fn backward(&self, batch: &[Window], y: &[f64]) -> Result<(f64, Gradients)> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(window_to_input).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        self.loss_and_grad(&refs, y)
    }
}

pub fn mse_loss(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::InvalidInput(format!(
            "mse needs equal non-empty inputs, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}
