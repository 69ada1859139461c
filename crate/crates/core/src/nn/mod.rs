//! Bias-free fully connected networks with per-neuron binary masks.
//!
//! Every layer computes `h = act(W x) ⊙ m`. The last layer's mask is always all ones;
//! the hidden masks are what the pruning strategies operate on. Forward passes record a
//! [`GradTape`] that [`MaskedMlp::backward`] consumes to produce weight gradients.

mod gradcheck;
mod mat;

pub use gradcheck::{grad_check, relative_error, GRAD_CHECK_FLOOR};
pub use mat::Mat;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and the activation `a = act(z)`.
    /// The ReLU subgradient at zero is zero.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// One fully connected layer: `weights` is `out_dim x in_dim`, `mask` has `out_dim` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLayer {
    weights: Mat,
    mask: Vec<bool>,
    activation: Activation,
}

impl MaskedLayer {
    pub fn new(weights: Mat, mask: Vec<bool>, activation: Activation) -> Result<Self> {
        if mask.len() != weights.rows() {
            return Err(Error::shape("MaskedLayer mask", weights.rows(), mask.len()));
        }
        Ok(Self {
            weights,
            mask,
            activation,
        })
    }

    /// Unmasked layer.
    pub fn dense(weights: Mat, activation: Activation) -> Self {
        let mask = vec![true; weights.rows()];
        Self {
            weights,
            mask,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn alive(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64], gate: &mut [f64]) {
        let mut alive = [0usize; 4];
        let mut pending = 0;
        for i in 0..self.out_dim() {
            out[i] = 0.0;
            gate[i] = 0.0;
            if !self.mask[i] {
                continue;
            }
            alive[pending] = i;
            pending += 1;
            if pending == 4 {
                let w = &self.weights;
                let z = mat::dot4(
                    [
                        w.row(alive[0]),
                        w.row(alive[1]),
                        w.row(alive[2]),
                        w.row(alive[3]),
                    ],
                    x,
                );
                for (k, &r) in alive.iter().enumerate() {
                    self.activate(r, z[k], out, gate);
                }
                pending = 0;
            }
        }
        for &r in &alive[..pending] {
            let z = mat::dot(self.weights.row(r), x);
            self.activate(r, z, out, gate);
        }
    }

    #[inline]
    fn activate(&self, r: usize, z: f64, out: &mut [f64], gate: &mut [f64]) {
        let a = self.activation.apply(z);
        out[r] = a;
        gate[r] = self.activation.derivative(z, a);
    }
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct GradTape {
    revision: u64,
    dims: Vec<usize>,
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// `act'(z) * m` for each layer.
    gates: Vec<Vec<f64>>,
}

impl GradTape {
    pub fn layer_inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }
}

/// Per-layer weight gradients, shaped like the network's weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Mat>,
}

impl Grads {
    pub fn zeros_like(net: &MaskedMlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Mat::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.layers.iter_mut().for_each(|m| m.fill(0.0));
    }

    pub fn scale(&mut self, alpha: f64) {
        self.layers.iter_mut().for_each(|m| m.scale(alpha));
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Grads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.axpy(alpha, b);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, g| m.max(g.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Mat::is_finite)
    }

    /// Zeroes every entry that touches a masked-off neuron (its incoming row and its
    /// outgoing column in the next layer).
    pub fn zero_masked(&mut self, net: &MaskedMlp) {
        for (l, layer) in net.layers.iter().enumerate() {
            for (i, &alive) in layer.mask.iter().enumerate() {
                if alive {
                    continue;
                }
                self.layers[l].row_mut(i).iter_mut().for_each(|g| *g = 0.0);
                if let Some(next) = self.layers.get_mut(l + 1) {
                    for r in 0..next.rows() {
                        next.set(r, i, 0.0);
                    }
                }
            }
        }
    }

    pub(crate) fn check_shapes(&self, net: &MaskedMlp) -> Result<()> {
        if self.layers.len() != net.layers.len() {
            return Err(Error::shape(
                "gradient layer count",
                net.layers.len(),
                self.layers.len(),
            ));
        }
        for (l, (g, layer)) in self.layers.iter().zip(&net.layers).enumerate() {
            if g.shape() != layer.weights.shape() {
                return Err(Error::shape(
                    format!("gradient for layer {l}"),
                    format!("{:?}", layer.weights.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
        }
        Ok(())
    }
}

/// Layered bias-free network with binary neuron masks on the hidden layers.
#[derive(Debug, Clone)]
pub struct MaskedMlp {
    layers: Vec<MaskedLayer>,
    revision: u64,
}

impl PartialEq for MaskedMlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl MaskedMlp {
    pub fn new(layers: Vec<MaskedLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    format!("layer {} input", l + 1),
                    pair[0].out_dim(),
                    pair[1].in_dim(),
                ));
            }
        }
        let last = layers.last().expect("non-empty");
        if last.mask.iter().any(|&m| !m) {
            return Err(Error::Config("output-layer mask must be all ones".into()));
        }
        for layer in &layers {
            if !layer.weights.is_finite() {
                return Err(Error::NonFinite("initial weights".into()));
            }
        }
        Ok(Self {
            layers,
            revision: 0,
        })
    }

    /// Glorot-uniform initialised network with widths `dims = [in, h1, .., out]`.
    pub fn random<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {dims:?}")));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..=limit))
                    .collect();
                let act = if l + 1 == n { output } else { hidden };
                MaskedLayer::dense(Mat::from_vec(fan_out, fan_in, data).expect("sized"), act)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[MaskedLayer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `[in, h1, .., out]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim()];
        dims.extend(self.layers.iter().map(MaskedLayer::out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    /// Hidden layers are every layer but the last.
    pub fn hidden_layers(&self) -> &[MaskedLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn total_hidden(&self) -> usize {
        self.hidden_layers().iter().map(MaskedLayer::out_dim).sum()
    }

    pub fn alive_hidden(&self) -> usize {
        self.hidden_layers().iter().map(MaskedLayer::alive).sum()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite())
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut Mat {
        self.revision += 1;
        &mut self.layers[layer].weights
    }

    /// Sets one hidden neuron's mask bit.
    pub fn set_mask(&mut self, layer: usize, neuron: usize, alive: bool) -> Result<()> {
        if layer + 1 >= self.layers.len() {
            return Err(Error::Config(format!(
                "layer {layer} is not a hidden layer; output neurons cannot be masked"
            )));
        }
        let len = self.layers[layer].mask.len();
        let slot = self.layers[layer]
            .mask
            .get_mut(neuron)
            .ok_or_else(|| Error::shape(format!("mask index in layer {layer}"), len, neuron))?;
        *slot = alive;
        self.revision += 1;
        Ok(())
    }

    /// Zeroes a neuron's incoming row and outgoing column.
    pub fn zero_neuron_weights(&mut self, layer: usize, neuron: usize) {
        self.revision += 1;
        self.layers[layer]
            .weights
            .row_mut(neuron)
            .iter_mut()
            .for_each(|w| *w = 0.0);
        if let Some(next) = self.layers.get_mut(layer + 1) {
            for r in 0..next.weights.rows() {
                next.weights.set(r, neuron, 0.0);
            }
        }
    }

    /// Re-applies the structural zeros of every masked neuron.
    pub fn enforce_masks(&mut self) {
        let masked: Vec<(usize, usize)> = self
            .hidden_layers()
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer
                    .mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| !m)
                    .map(move |(i, _)| (l, i))
            })
            .collect();
        for (l, i) in masked {
            self.zero_neuron_weights(l, i);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, GradTape)> {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut gates = Vec::with_capacity(n);
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            if x.len() != layer.in_dim() {
                return Err(Error::LayerInput {
                    layer: l,
                    expected: layer.in_dim(),
                    actual: x.len(),
                });
            }
            let mut out = vec![0.0; layer.out_dim()];
            let mut gate = vec![0.0; layer.out_dim()];
            layer.forward_into(&x, &mut out, &mut gate);
            inputs.push(std::mem::replace(&mut x, out));
            gates.push(gate);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output".into()));
        }
        let tape = GradTape {
            revision: self.revision,
            dims: self.layer_dims(),
            inputs,
            gates,
        };
        Ok((x, tape))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            if x.len() != layer.in_dim() {
                return Err(Error::LayerInput {
                    layer: l,
                    expected: layer.in_dim(),
                    actual: x.len(),
                });
            }
            let mut out = vec![0.0; layer.out_dim()];
            let mut gate = vec![0.0; layer.out_dim()];
            layer.forward_into(&x, &mut out, &mut gate);
            x = out;
        }
        Ok(x)
    }

    /// Returns `d loss / d W` for every layer given `d loss / d output`.
    pub fn backward(&self, tape: &GradTape, output_grad: &[f64]) -> Result<Grads> {
        let mut grads = Grads::zeros_like(self);
        self.backward_accumulate(tape, output_grad, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale * d loss / d W` into `grads`.
    pub fn backward_accumulate(
        &self,
        tape: &GradTape,
        output_grad: &[f64],
        scale: f64,
        grads: &mut Grads,
    ) -> Result<()> {
        self.check_tape(tape)?;
        if output_grad.len() != self.output_dim() {
            return Err(Error::shape(
                "output gradient",
                self.output_dim(),
                output_grad.len(),
            ));
        }
        let mut delta: Vec<f64> = output_grad
            .iter()
            .zip(tape.gates.last().expect("non-empty"))
            .map(|(g, d)| scale * g * d)
            .collect();
        for l in (0..self.layers.len()).rev() {
            grads.layers[l].add_outer(1.0, &delta, &tape.inputs[l]);
            if l == 0 {
                break;
            }
            let mut upstream = vec![0.0; self.layers[l].in_dim()];
            self.layers[l]
                .weights
                .matvec_transposed_into(&delta, &mut upstream);
            for (u, g) in upstream.iter_mut().zip(&tape.gates[l - 1]) {
                *u *= g;
            }
            delta = upstream;
        }
        Ok(())
    }

    fn check_tape(&self, tape: &GradTape) -> Result<()> {
        let dims = self.layer_dims();
        if tape.dims != dims {
            return Err(Error::StaleTape(format!(
                "tape recorded for widths {:?}, network has {:?}",
                tape.dims, dims
            )));
        }
        if tape.revision != self.revision {
            return Err(Error::StaleTape(format!(
                "network modified since forward (revision {} vs {})",
                tape.revision, self.revision
            )));
        }
        Ok(())
    }

    /// Plain gradient descent: `W <- W - lr * grad` for every layer. Masks are untouched.
    pub fn sgd_step(&mut self, grads: &Grads, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {lr}"
            )));
        }
        grads.check_shapes(self)?;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.axpy(-lr, g);
        }
        self.revision += 1;
        if !self.is_finite() {
            return Err(Error::NonFinite("weights after sgd step".into()));
        }
        Ok(())
    }

    /// Replaces the layer list wholesale; used by compaction and checkpoint loading.
    pub(crate) fn from_parts(layers: Vec<MaskedLayer>) -> Result<Self> {
        Self::new(layers)
    }
}
