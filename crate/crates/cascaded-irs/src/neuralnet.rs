//! Minimal dense network with manual backpropagation and Adam. Enough for the
//! 4-layer actor/critic pairs; nothing more.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative at the pre-activation; relu uses subgradient 0 at exactly 0.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Linear => 1.0,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation tag {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major out_dim x in_dim.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
pub fn mlp_init(
    layer_sizes: &[usize],
    activations: &[Activation],
    stream: RngStream,
) -> Result<MlpParams> {
    if layer_sizes.len() < 2 {
        return Err(Error::Domain("need at least an input and an output layer".into()));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Shape(format!(
            "{} layer transitions but {} activations",
            layer_sizes.len() - 1,
            activations.len()
        )));
    }
    let mut rng = stream.rng();
    let mut layers = Vec::with_capacity(activations.len());
    for (i, &act) in activations.iter().enumerate() {
        let (in_dim, out_dim) = (layer_sizes[i], layer_sizes[i + 1]);
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
            .collect();
        layers.push(Layer {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
            activation: act,
        });
    }
    Ok(MlpParams { layers })
}

/// Per-layer inputs and pre-activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

pub fn forward(params: &MlpParams, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if input.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input length {} does not match first layer {}",
            input.len(),
            params.input_dim()
        )));
    }
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(params.layers.len()),
        preacts: Vec::with_capacity(params.layers.len()),
    };
    let mut x = input.to_vec();
    for layer in &params.layers {
        let mut pre = layer.biases.clone();
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            pre[o] += row.iter().zip(&x).map(|(w, xi)| w * xi).sum::<f64>();
        }
        cache.inputs.push(x);
        x = pre.iter().map(|&p| layer.activation.apply(p)).collect();
        cache.preacts.push(pre);
    }
    Ok((x, cache))
}

/// Gradients shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: params.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= s;
            }
        }
    }
}

/// Exact reverse-mode gradients; returns parameter gradients and the gradient
/// with respect to the network input.
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    output_gradient: &[f64],
) -> Result<(MlpGrads, Vec<f64>)> {
    if cache.inputs.len() != params.layers.len() {
        return Err(Error::Shape("cache does not match network depth".into()));
    }
    if output_gradient.len() != params.output_dim() {
        return Err(Error::Shape(format!(
            "output gradient length {} does not match output dim {}",
            output_gradient.len(),
            params.output_dim()
        )));
    }
    let mut grads = MlpGrads::zeros_like(params);
    let mut delta = output_gradient.to_vec();
    for (li, layer) in params.layers.iter().enumerate().rev() {
        let pre = &cache.preacts[li];
        let x = &cache.inputs[li];
        if x.len() != layer.in_dim || pre.len() != layer.out_dim {
            return Err(Error::Shape("stale cache shape".into()));
        }
        // d pre = d out * act'(pre)
        let dpre: Vec<f64> = delta
            .iter()
            .zip(pre)
            .map(|(&d, &p)| d * layer.activation.derivative(p))
            .collect();
        for o in 0..layer.out_dim {
            grads.biases[li][o] = dpre[o];
            let row = &mut grads.weights[li][o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, xi) in x.iter().enumerate() {
                row[i] = dpre[o] * xi;
            }
        }
        let mut dinput = vec![0.0; layer.in_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, w) in row.iter().enumerate() {
                dinput[i] += dpre[o] * w;
            }
        }
        delta = dinput;
    }
    Ok((grads, delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            m_weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: params.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: params.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    state: (f64, f64, f64, f64, f64),
) {
    let (beta1, beta2, eps, lr, t) = state;
    let bc1 = 1.0 - beta1.powf(t);
    let bc2 = 1.0 - beta2.powf(t);
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Bias-corrected Adam step, in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::Domain(format!("learning rate must be > 0, got {lr}")));
    }
    if grads.weights.len() != params.layers.len() {
        return Err(Error::Shape("gradient/parameter layer count mismatch".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    for (li, layer) in params.layers.iter_mut().enumerate() {
        if grads.weights[li].len() != layer.weights.len()
            || grads.biases[li].len() != layer.biases.len()
        {
            return Err(Error::Shape("gradient/parameter shape mismatch".into()));
        }
        adam_update(
            &mut layer.weights,
            &grads.weights[li],
            &mut state.m_weights[li],
            &mut state.v_weights[li],
            (state.beta1, state.beta2, state.epsilon, lr, t),
        );
        adam_update(
            &mut layer.biases,
            &grads.biases[li],
            &mut state.m_biases[li],
            &mut state.v_biases[li],
            (state.beta1, state.beta2, state.epsilon, lr, t),
        );
    }
    Ok(())
}

/// Elementwise tau * online + (1 - tau) * target.
pub fn soft_update(target: &MlpParams, online: &MlpParams, tau: f64) -> Result<MlpParams> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("tau must be in (0,1], got {tau}")));
    }
    if !target.same_shape(online) {
        return Err(Error::Shape("target/online shape mismatch".into()));
    }
    let layers = target
        .layers
        .iter()
        .zip(&online.layers)
        .map(|(t, o)| Layer {
            in_dim: t.in_dim,
            out_dim: t.out_dim,
            weights: t
                .weights
                .iter()
                .zip(&o.weights)
                .map(|(tv, ov)| tau * ov + (1.0 - tau) * tv)
                .collect(),
            biases: t
                .biases
                .iter()
                .zip(&o.biases)
                .map(|(tv, ov)| tau * ov + (1.0 - tau) * tv)
                .collect(),
            activation: t.activation,
        })
        .collect();
    Ok(MlpParams { layers })
}

const PARAMS_MAGIC: &[u8; 4] = b"MLP1";

/// Binary parameter dump: magic, layer count, per-layer shape header, then
/// little-endian f64 weights and biases. Round-trips bit-exactly.
pub fn save_params<W: Write>(params: &MlpParams, out: &mut W) -> Result<()> {
    out.write_all(PARAMS_MAGIC)?;
    out.write_all(&(params.layers.len() as u32).to_le_bytes())?;
    for layer in &params.layers {
        out.write_all(&(layer.in_dim as u32).to_le_bytes())?;
        out.write_all(&(layer.out_dim as u32).to_le_bytes())?;
        out.write_all(&[layer.activation.tag()])?;
        for &w in layer.weights.iter().chain(&layer.biases) {
            out.write_all(&w.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_params<R: Read>(input: &mut R) -> Result<MlpParams> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::Config("bad parameter file magic".into()));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let n_layers = u32::from_le_bytes(u32buf) as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        input.read_exact(&mut u32buf)?;
        let in_dim = u32::from_le_bytes(u32buf) as usize;
        input.read_exact(&mut u32buf)?;
        let out_dim = u32::from_le_bytes(u32buf) as usize;
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        let activation = Activation::from_tag(tag[0])?;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = [0u8; 8];
            (0..count)
                .map(|_| {
                    input.read_exact(&mut buf)?;
                    Ok(f64::from_le_bytes(buf))
                })
                .collect()
        };
        let weights = read_f64s(in_dim * out_dim)?;
        let biases = read_f64s(out_dim)?;
        layers.push(Layer {
            in_dim,
            out_dim,
            weights,
            biases,
            activation,
        });
    }
    Ok(MlpParams { layers })
}
