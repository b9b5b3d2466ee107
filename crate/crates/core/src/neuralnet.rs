//! Feed-forward networks with a flat parameter vector and hand-written
//! reverse-mode gradients.
//!
//! Hidden layers use `tanh`, the output layer is linear. Parameters are laid
//! out layer-major; within a layer the weight matrix comes first (row-major,
//! `out x in`) followed by the bias vector. That ordering is the one used by
//! [`FlatParamNet::get_flat`], by gradients and by the checkpoint format.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Hidden widths used by every policy and value network.
pub const HIDDEN: [usize; 2] = [64, 64];

/// Number of parameters (weights plus biases) for `layer_sizes`.
pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParamNet {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations kept from a forward pass, plus scratch space for
/// the backward pass. Reuse one across calls to avoid allocation.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl FlatParamNet {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidInput(format!(
                "layer sizes must have at least two positive entries, got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases. The
    /// final layer's weights are multiplied by `output_scale`.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], output_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        let mut off = 0;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == n_layers { output_scale } else { 1.0 };
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound) * scale;
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// `input -> 64 -> 64 -> output` network.
    pub fn mlp<R: Rng + ?Sized>(input: usize, output: usize, output_scale: f64, rng: &mut R) -> Result<Self> {
        Self::init(&[input, HIDDEN[0], HIDDEN[1], output], output_scale, rng)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn get_flat(&self) -> &[f64] {
        &self.params
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        check_len("flat parameters", v.len(), self.params.len())?;
        self.params.copy_from_slice(v);
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", input.len(), self.input_dim())?;
        let mut acts = Activations::default();
        self.forward_into(input, &mut acts);
        Ok(acts.output().to_vec())
    }

    /// Forward pass keeping every layer's output in `acts`. The caller is
    /// responsible for the input length.
    pub fn forward_into(&self, input: &[f64], acts: &mut Activations) {
        debug_assert_eq!(input.len(), self.input_dim());
        let n_layers = self.layer_sizes.len() - 1;
        acts.layers.resize_with(n_layers + 1, Vec::new);
        acts.layers[0].clear();
        acts.layers[0].extend_from_slice(input);
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let (prev, next) = acts.layers.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut next[0];
            y.clear();
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let s = b[j] + dot(row, x);
                y.push(if l + 1 < n_layers { s.tanh() } else { s });
            }
            off += fan_in * fan_out + fan_out;
        }
    }

    /// Gradient of `output . cotangent` with respect to the flat parameters.
    pub fn backward(&self, input: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", input.len(), self.input_dim())?;
        check_len("output cotangent", cotangent.len(), self.output_dim())?;
        let mut acts = Activations::default();
        self.forward_into(input, &mut acts);
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(&mut acts, cotangent, &mut grad);
        Ok(grad)
    }

    /// Adds the gradient of `output . cotangent` into `grad`, using the
    /// activations of the most recent [`forward_into`](Self::forward_into).
    pub fn backward_into(&self, acts: &mut Activations, cotangent: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(cotangent.len(), self.output_dim());
        debug_assert_eq!(grad.len(), self.params.len());
        let n_layers = self.layer_sizes.len() - 1;
        let Activations { layers, delta, delta_prev } = acts;
        delta.clear();
        delta.extend_from_slice(cotangent);
        let mut end = self.params.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w_off = end - fan_out - fan_in * fan_out;
            let b_off = end - fan_out;
            let x = &layers[l];
            for j in 0..fan_out {
                let d = delta[j];
                grad[b_off + j] += d;
                if d != 0.0 {
                    let g_row = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                    for (g, xi) in g_row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l > 0 {
                delta_prev.clear();
                delta_prev.resize(fan_in, 0.0);
                let w = &self.params[w_off..w_off + fan_in * fan_out];
                for j in 0..fan_out {
                    let d = delta[j];
                    if d != 0.0 {
                        for (dp, wji) in delta_prev.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                            *dp += d * wji;
                        }
                    }
                }
                // x holds tanh outputs of the previous layer
                for (dp, h) in delta_prev.iter_mut().zip(x) {
                    *dp *= 1.0 - h * h;
                }
                std::mem::swap(delta, delta_prev);
            }
            end = w_off;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociating
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"FPN1";

/// Parameter checkpoint: layer sizes, an optional trailing block of extra
/// parameters (the Gaussian log-std) and the flat vector itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub extra: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    /// Binary layout, all little-endian:
    /// `"FPN1" | u32 n_sizes | u32 size... | u64 extra | u64 P | f64 x P`
    /// where `P = param_count(sizes) + extra`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.extra as u64).to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::InvalidInput("checkpoint: bad magic".into()));
        }
        let n = r.u32()? as usize;
        let layer_sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let extra = r.u64()? as usize;
        let count = r.u64()? as usize;
        check_len("checkpoint parameter count", count, param_count(&layer_sizes) + extra)?;
        let params = (0..count)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::InvalidInput("checkpoint: trailing bytes".into()));
        }
        Ok(Self { layer_sizes, extra, params })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        check_len("checkpoint parameter count", ck.params.len(), param_count(&ck.layer_sizes) + ck.extra)?;
        Ok(ck)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::InvalidInput("checkpoint: truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl From<&FlatParamNet> for Checkpoint {
    fn from(net: &FlatParamNet) -> Self {
        Checkpoint { layer_sizes: net.layer_sizes.clone(), extra: 0, params: net.params.clone() }
    }
}
