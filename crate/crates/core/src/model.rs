//! The 1D convolutional regressor: three VALID convolutions over the time
//! axis, global average pooling, and an affine head producing one scalar.
//!
//! Everything runs in f64 with fixed summation orders, so forward, loss, and
//! gradients are bit-reproducible for a given parameter set and input,
//! at any thread count.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::par::chunked_map;
use crate::rng::{normal, seed_rng};
use crate::{Error, Result};

/// Guard on the RMSE denominator when backpropagating through the square
/// root at a perfect fit.
pub const RMSE_EPS: f64 = 1e-12;

/// Fixed batch chunk size for gradient reduction. Chunk boundaries never
/// depend on the worker count, which keeps the floating-point reduction
/// order (and therefore every checkpoint byte) thread-count independent.
const BATCH_CHUNK: usize = 32;

/// Activation applied after each convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// max(0, x)
    #[default]
    Rectifier,
    /// Pass-through; used by the linearity probe in tests.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rectifier => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Network architecture.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub filters: [usize; 3],
    pub kernel_size: usize,
    /// Input window length in frames.
    pub window_len: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 36,
            filters: [64, 128, 64],
            kernel_size: 8,
            window_len: 90,
            activation: Activation::Rectifier,
        }
    }
}

impl ModelConfig {
    /// Output lengths of the three VALID convolutions (each shrinks the time
    /// axis by kernel_size − 1). Errors when the window is too short.
    pub fn conv_output_lens(&self) -> Result<[usize; 3]> {
        if self.kernel_size == 0 {
            return Err(Error::invalid("model config", "kernel_size must be ≥ 1"));
        }
        let shrink = self.kernel_size - 1;
        let mut len = self.window_len;
        let mut out = [0usize; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            if len < self.kernel_size {
                return Err(Error::invalid(
                    "model config",
                    format!(
                        "window {} too short for conv layer {} with kernel {}",
                        self.window_len,
                        i + 1,
                        self.kernel_size
                    ),
                ));
            }
            len -= shrink;
            *slot = len;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.filters.contains(&0) {
            return Err(Error::invalid(
                "model config",
                "channel and filter counts must be positive",
            ));
        }
        self.conv_output_lens()?;
        Ok(())
    }
}

/// One convolution layer's parameters.
///
/// `weight` is laid out `[out_ch][kernel][in_ch]` (input channels
/// contiguous); `bias` is `[out_ch]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            weight: vec![0.0; out_ch * kernel * in_ch],
            bias: vec![0.0; out_ch],
        }
    }

    #[inline]
    fn w_row(&self, oc: usize, k: usize) -> &[f64] {
        let base = (oc * self.kernel + k) * self.in_ch;
        &self.weight[base..base + self.in_ch]
    }
}

/// All trainable parameters, together with the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<ConvLayer>,
    pub head_weight: Vec<f64>,
    pub head_bias: f64,
}

/// Gradients carry the same shape as the parameters they refer to.
pub type GradientSet = ModelParams;

impl ModelParams {
    /// All-zero parameters for the given architecture.
    pub fn zeros(config: &ModelConfig) -> Self {
        let chans = [
            config.in_channels,
            config.filters[0],
            config.filters[1],
            config.filters[2],
        ];
        let layers = (0..3)
            .map(|l| ConvLayer::zeros(chans[l], chans[l + 1], config.kernel_size))
            .collect();
        Self {
            config: config.clone(),
            layers,
            head_weight: vec![0.0; config.filters[2]],
            head_bias: 0.0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum::<usize>()
            + self.head_weight.len()
            + 1
    }

    /// Iterate parameter values in the declared (serialization) order:
    /// conv1 weight, conv1 bias, conv2 weight, conv2 bias, conv3 weight,
    /// conv3 bias, head weight, head bias.
    pub fn flat_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .chain(self.head_weight.iter())
            .copied()
            .chain(std::iter::once(self.head_bias))
    }

    pub fn flat_iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
            .chain(self.head_weight.iter_mut())
            .chain(std::iter::once(&mut self.head_bias))
    }

    /// Elementwise accumulate; shapes must match.
    pub fn add_assign(&mut self, other: &ModelParams) {
        debug_assert_eq!(self.config, other.config);
        for (a, b) in self.flat_iter_mut().zip(other.flat_iter()) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.flat_iter().all(|v| v.is_finite())
    }
}

/// Shape congruence between a parameter set and a gradient set.
pub fn adam_shapes_match(params: &ModelParams, grads: &GradientSet) -> bool {
    params.config == grads.config
}

/// He-style initialization: weights from a zero-mean normal with variance
/// 2 / fan_in, biases zero. Deterministic for a given seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = seed_rng(seed);
    let mut params = ModelParams::zeros(config);
    for layer in &mut params.layers {
        let sd = (2.0 / (layer.in_ch * layer.kernel) as f64).sqrt();
        for w in &mut layer.weight {
            *w = sd * normal(&mut rng);
        }
    }
    let sd = (2.0 / config.filters[2] as f64).sqrt();
    for w in &mut params.head_weight {
        *w = sd * normal(&mut rng);
    }
    Ok(params)
}

/// Dot product with a fixed 4-lane accumulation order.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        lanes[0] += x[0] * y[0];
        lanes[1] += x[1] * y[1];
        lanes[2] += x[2] * y[2];
        lanes[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// out += s * a
#[inline]
fn axpy(out: &mut [f64], s: f64, a: &[f64]) {
    debug_assert_eq!(out.len(), a.len());
    for (o, x) in out.iter_mut().zip(a) {
        *o += s * x;
    }
}

fn conv_forward(input: &[f64], t_in: usize, layer: &ConvLayer, out: &mut Vec<f64>) {
    let t_out = t_in - layer.kernel + 1;
    out.clear();
    out.resize(t_out * layer.out_ch, 0.0);
    for t in 0..t_out {
        let row = &mut out[t * layer.out_ch..(t + 1) * layer.out_ch];
        for (oc, slot) in row.iter_mut().enumerate() {
            let mut acc = layer.bias[oc];
            for k in 0..layer.kernel {
                let in_row = &input[(t + k) * layer.in_ch..(t + k + 1) * layer.in_ch];
                acc += dot(in_row, layer.w_row(oc, k));
            }
            *slot = acc;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    t_in: usize,
    layer: &ConvLayer,
    d_out: &[f64],
    mut d_input: Option<&mut [f64]>,
    d_layer: &mut ConvLayer,
) {
    let t_out = t_in - layer.kernel + 1;
    for t in 0..t_out {
        let d_row = &d_out[t * layer.out_ch..(t + 1) * layer.out_ch];
        for (oc, &g) in d_row.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            d_layer.bias[oc] += g;
            for k in 0..layer.kernel {
                let base = (t + k) * layer.in_ch;
                if let Some(d_in) = d_input.as_deref_mut() {
                    axpy(&mut d_in[base..base + layer.in_ch], g, layer.w_row(oc, k));
                }
                let w_base = (oc * layer.kernel + k) * layer.in_ch;
                axpy(
                    &mut d_layer.weight[w_base..w_base + layer.in_ch],
                    g,
                    &input[base..base + layer.in_ch],
                );
            }
        }
    }
}

fn check_input_shape(params: &ModelParams, input: &[f64]) -> Result<()> {
    let expect = params.config.window_len * params.config.in_channels;
    if input.len() != expect {
        return Err(Error::ShapeMismatch(format!(
            "input has {} values, expected {} ({} frames × {} channels)",
            input.len(),
            expect,
            params.config.window_len,
            params.config.in_channels
        )));
    }
    Ok(())
}

/// Forward pass: conv → activation ×3, mean over the remaining time axis per
/// channel, affine head. Pure and deterministic.
pub fn forward(params: &ModelParams, input: &[f64]) -> Result<f64> {
    check_input_shape(params, input)?;
    let act = params.config.activation;
    let mut t_len = params.config.window_len;
    let mut cur = input.to_vec();
    let mut next = Vec::new();
    for layer in &params.layers {
        conv_forward(&cur, t_len, layer, &mut next);
        for v in next.iter_mut() {
            *v = act.apply(*v);
        }
        t_len = t_len - layer.kernel + 1;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(gap_head(params, &cur, t_len))
}

fn gap_head(params: &ModelParams, a3: &[f64], t_len: usize) -> f64 {
    let ch = params.config.filters[2];
    let mut pooled = vec![0.0; ch];
    for t in 0..t_len {
        for (c, p) in pooled.iter_mut().enumerate() {
            *p += a3[t * ch + c];
        }
    }
    let inv = 1.0 / t_len as f64;
    for p in pooled.iter_mut() {
        *p *= inv;
    }
    dot(&pooled, &params.head_weight) + params.head_bias
}

struct ForwardCache {
    /// Pre-activation outputs of each conv layer.
    pre: [Vec<f64>; 3],
    /// Post-activation outputs of each conv layer.
    post: [Vec<f64>; 3],
    pooled: Vec<f64>,
    pred: f64,
}

fn forward_cached(params: &ModelParams, input: &[f64]) -> Result<ForwardCache> {
    let act = params.config.activation;
    let lens = params.config.conv_output_lens()?;
    let mut pre: [Vec<f64>; 3] = Default::default();
    let mut post: [Vec<f64>; 3] = Default::default();
    let mut t_len = params.config.window_len;
    let mut cur = input;
    for (l, layer) in params.layers.iter().enumerate() {
        conv_forward(cur, t_len, layer, &mut pre[l]);
        if !pre[l].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                location: format!("conv{} output", l + 1),
            });
        }
        post[l] = pre[l].iter().map(|&v| act.apply(v)).collect();
        t_len = lens[l];
        cur = &post[l];
    }

    let ch = params.config.filters[2];
    let t3 = lens[2];
    let mut pooled = vec![0.0; ch];
    for t in 0..t3 {
        for (c, p) in pooled.iter_mut().enumerate() {
            *p += post[2][t * ch + c];
        }
    }
    let inv = 1.0 / t3 as f64;
    for p in pooled.iter_mut() {
        *p *= inv;
    }
    let pred = dot(&pooled, &params.head_weight) + params.head_bias;
    if !pred.is_finite() {
        return Err(Error::NonFinite {
            location: "head output".into(),
        });
    }
    Ok(ForwardCache {
        pre,
        post,
        pooled,
        pred,
    })
}

/// Smallest |pre-activation| across all conv layers for one input.
///
/// Finite-difference gradient checks are only valid when no pre-activation
/// sits so close to the rectifier kink that a ±h parameter step could cross
/// it; callers use this to pick safe inputs.
pub fn min_abs_preactivation(params: &ModelParams, input: &[f64]) -> Result<f64> {
    check_input_shape(params, input)?;
    let cache = forward_cached(params, input)?;
    Ok(cache
        .pre
        .iter()
        .flat_map(|layer| layer.iter())
        .fold(f64::INFINITY, |acc, &v| acc.min(v.abs())))
}

/// Root mean squared error over a batch.
pub fn loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Backpropagate one sample's contribution into `grads`.
fn backprop_sample(
    params: &ModelParams,
    input: &[f64],
    cache: &ForwardCache,
    d_pred: f64,
    grads: &mut GradientSet,
) -> Result<()> {
    let act = params.config.activation;
    let lens = params.config.conv_output_lens()?;
    let ch = params.config.filters[2];
    let t3 = lens[2];

    // head
    axpy(&mut grads.head_weight, d_pred, &cache.pooled);
    grads.head_bias += d_pred;

    // through global average pooling into a3: constant per channel
    let inv_t3 = 1.0 / t3 as f64;
    let mut d_post = vec![0.0; t3 * ch];
    for t in 0..t3 {
        for c in 0..ch {
            d_post[t * ch + c] = d_pred * params.head_weight[c] * inv_t3;
        }
    }

    // walk the conv stack backwards
    let mut d_cur = d_post;
    for l in (0..3).rev() {
        // activation derivative
        for (d, &pre) in d_cur.iter_mut().zip(&cache.pre[l]) {
            *d *= act.derivative(pre);
        }
        let (layer_input, t_in): (&[f64], usize) = if l == 0 {
            (input, params.config.window_len)
        } else {
            (&cache.post[l - 1], lens[l - 1])
        };
        let mut d_in = if l > 0 {
            Some(vec![0.0; t_in * params.layers[l].in_ch])
        } else {
            None
        };
        conv_backward(
            layer_input,
            t_in,
            &params.layers[l],
            &d_cur,
            d_in.as_deref_mut(),
            &mut grads.layers[l],
        );
        if let Some(d_in) = d_in {
            d_cur = d_in;
        }
    }
    Ok(())
}

/// Batch loss and exact gradients of the batch RMSE with respect to every
/// parameter. The batch reduction happens in fixed index order, so the
/// result does not depend on the worker count.
pub fn backward(
    params: &ModelParams,
    inputs: &[&[f64]],
    targets: &[f64],
) -> Result<(f64, GradientSet)> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    for input in inputs {
        check_input_shape(params, input)?;
    }

    let n = inputs.len();
    // pass 1: predictions, in chunk order
    let pred_chunks = chunked_map(n, BATCH_CHUNK, |range| {
        range
            .map(|i| forward_cached(params, inputs[i]).map(|c| c.pred))
            .collect::<Result<Vec<f64>>>()
    });
    let mut preds = Vec::with_capacity(n);
    for chunk in pred_chunks {
        preds.extend(chunk?);
    }
    let rmse = loss(&preds, targets)?;
    if !rmse.is_finite() {
        return Err(Error::NonFinite {
            location: "batch RMSE".into(),
        });
    }

    // d(rmse)/d(pred_i) = (pred_i − target_i) / (n · rmse), guarded at 0
    let denom = rmse.max(RMSE_EPS) * n as f64;

    // pass 2: per-chunk gradient accumulation, then ordered reduction
    let grad_chunks = chunked_map(n, BATCH_CHUNK, |range| {
        let mut local = GradientSet::zeros(&params.config);
        for i in range {
            let cache = forward_cached(params, inputs[i])?;
            let d_pred = (cache.pred - targets[i]) / denom;
            backprop_sample(params, inputs[i], &cache, d_pred, &mut local)?;
        }
        Ok::<GradientSet, Error>(local)
    });
    let mut grads = GradientSet::zeros(&params.config);
    for chunk in grad_chunks {
        grads.add_assign(&chunk?);
    }
    Ok((rmse, grads))
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"BLNKCKP\0";
const CKPT_VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Rectifier => 0,
        Activation::Identity => 1,
    }
}

fn activation_from_code(c: u8) -> Option<Activation> {
    match c {
        0 => Some(Activation::Rectifier),
        1 => Some(Activation::Identity),
        _ => None,
    }
}

/// Serialize parameters to the versioned checkpoint format: magic, version,
/// config, then all tensors as little-endian f64 in flat order.
pub fn write_params<W: Write>(w: &mut W, params: &ModelParams) -> std::io::Result<()> {
    let c = &params.config;
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    for v in [
        c.in_channels,
        c.filters[0],
        c.filters[1],
        c.filters[2],
        c.kernel_size,
        c.window_len,
    ] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&[activation_code(c.activation)])?;
    w.write_all(&(params.param_count() as u64).to_le_bytes())?;
    for v in params.flat_iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Parse a checkpoint; the byte stream must end exactly after the tensors.
pub fn read_params<R: Read>(r: &mut R, origin: &Path) -> Result<ModelParams> {
    let bad = |detail: &str| Error::Checkpoint {
        path: origin.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut take = |buf: &mut [u8]| -> Result<()> {
        r.read_exact(buf).map_err(|_| bad("truncated"))
    };

    let mut magic = [0u8; 8];
    take(&mut magic)?;
    if &magic != CKPT_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let mut b4 = [0u8; 4];
    take(&mut b4)?;
    if u32::from_le_bytes(b4) != CKPT_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut dims = [0usize; 6];
    for d in dims.iter_mut() {
        take(&mut b4)?;
        *d = u32::from_le_bytes(b4) as usize;
    }
    let mut b1 = [0u8; 1];
    take(&mut b1)?;
    let activation = activation_from_code(b1[0]).ok_or_else(|| bad("unknown activation code"))?;
    let config = ModelConfig {
        in_channels: dims[0],
        filters: [dims[1], dims[2], dims[3]],
        kernel_size: dims[4],
        window_len: dims[5],
        activation,
    };
    config
        .validate()
        .map_err(|e| bad(&format!("invalid config: {e}")))?;

    let mut b8 = [0u8; 8];
    take(&mut b8)?;
    let declared = u64::from_le_bytes(b8) as usize;
    let mut params = ModelParams::zeros(&config);
    if declared != params.param_count() {
        return Err(bad(&format!(
            "parameter count {declared} does not match config ({})",
            params.param_count()
        )));
    }
    for v in params.flat_iter_mut() {
        take(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => return Err(bad("trailing bytes")),
        Err(_) => return Err(bad("read error")),
    }
    if !params.all_finite() {
        return Err(bad("non-finite parameter values"));
    }
    Ok(params)
}

pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(64 + params.param_count() * 8);
    write_params(&mut bytes, params).expect("in-memory write cannot fail");
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_params(&mut bytes.as_slice(), path)
}

/// Load a checkpoint and require its recorded config to match `expected`.
pub fn load_params_expecting(path: &Path, expected: &ModelConfig) -> Result<ModelParams> {
    let params = load_params(path)?;
    if &params.config != expected {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            detail: format!(
                "config mismatch: checkpoint has {:?}, expected {:?}",
                params.config, expected
            ),
        });
    }
    Ok(params)
}
