//! From-scratch convolutional network: 3×3 valid convolutions with ReLU and
//! 2×2 max pooling, a dense ReLU layer, and a softmax (or single-logit
//! sigmoid) head, with full backpropagation.
//!
//! Floating-point discipline: every reduction has a fixed order. Each conv
//! output element accumulates its products with kernel offsets ascending as
//! (dy, dx, c); per-sample gradients inside a batch are summed in ascending
//! sample order. Batch members may be evaluated on worker threads, but the
//! ordered summation makes the result identical to serial execution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{roc_auc, EpochHistory};
use crate::models::{argmax_tie_low, TrainOptions, TrainingMeta};
use crate::preprocess::NORM;
use crate::rng::Stream;
use crate::spectral::SpectrumImage;

/// Dense H×W×C grid, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }

    pub fn from_image(img: &SpectrumImage, normalize: bool) -> Self {
        let data = img
            .data()
            .iter()
            .map(|&v| if normalize { NORM[v as usize] } else { v as f64 })
            .collect();
        Tensor {
            h: img.height(),
            w: img.width(),
            c: img.channels(),
            data,
        }
    }
}

/// Architecture description; the default mirrors the bench setup: three
/// 3×3 conv+pool stages widening 8→16→32, a 64-unit dense layer, and one
/// output per class (a single sigmoid output for two classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub input_c: usize,
    pub conv_channels: Vec<usize>,
    pub dense_units: usize,
    pub classes: usize,
}

impl CnnConfig {
    pub fn default_for_classes(classes: usize) -> Self {
        CnnConfig {
            input_h: 150,
            input_w: 150,
            input_c: 3,
            conv_channels: vec![8, 16, 32],
            dense_units: 64,
            classes,
        }
    }

    pub fn n_outputs(&self) -> usize {
        if self.classes == 2 {
            1
        } else {
            self.classes
        }
    }

    /// Stage output shapes: (conv_h, conv_w, pool_h, pool_w, channels).
    pub fn shape_chain(&self) -> Result<Vec<(usize, usize, usize, usize, usize)>> {
        if self.classes < 2 {
            return Err(Error::config("cnn needs at least 2 classes"));
        }
        if self.conv_channels.is_empty() {
            return Err(Error::config("cnn needs at least one conv stage"));
        }
        let mut h = self.input_h;
        let mut w = self.input_w;
        let mut chain = Vec::new();
        for (i, &k) in self.conv_channels.iter().enumerate() {
            if h < 3 || w < 3 {
                return Err(Error::config(format!(
                    "stage {i}: input {h}x{w} too small for a 3x3 convolution"
                )));
            }
            let (ch, cw) = (h - 2, w - 2);
            let (ph, pw) = (ch / 2, cw / 2);
            if ph == 0 || pw == 0 {
                return Err(Error::config(format!(
                    "stage {i}: {ch}x{cw} too small for 2x2 pooling"
                )));
            }
            chain.push((ch, cw, ph, pw, k));
            h = ph;
            w = pw;
        }
        Ok(chain)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let chain = self.shape_chain()?;
        let (_, _, ph, pw, k) = *chain.last().expect("non-empty chain");
        Ok(ph * pw * k)
    }
}

/// All trainable parameters; doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub conv_kernels: Vec<Vec<f64>>, // stage → ((dy*3+dx)*c_in + ci)*c_out + co
    pub conv_bias: Vec<Vec<f64>>,
    pub dense_w: Vec<f64>, // i*units + u
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>, // u*outputs + k
    pub out_b: Vec<f64>,
}

impl CnnParams {
    pub fn zeros(config: &CnnConfig) -> Result<Self> {
        let chain = config.shape_chain()?;
        let flatten = config.flatten_len()?;
        let outputs = config.n_outputs();
        let mut conv_kernels = Vec::new();
        let mut conv_bias = Vec::new();
        let mut c_in = config.input_c;
        for &(_, _, _, _, c_out) in &chain {
            conv_kernels.push(vec![0.0; 9 * c_in * c_out]);
            conv_bias.push(vec![0.0; c_out]);
            c_in = c_out;
        }
        Ok(CnnParams {
            conv_kernels,
            conv_bias,
            dense_w: vec![0.0; flatten * config.dense_units],
            dense_b: vec![0.0; config.dense_units],
            out_w: vec![0.0; config.dense_units * outputs],
            out_b: vec![0.0; outputs],
        })
    }

    /// Glorot-uniform weights (±√(6/(fan_in+fan_out))), zero biases. Draw
    /// order is fixed: conv kernels stage by stage in index order, then
    /// dense weights, then output weights.
    pub fn glorot(config: &CnnConfig, rng: &mut Stream) -> Result<Self> {
        let mut params = CnnParams::zeros(config)?;
        let mut c_in = config.input_c;
        for (stage, kernels) in params.conv_kernels.iter_mut().enumerate() {
            let c_out = config.conv_channels[stage];
            let limit = (6.0 / (9 * c_in + 9 * c_out) as f64).sqrt();
            for w in kernels.iter_mut() {
                *w = limit * (2.0 * rng.next_f64() - 1.0);
            }
            c_in = c_out;
        }
        let flatten = config.flatten_len()?;
        let limit = (6.0 / (flatten + config.dense_units) as f64).sqrt();
        for w in params.dense_w.iter_mut() {
            *w = limit * (2.0 * rng.next_f64() - 1.0);
        }
        let limit = (6.0 / (config.dense_units + config.n_outputs()) as f64).sqrt();
        for w in params.out_w.iter_mut() {
            *w = limit * (2.0 * rng.next_f64() - 1.0);
        }
        Ok(params)
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Named parameter blocks in serialization order.
    pub fn blocks(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = Vec::new();
        for (i, k) in self.conv_kernels.iter().enumerate() {
            out.push((format!("conv{i}.kernels"), k));
        }
        for (i, b) in self.conv_bias.iter().enumerate() {
            out.push((format!("conv{i}.bias"), b));
        }
        out.push(("dense.weights".to_string(), &self.dense_w));
        out.push(("dense.bias".to_string(), &self.dense_b));
        out.push(("output.weights".to_string(), &self.out_w));
        out.push(("output.bias".to_string(), &self.out_b));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for k in self.conv_kernels.iter_mut() {
            out.push(k);
        }
        for b in self.conv_bias.iter_mut() {
            out.push(b);
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    /// self += other, block by block.
    pub fn add_assign(&mut self, other: &CnnParams) {
        let others = other.blocks();
        for (mine, (_, theirs)) in self.blocks_mut().into_iter().zip(others) {
            for (m, t) in mine.iter_mut().zip(theirs.iter()) {
                *m += t;
            }
        }
    }

    /// self -= step · (grad + 2·l2·self), applied to weights; biases skip
    /// the penalty term.
    pub fn gradient_step(&mut self, grad: &CnnParams, step: f64, l2: f64) {
        let apply = |w: &mut Vec<f64>, g: &Vec<f64>, penalized: bool| {
            for (wi, gi) in w.iter_mut().zip(g.iter()) {
                let reg = if penalized { 2.0 * l2 * *wi } else { 0.0 };
                *wi -= step * (gi + reg);
            }
        };
        for (w, g) in self.conv_kernels.iter_mut().zip(&grad.conv_kernels) {
            apply(w, g, true);
        }
        for (b, g) in self.conv_bias.iter_mut().zip(&grad.conv_bias) {
            apply(b, g, false);
        }
        apply(&mut self.dense_w, &grad.dense_w, true);
        apply(&mut self.dense_b, &grad.dense_b, false);
        apply(&mut self.out_w, &grad.out_w, true);
        apply(&mut self.out_b, &grad.out_b, false);
    }

    fn squared_weight_norm(&self) -> f64 {
        let mut sum = 0.0;
        for k in &self.conv_kernels {
            sum += k.iter().map(|w| w * w).sum::<f64>();
        }
        sum += self.dense_w.iter().map(|w| w * w).sum::<f64>();
        sum += self.out_w.iter().map(|w| w * w).sum::<f64>();
        sum
    }
}

/// Valid 3×3 cross-correlation plus bias. Each output element is
/// `bias[k] + Σ_(dy,dx,c) input[y+dy, x+dx, c] · kernel[dy, dx, c, k]` with
/// the sum accumulated in ascending (dy, dx, c) order — the same order the
/// reference evaluator uses, so results agree bit for bit.
pub fn conv2d_forward(input: &Tensor, kernels: &[f64], bias: &[f64]) -> Result<Tensor> {
    let c_out = bias.len();
    if input.h < 3 || input.w < 3 {
        return Err(Error::shape(
            "input of at least 3x3",
            format!("{}x{}", input.h, input.w),
        ));
    }
    if kernels.len() != 9 * input.c * c_out {
        return Err(Error::shape(
            format!("{} kernel weights", 9 * input.c * c_out),
            format!("{}", kernels.len()),
        ));
    }
    let (oh, ow) = (input.h - 2, input.w - 2);
    let mut out = Tensor::zeros(oh, ow, c_out);
    let c_in = input.c;
    let mut acc = vec![0.0f64; c_out];

    for y in 0..oh {
        for x in 0..ow {
            acc.copy_from_slice(bias);
            for dy in 0..3 {
                for dx in 0..3 {
                    let in_base = ((y + dy) * input.w + (x + dx)) * c_in;
                    let k_base = (dy * 3 + dx) * c_in;
                    for ci in 0..c_in {
                        let v = input.data[in_base + ci];
                        let krow = &kernels[(k_base + ci) * c_out..(k_base + ci + 1) * c_out];
                        for (a, &k) in acc.iter_mut().zip(krow) {
                            *a += v * k;
                        }
                    }
                }
            }
            let o = (y * ow + x) * c_out;
            out.data[o..o + c_out].copy_from_slice(&acc);
        }
    }
    Ok(out)
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Also returns, per output element, the flat input index of its maximum
/// (first occurrence in row-major window order), which routes gradients.
pub fn maxpool2x2(input: &Tensor) -> (Tensor, Vec<u32>) {
    let (ph, pw) = (input.h / 2, input.w / 2);
    let mut out = Tensor::zeros(ph, pw, input.c);
    let mut argmax = vec![0u32; ph * pw * input.c];
    for py in 0..ph {
        for px in 0..pw {
            for ch in 0..input.c {
                let mut best_idx = input.idx(2 * py, 2 * px, ch);
                let mut best = input.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = input.idx(2 * py + dy, 2 * px + dx, ch);
                    if input.data[idx] > best {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                let o = out.idx(py, px, ch);
                out.data[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
    (out, argmax)
}

fn relu(t: &Tensor) -> Tensor {
    Tensor {
        h: t.h,
        w: t.w,
        c: t.c,
        data: t.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Everything the backward pass needs from one forward evaluation.
struct Trace {
    convs: Vec<Tensor>,  // pre-activation conv outputs
    relus: Vec<Tensor>,  // post-ReLU (pooling inputs)
    pools: Vec<Tensor>,  // pooled outputs
    argmaxes: Vec<Vec<u32>>,
    dense_z: Vec<f64>,   // pre-activation dense
    dense_h: Vec<f64>,   // post-ReLU dense
    logits: Vec<f64>,
}

/// A trained (or initialized) CNN.
#[derive(Debug, Clone)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub params: CnnParams,
    pub label_set: Vec<String>,
    pub normalize_pixels: bool,
    pub hyper: TrainOptions,
    pub training: TrainingMeta,
}

impl CnnModel {
    /// Glorot-initialized model; `rng` supplies the draws.
    pub fn init(
        config: CnnConfig,
        label_set: Vec<String>,
        normalize_pixels: bool,
        hyper: TrainOptions,
        rng: &mut Stream,
    ) -> Result<Self> {
        if label_set.len() != config.classes {
            return Err(Error::config(format!(
                "label set has {} entries for {} classes",
                label_set.len(),
                config.classes
            )));
        }
        let params = CnnParams::glorot(&config, rng)?;
        Ok(CnnModel {
            config,
            params,
            label_set,
            normalize_pixels,
            hyper,
            training: TrainingMeta::default(),
        })
    }

    fn check_input(&self, t: &Tensor) -> Result<()> {
        if t.h != self.config.input_h || t.w != self.config.input_w || t.c != self.config.input_c {
            return Err(Error::shape(
                format!(
                    "{}x{}x{} input",
                    self.config.input_h, self.config.input_w, self.config.input_c
                ),
                format!("{}x{}x{}", t.h, t.w, t.c),
            ));
        }
        Ok(())
    }

    fn forward_trace(&self, input: &Tensor) -> Trace {
        let mut convs = Vec::with_capacity(self.config.conv_channels.len());
        let mut relus = Vec::with_capacity(convs.capacity());
        let mut pools = Vec::with_capacity(convs.capacity());
        let mut argmaxes = Vec::with_capacity(convs.capacity());

        let mut cursor = input;
        for stage in 0..self.config.conv_channels.len() {
            let conv = conv2d_forward(
                cursor,
                &self.params.conv_kernels[stage],
                &self.params.conv_bias[stage],
            )
            .expect("shapes validated at construction");
            let activated = relu(&conv);
            let (pool, argmax) = maxpool2x2(&activated);
            convs.push(conv);
            relus.push(activated);
            pools.push(pool);
            argmaxes.push(argmax);
            cursor = pools.last().expect("just pushed");
        }

        let flat = &pools.last().expect("at least one stage").data;
        let units = self.config.dense_units;
        let mut dense_z = self.params.dense_b.clone();
        for (i, &v) in flat.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let wrow = &self.params.dense_w[i * units..(i + 1) * units];
            for (z, &w) in dense_z.iter_mut().zip(wrow) {
                *z += v * w;
            }
        }
        let dense_h: Vec<f64> = dense_z.iter().map(|&v| v.max(0.0)).collect();

        let outputs = self.config.n_outputs();
        let mut logits = self.params.out_b.clone();
        for (u, &v) in dense_h.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let wrow = &self.params.out_w[u * outputs..(u + 1) * outputs];
            for (l, &w) in logits.iter_mut().zip(wrow) {
                *l += v * w;
            }
        }

        Trace {
            convs,
            relus,
            pools,
            argmaxes,
            dense_z,
            dense_h,
            logits,
        }
    }

    fn probs_from_logits(&self, logits: &[f64]) -> Vec<f64> {
        if self.config.n_outputs() == 1 {
            let p = 1.0 / (1.0 + (-logits[0]).exp());
            vec![1.0 - p, p]
        } else {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&s| (s - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        }
    }

    /// Class probability distribution for one input grid.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.probs_from_logits(&self.forward_trace(input).logits))
    }

    /// Class probability distribution for one acquisition frame.
    pub fn forward_image(&self, img: &SpectrumImage) -> Result<Vec<f64>> {
        self.forward(&Tensor::from_image(img, self.normalize_pixels))
    }

    /// Cross-entropy of one sample and the gradient of it with respect to
    /// every parameter.
    fn sample_loss_grad(&self, input: &Tensor, label: usize) -> (f64, CnnParams) {
        let mut grad = CnnParams::zeros(&self.config).expect("config validated");
        let (loss, _) = self.sample_loss_grad_into(input, label, &mut grad);
        (loss, grad)
    }

    /// As [`Self::sample_loss_grad`], but accumulates into `grad` and also
    /// reports whether the (pre-update) prediction was correct.
    fn sample_loss_grad_into(
        &self,
        input: &Tensor,
        label: usize,
        grad: &mut CnnParams,
    ) -> (f64, bool) {
        let trace = self.forward_trace(input);
        let probs = self.probs_from_logits(&trace.logits);
        // No clamp: a saturated wrong prediction must surface as a
        // non-finite loss so divergence detection can fire.
        let loss = -probs[label].ln();
        let hit = argmax_tie_low(&probs) == label;
        let outputs = self.config.n_outputs();

        // d loss / d logits
        let dlogits: Vec<f64> = if outputs == 1 {
            vec![probs[1] - label as f64]
        } else {
            (0..outputs)
                .map(|k| probs[k] - if k == label { 1.0 } else { 0.0 })
                .collect()
        };

        // Output layer.
        let units = self.config.dense_units;
        let mut d_dense_h = vec![0.0; units];
        for u in 0..units {
            let h = trace.dense_h[u];
            let wrow = &self.params.out_w[u * outputs..(u + 1) * outputs];
            let grow = &mut grad.out_w[u * outputs..(u + 1) * outputs];
            let mut back = 0.0;
            for k in 0..outputs {
                grow[k] += h * dlogits[k];
                back += wrow[k] * dlogits[k];
            }
            d_dense_h[u] = back;
        }
        for (g, &d) in grad.out_b.iter_mut().zip(&dlogits) {
            *g += d;
        }

        // Dense layer (ReLU derivative: 1 for z > 0, else 0).
        let flat = &trace.pools.last().expect("stage exists").data;
        let dz: Vec<f64> = d_dense_h
            .iter()
            .zip(&trace.dense_z)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        for (g, &d) in grad.dense_b.iter_mut().zip(&dz) {
            *g += d;
        }
        let mut d_flat = vec![0.0; flat.len()];
        for (i, &v) in flat.iter().enumerate() {
            let wrow = &self.params.dense_w[i * units..(i + 1) * units];
            let mut back = 0.0;
            for u in 0..units {
                back += wrow[u] * dz[u];
            }
            d_flat[i] = back;
            if v != 0.0 {
                let grow = &mut grad.dense_w[i * units..(i + 1) * units];
                for u in 0..units {
                    grow[u] += v * dz[u];
                }
            }
        }

        // Conv stages, last to first.
        let stages = self.config.conv_channels.len();
        let mut d_pool_data = d_flat;
        for stage in (0..stages).rev() {
            let relu_t = &trace.relus[stage];
            let conv_t = &trace.convs[stage];

            // Un-pool: route each pooled gradient to its argmax position.
            let mut d_relu = vec![0.0; relu_t.data.len()];
            for (o, &g) in d_pool_data.iter().enumerate() {
                d_relu[trace.argmaxes[stage][o] as usize] += g;
            }
            // ReLU derivative against the pre-activation values.
            let d_conv: Vec<f64> = d_relu
                .iter()
                .zip(&conv_t.data)
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect();

            let below: &Tensor = if stage == 0 {
                input
            } else {
                &trace.pools[stage - 1]
            };
            let need_dinput = stage > 0;
            let d_input = conv2d_backward(
                below,
                &self.params.conv_kernels[stage],
                conv_t,
                &d_conv,
                &mut grad.conv_kernels[stage],
                &mut grad.conv_bias[stage],
                need_dinput,
            );
            if let Some(d) = d_input {
                d_pool_data = d;
            }
        }

        (loss, grad)
    }
}

/// Backward pass of the valid 3×3 convolution: accumulates kernel and bias
/// gradients from `d_out`, optionally returning the input gradient.
#[allow(clippy::too_many_arguments)]
fn conv2d_backward(
    input: &Tensor,
    kernels: &[f64],
    out_shape: &Tensor,
    d_out: &[f64],
    d_kernels: &mut [f64],
    d_bias: &mut [f64],
    need_dinput: bool,
) -> Option<Vec<f64>> {
    let (oh, ow, c_out) = (out_shape.h, out_shape.w, out_shape.c);
    let c_in = input.c;
    let mut d_input = if need_dinput {
        vec![0.0; input.data.len()]
    } else {
        Vec::new()
    };

    for y in 0..oh {
        for x in 0..ow {
            let drow = &d_out[(y * ow + x) * c_out..(y * ow + x + 1) * c_out];
            for (k, &g) in drow.iter().enumerate() {
                d_bias[k] += g;
            }
            for dy in 0..3 {
                for dx in 0..3 {
                    let in_base = ((y + dy) * input.w + (x + dx)) * c_in;
                    let k_base = (dy * 3 + dx) * c_in;
                    for ci in 0..c_in {
                        let v = input.data[in_base + ci];
                        let kslice = (k_base + ci) * c_out..(k_base + ci + 1) * c_out;
                        if v != 0.0 {
                            let grow = &mut d_kernels[kslice.clone()];
                            for (gk, &g) in grow.iter_mut().zip(drow) {
                                *gk += v * g;
                            }
                        }
                        if need_dinput {
                            let wrow = &kernels[kslice];
                            let mut back = 0.0;
                            for (w, &g) in wrow.iter().zip(drow) {
                                back += w * g;
                            }
                            d_input[in_base + ci] += back;
                        }
                    }
                }
            }
        }
    }
    need_dinput.then_some(d_input)
}

/// Batch gradient: per-sample gradients may be computed in parallel, then
/// are summed strictly in ascending sample order (identical to serial).
fn batch_loss_grad(
    model: &CnnModel,
    inputs: &[Tensor],
    labels: &[usize],
    batch: &[usize],
) -> (f64, usize, CnnParams) {
    let per_sample: Vec<(f64, usize, CnnParams)> = batch
        .par_iter()
        .map(|&i| {
            let (loss, grad) = model.sample_loss_grad(&inputs[i], labels[i]);
            let probs = model.forward(&inputs[i]).expect("validated input");
            let hit = (argmax_tie_low(&probs) == labels[i]) as usize;
            (loss, hit, grad)
        })
        .collect();

    let inv = 1.0 / batch.len() as f64;
    let mut total = CnnParams::zeros(&model.config).expect("config validated");
    let mut loss_sum = 0.0;
    let mut hits = 0;
    for (loss, hit, grad) in &per_sample {
        loss_sum += loss;
        hits += hit;
        total.add_assign(grad);
    }
    // Scale the summed gradient to the batch mean.
    for block in total.blocks_mut() {
        for g in block.iter_mut() {
            *g *= inv;
        }
    }
    (loss_sum * inv, hits, total)
}

/// Train the network. `val` is evaluated after every epoch for the history
/// (validation accuracy, and ROC AUC on binary tasks).
#[allow(clippy::too_many_arguments)]
pub fn train_cnn(
    train_images: &[&SpectrumImage],
    train_labels: &[usize],
    val_images: &[&SpectrumImage],
    val_labels: &[usize],
    label_set: &[String],
    config: &CnnConfig,
    normalize_pixels: bool,
    opts: &TrainOptions,
) -> Result<(CnnModel, EpochHistory)> {
    opts.validate()?;
    config.shape_chain()?;
    if train_images.is_empty() || val_images.is_empty() {
        return Err(Error::config("cnn training needs non-empty train and val sets"));
    }
    if train_labels.len() != train_images.len() || val_labels.len() != val_images.len() {
        return Err(Error::config("image and label counts differ"));
    }
    if config.classes != label_set.len() {
        return Err(Error::config(format!(
            "config expects {} classes, label set has {}",
            config.classes,
            label_set.len()
        )));
    }
    for &l in train_labels.iter().chain(val_labels) {
        if l >= config.classes {
            return Err(Error::config(format!("label index {l} out of range")));
        }
    }

    // One stream drives initialization, then epoch shuffles.
    let mut rng = Stream::from_seed(opts.seed);
    let mut model = CnnModel::init(
        config.clone(),
        label_set.to_vec(),
        normalize_pixels,
        *opts,
        &mut rng,
    )?;

    let train_inputs: Vec<Tensor> = train_images
        .iter()
        .map(|img| Tensor::from_image(img, normalize_pixels))
        .collect();
    for t in &train_inputs {
        model.check_input(t)?;
    }
    let val_inputs: Vec<Tensor> = val_images
        .iter()
        .map(|img| Tensor::from_image(img, normalize_pixels))
        .collect();
    for t in &val_inputs {
        model.check_input(t)?;
    }

    let mut history = EpochHistory::default();
    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    let binary = config.classes == 2;

    for epoch in 0..opts.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut hit_sum = 0usize;
        let mut batches = 0usize;
        for batch in order.chunks(opts.batch_size) {
            let (mean_loss, hits, grad) =
                batch_loss_grad(&model, &train_inputs, train_labels, batch);
            let penalty = if opts.l2 > 0.0 {
                opts.l2 * model.params.squared_weight_norm()
            } else {
                0.0
            };
            let batch_loss = mean_loss + penalty;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1 });
            }
            loss_sum += batch_loss;
            hit_sum += hits;
            batches += 1;
            model.params.gradient_step(&grad, opts.learning_rate, opts.l2);
        }

        // Validation pass; ordered collect keeps it deterministic.
        let val_probs: Vec<Vec<f64>> = val_inputs
            .par_iter()
            .map(|t| model.forward(t).expect("validated input"))
            .collect();
        let val_hits = val_probs
            .iter()
            .zip(val_labels)
            .filter(|(p, &y)| argmax_tie_low(p) == y)
            .count();
        let val_auc = if binary {
            let scores: Vec<f64> = val_probs.iter().map(|p| p[1]).collect();
            let truth: Vec<bool> = val_labels.iter().map(|&y| y == 1).collect();
            roc_auc(&scores, &truth).ok()
        } else {
            None
        };

        history.train_loss.push(loss_sum / batches as f64);
        history
            .train_accuracy
            .push(hit_sum as f64 / train_inputs.len() as f64);
        history
            .val_accuracy
            .push(val_hits as f64 / val_inputs.len() as f64);
        history.val_roc_auc.push(val_auc);
    }

    model.training = TrainingMeta {
        final_train_loss: *history.train_loss.last().expect("epochs >= 1"),
        epochs_run: history.len(),
        timestamp: None,
    };
    Ok((model, history))
}

/// Finite-difference audit of the full backward pass at toy scale.
///
/// Builds a Glorot model from `seed`, samples at least `sample_params`
/// parameter coordinates, and returns the maximum relative error between the
/// analytic gradient and central differences of the loss.
pub fn gradient_check(
    config: &CnnConfig,
    input: &Tensor,
    label: usize,
    step: f64,
    sample_params: usize,
    seed: u64,
) -> Result<f64> {
    if input.h > 16 || input.w > 16 {
        return Err(Error::config(
            "gradient_check is for toy inputs (<= 16x16); larger grids are impractical",
        ));
    }
    let mut rng = Stream::from_seed(seed);
    let model = CnnModel::init(
        config.clone(),
        (0..config.classes).map(|i| format!("c{i}")).collect(),
        true,
        TrainOptions::cnn_defaults(),
        &mut rng,
    )?;
    gradient_check_at(&model, input, label, step, sample_params, &mut rng)
}

/// Finite-difference audit of a specific model's gradients.
pub fn gradient_check_at(
    model: &CnnModel,
    input: &Tensor,
    label: usize,
    step: f64,
    sample_params: usize,
    rng: &mut Stream,
) -> Result<f64> {
    model.check_input(input)?;
    if label >= model.config.classes {
        return Err(Error::config(format!("label {label} out of range")));
    }
    let (_, analytic) = model.sample_loss_grad(input, label);
    let total = analytic.param_count();
    let n_samples = sample_params.max(200).min(total);

    let mut max_err = 0.0f64;
    let mut probe = model.clone();
    for _ in 0..n_samples {
        let flat = rng.next_index(total);
        let (block, offset) = locate(&analytic, flat);
        let a = analytic.blocks()[block].1[offset];

        let original = probe.params.blocks()[block].1[offset];
        probe.params.blocks_mut()[block][offset] = original + step;
        let hi = probe_loss(&probe, input, label);
        probe.params.blocks_mut()[block][offset] = original - step;
        let lo = probe_loss(&probe, input, label);
        probe.params.blocks_mut()[block][offset] = original;

        let numeric = (hi - lo) / (2.0 * step);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

fn probe_loss(model: &CnnModel, input: &Tensor, label: usize) -> f64 {
    let probs = model.probs_from_logits(&model.forward_trace(input).logits);
    -probs[label].ln()
}

/// Map a flat parameter index to (block, offset) in block order.
fn locate(params: &CnnParams, mut flat: usize) -> (usize, usize) {
    for (i, (_, block)) in params.blocks().iter().enumerate() {
        if flat < block.len() {
            return (i, flat);
        }
        flat -= block.len();
    }
    panic!("flat index out of range");
}
