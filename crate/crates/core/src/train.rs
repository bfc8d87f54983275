//! Minibatch training of ReLU MLPs with Adam, optional batch normalization
//! after the pre-activations or dropout after the activations.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{BatchNormParams, DenseLayer, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Vanilla,
    #[serde(alias = "batchnorm")]
    Bn,
    Dropout,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vanilla, Variant::Bn, Variant::Dropout];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Bn => "bn",
            Variant::Dropout => "dropout",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "bn" | "batchnorm" => Ok(Variant::Bn),
            "dropout" => Ok(Variant::Dropout),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub hidden_widths: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Vanilla,
            hidden_widths: vec![1024, 1024, 1024],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-7,
            batch_size: 256,
            dropout_rate: 0.2,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            validation_fraction: 0.1,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
        }
    }
}

impl TrainConfig {
    /// Settings for the 2D spiral: three hidden layers of 10, small batches, long patience.
    pub fn spiral(variant: Variant, seed: u64) -> Self {
        TrainConfig {
            variant,
            hidden_widths: vec![10, 10, 10],
            batch_size: 32,
            max_epochs: 4000,
            patience: 400,
            seed,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return bad("hidden widths must be nonempty and positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, max epochs and patience must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were exported.
    pub best_epoch: usize,
}

/// `out x in` matrix with entries uniform on `[-a, a]`, `a = sqrt(6 / (in + out))`.
pub fn xavier_uniform_init(shape: (usize, usize), seed: u64) -> Array2<f32> {
    xavier_uniform_with(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn xavier_uniform_with<R: Rng>(shape: (usize, usize), rng: &mut R) -> Array2<f32> {
    let a = (6.0 / (shape.0 + shape.1) as f64).sqrt() as f32;
    Array2::from_shape_fn(shape, |_| rng.random_range(-a..=a))
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamSlot {
    m: Vec<f32>,
    v: Vec<f32>,
}

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    /// 1-based step count, for bias correction.
    pub step: i32,
}

impl AdamSlot {
    pub fn new(len: usize) -> Self {
        AdamSlot {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f32], grads: &[f32], h: &AdamHyper) {
        let c1 = 1.0 - h.beta1.powi(h.step);
        let c2 = 1.0 - h.beta2.powi(h.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * g;
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
    }
}

/// Trainable batch-normalization state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
    pub eps: f32,
    pub momentum: f32,
}

impl BatchNormState {
    pub fn new(width: usize, eps: f32, momentum: f32) -> Self {
        BatchNormState {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            eps,
            momentum,
        }
    }

    fn infer(&self, h: &mut Array2<f32>) {
        let scale = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|&g, &v| g / (v + self.eps).sqrt());
        let shift = &self.beta - &(&self.running_mean * &scale);
        *h *= &scale;
        *h += &shift;
    }
}

/// Values kept from the training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub normalized: Array2<f32>,
    pub inv_std: Array1<f32>,
}

/// Normalizes each column by its batch mean and population variance, applies
/// `gamma, beta`, and folds the batch statistics into the running averages
/// (the variance with the unbiased estimate).
pub fn batchnorm_forward_train(preacts: ArrayView2<f32>, state: &mut BatchNormState) -> Result<(Array2<f32>, BnCache)> {
    let n = preacts.nrows();
    if n < 2 {
        return Err(Error::DegenerateBatch(n));
    }
    let mean = preacts.mean_axis(Axis(0)).expect("nonempty batch");
    let centered = &preacts - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("nonempty batch");
    let inv_std = var.mapv(|v| 1.0 / (v + state.eps).sqrt());
    let normalized = &centered * &inv_std;
    let out = &(&normalized * &state.gamma) + &state.beta;
    let m = state.momentum;
    let unbiased = n as f32 / (n as f32 - 1.0);
    state.running_mean = &state.running_mean * m + &(&mean * (1.0 - m));
    state.running_var = &state.running_var * m + &(&var * ((1.0 - m) * unbiased));
    Ok((out, BnCache { normalized, inv_std }))
}

/// Gradient through the batch-normalization transform; returns `(d_preacts, d_gamma, d_beta)`.
pub fn batchnorm_backward(
    d_out: ArrayView2<f32>,
    cache: &BnCache,
    gamma: &Array1<f32>,
) -> (Array2<f32>, Array1<f32>, Array1<f32>) {
    let n = d_out.nrows() as f32;
    let d_beta = d_out.sum_axis(Axis(0));
    let d_gamma = (&d_out * &cache.normalized).sum_axis(Axis(0));
    let d_norm = &d_out * gamma;
    let sum_d = d_norm.sum_axis(Axis(0));
    let sum_dx = (&d_norm * &cache.normalized).sum_axis(Axis(0));
    let mut d_in = &d_norm * n - &sum_d;
    d_in -= &(&cache.normalized * &sum_dx);
    d_in *= &(&cache.inv_std / n);
    (d_in, d_gamma, d_beta)
}

/// Inverted dropout mask: kept entries are `1 / (1 - p)`, dropped entries 0.
pub fn dropout_mask<R: Rng>(shape: (usize, usize), p: f64, rng: &mut R) -> Array2<f32> {
    let keep = (1.0 / (1.0 - p)) as f32;
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep })
}

#[derive(Debug, Clone)]
struct Layer {
    w: Array2<f32>,
    b: Array1<f32>,
    bn: Option<BatchNormState>,
}

#[derive(Debug, Clone)]
struct LayerSlots {
    w: AdamSlot,
    b: AdamSlot,
    gamma: Option<AdamSlot>,
    beta: Option<AdamSlot>,
}

struct LayerGrads {
    w: Array2<f32>,
    b: Array1<f32>,
    gamma: Option<Array1<f32>>,
    beta: Option<Array1<f32>>,
}

struct HiddenTape {
    input: Array2<f32>,
    post_bn: Array2<f32>,
    bn: Option<BnCache>,
    mask: Option<Array2<f32>>,
}

struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    fn new<R: Rng>(dims: &[usize], cfg: &TrainConfig, rng: &mut R) -> Self {
        let hidden = dims.len() - 2;
        let layers = (0..dims.len() - 1)
            .map(|l| Layer {
                w: xavier_uniform_with((dims[l + 1], dims[l]), rng),
                b: Array1::zeros(dims[l + 1]),
                bn: (cfg.variant == Variant::Bn && l < hidden)
                    .then(|| BatchNormState::new(dims[l + 1], cfg.bn_eps as f32, cfg.bn_momentum as f32)),
            })
            .collect();
        Mlp { layers }
    }

    fn infer(&self, x: ArrayView2<f32>) -> Array2<f32> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = a.dot(&layer.w.t()) + &layer.b;
            if l == last {
                return h;
            }
            if let Some(bn) = &layer.bn {
                bn.infer(&mut h);
            }
            h.mapv_inplace(|v| v.max(0.0));
            a = h;
        }
        unreachable!()
    }

    /// Training-mode forward, backward and Adam step on one batch; returns `(summed loss, correct)`.
    fn train_step<R: Rng>(
        &mut self,
        x: Array2<f32>,
        labels: &[usize],
        cfg: &TrainConfig,
        slots: &mut [LayerSlots],
        hyper: &AdamHyper,
        rng: &mut R,
    ) -> Result<(f64, usize)> {
        let last = self.layers.len() - 1;
        let mut tapes = Vec::with_capacity(last);
        let mut a = x;
        for layer in self.layers[..last].iter_mut() {
            let h = a.dot(&layer.w.t()) + &layer.b;
            let (post_bn, cache) = match layer.bn.as_mut() {
                Some(state) => {
                    let (out, cache) = batchnorm_forward_train(h.view(), state)?;
                    (out, Some(cache))
                }
                None => (h, None),
            };
            let mut act = post_bn.mapv(|v| v.max(0.0));
            let mask = (cfg.variant == Variant::Dropout && cfg.dropout_rate > 0.0).then(|| {
                let m = dropout_mask(act.dim(), cfg.dropout_rate, rng);
                act *= &m;
                m
            });
            tapes.push(HiddenTape {
                input: a,
                post_bn,
                bn: cache,
                mask,
            });
            a = act;
        }
        let out = &self.layers[last];
        let logits = a.dot(&out.w.t()) + &out.b;
        let n = labels.len();
        let mut loss = 0.0f64;
        let mut correct = 0;
        let mut d = logits.clone();
        for (i, mut row) in d.outer_iter_mut().enumerate() {
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let mut pred = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[pred] {
                    pred = j;
                }
            }
            if pred == labels[i] {
                correct += 1;
            }
            row.mapv_inplace(|v| (v - max).exp());
            let sum: f32 = row.sum();
            loss += (sum.ln() + max - logits[[i, labels[i]]]) as f64;
            row.mapv_inplace(|v| v / sum / n as f32);
            row[labels[i]] -= 1.0 / n as f32;
        }
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        grads.push(LayerGrads {
            w: d.t().dot(&a),
            b: d.sum_axis(Axis(0)),
            gamma: None,
            beta: None,
        });
        let mut da = d.dot(&self.layers[last].w);
        for l in (0..last).rev() {
            let tape = &tapes[l];
            if let Some(m) = &tape.mask {
                da *= m;
            }
            Zip::from(&mut da).and(&tape.post_bn).for_each(|g, &h| {
                if h < 0.0 {
                    *g = 0.0;
                }
            });
            let (dh, d_gamma, d_beta) = match (&tape.bn, &self.layers[l].bn) {
                (Some(cache), Some(state)) => {
                    let (dh, dg, db) = batchnorm_backward(da.view(), cache, &state.gamma);
                    (dh, Some(dg), Some(db))
                }
                _ => (da, None, None),
            };
            grads.push(LayerGrads {
                w: dh.t().dot(&tape.input),
                b: dh.sum_axis(Axis(0)),
                gamma: d_gamma,
                beta: d_beta,
            });
            da = dh.dot(&self.layers[l].w);
        }
        grads.reverse();
        for ((layer, slot), g) in self.layers.iter_mut().zip(slots.iter_mut()).zip(grads.iter()) {
            slot.w.update(layer.w.as_slice_mut().unwrap(), g.w.as_slice().unwrap(), hyper);
            slot.b.update(layer.b.as_slice_mut().unwrap(), g.b.as_slice().unwrap(), hyper);
            if let (Some(bn), Some(sg), Some(sb), Some(gg), Some(gb)) =
                (layer.bn.as_mut(), slot.gamma.as_mut(), slot.beta.as_mut(), &g.gamma, &g.beta)
            {
                sg.update(bn.gamma.as_slice_mut().unwrap(), gg.as_slice().unwrap(), hyper);
                sb.update(bn.beta.as_slice_mut().unwrap(), gb.as_slice().unwrap(), hyper);
            }
        }
        Ok((loss, correct))
    }

    fn export(&self, cfg: &TrainConfig) -> Result<NetworkModel> {
        let last = self.layers.len() - 1;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let widen = |v: &Array1<f32>| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
                let mut dense = DenseLayer::new(layer.w.mapv(f64::from), layer.b.mapv(f64::from));
                dense.bn = layer.bn.as_ref().map(|bn| BatchNormParams {
                    gamma: widen(&bn.gamma),
                    beta: widen(&bn.beta),
                    mean: widen(&bn.running_mean),
                    var: widen(&bn.running_var),
                    eps: bn.eps as f64,
                });
                if cfg.variant == Variant::Dropout && l < last {
                    dense.dropout_rate = cfg.dropout_rate;
                }
                dense
            })
            .collect();
        NetworkModel::new(layers, (-1.0, 1.0))
    }
}

fn evaluate_f32(mlp: &Mlp, data: &Dataset) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let chunk = 2048;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let logits = mlp.infer(data.inputs.slice(ndarray::s![start..end, ..]));
        for (i, row) in logits.outer_iter().enumerate() {
            let label = data.labels[start + i];
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let lse = row.iter().map(|&v| ((v - max) as f64).exp()).sum::<f64>().ln() + max as f64;
            loss += lse - row[label] as f64;
            let pred = crate::network::argmax(row.mapv(f64::from).view());
            if pred == label {
                correct += 1;
            }
        }
        start = end;
    }
    let n = data.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Trains on `data`, holding out a seeded validation split for early stopping,
/// and exports the parameters of the best validation epoch.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<(NetworkModel, TrainHistory)> {
    train_with_progress(cfg, data, |_| {})
}

pub fn train_with_progress<F: FnMut(&EpochRecord)>(
    cfg: &TrainConfig,
    data: &Dataset,
    mut progress: F,
) -> Result<(NetworkModel, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let (train_set, val_set) = data.split(cfg.validation_fraction, cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("dataset too small for the validation split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dims = vec![data.dim()];
    dims.extend_from_slice(&cfg.hidden_widths);
    dims.push(data.class_count);
    let mut mlp = Mlp::new(&dims, cfg, &mut rng);
    let mut slots: Vec<LayerSlots> = mlp
        .layers
        .iter()
        .map(|l| LayerSlots {
            w: AdamSlot::new(l.w.len()),
            b: AdamSlot::new(l.b.len()),
            gamma: l.bn.as_ref().map(|bn| AdamSlot::new(bn.gamma.len())),
            beta: l.bn.as_ref().map(|bn| AdamSlot::new(bn.beta.len())),
        })
        .collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
    };
    let mut best: Option<(f64, f64, Vec<Layer>)> = None;
    let mut since_best = 0;
    let mut step = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut seen = 0;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.variant == Variant::Bn && batch.len() < 2 {
                continue;
            }
            step += 1;
            let hyper = AdamHyper {
                lr: cfg.learning_rate as f32,
                beta1: cfg.beta1 as f32,
                beta2: cfg.beta2 as f32,
                eps: cfg.adam_eps as f32,
                step,
            };
            let x = train_set.inputs.select(Axis(0), batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let (l, c) = mlp.train_step(x, &labels, cfg, &mut slots, &hyper, &mut rng)?;
            if !l.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += l;
            correct += c;
            seen += batch.len();
        }
        let (val_loss, val_accuracy) = evaluate_f32(&mlp, &val_set);
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            val_loss,
            val_accuracy,
        };
        progress(&record);
        history.epochs.push(record);
        let improved = match &best {
            None => true,
            Some((acc, loss, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, mlp.layers.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, _, layers)) = best {
        mlp.layers = layers;
    }
    Ok((mlp.export(cfg)?, history))
}

/// Mean cross-entropy and accuracy of an exported model, in f64.
pub fn evaluate(model: &NetworkModel, data: &Dataset) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let chunk = 1000;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let logits = model.logits_batch(data.inputs.slice(ndarray::s![start..end, ..]).mapv(f64::from).view())?;
        for (i, row) in logits.outer_iter().enumerate() {
            let label = data.labels[start + i];
            loss -= crate::network::log_softmax(row)[label];
            if crate::network::argmax(row) == label {
                correct += 1;
            }
        }
        start = end;
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}
