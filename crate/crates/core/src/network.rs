//! Piecewise-linear feedforward networks.
//!
//! A [`NetworkModel`] is a chain of dense layers. Every layer but the last is
//! followed by a ReLU; the last layer produces logits. Batch normalization
//! records are folded into the effective weight and bias once, when the model
//! is built, so everything downstream sees a plain affine+ReLU network.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::ActivationPattern;

/// Inference-time batch normalization record for one hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

impl BatchNormParams {
    fn width(&self) -> usize {
        self.gamma.len()
    }

    /// Per-node scale `gamma / sqrt(var + eps)`.
    pub fn scale(&self) -> Vec<f64> {
        self.gamma
            .iter()
            .zip(&self.var)
            .map(|(g, v)| g / (v + self.eps).sqrt())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_width x in_width`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub bn: Option<BatchNormParams>,
    /// Only meaningful while training.
    pub dropout_rate: f64,
}

impl DenseLayer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        DenseLayer {
            weight,
            bias,
            bn: None,
            dropout_rate: 0.0,
        }
    }

    pub fn in_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.nrows()
    }

    /// Effective `(weight, bias)` with batch normalization folded in.
    fn folded(&self) -> (Array2<f64>, Array1<f64>) {
        match &self.bn {
            None => (self.weight.clone(), self.bias.clone()),
            Some(bn) => {
                let scale = bn.scale();
                let mut w = self.weight.clone();
                let mut b = self.bias.clone();
                for (i, mut row) in w.axis_iter_mut(Axis(0)).enumerate() {
                    row *= scale[i];
                    b[i] = scale[i] * (b[i] - bn.mean[i]) + bn.beta[i];
                }
                (w, b)
            }
        }
    }
}

/// Output of an inference-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Array1<f64>,
    pub pattern: ActivationPattern,
    /// Pre-activations of each hidden layer (after the BN fold, before ReLU).
    pub preacts: Vec<Array1<f64>>,
}

/// The affine map `x -> J x + c` the network computes on one linear region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAffineMap {
    /// `M x d` logit Jacobian.
    pub jacobian: Array2<f64>,
    pub offset: Array1<f64>,
    pub pattern: ActivationPattern,
}

impl RegionAffineMap {
    pub fn logits(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.jacobian.dot(&x) + &self.offset
    }
}

/// Per-layer pre-activation affine maps valid on one region: the pre-activations
/// of hidden layer `l` equal `weights[l] x + biases[l]` there.
#[derive(Debug, Clone)]
pub struct HiddenAffine {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub pass: ForwardPass,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    class_count: usize,
    input_bounds: (f64, f64),
    effective: Vec<(Array2<f64>, Array1<f64>)>,
}

impl NetworkModel {
    /// Validates the layer chain and folds batch normalization.
    pub fn new(layers: Vec<DenseLayer>, input_bounds: (f64, f64)) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidModel("model needs at least one layer".into()))?;
        let input_dim = first.in_width();
        let class_count = layers.last().unwrap().out_width();
        if input_dim == 0 || class_count == 0 {
            return Err(Error::InvalidModel("zero-width input or output".into()));
        }
        if !(input_bounds.0 < input_bounds.1) {
            return Err(Error::InvalidModel(format!(
                "input bounds {:?} are not an interval",
                input_bounds
            )));
        }
        let last = layers.len() - 1;
        let mut width = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.in_width() != width {
                return Err(Error::InvalidModel(format!(
                    "layer {} expects {} inputs but previous width is {}",
                    l,
                    layer.in_width(),
                    width
                )));
            }
            if layer.bias.len() != layer.out_width() {
                return Err(Error::InvalidModel(format!("layer {l} bias length mismatch")));
            }
            if !(0.0..1.0).contains(&layer.dropout_rate) {
                return Err(Error::InvalidModel(format!(
                    "layer {} dropout rate {} not in [0, 1)",
                    l, layer.dropout_rate
                )));
            }
            if let Some(bn) = &layer.bn {
                if l == last {
                    return Err(Error::InvalidModel("batch normalization on the output layer".into()));
                }
                let n = layer.out_width();
                if bn.width() != n || bn.beta.len() != n || bn.mean.len() != n || bn.var.len() != n {
                    return Err(Error::InvalidModel(format!("layer {l} BN record width mismatch")));
                }
                if bn.var.iter().any(|v| !(v + bn.eps > 0.0)) {
                    return Err(Error::InvalidModel(format!("layer {l} has var + eps <= 0")));
                }
            }
            width = layer.out_width();
        }

        let effective: Vec<_> = layers.iter().map(DenseLayer::folded).collect();
        for (l, (w, b)) in effective.iter().enumerate() {
            if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
        }
        Ok(NetworkModel {
            layers,
            input_dim,
            class_count,
            input_bounds,
            effective,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_bounds(&self) -> (f64, f64) {
        self.input_bounds
    }

    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.hidden_layer_count()]
            .iter()
            .map(DenseLayer::out_width)
            .collect()
    }

    pub fn hidden_node_count(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    /// Effective (BN-folded) weight and bias of layer `l`.
    pub fn effective_layer(&self, l: usize) -> (&Array2<f64>, &Array1<f64>) {
        let (w, b) = &self.effective[l];
        (w, b)
    }

    pub fn in_bounds(&self, x: ArrayView1<f64>, tol: f64) -> bool {
        let (lo, hi) = self.input_bounds;
        x.iter().all(|&v| v >= lo - tol && v <= hi + tol)
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<ForwardPass> {
        self.check_input(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: 0 });
        }
        let hidden = self.hidden_layer_count();
        let mut preacts = Vec::with_capacity(hidden);
        let mut bits = Vec::with_capacity(self.hidden_node_count());
        let mut a = x.to_owned();
        for (l, (w, b)) in self.effective.iter().enumerate() {
            let h = w.dot(&a) + b;
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            if l == hidden {
                return Ok(ForwardPass {
                    logits: h,
                    pattern: ActivationPattern::from_bits(bits),
                    preacts,
                });
            }
            bits.extend(h.iter().map(|&v| v >= 0.0));
            a = h.mapv(|v| if v >= 0.0 { v } else { 0.0 });
            preacts.push(h);
        }
        unreachable!("model has an output layer")
    }

    pub fn logits(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let hidden = self.hidden_layer_count();
        let mut a = x.to_owned();
        for (l, (w, b)) in self.effective.iter().enumerate() {
            let h = w.dot(&a) + b;
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            if l == hidden {
                return Ok(h);
            }
            a = h.mapv(|v| v.max(0.0));
        }
        unreachable!("model has an output layer")
    }

    /// Logits for every row of `x`.
    pub fn logits_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let hidden = self.hidden_layer_count();
        let mut a = x.to_owned();
        for (l, (w, b)) in self.effective.iter().enumerate() {
            let h = a.dot(&w.t()) + b;
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            if l == hidden {
                return Ok(h);
            }
            a = h.mapv(|v| v.max(0.0));
        }
        unreachable!("model has an output layer")
    }

    /// Logits and activation patterns for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<ActivationPattern>)> {
        if x.ncols() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let hidden = self.hidden_layer_count();
        let mut bits: Vec<Vec<bool>> = vec![Vec::with_capacity(self.hidden_node_count()); x.nrows()];
        let mut a = x.to_owned();
        for (l, (w, b)) in self.effective.iter().enumerate() {
            let h = a.dot(&w.t()) + b;
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            if l == hidden {
                let patterns = bits.into_iter().map(ActivationPattern::from_bits).collect();
                return Ok((h, patterns));
            }
            for (row, out) in h.outer_iter().zip(bits.iter_mut()) {
                out.extend(row.iter().map(|&v| v >= 0.0));
            }
            a = h.mapv(|v| v.max(0.0));
        }
        unreachable!("model has an output layer")
    }

    pub fn classify(&self, x: ArrayView1<f64>) -> Result<usize> {
        Ok(argmax(self.logits(x)?.view()))
    }

    /// Reference forward pass that applies batch normalization explicitly
    /// from the unfolded parameters instead of the folded weights.
    pub fn logits_unfolded(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let hidden = self.hidden_layer_count();
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = layer.weight.dot(&a) + &layer.bias;
            if let Some(bn) = &layer.bn {
                for i in 0..h.len() {
                    let normalized = (h[i] - bn.mean[i]) / (bn.var[i] + bn.eps).sqrt();
                    h[i] = bn.gamma[i] * normalized + bn.beta[i];
                }
            }
            if l == hidden {
                return Ok(h);
            }
            a = h.mapv(|v| v.max(0.0));
        }
        unreachable!("model has an output layer")
    }

    /// Pre-activation affine maps of all hidden layers on the region of `x`,
    /// obtained by chaining the layer weights through the active-node masks.
    pub fn hidden_affine(&self, x: ArrayView1<f64>) -> Result<HiddenAffine> {
        let pass = self.forward(x)?;
        let hidden = self.hidden_layer_count();
        let mut weights = Vec::with_capacity(hidden);
        let mut biases = Vec::with_capacity(hidden);
        // masked affine map of the previous layer's activations: a = jac x + off
        let mut jac: Option<Array2<f64>> = None;
        let mut off: Option<Array1<f64>> = None;
        for l in 0..hidden {
            let (w, b) = &self.effective[l];
            let (wl, bl) = match (&jac, &off) {
                (None, None) => (w.clone(), b.clone()),
                (Some(j), Some(o)) => (w.dot(j), w.dot(o) + b),
                _ => unreachable!(),
            };
            let mut j_next = wl.clone();
            let mut o_next = bl.clone();
            for (i, &h) in pass.preacts[l].iter().enumerate() {
                if h < 0.0 {
                    j_next.row_mut(i).fill(0.0);
                    o_next[i] = 0.0;
                }
            }
            weights.push(wl);
            biases.push(bl);
            jac = Some(j_next);
            off = Some(o_next);
        }
        Ok(HiddenAffine {
            weights,
            biases,
            pass,
        })
    }

    /// Logit affine map on the region containing `x_star`.
    pub fn region_affine_map(&self, x_star: ArrayView1<f64>) -> Result<RegionAffineMap> {
        let pass = self.forward(x_star)?;
        let hidden = self.hidden_layer_count();
        let (w_out, _) = &self.effective[hidden];
        // back-propagate the output weights through the masks: J = W_L D_{L-1} W_{L-1} ... D_0 W_0
        let mut jac = w_out.clone();
        for l in (0..hidden).rev() {
            for (i, &h) in pass.preacts[l].iter().enumerate() {
                if h < 0.0 {
                    jac.column_mut(i).fill(0.0);
                }
            }
            jac = jac.dot(&self.effective[l].0);
        }
        let offset = &pass.logits - &jac.dot(&x_star);
        Ok(RegionAffineMap {
            jacobian: jac,
            offset,
            pattern: pass.pattern,
        })
    }

    /// Un-signed affine coefficients `(w, b)` of hidden node `node` in hidden
    /// layer `layer`, valid throughout the region of `x_star`.
    pub fn hidden_node_affine(
        &self,
        x_star: ArrayView1<f64>,
        layer: usize,
        node: usize,
    ) -> Result<(Array1<f64>, f64)> {
        let hidden = self.hidden_layer_count();
        if layer >= hidden {
            return Err(Error::IndexOutOfRange(format!(
                "hidden layer {layer} (model has {hidden})"
            )));
        }
        if node >= self.layers[layer].out_width() {
            return Err(Error::IndexOutOfRange(format!(
                "node {} in layer {} of width {}",
                node,
                layer,
                self.layers[layer].out_width()
            )));
        }
        let pass = self.forward(x_star)?;
        let mut v = self.effective[layer].0.row(node).to_owned();
        for l in (0..layer).rev() {
            for (i, &h) in pass.preacts[l].iter().enumerate() {
                if h < 0.0 {
                    v[i] = 0.0;
                }
            }
            v = self.effective[l].0.t().dot(&v);
        }
        let b = pass.preacts[layer][node] - v.dot(&x_star);
        Ok((v, b))
    }

    /// `J^T v` for the logit Jacobian `J` of the region of `x`, by one backward pass.
    pub fn logit_vjp(&self, x: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<(ForwardPass, Array1<f64>)> {
        let pass = self.forward(x)?;
        if v.len() != self.class_count {
            return Err(Error::InputShape {
                expected: self.class_count,
                got: v.len(),
            });
        }
        let hidden = self.hidden_layer_count();
        let mut g = self.effective[hidden].0.t().dot(&v);
        for l in (0..hidden).rev() {
            for (i, &h) in pass.preacts[l].iter().enumerate() {
                if h < 0.0 {
                    g[i] = 0.0;
                }
            }
            g = self.effective[l].0.t().dot(&g);
        }
        Ok((pass, g))
    }

    /// Forward pass along with the directional derivative of every hidden
    /// pre-activation along `e`, both under the pattern of `x`.
    pub fn directional_preacts(
        &self,
        x: ArrayView1<f64>,
        e: ArrayView1<f64>,
    ) -> Result<(ForwardPass, Vec<Array1<f64>>)> {
        self.check_input(e)?;
        let pass = self.forward(x)?;
        let hidden = self.hidden_layer_count();
        let mut slopes = Vec::with_capacity(hidden);
        let mut t = e.to_owned();
        for l in 0..hidden {
            let dh = self.effective[l].0.dot(&t);
            t = dh.clone();
            for (i, &h) in pass.preacts[l].iter().enumerate() {
                if h < 0.0 {
                    t[i] = 0.0;
                }
            }
            slopes.push(dh);
        }
        Ok((pass, slopes))
    }

    /// Pattern offsets of each hidden layer; entry `l` is where layer `l` starts, the last entry is the total.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for w in self.hidden_widths() {
            offsets.push(offsets.last().unwrap() + w);
        }
        offsets
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Indices of the two largest entries, largest first.
pub fn top_two(v: ArrayView1<f64>) -> (usize, usize) {
    assert!(v.len() >= 2, "need at least two logits");
    let k1 = argmax(v);
    let mut k2 = if k1 == 0 { 1 } else { 0 };
    for (i, &x) in v.iter().enumerate() {
        if i != k1 && x > v[k2] {
            k2 = i;
        }
    }
    (k1, k2)
}

pub fn log_softmax(z: ArrayView1<f64>) -> Array1<f64> {
    let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.mapv(|v| v - lse)
}

pub fn softmax(z: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(z).mapv(f64::exp)
}
