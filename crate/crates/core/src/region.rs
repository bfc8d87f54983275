//! H-representation of the linear region containing a point.
//!
//! Each hidden node contributes one halfspace `w^T x + b >= 0`, where `(w, b)`
//! is the node's pre-activation affine map on the region, flipped in sign when
//! the node is inactive. Layers are visited in order, so the constraints of the
//! first `l` layers alone describe the set of inputs that share the first `l`
//! layers' activation states. The input box is kept separately.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkModel;
use crate::pattern::ActivationPattern;

/// Halfspaces `weights[i] . x + biases[i] >= 0` plus box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSystem {
    weights: Array2<f64>,
    biases: Array1<f64>,
    /// `(hidden layer, node)` of each constraint.
    provenance: Vec<(usize, usize)>,
    box_lo: Array1<f64>,
    box_hi: Array1<f64>,
    pattern: ActivationPattern,
}

impl HalfspaceSystem {
    pub fn new(
        weights: Array2<f64>,
        biases: Array1<f64>,
        provenance: Vec<(usize, usize)>,
        box_lo: Array1<f64>,
        box_hi: Array1<f64>,
        pattern: ActivationPattern,
    ) -> Result<Self> {
        let (k, d) = weights.dim();
        if biases.len() != k || provenance.len() != k {
            return Err(Error::InvalidModel(format!(
                "{} constraints but {} biases and {} provenance tags",
                k,
                biases.len(),
                provenance.len()
            )));
        }
        if box_lo.len() != d || box_hi.len() != d {
            return Err(Error::InputShape {
                expected: d,
                got: box_lo.len().min(box_hi.len()),
            });
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite constraint coefficient".into()));
        }
        Ok(HalfspaceSystem {
            weights,
            biases,
            provenance,
            box_lo,
            box_hi,
            pattern,
        })
    }

    /// Hand-built system without network provenance.
    pub fn from_constraints(
        constraints: &[(Vec<f64>, f64)],
        box_lo: Array1<f64>,
        box_hi: Array1<f64>,
    ) -> Result<Self> {
        let d = box_lo.len();
        let mut weights = Array2::zeros((constraints.len(), d));
        let mut biases = Array1::zeros(constraints.len());
        for (i, (w, b)) in constraints.iter().enumerate() {
            if w.len() != d {
                return Err(Error::InputShape { expected: d, got: w.len() });
            }
            weights.row_mut(i).assign(&ArrayView1::from(w.as_slice()));
            biases[i] = *b;
        }
        let provenance = (0..constraints.len()).map(|i| (0, i)).collect();
        Self::new(weights, biases, provenance, box_lo, box_hi, ActivationPattern::zeros(0))
    }

    /// Number of node constraints (box bounds excluded).
    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    /// Node constraints plus the two box bounds per dimension.
    pub fn total_inequalities(&self) -> usize {
        self.len() + 2 * self.dim()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn constraint(&self, i: usize) -> (ArrayView1<'_, f64>, f64) {
        (self.weights.row(i), self.biases[i])
    }

    pub fn provenance(&self) -> &[(usize, usize)] {
        &self.provenance
    }

    pub fn box_lo(&self) -> &Array1<f64> {
        &self.box_lo
    }

    pub fn box_hi(&self) -> &Array1<f64> {
        &self.box_hi
    }

    pub fn pattern(&self) -> &ActivationPattern {
        &self.pattern
    }

    /// `w_i . x + b_i` for every constraint.
    pub fn slacks(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.biases
    }

    pub fn min_slack(&self, x: ArrayView1<f64>) -> f64 {
        self.slacks(x).fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Every constraint slack `>= -tol` and every coordinate within the box up to `tol`.
    pub fn contains(&self, x: ArrayView1<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(self.box_lo.iter().zip(self.box_hi.iter()))
            .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol);
        in_box && self.slacks(x).iter().all(|&s| s >= -tol)
    }

    /// Subsystem keeping the constraints at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> HalfspaceSystem {
        let weights = self.weights.select(Axis(0), indices);
        let biases = self.biases.select(Axis(0), indices);
        let provenance = indices.iter().map(|&i| self.provenance[i]).collect();
        HalfspaceSystem {
            weights,
            biases,
            provenance,
            box_lo: self.box_lo.clone(),
            box_hi: self.box_hi.clone(),
            pattern: self.pattern.clone(),
        }
    }

    /// Constraints contributed by hidden layers `0..layers`.
    pub fn layer_prefix(&self, layers: usize) -> HalfspaceSystem {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.provenance[i].0 < layers)
            .collect();
        self.select(&keep)
    }

    /// Copy with constraint `i` multiplied by `factor`.
    pub fn scaled(&self, i: usize, factor: f64) -> HalfspaceSystem {
        let mut out = self.clone();
        out.weights.row_mut(i).mapv_inplace(|v| v * factor);
        out.biases[i] *= factor;
        out
    }

    /// Copy with the constraints of `other` appended.
    pub fn concat(&self, other: &HalfspaceSystem) -> Result<HalfspaceSystem> {
        if other.dim() != self.dim() {
            return Err(Error::InputShape {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut out = self.clone();
        out.weights = concatenate![Axis(0), self.weights, other.weights];
        out.biases = concatenate![Axis(0), self.biases, other.biases];
        out.provenance.extend_from_slice(&other.provenance);
        Ok(out)
    }

    /// Indices of constraints whose `w` is (numerically) zero.
    pub fn vacuous_constraints(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.weights.row(i).iter().all(|v| v.abs() == 0.0))
            .collect()
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            dim: self.dim(),
            constraints: (0..self.len())
                .map(|i| ConstraintFile {
                    w: self.weights.row(i).to_vec(),
                    b: self.biases[i],
                    layer: self.provenance[i].0,
                    node: self.provenance[i].1,
                })
                .collect(),
            box_lo: self.box_lo.to_vec(),
            box_hi: self.box_hi.to_vec(),
            pattern_len: self.pattern.len(),
            pattern: self.pattern.to_hex(),
        }
    }

    pub fn from_file(file: &SystemFile) -> Result<Self> {
        let d = file.dim;
        let k = file.constraints.len();
        let mut weights = Array2::zeros((k, d));
        let mut biases = Array1::zeros(k);
        let mut provenance = Vec::with_capacity(k);
        for (i, c) in file.constraints.iter().enumerate() {
            if c.w.len() != d {
                return Err(Error::InputShape { expected: d, got: c.w.len() });
            }
            weights.row_mut(i).assign(&ArrayView1::from(c.w.as_slice()));
            biases[i] = c.b;
            provenance.push((c.layer, c.node));
        }
        let pattern = ActivationPattern::from_hex(&file.pattern, file.pattern_len)?;
        Self::new(
            weights,
            biases,
            provenance,
            Array1::from(file.box_lo.clone()),
            Array1::from(file.box_hi.clone()),
            pattern,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub w: Vec<f64>,
    pub b: f64,
    pub layer: usize,
    pub node: usize,
}

/// JSON form of a [`HalfspaceSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub dim: usize,
    pub constraints: Vec<ConstraintFile>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub pattern_len: usize,
    /// Hex bit-string, see [`ActivationPattern::to_hex`].
    pub pattern: String,
}

/// Builds the H-representation of the linear region of `model` containing `x_star`.
pub fn extract_region(model: &NetworkModel, x_star: ArrayView1<f64>) -> Result<HalfspaceSystem> {
    if x_star.len() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            got: x_star.len(),
        });
    }
    if !model.in_bounds(x_star, 1e-12) {
        return Err(Error::OutOfBounds);
    }
    let affine = model.hidden_affine(x_star)?;
    let d = model.input_dim();
    let k = model.hidden_node_count();
    let mut weights = Array2::zeros((k, d));
    let mut biases = Array1::zeros(k);
    let mut provenance = Vec::with_capacity(k);
    let mut row = 0;
    for (l, w_layer) in affine.weights.iter().enumerate() {
        let h = &affine.pass.preacts[l];
        let n = w_layer.nrows();
        let mut block = weights.slice_mut(s![row..row + n, ..]);
        block.assign(w_layer);
        for node in 0..n {
            let grad = w_layer.row(node);
            let b = h[node] - grad.dot(&x_star);
            if h[node] < 0.0 {
                block.row_mut(node).mapv_inplace(|v| -v);
                biases[row + node] = -b;
            } else {
                biases[row + node] = b;
            }
            provenance.push((l, node));
        }
        row += n;
    }
    let (lo, hi) = model.input_bounds();
    HalfspaceSystem::new(
        weights,
        biases,
        provenance,
        Array1::from_elem(d, lo),
        Array1::from_elem(d, hi),
        affine.pass.pattern,
    )
}

/// Membership of a point, standalone form of [`HalfspaceSystem::contains`].
pub fn contains(system: &HalfspaceSystem, x: ArrayView1<f64>, tol: f64) -> bool {
    system.contains(x, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_model, random_point};
    use crate::network::DenseLayer;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node_region() {
        let model = NetworkModel::new(
            vec![
                DenseLayer::new(array![[1.0, 0.0]], array![0.0]),
                DenseLayer::new(array![[1.0]], array![0.0]),
            ],
            (-1.0, 1.0),
        )
        .unwrap();
        let sys = extract_region(&model, array![0.5, 0.3].view()).unwrap();
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.constraint(0).0, array![1.0, 0.0]);
        assert_eq!(sys.constraint(0).1, 0.0);
        assert_eq!(sys.total_inequalities(), 5);
    }

    #[test]
    fn inactive_nodes_are_flipped() {
        let model = NetworkModel::new(
            vec![
                DenseLayer::new(array![[1.0, 0.0]], array![0.0]),
                DenseLayer::new(array![[1.0]], array![0.0]),
            ],
            (-1.0, 1.0),
        )
        .unwrap();
        let sys = extract_region(&model, array![-0.5, 0.3].view()).unwrap();
        assert_eq!(sys.constraint(0).0, array![-1.0, 0.0]);
        assert!(sys.contains(array![-0.9, 0.0].view(), 0.0));
        assert!(!sys.contains(array![0.1, 0.0].view(), 0.0));
    }

    #[test]
    fn generating_point_is_contained_and_box_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, &[2, 8, 8, 2], false);
        let x = random_point(&mut rng, 2);
        let sys = extract_region(&model, x.view()).unwrap();
        assert!(sys.contains(x.view(), 1e-9));
        assert!(sys.min_slack(x.view()) >= -1e-9);
        assert!(!sys.contains(array![1.1, 0.0].view(), 1e-9));
        assert_eq!(sys.pattern(), &model.forward(x.view()).unwrap().pattern);
    }

    #[test]
    fn out_of_bounds_point_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, &[2, 4, 2], false);
        assert!(matches!(
            extract_region(&model, array![1.5, 0.0].view()),
            Err(Error::OutOfBounds)
        ));
    }

    #[test]
    fn dead_node_keeps_vacuous_constraint() {
        // second layer node 0 only sees the first-layer node that is dead everywhere
        let model = NetworkModel::new(
            vec![
                DenseLayer::new(array![[0.0, 0.0], [1.0, 1.0]], array![-1.0, 0.0]),
                DenseLayer::new(array![[1.0, 0.0]], array![0.5]),
                DenseLayer::new(array![[1.0]], array![0.0]),
            ],
            (-1.0, 1.0),
        )
        .unwrap();
        let sys = extract_region(&model, array![0.2, 0.2].view()).unwrap();
        assert_eq!(sys.len(), 3);
        // the dead first-layer node is vacuous too
        assert_eq!(sys.vacuous_constraints(), vec![0, 2]);
        assert!(sys.constraint(2).1 >= 0.0);
    }

    #[test]
    fn nesting_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = random_model(&mut rng, &[2, 6, 6, 6, 2], false);
        let x = random_point(&mut rng, 2);
        let sys = extract_region(&model, x.view()).unwrap();
        let prefixes: Vec<_> = (1..=3).map(|l| sys.layer_prefix(l)).collect();
        for _ in 0..2000 {
            let p = random_point(&mut rng, 2);
            if sys.contains(p.view(), 0.0) {
                assert!(prefixes.iter().all(|s| s.contains(p.view(), 0.0)));
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random_model(&mut rng, &[3, 5, 5, 2], true);
        let x = random_point(&mut rng, 3);
        let sys = extract_region(&model, x.view()).unwrap();
        let json = crate::io::to_json_precise(&sys.to_file()).unwrap();
        let back = HalfspaceSystem::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(sys, back);
        assert!(back.contains(x.view(), 1e-9));
    }
}
