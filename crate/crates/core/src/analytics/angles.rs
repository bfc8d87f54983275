use ndarray::Array2;
use serde::Serialize;

use crate::region::HalfspaceSystem;

/// Pairwise angles in degrees between constraint normals. Rows and columns of
/// zero normals (dead nodes) hold NaN off the diagonal and are listed in `dead`.
#[derive(Debug, Clone, Serialize)]
pub struct AngleMatrix {
    pub degrees: Array2<f64>,
    pub index_layout: Vec<(usize, usize)>,
    pub dead: Vec<usize>,
}

pub fn angle_matrix(system: &HalfspaceSystem) -> AngleMatrix {
    let w = system.weights();
    let k = w.nrows();
    let norms: Vec<f64> = w.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    let dead: Vec<usize> = (0..k).filter(|&i| norms[i] == 0.0).collect();
    let gram = w.dot(&w.t());
    let mut degrees = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            degrees[[i, j]] = if norms[i] == 0.0 || norms[j] == 0.0 {
                f64::NAN
            } else {
                (gram[[i, j]] / (norms[i] * norms[j])).clamp(-1.0, 1.0).acos().to_degrees()
            };
        }
    }
    // the Gram product is symmetric only up to rounding
    for i in 0..k {
        for j in i + 1..k {
            degrees[[j, i]] = degrees[[i, j]];
        }
    }
    AngleMatrix {
        degrees,
        index_layout: system.provenance().to_vec(),
        dead,
    }
}

impl AngleMatrix {
    pub fn len(&self) -> usize {
        self.degrees.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean off-diagonal angle within each pair of layer blocks, skipping dead entries.
    pub fn layer_block_means(&self) -> Vec<Vec<f64>> {
        let layers = self.index_layout.iter().map(|p| p.0 + 1).max().unwrap_or(0);
        let mut sum = vec![vec![0.0; layers]; layers];
        let mut count = vec![vec![0usize; layers]; layers];
        for i in 0..self.len() {
            for j in 0..self.len() {
                let v = self.degrees[[i, j]];
                if i == j || v.is_nan() {
                    continue;
                }
                let (a, b) = (self.index_layout[i].0, self.index_layout[j].0);
                sum[a][b] += v;
                count[a][b] += 1;
            }
        }
        (0..layers)
            .map(|a| {
                (0..layers)
                    .map(|b| if count[a][b] == 0 { f64::NAN } else { sum[a][b] / count[a][b] as f64 })
                    .collect()
            })
            .collect()
    }
}
