//! Oracles shared by the integration suites. Nothing here calls the library's
//! forward pass or solver; they recompute from raw weights and brute force.

#![allow(dead_code)]

use regionlab::network::NetworkModel;
use regionlab::HalfspaceSystem;

/// Forward pass straight from the stored layers, batch norm applied unfolded.
/// Returns the activation bits of every hidden node and the logits.
pub fn hand_forward(model: &NetworkModel, x: &[f64]) -> (Vec<bool>, Vec<f64>) {
    let layers = model.layers();
    let mut h: Vec<f64> = x.to_vec();
    let mut bits = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let mut z: Vec<f64> = (0..layer.out_width())
            .map(|i| {
                let row = layer.weight.row(i);
                row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + layer.bias[i]
            })
            .collect();
        if let Some(bn) = &layer.bn {
            for (i, v) in z.iter_mut().enumerate() {
                *v = bn.gamma[i] * (*v - bn.mean[i]) / (bn.var[i] + bn.eps).sqrt() + bn.beta[i];
            }
        }
        if l + 1 == layers.len() {
            return (bits, z);
        }
        bits.extend(z.iter().map(|&v| v >= 0.0));
        h = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    unreachable!("a model has an output layer")
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// `a . x + b >= 0` in the plane.
pub type Halfplane = ([f64; 2], f64);

/// Node constraints and box faces of a 2D region as halfplanes.
pub fn halfplanes(system: &HalfspaceSystem) -> Vec<Halfplane> {
    assert_eq!(system.dim(), 2);
    let mut out: Vec<Halfplane> = (0..system.len())
        .map(|i| {
            let (w, b) = system.constraint(i);
            ([w[0], w[1]], b)
        })
        .collect();
    out.extend(box_halfplanes(system));
    out
}

pub fn box_halfplanes(system: &HalfspaceSystem) -> Vec<Halfplane> {
    let (lo, hi) = (system.box_lo(), system.box_hi());
    vec![
        ([1.0, 0.0], -lo[0]),
        ([-1.0, 0.0], hi[0]),
        ([0.0, 1.0], -lo[1]),
        ([0.0, -1.0], hi[1]),
    ]
}

/// Every pairwise intersection point that satisfies all halfplanes within `tol`.
pub fn polygon_vertices(planes: &[Halfplane], tol: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            let ([a, b], e) = planes[i];
            let ([c, d], f) = planes[j];
            let det = a * d - b * c;
            if det.abs() < 1e-12 {
                continue;
            }
            // a x + b y = -e, c x + d y = -f
            let x = (-e * d + b * f) / det;
            let y = (-a * f + c * e) / det;
            let ok = planes.iter().all(|&([p, q], r)| {
                let scale = (p * p + q * q).sqrt().max(1.0);
                p * x + q * y + r >= -tol * scale
            });
            if ok {
                out.push([x, y]);
            }
        }
    }
    out
}

/// Minimum of `a . x + b` over the polygon, by vertex enumeration; `None` if empty.
pub fn polygon_min(planes: &[Halfplane], objective: Halfplane) -> Option<f64> {
    polygon_vertices(planes, 1e-10)
        .iter()
        .map(|v| objective.0[0] * v[0] + objective.0[1] * v[1] + objective.1)
        .fold(None, |acc: Option<f64>, val| Some(acc.map_or(val, |a| a.min(val))))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
