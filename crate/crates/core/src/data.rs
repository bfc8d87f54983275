//! Datasets: the two-arm spiral and MNIST in IDX format.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs scaled to `[-1, 1]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N x d`, one sample per row.
    pub inputs: Array2<f32>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(inputs: Array2<f32>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::Config(format!(
                "{} input rows but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Config(format!("label {bad} outside 0..{class_count}")));
        }
        if inputs.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Config("input component outside [-1, 1]".into()));
        }
        Ok(Dataset {
            inputs,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Sample `i` widened to f64 for analysis.
    pub fn point(&self, i: usize) -> Array1<f64> {
        self.inputs.row(i).mapv(f64::from)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    pub fn class_indices(&self, class_id: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class_id).collect()
    }

    /// Seeded shuffle split into `(train, validation)` with `round(N * fraction)`
    /// validation rows.
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_val = ((self.len() as f64) * fraction).round() as usize;
        let (val, train) = order.split_at(n_val.min(self.len()));
        (self.subset(train), self.subset(val))
    }
}

/// Componentwise mean of all inputs of `class_id`.
pub fn mean_point_target(data: &Dataset, class_id: usize) -> Result<Array1<f64>> {
    let idx = data.class_indices(class_id);
    if idx.is_empty() {
        return Err(Error::EmptyClass(class_id));
    }
    let mut sum = Array1::<f64>::zeros(data.dim());
    for &i in &idx {
        sum += &data.point(i);
    }
    Ok(sum / idx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralSpec {
    pub points_per_class: usize,
    pub turns: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SpiralSpec {
    fn default() -> Self {
        SpiralSpec {
            points_per_class: 500,
            turns: 1.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Two interleaved arms; class `k` is rotated by `pi * k`, radius grows
/// linearly from 0.1 to 0.9 with the angle.
pub fn make_spiral(spec: &SpiralSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).expect("finite std");
    let max_angle = 2.0 * std::f64::consts::PI * spec.turns;
    let n = spec.points_per_class;
    let mut inputs = Array2::<f32>::zeros((2 * n, 2));
    let mut labels = Vec::with_capacity(2 * n);
    for k in 0..2 {
        for i in 0..n {
            let frac: f64 = rng.random_range(0.0..1.0);
            let theta = frac * max_angle;
            let r = 0.1 + 0.8 * frac;
            let phase = theta + std::f64::consts::PI * k as f64;
            let mut x = r * phase.cos();
            let mut y = r * phase.sin();
            if spec.noise_std > 0.0 {
                x += noise.sample(&mut rng);
                y += noise.sample(&mut rng);
            }
            let row = k * n + i;
            inputs[[row, 0]] = x.clamp(-1.0, 1.0) as f32;
            inputs[[row, 1]] = y.clamp(-1.0, 1.0) as f32;
            labels.push(k);
        }
    }
    Dataset {
        inputs,
        labels,
        class_count: 2,
    }
}

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "truncated header".into(),
        })
}

/// Parses an IDX image file into `(count, rows*cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad image magic {magic:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * size {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("expected {} pixel bytes, found {}", count * size, body.len()),
        });
    }
    Ok((count, size, &body[..count * size]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad label magic {magic:#010x}"),
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("expected {count} labels, found {}", body.len()),
        });
    }
    Ok(&body[..count])
}

pub fn pixel_to_unit(p: u8) -> f32 {
    (p as f64 / 127.5 - 1.0) as f32
}

/// Reads an IDX image/label pair; either file may be gzip-compressed.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = read_maybe_gzip(images_path)?;
    let label_bytes = read_maybe_gzip(labels_path)?;
    let (count, size, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("{count} images but {} labels", labels.len()),
        });
    }
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Format {
            offset: 8 + pos as u64,
            message: format!("label {} outside 0..10", labels[pos]),
        });
    }
    let inputs = Array2::from_shape_vec((count, size), pixels.iter().map(|&p| pixel_to_unit(p)).collect())
        .expect("shape matches pixel count");
    Ok(Dataset {
        inputs,
        labels: labels.iter().map(|&l| l as usize).collect(),
        class_count: 10,
    })
}

/// Standard file names inside an MNIST directory; `.gz` variants are tried second.
pub fn load_mnist_dir(dir: &Path, train: bool) -> Result<Dataset> {
    let prefix = if train { "train" } else { "t10k" };
    let find = |stem: String| {
        let plain = dir.join(&stem);
        if plain.exists() {
            plain
        } else {
            dir.join(format!("{stem}.gz"))
        }
    };
    load_mnist(
        &find(format!("{prefix}-images-idx3-ubyte")),
        &find(format!("{prefix}-labels-idx1-ubyte")),
    )
}
