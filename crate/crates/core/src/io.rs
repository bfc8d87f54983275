//! JSON persistence for models, with full-precision number formatting.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::network::{BatchNormParams, DenseLayer, NetworkModel};

/// Writes every float with 17 significant digits in scientific notation.
#[derive(Debug, Default, Clone, Copy)]
pub struct PreciseFormatter;

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{:.16e}", value)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

pub fn write_json_precise<T: Serialize, W: Write>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, PreciseFormatter);
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_precise<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json_precise(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn save_json_precise<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_json_precise(&mut w, value)?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let r = BufReader::new(fs::File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnFile {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    /// Row-major, one inner array per output node.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bn: Option<BnFile>,
    #[serde(default)]
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub input_dim: usize,
    pub class_count: usize,
    pub input_bounds: [f64; 2],
    pub layers: Vec<LayerFile>,
}

impl From<&NetworkModel> for ModelFile {
    fn from(model: &NetworkModel) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|layer| LayerFile {
                weight: layer.weight.outer_iter().map(|r| r.to_vec()).collect(),
                bias: layer.bias.to_vec(),
                bn: layer.bn.as_ref().map(|bn| BnFile {
                    gamma: bn.gamma.clone(),
                    beta: bn.beta.clone(),
                    mean: bn.mean.clone(),
                    var: bn.var.clone(),
                    eps: bn.eps,
                }),
                dropout_rate: layer.dropout_rate,
            })
            .collect();
        let (lo, hi) = model.input_bounds();
        ModelFile {
            input_dim: model.input_dim(),
            class_count: model.class_count(),
            input_bounds: [lo, hi],
            layers,
        }
    }
}

impl TryFrom<ModelFile> for NetworkModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.into_iter().enumerate() {
            let rows = lf.weight.len();
            let cols = lf.weight.first().map_or(0, Vec::len);
            if lf.weight.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidModel(format!("layer {l} has ragged weight rows")));
            }
            let flat: Vec<f64> = lf.weight.into_iter().flatten().collect();
            let weight = Array2::from_shape_vec((rows, cols), flat)
                .map_err(|e| Error::InvalidModel(format!("layer {l}: {e}")))?;
            layers.push(DenseLayer {
                weight,
                bias: Array1::from(lf.bias),
                bn: lf.bn.map(|bn| BatchNormParams {
                    gamma: bn.gamma,
                    beta: bn.beta,
                    mean: bn.mean,
                    var: bn.var,
                    eps: bn.eps,
                }),
                dropout_rate: lf.dropout_rate,
            });
        }
        let model = NetworkModel::new(layers, (file.input_bounds[0], file.input_bounds[1]))?;
        if model.input_dim() != file.input_dim || model.class_count() != file.class_count {
            return Err(Error::InvalidModel(format!(
                "header says {}x{} but layers chain {}x{}",
                file.input_dim,
                file.class_count,
                model.input_dim(),
                model.class_count()
            )));
        }
        Ok(model)
    }
}

pub fn save_model(path: &Path, model: &NetworkModel) -> Result<()> {
    save_json_precise(path, &ModelFile::from(model))
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    let file: ModelFile = load_json(path)?;
    NetworkModel::try_from(file)
}

pub fn model_to_json(model: &NetworkModel) -> Result<String> {
    to_json_precise(&ModelFile::from(model))
}

pub fn model_from_json(json: &str) -> Result<NetworkModel> {
    NetworkModel::try_from(serde_json::from_str::<ModelFile>(json)?)
}
