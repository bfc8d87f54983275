//! Training and exact linear-region analysis for small ReLU networks.

pub mod analytics;
pub mod cli;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod lp;
pub mod network;
pub mod pattern;
pub mod polytope;
pub mod region;
pub mod render;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
pub use network::{DenseLayer, ForwardPass, NetworkModel, RegionAffineMap};
pub use pattern::ActivationPattern;
pub use region::{extract_region, HalfspaceSystem};
