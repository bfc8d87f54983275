//! Region analyses: hyperplane angles, boundary search, in-region class
//! probes and surrounding-region walks.

pub mod angles;
pub mod interpolate;
pub mod pgd;
pub mod probe;
pub mod surround;

use serde::{Deserialize, Serialize};

pub use angles::{angle_matrix, AngleMatrix};
pub use interpolate::{interpolation_search, InterpolationResult};
pub use pgd::{pgd_attack, PgdConfig, PgdOutcome};
pub use probe::{class_probe, region_summary, ClassProbe, ProbeOptions, RegionSummary, StepRule};
pub use surround::{
    decision_direction, null_space_directions, relevance, walk_ray, DecisionDirection, NullSpaceMode,
    SurroundProbe, WalkOptions,
};

/// Which kind of point generated a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Contains a test point.
    Manifold,
    /// Contains the boundary between a test point and another class's mean.
    Decision,
    /// Contains the boundary between a test point and its PGD example.
    Adversarial,
}

impl RegionKind {
    pub const ALL: [RegionKind; 3] = [RegionKind::Manifold, RegionKind::Decision, RegionKind::Adversarial];

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Manifold => "manifold",
            RegionKind::Decision => "decision",
            RegionKind::Adversarial => "adversarial",
        }
    }
}
