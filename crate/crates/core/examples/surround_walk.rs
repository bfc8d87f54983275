//! Walks rays inside the decision-preserving null space of a region and counts
//! the distinct regions each ray passes through.

use regionlab::analytics::{null_space_directions, walk_ray, NullSpaceMode, WalkOptions};
use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::train::{train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let data = make_spiral(&SpiralSpec::default());
    for variant in Variant::ALL {
        let (model, _) = train(&TrainConfig::spiral(variant, 0), &data)?;
        let x = data.point(123);
        let affine = model.region_affine_map(x.view())?;
        let mode = NullSpaceMode::auto(model.input_dim(), model.class_count());
        let dirs = null_space_directions(&affine, 20, 7, mode)?;
        let mut counts = Vec::new();
        let mut rho = Vec::new();
        for e in &dirs {
            let probe = walk_ray(&model, x.view(), e.view(), 0.2, &WalkOptions::default())?;
            counts.push(probe.unique_region_count);
            rho.extend(probe.relevance.into_iter().flatten());
        }
        let mean_rho = rho.iter().sum::<f64>() / rho.len().max(1) as f64;
        println!("{:<8} ({mode:?}) unique regions per ray {counts:?}, mean relevance {mean_rho:.3}", variant.name());
    }
    Ok(())
}
