//! For every class, the most confident point of that class inside the region of
//! a trained spiral model, and the region summary.

use regionlab::analytics::{class_probe, region_summary, ProbeOptions};
use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::extract_region;
use regionlab::train::{train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let data = make_spiral(&SpiralSpec::default());
    let (model, _) = train(&TrainConfig::spiral(Variant::Vanilla, 0), &data)?;
    for i in [0, 250, 700] {
        let x = data.point(i);
        let system = extract_region(&model, x.view())?;
        let affine = model.region_affine_map(x.view())?;
        let probes = (0..model.class_count())
            .map(|t| class_probe(&system, &affine, x.view(), t, &ProbeOptions::default()))
            .collect::<regionlab::Result<Vec<_>>>()?;
        for p in &probes {
            println!(
                "point {i} class {}: log p {:.4}  realized {}  distortion {:.4}  gap {:.1e} after {} steps",
                p.target_class, p.log_prob, p.realized, p.distortion, p.gap, p.iterations
            );
        }
        let s = region_summary(&probes);
        println!("  -> {} classes reachable, distortion {:.4}", s.class_region_count, s.distortion);
    }
    Ok(())
}
