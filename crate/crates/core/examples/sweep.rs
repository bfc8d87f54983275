//! A small analysis sweep on a spiral model; writes the JSON and CSV reports.
//!
//! Usage: `sweep [OUT_DIR] [POINTS]`

use std::path::PathBuf;

use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::sweep::{run_sweep, write_report, AnalyzeConfig, ClassTargets};
use regionlab::train::{train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sweep".into()));
    let points: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let train_set = make_spiral(&SpiralSpec::default());
    let test_set = make_spiral(&SpiralSpec { seed: 1000, ..SpiralSpec::default() });
    let cfg = AnalyzeConfig { points, reduce: true, ..AnalyzeConfig::default() };
    for variant in Variant::ALL {
        let (model, _) = train(&TrainConfig::spiral(variant, 0), &train_set)?;
        let targets = ClassTargets::new(&model, &train_set)?;
        let report = run_sweep(variant.name(), &model, &test_set, &targets, &cfg);
        write_report(&out, &report)?;
        let a = &report.aggregate;
        println!(
            "{:<8} median inradius {:.4}  median unique regions {:.1}  failures {}",
            variant.name(),
            a.manifold_inradius.map_or(f64::NAN, |s| s.median),
            a.surround_unique_regions.map_or(f64::NAN, |s| s.median),
            a.failed_points
        );
    }
    Ok(())
}
