//! Renders region and class maps of trained spiral models over the whole input square.
//!
//! Usage: `slice_render [OUT_DIR] [RESOLUTION]`

use std::path::PathBuf;

use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::render::{rasterize, render, ImageFormat, RenderStyle, SlicePlane};
use regionlab::train::{train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "slices".into()));
    let res: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    std::fs::create_dir_all(&out)?;
    let data = make_spiral(&SpiralSpec::default());
    let plane = SlicePlane::toy2d((-1.0, 1.0), (res, res));
    for variant in Variant::ALL {
        let (model, _) = train(&TrainConfig::spiral(variant, 0), &data)?;
        let raster = rasterize(&model, &plane)?;
        for (style, tag) in [(RenderStyle::Regions, "regions"), (RenderStyle::Classes, "classes")] {
            for format in [ImageFormat::Ppm, ImageFormat::Svg] {
                let path = out.join(format!("{tag}_{}.{}", variant.name(), format.extension()));
                std::fs::write(path, render(&raster, style, format))?;
            }
        }
        println!("{:<8} {} unique regions", variant.name(), raster.unique_regions());
    }
    Ok(())
}
