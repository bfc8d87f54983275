//! Angles between constraint normals of one region, averaged per layer pair,
//! plus a heatmap of the full matrix.
//!
//! Usage: `constraint_angles [OUT.ppm]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionlab::analytics::angle_matrix;
use regionlab::extract_region;
use regionlab::fixtures::{random_model, random_point};
use regionlab::render::{render_matrix, ImageFormat};

fn main() -> regionlab::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "angles.ppm".into());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = random_model(&mut rng, &[20, 32, 32, 32, 10], false);
    let x = random_point(&mut rng, 20);
    let angles = angle_matrix(&extract_region(&model, x.view())?);
    println!("{} constraints, {} dead", angles.len(), angles.dead.len());
    for (i, row) in angles.layer_block_means().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:6.1}")).collect();
        println!("layer {i}: {}", cells.join(" "));
    }
    std::fs::write(&out, render_matrix(&angles.degrees, 0.0, 180.0, ImageFormat::Ppm))?;
    println!("wrote {out}");
    Ok(())
}
