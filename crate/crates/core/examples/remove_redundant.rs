//! Drops redundant constraints of a region and reports which ones stay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionlab::extract_region;
use regionlab::fixtures::{random_model, random_point};
use regionlab::polytope::remove_redundant;

fn main() -> regionlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(&mut rng, &[4, 12, 12, 3], false);
    let x = random_point(&mut rng, 4);
    let system = extract_region(&model, x.view())?;
    let (reduced, verdicts) = remove_redundant(&system)?;
    println!("{} constraints, {} retained", system.len(), reduced.len());
    for v in verdicts.iter().filter(|v| !v.redundant) {
        let (layer, node) = system.provenance()[v.index];
        println!("  keep #{:<3} layer {layer} node {node:<3} min {:.4}", v.index, v.minimum);
    }
    Ok(())
}
