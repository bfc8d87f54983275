//! Extracts the region around a point of a random 2-8-8-2 network, checks
//! membership of the generating point and a few neighbors, and prints the
//! affine map the network reduces to there.
//!
//! Usage: `extract_region [SEED]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionlab::fixtures::{random_model, random_point};
use regionlab::extract_region;

fn main() -> regionlab::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(&mut rng, &[2, 8, 8, 2], false);
    let x = random_point(&mut rng, 2);
    let system = extract_region(&model, x.view())?;
    println!(
        "point {:?}: {} node constraints, {} with the box, pattern {}",
        x.to_vec(),
        system.len(),
        system.total_inequalities(),
        system.pattern().to_hex()
    );
    println!("min slack at the generating point {:.3e}", system.min_slack(x.view()));

    for _ in 0..5 {
        let y = &x + &(random_point(&mut rng, 2) * 0.01);
        let same = model.forward(y.view())?.pattern == *system.pattern();
        println!("  {:?}: inside {} / same pattern {}", y.to_vec(), system.contains(y.view(), 0.0), same);
    }

    let affine = model.region_affine_map(x.view())?;
    println!("J = {:?}\nc = {:?}", affine.jacobian.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>(), affine.offset.to_vec());
    Ok(())
}
