//! Largest inscribed ball of regions of a random 2D network, with the exported
//! system written as JSON.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionlab::fixtures::{random_model, random_point};
use regionlab::polytope::insphere;
use regionlab::{extract_region, io};

fn main() -> regionlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = random_model(&mut rng, &[2, 16, 16, 3], true);
    for i in 0..5 {
        let x = random_point(&mut rng, 2);
        let system = extract_region(&model, x.view())?;
        let ball = insphere(&system)?;
        println!(
            "region {i}: radius {:.5} at ({:.4}, {:.4}), min constraint slack {:.2e}",
            ball.inradius, ball.center[0], ball.center[1], system.min_slack(ndarray::ArrayView1::from(&ball.center))
        );
        if i == 0 {
            let json = io::to_json_precise(&system.to_file())?;
            println!("  exported system is {} bytes of JSON", json.len());
        }
    }
    Ok(())
}
