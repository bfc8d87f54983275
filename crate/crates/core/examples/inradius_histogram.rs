//! Overlaid inradius histograms of random networks with and without BN.
//!
//! Usage: `inradius_histogram [OUT.svg]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regionlab::extract_region;
use regionlab::fixtures::{random_model, random_point};
use regionlab::polytope::insphere;
use regionlab::render::{histogram, HistogramSeries};

fn main() -> regionlab::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "inradius.svg".into());
    let mut series = Vec::new();
    for bn in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = random_model(&mut rng, &[8, 32, 32, 4], bn);
        let mut values = Vec::new();
        for _ in 0..200 {
            let x = random_point(&mut rng, 8);
            values.push(insphere(&extract_region(&model, x.view())?)?.inradius);
        }
        series.push(HistogramSeries { label: if bn { "bn".into() } else { "vanilla".into() }, values });
    }
    std::fs::write(&out, histogram(&series, 30, None, true))?;
    println!("wrote {out}");
    Ok(())
}
