//! Trains the three variants on the two-arm spiral and reports test accuracy.
//!
//! Usage: `train_spiral [SEED]`

use std::time::Instant;

use regionlab::data::{make_spiral, SpiralSpec};
use regionlab::train::{evaluate, train, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = SpiralSpec { seed, ..SpiralSpec::default() };
    let train_set = make_spiral(&spec);
    let test_set = make_spiral(&SpiralSpec { seed: seed + 1000, ..spec });
    for variant in Variant::ALL {
        let start = Instant::now();
        let (model, history) = train(&TrainConfig::spiral(variant, seed), &train_set)?;
        let (_, acc) = evaluate(&model, &test_set)?;
        println!(
            "{:<8} epochs {:>4} (best {:>4})  test accuracy {:.4}  [{:.1?}]",
            variant.name(),
            history.epochs.len(),
            history.best_epoch,
            acc,
            start.elapsed()
        );
    }
    Ok(())
}
