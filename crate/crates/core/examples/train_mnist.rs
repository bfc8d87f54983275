//! Trains one MNIST model and saves it with its history.
//!
//! Usage: `train_mnist MNIST_DIR VARIANT LR OUT.json [WIDTH] [SEED] [MAX_EPOCHS]`

use std::path::PathBuf;
use std::time::Instant;

use regionlab::data::load_mnist_dir;
use regionlab::io::{save_json_precise, save_model};
use regionlab::train::{evaluate, train_with_progress, TrainConfig, Variant};

fn main() -> regionlab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 5 {
        eprintln!("usage: train_mnist MNIST_DIR VARIANT LR OUT.json [WIDTH] [SEED] [MAX_EPOCHS]");
        std::process::exit(1);
    }
    let dir = PathBuf::from(&args[1]);
    let variant: Variant = args[2].parse()?;
    let lr: f64 = args[3].parse().map_err(|_| regionlab::Error::Config("bad learning rate".into()))?;
    let out = PathBuf::from(&args[4]);
    let width: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1024);
    let seed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0);
    let max_epochs: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(75);

    let train_set = load_mnist_dir(&dir, true)?;
    let test_set = load_mnist_dir(&dir, false)?;
    let cfg = TrainConfig {
        variant,
        hidden_widths: vec![width; 3],
        learning_rate: lr,
        max_epochs,
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (model, history) = train_with_progress(&cfg, &train_set, |e| {
        println!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  [{:.0?}]",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            e.val_loss,
            e.val_accuracy,
            start.elapsed()
        );
    })?;
    let (_, acc) = evaluate(&model, &test_set)?;
    println!("best epoch {}  test accuracy {:.4}  [{:.0?}]", history.best_epoch, acc, start.elapsed());
    save_model(&out, &model)?;
    save_json_precise(&out.with_extension("history.json"), &history)?;
    let summary = serde_json::json!({
        "variant": variant.name(),
        "learning_rate": lr,
        "hidden_widths": cfg.hidden_widths,
        "seed": seed,
        "test_accuracy": acc,
        "train_seconds": start.elapsed().as_secs_f64(),
    });
    save_json_precise(&out.with_extension("summary.json"), &summary)?;
    Ok(())
}
