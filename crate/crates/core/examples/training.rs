//! Trains a network with Levenberg-Marquardt, prints the per-iteration
//! errors and saves the model plus its training log.
//!
//! ```text
//! cargo run --release --example training -- [out.fnn] [realizations] [small|large]
//! ```
//!
//! With no realization count the reduced 17 x 42 grid is used with the
//! 157-20-8-1 layout and finishes in seconds. A count switches to the full
//! 51 x 126 grid with that many noise draws per SNR (20 is the whole
//! 385,560-column corpus). The shipped `models/reference.fnn` is
//!
//! ```text
//! cargo run --release --example training -- models/reference.fnn 20 large
//! ```
//!
//! which takes a few hours on one core.

use std::path::PathBuf;

use bfsnet::dataset::{self, GridSpec};
use bfsnet::fnn::{self, NetworkLayout, TrainConfig};

fn main() -> bfsnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "model.fnn".into()));
    let spec = match args.next().and_then(|r| r.parse().ok()) {
        Some(r) => GridSpec::full().with_realizations(r),
        None => GridSpec::reduced(),
    };
    let layout = match args.next().as_deref() {
        Some("large") => NetworkLayout::large(),
        _ => NetworkLayout::small(),
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let train = dataset::generate_training_set_par(&spec, workers)?;
    let test = dataset::generate_test_set_par(&GridSpec::reduced_test(), spec.base_seed, workers)?;
    println!(
        "{} training columns, {} test columns, {:?} layout with {} parameters",
        train.len(),
        test.len(),
        layout.sizes(),
        layout.parameter_count()
    );

    let cfg = TrainConfig {
        early_stop_patience: 0,
        ..TrainConfig::default()
    };
    let net = fnn::init_network(&layout, 7);
    let (net, log) = fnn::train_lm(net, &train, Some(&test), &cfg)?;
    for r in &log.records {
        println!(
            "{:>3}  train {:.4e}  test {:.4e}  {:>7.1}s",
            r.iteration, r.train_mse, r.test_mse, r.wall_seconds
        );
    }
    println!("stopped: {:?}, returned iteration {:?}", log.stop_reason, log.returned_iteration);
    fnn::save_model(&net, &out)?;
    log.write_csv(&out.with_extension("log.csv"))?;
    println!("saved {} (provenance {})", out.display(), net.provenance());
    Ok(())
}
