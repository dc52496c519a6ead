//! Trains the same network twice, once on noisy spectra and once on their
//! noise-free counterparts, and compares test/train error ratios on a noisy
//! 16 dB test set. The noise-free fit generalizes far worse.
//!
//! ```text
//! cargo run --release --example generalization
//! ```

use bfsnet::dataset::{self, GridSpec};
use bfsnet::fnn::{self, NetworkLayout, TrainConfig};

fn main() -> bfsnet::Result<()> {
    let spec = GridSpec::reduced();
    let test = dataset::generate_test_set(&GridSpec::reduced_test(), spec.base_seed)?;
    for (label, spec) in [("noisy", spec.clone()), ("ideal", spec.ideal())] {
        let train = dataset::generate_training_set(&spec)?;
        let net = fnn::init_network(&NetworkLayout::small(), 7);
        let cfg = TrainConfig {
            restore_best: false,
            ..TrainConfig::default()
        };
        let (_, log) = fnn::train_lm(net, &train, Some(&test), &cfg)?;
        for r in log.records.iter().step_by(5) {
            println!("{label} {:>3}: train {:.3e}  test {:.3e}", r.iteration, r.train_mse, r.test_mse);
        }
        let r = log.last().expect("at least one iteration");
        println!(
            "{label} final (iteration {}): test/train {:.1}",
            r.iteration,
            r.test_mse / r.train_mse
        );
    }
    Ok(())
}
