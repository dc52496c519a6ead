//! Shared by the examples that need a trained network.

use std::path::Path;

use bfsnet::dataset::{self, GridSpec};
use bfsnet::fnn::{self, Network, NetworkLayout, TrainConfig};

/// Loads the model named by the first command-line argument, else the
/// shipped reference model, else trains a small one on the full grid with
/// one noise draw per SNR (a few minutes).
pub fn model_from_args() -> bfsnet::Result<Network> {
    if let Some(path) = std::env::args().nth(1) {
        println!("using model {path}");
        return fnn::load_model(Path::new(&path));
    }
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("models/reference.fnn");
    if shipped.exists() {
        println!("using model {}", shipped.display());
        return fnn::load_model(&shipped);
    }
    println!("no model found, training 157-20-8-1 on 19,278 columns");
    let spec = GridSpec::full().with_realizations(1);
    let train = dataset::generate_training_set(&spec)?;
    let test = dataset::generate_test_set(&GridSpec::reduced_test(), spec.base_seed)?;
    let net = fnn::init_network(&NetworkLayout::small(), 7);
    let (net, _) = fnn::train_lm(net, &train, Some(&test), &TrainConfig::default())?;
    Ok(net)
}
