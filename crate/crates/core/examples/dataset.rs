//! Build the reduced training grid and its 16 dB test set, persist both and
//! look at a few columns.
//!
//! ```text
//! cargo run --release --example dataset -- [out_dir]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use bfsnet::dataset::{
    denormalize_target, generate_test_set, generate_training_set, load_dataset, save_dataset,
    shuffle_split, GridSpec,
};

fn main() -> bfsnet::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out)?;

    let spec = GridSpec::reduced();
    println!(
        "{} linewidths x {} offsets x {} SNRs x {} realizations = {} columns",
        spec.linewidths_mhz.len(),
        spec.bfs_fractions.len(),
        spec.snrs_db.len(),
        spec.realizations_per_snr,
        spec.column_count()
    );
    println!("full grid would hold {} columns", GridSpec::full().column_count());

    let t = Instant::now();
    let train = generate_training_set(&spec)?;
    let test = generate_test_set(&GridSpec::reduced_test(), spec.base_seed)?;
    println!("generated {} + {} columns in {:.2?}", train.len(), test.len(), t.elapsed());

    for j in [0, 1000, 4000] {
        let col = train.column(j);
        let peak = col.iter().cloned().fold(f64::MIN, f64::max);
        let bfs = denormalize_target(train.targets()[j], spec.scan_range_mhz, true)?;
        println!("column {j:>4}: {} samples, max {peak:.3}, BFS {bfs:.2} MHz", col.len());
    }

    let path = out.join("reduced_train.bgsd");
    save_dataset(&train, &path)?;
    let back = load_dataset(&path)?;
    println!("round trip identical: {}", back == train);
    println!("content hash {}", train.content_hash());

    let (fit, holdout) = shuffle_split(&train, 0.2, 1)?;
    println!("split {} / {}", fit.len(), holdout.len());
    save_dataset(&test, &out.join("reduced_test.bgsd"))?;
    Ok(())
}
