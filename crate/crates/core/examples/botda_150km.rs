//! Long-range case: a 150 km fiber in four sections whose SNR drops to
//! 18 dB in the last quarter, sampled every 4 MHz. Compares the network's
//! BFS profile to curve fitting kilometre by kilometre.
//!
//! ```text
//! cargo run --release --example botda_150km -- [model.fnn]
//! ```

mod common;

use bfsnet::lcf::FitConfig;
use bfsnet::resample::ScanConfig;
use bfsnet::trace::{per_km_mean_deviation, retrieve_bfs_profile, simulate_trace, FiberProfile, Method};

fn main() -> bfsnet::Result<()> {
    let net = common::model_from_args()?;
    let profile = FiberProfile::botda_150km();
    let scan = ScanConfig::new(4, 156.0)?;
    let t = simulate_trace(&profile, &scan, true, 5)?;
    println!("{} positions, {} frequencies each", t.positions.len(), t.frequencies());

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let fnn = retrieve_bfs_profile(&t, Method::Fnn(&net), workers);
    let lcf = retrieve_bfs_profile(&t, Method::Lcf(FitConfig::default()), workers);
    let bins = per_km_mean_deviation(&fnn, &lcf, &t.positions, 1.0)?;

    for s in &profile.sections {
        let (a, b) = (s.start_km.floor() as usize, (s.end_km.ceil() as usize).min(bins.len()));
        let d: Vec<f64> = bins[a..b].iter().flatten().copied().collect();
        let below = d.iter().filter(|&&x| x < 0.2).count();
        println!(
            "{:>6.1}..{:>6.1} km at {} dB: mean |fnn - lcf| {:.3} MHz, {}/{} km bins under 0.2 MHz",
            s.start_km,
            s.end_km,
            s.snr_db,
            d.iter().sum::<f64>() / d.len() as f64,
            below,
            d.len()
        );
    }
    Ok(())
}
