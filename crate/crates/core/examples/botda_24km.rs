//! Simulates a 24 km fiber measured before and after heating a 200 m
//! stretch near its far end, retrieves both BFS profiles with the network
//! and with curve fitting, and reports the temperature change and the
//! measurement uncertainty of each.
//!
//! ```text
//! cargo run --release --example botda_24km -- [model.fnn]
//! ```

mod common;

use bfsnet::lcf::FitConfig;
use bfsnet::resample::ScanConfig;
use bfsnet::trace::{analyze, simulate_trace, AnalysisSetup, FiberProfile};

fn main() -> bfsnet::Result<()> {
    let net = common::model_from_args()?;
    let profile = FiberProfile::botda_24km();
    let scan = ScanConfig::new(1, 200.0)?;
    let before = simulate_trace(&profile, &scan, false, 1)?;
    let after = simulate_trace(&profile, &scan, true, 2)?;
    println!("{} positions, {} frequencies each", before.positions.len(), before.frequencies());

    let setup = AnalysisSetup::from_profile(&profile, &after.positions, 1.0)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = analyze(&before, &after, &net, &FitConfig::default(), &setup, workers)?;
    let truth = profile.heated_segments[0].delta_temp_c;
    for m in [&r.fnn, &r.lcf] {
        println!(
            "{}: heated segment dT {:.2} C (set {truth} C), uncertainty {:.3} C",
            m.method, m.heated_delta_temp_c[0], m.uncertainty_c
        );
    }
    let hi = setup.heated[0].clone();
    let mid = (hi.start + hi.end) / 2;
    for i in [hi.start.saturating_sub(20), hi.start, mid, hi.end - 1, hi.end + 20] {
        println!(
            "  {:.3} km  diff fnn {:>6.2}  lcf {:>6.2} MHz",
            r.positions_km[i],
            r.fnn.freq_difference_mhz[i].unwrap_or(f64::NAN),
            r.lcf.freq_difference_mhz[i].unwrap_or(f64::NAN)
        );
    }
    if let Some(dir) = std::env::args().nth(2) {
        r.write_csv(std::path::Path::new(&dir))?;
        println!("wrote profiles.csv, deviation.csv, summary.csv to {dir}");
    }
    Ok(())
}
