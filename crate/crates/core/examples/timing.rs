//! Wall-clock cost of curve fitting against the network at each frequency
//! step, on a shared corpus of 16 dB spectra.
//!
//! ```text
//! cargo run --release --example timing -- [model.fnn] [spectra per step]
//! ```

mod common;

use bfsnet::bench::{timing_ratios, EnsembleSpec};
use bfsnet::lcf::FitConfig;

fn main() -> bfsnet::Result<()> {
    let net = common::model_from_args()?;
    let n = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let steps: Vec<u32> = (1..=10).collect();
    let r = timing_ratios(&net, &FitConfig::default(), n, &steps, 16, &EnsembleSpec::default())?;
    println!("{} logical CPUs, fitter pool of {}", r.machine.logical_cpus, r.worker_count);
    let (one, many) = (r.ratios_1t(), r.ratios_mt());
    for (i, step) in r.step_mhz.iter().enumerate() {
        println!(
            "step {step:>2} MHz  {:>6} spectra  lcf {:.3}s / {:.3}s  fnn {:.3}s  speedup {:.0}x / {:.0}x",
            r.n_spectra[i], r.seconds_lcf_1t[i], r.seconds_lcf_mt[i], r.seconds_fnn_1t[i], one[i], many[i]
        );
    }
    for note in &r.notes {
        println!("note: {note}");
    }
    Ok(())
}
