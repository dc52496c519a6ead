//! RMSE of the network and of curve fitting over Monte-Carlo ensembles,
//! swept against SNR, linewidth and frequency step. Writes one CSV per
//! sweep into the current directory.
//!
//! ```text
//! cargo run --release --example rmse_curves -- [model.fnn] [ensemble size]
//! ```

mod common;

use bfsnet::bench::{self, EnsembleSpec};
use bfsnet::lcf::FitConfig;

fn main() -> bfsnet::Result<()> {
    let net = common::model_from_args()?;
    let size = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let spec = EnsembleSpec {
        size,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..EnsembleSpec::default()
    };
    let fit = FitConfig::default();
    let steps: Vec<u32> = (1..=10).collect();
    let curves = [
        ("rmse_snr.csv", bench::rmse_vs_snr(&net, &fit, &bench::default_snrs(), &spec)?),
        ("rmse_linewidth.csv", bench::rmse_vs_linewidth(&net, &fit, &bench::default_linewidths(), 23.5, &spec)?),
        ("rmse_step.csv", bench::rmse_vs_step(&net, &fit, &steps, 16.0, &spec)?),
    ];
    for (file, c) in &curves {
        println!("{:?} ({} members per point)", c.kind, c.ensemble_size);
        for (i, x) in c.abscissa.iter().enumerate() {
            println!(
                "  {x:>5}  fnn {:.3}  lcf {:.3} MHz  ratio {:.2}",
                c.rmse_fnn_mhz[i],
                c.rmse_lcf_mhz[i],
                c.ratios()[i]
            );
        }
        c.write_csv(std::path::Path::new(file))?;
    }
    Ok(())
}
