//! Turn coarse scans into network input: the minimum scan range per step,
//! interpolation to 1 MHz and the 157-point window around the peak.
//!
//! ```text
//! cargo run --example resampling
//! ```

use bfsnet::lcf::{fit_bfs, FitConfig};
use bfsnet::resample::{linear_interpolate_to_1mhz, min_scan_range, prepare_input, ScanConfig};
use bfsnet::spectra::{add_noise, synth_spectrum, LorentzianParams, NoiseSpec};

fn main() -> bfsnet::Result<()> {
    println!("step  min range  points");
    for step in 1..=10 {
        let range = min_scan_range(step)?;
        println!("{step:>4} {range:>10} {:>7}", range as u32 / step + 1);
    }

    let truth = LorentzianParams::new(1.0, 10_901.3, 35.0)?;
    for step in [1, 4, 10] {
        let scan = ScanConfig::new(step, 260.0)?;
        let raw = add_noise(&synth_spectrum(&truth, &scan.grid(10_800.0)?), &NoiseSpec::new(26.0, 1)?);
        let fine = linear_interpolate_to_1mhz(&raw)?;
        let p = prepare_input(&raw)?;
        println!(
            "step {step:>2}: {} samples -> {} at 1 MHz -> window [{}, {}] MHz, LCF vB {:.2} MHz",
            raw.len(),
            fine.len(),
            p.window_start_mhz,
            p.spectrum.grid().end_mhz(),
            fit_bfs(&p.spectrum, &FitConfig::default())?
        );
    }
    Ok(())
}
