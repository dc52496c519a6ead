//! Lorentzian curve fitting on a noisy spectrum, with and without a
//! baseline term.
//!
//! ```text
//! cargo run --example curve_fit
//! ```

use bfsnet::lcf::{fit_lorentzian, initial_guess, FitConfig};
use bfsnet::spectra::{add_noise, synth_spectrum, FrequencyGrid, LorentzianParams, NoiseSpec, Spectrum};

fn main() -> bfsnet::Result<()> {
    let grid = FrequencyGrid::new(0.0, 1.0, 157)?;
    let truth = LorentzianParams::new(1.0, 63.4, 27.0)?;
    let noisy = add_noise(&synth_spectrum(&truth, &grid), &NoiseSpec::new(20.0, 3)?);

    let guess = initial_guess(&noisy)?;
    println!(
        "guess:  G {:.3}  vB {:.2} MHz  dv {:.2} MHz",
        guess.gain, guess.bfs_mhz, guess.linewidth_mhz
    );
    let r = fit_lorentzian(&noisy, &FitConfig::default())?;
    println!(
        "fit:    G {:.3}  vB {:.2} MHz  dv {:.2} MHz  R2 {:.3e}  {} iterations",
        r.params.gain, r.params.bfs_mhz, r.params.linewidth_mhz, r.r_squared, r.iterations
    );

    // a pedestal under the peak biases the three-parameter fit
    let lifted = Spectrum::new(grid, noisy.gains().iter().map(|g| g + 0.15).collect())?;
    let plain = fit_lorentzian(&lifted, &FitConfig::default())?;
    let with = fit_lorentzian(
        &lifted,
        &FitConfig {
            with_offset: true,
            ..FitConfig::default()
        },
    )?;
    println!(
        "pedestal 0.15: three-parameter dv {:.2} MHz, with offset dv {:.2} MHz (offset {:.3})",
        plain.params.linewidth_mhz, with.params.linewidth_mhz, with.offset
    );
    Ok(())
}
