//! Synthesize a gain spectrum, add noise at a given SNR, measure the SNR
//! back and write both versions as CSV.
//!
//! ```text
//! cargo run --example spectra -- [out_dir]
//! ```

use std::path::PathBuf;

use bfsnet::spectra::{
    add_noise, estimate_snr, lorentzian_gain, normalize_spectrum, synth_spectrum, FrequencyGrid,
    LorentzianParams, NoiseSpec,
};

fn main() -> bfsnet::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out)?;

    let grid = FrequencyGrid::new(0.0, 1.0, 400)?;
    let params = LorentzianParams::new(1.0, 78.0, 30.0)?;
    println!("g(78) = {}", lorentzian_gain(&params, 78.0)?);
    println!("g(93) = {} (half maximum)", lorentzian_gain(&params, 93.0)?);

    let clean = synth_spectrum(&params, &grid);
    for snr in [16.0, 23.5, 36.0] {
        let noisy = add_noise(&clean, &NoiseSpec::new(snr, snr as u64)?);
        // noise is measured far from the peak
        let measured = estimate_snr(&noisy, 250..400)?;
        println!("requested {snr:>4} dB, measured {measured:5.2} dB");
    }

    let noisy = add_noise(&clean, &NoiseSpec::new(16.0, 7)?);
    let norm = normalize_spectrum(&noisy)?;
    clean.write_csv(&out.join("clean.csv"))?;
    norm.write_csv(&out.join("noisy_16db_normalized.csv"))?;
    println!("wrote {}/clean.csv and noisy_16db_normalized.csv", out.display());
    Ok(())
}
