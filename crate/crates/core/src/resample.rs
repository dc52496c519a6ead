//! Adapting spectra scanned at any step between 1 and 10 MHz to the
//! network's fixed 1 MHz, 157-point input.

use serde::{Deserialize, Serialize};

use crate::spectra::{argmax, smooth5, FrequencyGrid, Spectrum};
use crate::{Error, Result};

/// Window span the network is trained on.
pub const WINDOW_SPAN_MHZ: f64 = 156.0;
/// Samples in the network input window at 1 MHz.
pub const WINDOW_POINTS: usize = 157;

const MIN_RANGE_TABLE: [u32; 10] = [156, 156, 156, 156, 160, 156, 161, 160, 162, 160];

/// Scan step and range of an acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub step_mhz: u32,
    pub range_mhz: f64,
}

impl ScanConfig {
    pub fn new(step_mhz: u32, range_mhz: f64) -> Result<Self> {
        let min = min_scan_range(step_mhz)?;
        if range_mhz < min {
            return Err(Error::InsufficientRange {
                range_mhz,
                required_mhz: min,
            });
        }
        let steps = range_mhz / step_mhz as f64;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "range {range_mhz} MHz is not a multiple of the {step_mhz} MHz step"
            )));
        }
        Ok(Self {
            step_mhz,
            range_mhz,
        })
    }

    /// Smallest valid range for the step.
    pub fn minimal(step_mhz: u32) -> Result<Self> {
        Self::new(step_mhz, min_scan_range(step_mhz)?)
    }

    pub fn grid(&self, start_mhz: f64) -> Result<FrequencyGrid> {
        FrequencyGrid::from_range(start_mhz, self.step_mhz as f64, self.range_mhz)
    }
}

/// Minimum scan range for steps 1..=10 MHz: the smallest multiple of the
/// step that covers 156 MHz.
pub fn min_scan_range(step_mhz: u32) -> Result<f64> {
    match step_mhz {
        1..=10 => Ok(f64::from(MIN_RANGE_TABLE[step_mhz as usize - 1])),
        _ => Err(Error::domain(format!("scan step must be 1..=10 MHz, got {step_mhz}"))),
    }
}

fn integer_step(grid: &FrequencyGrid) -> Result<usize> {
    let step = grid.step_mhz();
    let k = step.round();
    if (step - k).abs() > 1e-9 || !(1.0..=10.0).contains(&k) {
        return Err(Error::GridContract(format!(
            "scan step must be an integer 1..=10 MHz, got {step}"
        )));
    }
    Ok(k as usize)
}

/// Linear interpolation onto a 1 MHz grid over the same span. Original
/// samples are copied through unchanged; nothing is extrapolated.
pub fn linear_interpolate_to_1mhz(s: &Spectrum) -> Result<Spectrum> {
    let grid = s.grid();
    let k = integer_step(grid)?;
    if grid.span() < WINDOW_SPAN_MHZ - 1e-9 {
        return Err(Error::InsufficientRange {
            range_mhz: grid.span(),
            required_mhz: WINDOW_SPAN_MHZ,
        });
    }
    if k == 1 {
        return Ok(s.clone());
    }
    let y = s.gains();
    let n_out = (y.len() - 1) * k + 1;
    let mut out = Vec::with_capacity(n_out);
    for seg in y.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        out.push(a);
        for j in 1..k {
            let t = j as f64 / k as f64;
            out.push(a + (b - a) * t);
        }
    }
    out.push(y[y.len() - 1]);
    Spectrum::new(FrequencyGrid::new(grid.start_mhz(), 1.0, n_out)?, out)
}

/// Index of the power peak after 5-point smoothing.
pub fn smoothed_peak_index(s: &Spectrum) -> usize {
    argmax(&smooth5(s.gains()))
}

/// Contiguous `window_points` slice centred (left-biased for even lengths)
/// on the smoothed peak and clamped inside the spectrum. Returns the
/// window and its first index.
pub fn select_window(s: &Spectrum, window_points: usize) -> Result<(Spectrum, usize)> {
    if (s.grid().step_mhz() - 1.0).abs() > 1e-9 {
        return Err(Error::GridContract(format!(
            "window selection needs a 1 MHz grid, got {} MHz",
            s.grid().step_mhz()
        )));
    }
    let n = s.len();
    if n < window_points || window_points < 2 {
        return Err(Error::InsufficientRange {
            range_mhz: s.grid().span(),
            required_mhz: (window_points.max(2) - 1) as f64,
        });
    }
    if n == window_points {
        return Ok((s.clone(), 0));
    }
    let peak = smoothed_peak_index(s);
    let half = (window_points - 1) / 2;
    let first = peak.saturating_sub(half).min(n - window_points);
    let grid = FrequencyGrid::new(s.grid().frequency(first), 1.0, window_points)?;
    let window = Spectrum::new(grid, s.gains()[first..first + window_points].to_vec())?;
    Ok((window, first))
}

/// Network-ready spectrum plus where it sits in the original scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInput {
    /// 157 samples at 1 MHz; its grid start is the window's absolute
    /// frequency, so in-window predictions map straight back.
    pub spectrum: Spectrum,
    pub window_start_mhz: f64,
    pub window_first_index: usize,
}

/// Interpolate to 1 MHz, then cut the peak-centred 157-point window.
pub fn prepare_input(s: &Spectrum) -> Result<PreparedInput> {
    let fine = linear_interpolate_to_1mhz(s)?;
    let (spectrum, first) = select_window(&fine, WINDOW_POINTS)?;
    Ok(PreparedInput {
        window_start_mhz: spectrum.grid().start_mhz(),
        window_first_index: first,
        spectrum,
    })
}
