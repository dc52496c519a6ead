//! Lorentzian gain model, synthetic spectra, noise injection and
//! normalization.

use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform frequency axis of a scanned spectrum, in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start_mhz: f64,
    step_mhz: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(start_mhz: f64, step_mhz: f64, count: usize) -> Result<Self> {
        if !start_mhz.is_finite() || !step_mhz.is_finite() || step_mhz <= 0.0 {
            return Err(Error::domain(format!(
                "grid needs finite start and positive step, got start={start_mhz} step={step_mhz}"
            )));
        }
        if count < 2 {
            return Err(Error::domain(format!("grid needs at least 2 samples, got {count}")));
        }
        Ok(Self {
            start_mhz,
            step_mhz,
            count,
        })
    }

    /// Grid covering `[start, start + range]` at `step`; `range` must be a
    /// whole number of steps.
    pub fn from_range(start_mhz: f64, step_mhz: f64, range_mhz: f64) -> Result<Self> {
        let steps = range_mhz / step_mhz;
        let rounded = steps.round();
        if !(rounded >= 1.0) || (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::domain(format!(
                "range {range_mhz} MHz is not a whole number of {step_mhz} MHz steps"
            )));
        }
        Self::new(start_mhz, step_mhz, rounded as usize + 1)
    }

    pub fn start_mhz(&self) -> f64 {
        self.start_mhz
    }

    pub fn step_mhz(&self) -> f64 {
        self.step_mhz
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn span(&self) -> f64 {
        self.step_mhz * (self.count - 1) as f64
    }

    pub fn end_mhz(&self) -> f64 {
        self.frequency(self.count - 1)
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.start_mhz + self.step_mhz * i as f64
    }

    pub fn frequencies(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.frequency(i))
    }
}

/// Peak gain, BFS and full width at half maximum of one local spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub gain: f64,
    pub bfs_mhz: f64,
    pub linewidth_mhz: f64,
}

impl LorentzianParams {
    pub fn new(gain: f64, bfs_mhz: f64, linewidth_mhz: f64) -> Result<Self> {
        let p = Self {
            gain,
            bfs_mhz,
            linewidth_mhz,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::domain(format!("gain must be > 0, got {}", self.gain)));
        }
        if !(self.linewidth_mhz > 0.0 && self.linewidth_mhz.is_finite()) {
            return Err(Error::domain(format!(
                "linewidth must be > 0, got {}",
                self.linewidth_mhz
            )));
        }
        if !self.bfs_mhz.is_finite() {
            return Err(Error::domain("bfs must be finite"));
        }
        Ok(())
    }

    /// Model value without argument checks.
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let x = 2.0 * (v - self.bfs_mhz) / self.linewidth_mhz;
        self.gain / (1.0 + x * x)
    }
}

/// `G_B / (1 + [2 (v - v_B) / Δv_B]^2)`.
pub fn lorentzian_gain(params: &LorentzianParams, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::domain(format!("frequency must be finite, got {v}")));
    }
    Ok(params.eval(v))
}

/// Gain samples on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    gains: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != grid.count() {
            return Err(Error::Shape {
                expected: grid.count(),
                actual: gains.len(),
            });
        }
        if let Some(i) = gains.iter().position(|g| !g.is_finite()) {
            return Err(Error::domain(format!("non-finite gain at index {i}")));
        }
        Ok(Self { grid, gains })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn into_gains(self) -> Vec<f64> {
        self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Largest sample value.
    pub fn max_gain(&self) -> f64 {
        self.gains.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same grid, every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Spectrum {
        Spectrum {
            grid: self.grid,
            gains: self.gains.iter().map(|g| g * c).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["frequency_mhz", "gain"])?;
        for (v, g) in self.grid.frequencies().zip(&self.gains) {
            w.write_record([format!("{v:.16e}"), format!("{g:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a two-column `frequency_mhz,gain` CSV; the frequency column must
    /// be uniformly spaced.
    pub fn read_csv(path: &Path) -> Result<Spectrum> {
        let mut r = csv::Reader::from_path(path)?;
        let mut freqs = Vec::new();
        let mut gains = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::domain(format!("row {} has fewer than 2 columns", line + 2)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::domain(format!("row {}: {e}: {s:?}", line + 2)))
            };
            freqs.push(parse(&rec[0])?);
            gains.push(parse(&rec[1])?);
        }
        if freqs.len() < 2 {
            return Err(Error::domain("spectrum csv needs at least 2 rows"));
        }
        let n = freqs.len();
        let step = (freqs[n - 1] - freqs[0]) / (n - 1) as f64;
        let grid = FrequencyGrid::new(freqs[0], step, n)?;
        for (i, f) in freqs.iter().enumerate() {
            if (f - grid.frequency(i)).abs() > 1e-6 * step.max(1.0) {
                return Err(Error::GridContract(format!(
                    "frequency column is not uniform at row {}",
                    i + 2
                )));
            }
        }
        Spectrum::new(grid, gains)
    }
}

/// Target SNR and RNG seed for additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::domain(format!("snr must be finite, got {snr_db}")));
        }
        Ok(Self { snr_db, seed })
    }
}

pub fn synth_spectrum(params: &LorentzianParams, grid: &FrequencyGrid) -> Spectrum {
    Spectrum {
        grid: *grid,
        gains: grid.frequencies().map(|v| params.eval(v)).collect(),
    }
}

/// Noise standard deviation for a given peak and amplitude SNR in dB.
pub fn noise_sigma(peak: f64, snr_db: f64) -> f64 {
    peak.abs() / 10f64.powf(snr_db / 20.0)
}

/// Adds zero-mean white Gaussian noise with `σ = max(gains) / 10^(snr/20)`.
/// Samples are not clipped.
pub fn add_noise(s: &Spectrum, noise: &NoiseSpec) -> Spectrum {
    let mut gains = s.gains.clone();
    add_noise_in_place(&mut gains, noise);
    Spectrum {
        grid: s.grid,
        gains,
    }
}

pub(crate) fn add_noise_in_place(gains: &mut [f64], noise: &NoiseSpec) {
    let peak = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma = noise_sigma(peak, noise.snr_db);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for g in gains.iter_mut() {
        *g += normal.sample(&mut rng);
    }
}

/// 5-point centred moving average; the window shrinks at the edges.
pub fn smooth5(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

pub(crate) fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in y.iter().enumerate() {
        if *v > y[best] {
            best = i;
        }
    }
    best
}

/// Half-maximum crossings around `peak` on `y`, measured above `baseline`.
/// Returns the (fractional) left and right crossing positions in samples;
/// `None` on a side where the curve never drops below half.
pub(crate) fn half_max_crossings(
    y: &[f64],
    peak: usize,
    baseline: f64,
) -> (Option<f64>, Option<f64>) {
    let half = baseline + 0.5 * (y[peak] - baseline);
    let mut left = None;
    for i in (0..peak).rev() {
        if y[i] <= half {
            let t = (half - y[i]) / (y[i + 1] - y[i]);
            left = Some(i as f64 + t);
            break;
        }
    }
    let mut right = None;
    for i in peak + 1..y.len() {
        if y[i] <= half {
            let t = (y[i - 1] - half) / (y[i - 1] - y[i]);
            right = Some((i - 1) as f64 + t);
            break;
        }
    }
    (left, right)
}

/// `20 log10(peak / σ_region)` where the peak is taken on the 5-point
/// smoothed spectrum and σ is the sample standard deviation over `region`.
pub fn estimate_snr(s: &Spectrum, region: Range<usize>) -> Result<f64> {
    if region.end > s.len() || region.len() < 8 {
        return Err(Error::domain(format!(
            "noise region {region:?} must hold at least 8 samples inside 0..{}",
            s.len()
        )));
    }
    let smooth = smooth5(&s.gains);
    let p = argmax(&smooth);
    let (l, r) = half_max_crossings(&smooth, p, 0.0);
    let half_width = match (l, r) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => p as f64 - l,
        (None, Some(r)) => r - p as f64,
        (None, None) => s.len() as f64,
    };
    // peak ± one linewidth (twice the half width)
    let guard = 2.0 * half_width;
    let lo = p as f64 - guard;
    let hi = p as f64 + guard;
    if (region.start as f64) <= hi && ((region.end - 1) as f64) >= lo {
        let msg = format!("region {region:?} within one linewidth of peak index {p}");
        log::warn!("{msg}");
        return Err(Error::RegionOverlap(msg));
    }
    let sample = &s.gains[region];
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::Degenerate("noise region has zero variance".into()));
    }
    Ok(20.0 * (smooth[p] / var.sqrt()).log10())
}

/// Min-max map of the gains onto `[0, 1]`.
pub fn normalize_spectrum(s: &Spectrum) -> Result<Spectrum> {
    let mut gains = s.gains.clone();
    normalize_in_place(&mut gains)?;
    Ok(Spectrum {
        grid: s.grid,
        gains,
    })
}

pub(crate) fn normalize_in_place(y: &mut [f64]) -> Result<()> {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !(hi > lo) {
        return Err(Error::Degenerate("constant spectrum cannot be normalized".into()));
    }
    let range = hi - lo;
    for v in y.iter_mut() {
        *v = (*v - lo) / range;
    }
    Ok(())
}

/// BFS change to temperature change through the coefficient `c_t` (MHz/°C).
pub fn delta_bfs_to_delta_temp(delta_bfs_mhz: f64, c_t: f64) -> Result<f64> {
    if !(c_t > 0.0 && c_t.is_finite()) {
        return Err(Error::domain(format!(
            "temperature coefficient must be > 0, got {c_t}"
        )));
    }
    Ok(delta_bfs_mhz / c_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid157() -> FrequencyGrid {
        FrequencyGrid::new(0.0, 1.0, 157).unwrap()
    }

    #[test]
    fn grid_span_and_count() {
        let g = grid157();
        assert_eq!(g.span(), 156.0);
        assert_eq!(FrequencyGrid::from_range(0.0, 1.0, 156.0).unwrap().count(), 157);
        assert_eq!(FrequencyGrid::from_range(0.0, 4.0, 156.0).unwrap().count(), 40);
        assert!(FrequencyGrid::from_range(0.0, 5.0, 156.0).is_err());
        assert!(FrequencyGrid::new(0.0, 0.0, 10).is_err());
        assert!(FrequencyGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn gain_model_values() {
        let p = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
        assert_eq!(lorentzian_gain(&p, 78.0).unwrap(), 1.0);
        assert_eq!(lorentzian_gain(&p, 93.0).unwrap(), 0.5);
        let q = LorentzianParams::new(2.0, 50.0, 20.0).unwrap();
        assert!((lorentzian_gain(&q, 70.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(lorentzian_gain(&p, f64::NAN).is_err());
        assert!(lorentzian_gain(&p, f64::INFINITY).is_err());
        assert!(LorentzianParams::new(0.0, 1.0, 1.0).is_err());
        assert!(LorentzianParams::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn synth_peak_and_length() {
        let p = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
        let s = synth_spectrum(&p, &grid157());
        assert_eq!(argmax(s.gains()), 78);
        assert_eq!(s.gains()[78], 1.0);
        let g4 = FrequencyGrid::new(0.0, 4.0, 40).unwrap();
        assert_eq!(synth_spectrum(&p, &g4).len(), 40);
    }

    #[test]
    fn synth_symmetric_about_off_grid_peak() {
        let p = LorentzianParams::new(1.0, 15.6, 10.0).unwrap();
        let s = synth_spectrum(&p, &grid157());
        // index 16 sits 0.4 MHz above the peak; its mirror is 15.2 MHz.
        let direct = 1.0 / (1.0 + (2.0 * (15.2 - 15.6) / 10.0f64).powi(2));
        assert!((s.gains()[16] - direct).abs() < 1e-15);
        assert!((s.gains()[16] - p.eval(15.2)).abs() < 1e-15);
    }

    #[test]
    fn noise_vanishes_at_huge_snr() {
        let p = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
        let s = synth_spectrum(&p, &grid157());
        let n = add_noise(&s, &NoiseSpec::new(300.0, 7).unwrap());
        for (a, b) in s.gains().iter().zip(n.gains()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_sigma_matches_closed_form() {
        let grid = FrequencyGrid::new(0.0, 1.0, 100_000).unwrap();
        let flat = Spectrum::new(grid, vec![1.0; 100_000]).unwrap();
        let noisy = add_noise(&flat, &NoiseSpec::new(16.0, 42).unwrap());
        let d: Vec<f64> = noisy.gains().iter().map(|g| g - 1.0).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        let expect = 1.0 / 10f64.powf(0.8);
        assert!((sd / expect - 1.0).abs() < 0.02, "sd {sd} vs {expect}");
    }

    #[test]
    fn noise_is_deterministic() {
        let p = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
        let s = synth_spectrum(&p, &grid157());
        let spec = NoiseSpec::new(16.0, 99).unwrap();
        assert_eq!(add_noise(&s, &spec), add_noise(&s, &spec));
        assert_ne!(add_noise(&s, &spec), add_noise(&s, &NoiseSpec::new(16.0, 100).unwrap()));
    }

    #[test]
    fn snr_estimate_definition() {
        // Lorentzian head, then a constant tail with ±0.1 alternation.
        let grid = FrequencyGrid::new(0.0, 1.0, 200).unwrap();
        let p = LorentzianParams::new(1.0, 20.0, 30.0).unwrap();
        let mut g: Vec<f64> = grid.frequencies().map(|v| p.eval(v)).collect();
        for (k, v) in g[100..].iter_mut().enumerate() {
            *v = if k % 2 == 0 { 0.1 } else { -0.1 };
        }
        let s = Spectrum::new(grid, g).unwrap();
        let snr = estimate_snr(&s, 100..200).unwrap();
        assert!((snr - 20.0).abs() < 0.2, "{snr}");
    }

    #[test]
    fn snr_estimate_round_trip() {
        let grid = FrequencyGrid::new(0.0, 1.0, 400).unwrap();
        let p = LorentzianParams::new(1.0, 60.0, 30.0).unwrap();
        let s = synth_spectrum(&p, &grid);
        let noisy = add_noise(&s, &NoiseSpec::new(23.5, 5).unwrap());
        let snr = estimate_snr(&noisy, 250..400).unwrap();
        assert!((snr - 23.5).abs() < 1.5, "{snr}");
    }

    #[test]
    fn snr_estimate_errors() {
        let grid = FrequencyGrid::new(0.0, 1.0, 200).unwrap();
        let p = LorentzianParams::new(1.0, 20.0, 30.0).unwrap();
        let mut g: Vec<f64> = grid.frequencies().map(|v| p.eval(v)).collect();
        for v in g[100..].iter_mut() {
            *v = 0.0;
        }
        let s = Spectrum::new(grid, g).unwrap();
        assert!(matches!(estimate_snr(&s, 100..200), Err(Error::Degenerate(_))));
        assert!(matches!(estimate_snr(&s, 10..30), Err(Error::RegionOverlap(_))));
        assert!(estimate_snr(&s, 100..104).is_err());
    }

    #[test]
    fn normalize_examples() {
        let g3 = FrequencyGrid::new(0.0, 1.0, 3).unwrap();
        let a = normalize_spectrum(&Spectrum::new(g3, vec![0.0, 0.5, 1.0]).unwrap()).unwrap();
        assert_eq!(a.gains(), &[0.0, 0.5, 1.0]);
        let b = normalize_spectrum(&Spectrum::new(g3, vec![2.0, 4.0, 6.0]).unwrap()).unwrap();
        assert_eq!(b.gains(), &[0.0, 0.5, 1.0]);
        assert!(matches!(
            normalize_spectrum(&Spectrum::new(g3, vec![1.0; 3]).unwrap()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalize_removes_gain() {
        let g = grid157();
        let lo = synth_spectrum(&LorentzianParams::new(0.3, 60.0, 25.0).unwrap(), &g);
        let hi = synth_spectrum(&LorentzianParams::new(3.0, 60.0, 25.0).unwrap(), &g);
        let a = normalize_spectrum(&lo).unwrap();
        let b = normalize_spectrum(&hi).unwrap();
        for (x, y) in a.gains().iter().zip(b.gains()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn temperature_conversion() {
        assert!((delta_bfs_to_delta_temp(1.3, 1.3).unwrap() - 1.0).abs() < 1e-15);
        assert!((delta_bfs_to_delta_temp(20.28, 1.3).unwrap() - 15.6).abs() < 1e-12);
        assert!((delta_bfs_to_delta_temp(18.7, 1.0).unwrap() - 18.7).abs() < 1e-15);
        assert!(delta_bfs_to_delta_temp(1.0, 0.0).is_err());
        assert!(delta_bfs_to_delta_temp(1.0, -1.3).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let p = LorentzianParams::new(1.7, 61.3, 27.0).unwrap();
        let s = add_noise(
            &synth_spectrum(&p, &FrequencyGrid::new(10.0, 4.0, 40).unwrap()),
            &NoiseSpec::new(20.0, 1).unwrap(),
        );
        s.write_csv(&path).unwrap();
        let back = Spectrum::read_csv(&path).unwrap();
        assert_eq!(back.gains(), s.gains());
        assert_eq!(back.grid().count(), 40);
        assert!((back.grid().step_mhz() - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn peak_lands_on_its_grid_index(idx in 0usize..157, lw in 1.0f64..80.0, gain in 0.01f64..10.0) {
            let p = LorentzianParams::new(gain, idx as f64, lw).unwrap();
            let s = synth_spectrum(&p, &grid157());
            prop_assert_eq!(argmax(s.gains()), idx);
            prop_assert_eq!(s.gains()[idx], gain);
        }

        #[test]
        fn half_maximum_at_half_linewidth(v in -100.0f64..100.0, lw in 0.5f64..80.0) {
            let p = LorentzianParams::new(1.0, v, lw).unwrap();
            prop_assert!((p.eval(v + lw / 2.0) - 0.5).abs() < 1e-12);
            prop_assert!((p.eval(v - lw / 2.0) - 0.5).abs() < 1e-12);
        }

        #[test]
        fn normalize_is_idempotent(gains in prop::collection::vec(-5.0f64..5.0, 3..64)) {
            let grid = FrequencyGrid::new(0.0, 1.0, gains.len()).unwrap();
            let s = Spectrum::new(grid, gains).unwrap();
            if let Ok(once) = normalize_spectrum(&s) {
                let twice = normalize_spectrum(&once).unwrap();
                prop_assert_eq!(once.gains(), twice.gains());
            }
        }
    }
}
