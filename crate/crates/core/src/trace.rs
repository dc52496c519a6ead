//! Simulated distributed acquisitions: position-resolved gain spectra
//! along a fiber with heated sections, BFS profile retrieval by either
//! estimator, and the derived report quantities.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fnn::{predict_bfs, Network};
use crate::io::{len_u32, LeReader, LeWriter};
use crate::lcf::{fit_bfs, FitConfig};
use crate::resample::{prepare_input, ScanConfig};
use crate::spectra::{add_noise_in_place, delta_bfs_to_delta_temp, LorentzianParams, NoiseSpec, Spectrum};
use crate::{Error, Result};

const MAGIC: &str = "BGSTRACE";
const VERSION: u32 = 1;

/// Stretch of fiber with uniform spectral properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSection {
    pub start_km: f64,
    pub end_km: f64,
    /// Unheated BFS as an offset inside the scan window.
    pub base_bfs_mhz: f64,
    pub linewidth_mhz: f64,
    pub gain: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatedSegment {
    pub start_km: f64,
    pub end_km: f64,
    pub delta_temp_c: f64,
    pub c_t_mhz_per_c: f64,
}

impl HeatedSegment {
    pub fn bfs_shift_mhz(&self) -> f64 {
        self.delta_temp_c * self.c_t_mhz_per_c
    }

    fn contains(&self, z: f64) -> bool {
        z >= self.start_km && z <= self.end_km
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberProfile {
    pub length_km: f64,
    pub spatial_step_m: f64,
    pub sections: Vec<FiberSection>,
    /// Slow sinusoidal BFS wander along the fiber (amplitude, MHz).
    #[serde(default)]
    pub bfs_ripple_mhz: f64,
    #[serde(default = "default_ripple_period")]
    pub bfs_ripple_period_km: f64,
    #[serde(default)]
    pub heated_segments: Vec<HeatedSegment>,
}

fn default_ripple_period() -> f64 {
    5.0
}

impl FiberProfile {
    /// 23.95 km fiber at 23.5 dB with 30 MHz linewidth, heated by 15.7 °C
    /// (1.3 MHz/°C) between 23.6 and 23.8 km; 5 m sampling.
    pub fn botda_24km() -> Self {
        Self {
            length_km: 23.95,
            spatial_step_m: 5.0,
            sections: vec![FiberSection {
                start_km: 0.0,
                end_km: 23.95,
                base_bfs_mhz: 92.0,
                linewidth_mhz: 30.0,
                gain: 1.0,
                snr_db: 23.5,
            }],
            bfs_ripple_mhz: 1.5,
            bfs_ripple_period_km: 4.3,
            heated_segments: vec![HeatedSegment {
                start_km: 23.6,
                end_km: 23.8,
                delta_temp_c: 15.7,
                c_t_mhz_per_c: 1.3,
            }],
        }
    }

    /// 150.62 km fiber in four equal sections at 27/27/27/18 dB, heated by
    /// 18.2 °C (1.0 MHz/°C) over 200 m near 75 km; 9 m sampling.
    pub fn botda_150km() -> Self {
        let length = 150.62;
        let q = length / 4.0;
        let sections = [27.0, 27.0, 27.0, 18.0]
            .iter()
            .enumerate()
            .map(|(i, snr)| FiberSection {
                start_km: q * i as f64,
                end_km: if i == 3 { length } else { q * (i + 1) as f64 },
                base_bfs_mhz: 70.0,
                linewidth_mhz: 30.0,
                gain: 1.0 - 0.2 * i as f64,
                snr_db: *snr,
            })
            .collect();
        Self {
            length_km: length,
            spatial_step_m: 9.0,
            sections,
            bfs_ripple_mhz: 1.5,
            bfs_ripple_period_km: 7.1,
            heated_segments: vec![HeatedSegment {
                start_km: 75.0,
                end_km: 75.2,
                delta_temp_c: 18.2,
                c_t_mhz_per_c: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km > 0.0) || !(self.spatial_step_m > 0.0) {
            return Err(Error::Config("fiber length and spatial step must be positive".into()));
        }
        if self.sections.is_empty() {
            return Err(Error::Config("fiber needs at least one section".into()));
        }
        let mut at = 0.0;
        for s in &self.sections {
            if (s.start_km - at).abs() > 1e-9 || !(s.end_km > s.start_km) {
                return Err(Error::Config(format!(
                    "sections must tile the fiber contiguously from 0 km (gap at {at} km)"
                )));
            }
            LorentzianParams::new(s.gain, s.base_bfs_mhz, s.linewidth_mhz)?;
            NoiseSpec::new(s.snr_db, 0)?;
            at = s.end_km;
        }
        if (at - self.length_km).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sections end at {at} km, fiber is {} km",
                self.length_km
            )));
        }
        for h in &self.heated_segments {
            if h.start_km < 0.0 || h.end_km > self.length_km || h.start_km > h.end_km {
                return Err(Error::Config(format!(
                    "heated segment {}..{} km lies outside the {} km fiber",
                    h.start_km, h.end_km, self.length_km
                )));
            }
            if !(h.c_t_mhz_per_c > 0.0) {
                return Err(Error::Config("temperature coefficient must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Sample positions in km, `0, step, 2 step, ...` up to the fiber end.
    pub fn positions(&self) -> Vec<f64> {
        let step_km = self.spatial_step_m / 1000.0;
        let n = (self.length_km / step_km + 1e-9).floor() as usize + 1;
        (0..n).map(|i| i as f64 * step_km).collect()
    }

    fn section(&self, z: f64) -> &FiberSection {
        self.sections
            .iter()
            .find(|s| z >= s.start_km && z < s.end_km)
            .unwrap_or_else(|| self.sections.last().unwrap())
    }

    /// Unheated BFS at `z`, ripple included.
    pub fn base_bfs_mhz(&self, z: f64) -> f64 {
        let ripple = if self.bfs_ripple_mhz != 0.0 {
            self.bfs_ripple_mhz * (std::f64::consts::TAU * z / self.bfs_ripple_period_km).sin()
        } else {
            0.0
        };
        self.section(z).base_bfs_mhz + ripple
    }

    /// Total heating shift at `z`.
    pub fn heating_shift_mhz(&self, z: f64) -> f64 {
        self.heated_segments
            .iter()
            .filter(|h| h.contains(z))
            .map(HeatedSegment::bfs_shift_mhz)
            .sum()
    }

    /// Index ranges of `positions` covered by each heated segment.
    pub fn heated_ranges(&self, positions: &[f64]) -> Vec<Range<usize>> {
        self.heated_segments
            .iter()
            .map(|h| index_range(positions, h.start_km, h.end_km))
            .collect()
    }
}

/// Indices of the positions inside `[start_km, end_km]` (positions sorted).
pub fn index_range(positions: &[f64], start_km: f64, end_km: f64) -> Range<usize> {
    let lo = positions.partition_point(|z| *z < start_km - 1e-12);
    let hi = positions.partition_point(|z| *z <= end_km + 1e-12);
    lo..hi.max(lo)
}

/// Profile and scan settings as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub fiber: FiberProfile,
    pub scan: ScanConfig,
}

impl ProfileFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let pf: ProfileFile =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        pf.fiber.validate()?;
        ScanConfig::new(pf.scan.step_mhz, pf.scan.range_mhz)?;
        Ok(pf)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }
}

/// Gain map over positions × scan frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeasurement {
    pub positions: Vec<f64>,
    pub scan: ScanConfig,
    pub scan_start_mhz: f64,
    /// Row-major, one row of `scan` samples per position.
    pub gains: Vec<f64>,
    pub seed: u64,
}

impl TraceMeasurement {
    pub fn frequencies(&self) -> usize {
        self.gains.len() / self.positions.len().max(1)
    }

    pub fn spectrum_at(&self, i: usize) -> Result<Spectrum> {
        let grid = self.scan.grid(self.scan_start_mhz)?;
        let n = grid.count();
        Spectrum::new(grid, self.gains[i * n..(i + 1) * n].to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
        w.bytes(MAGIC.as_bytes())?;
        w.u32(VERSION)?;
        w.u32(len_u32(self.positions.len())?)?;
        w.u32(len_u32(self.frequencies())?)?;
        w.u32(self.scan.step_mhz)?;
        w.f64(self.scan.range_mhz)?;
        w.f64(self.scan_start_mhz)?;
        w.u64(self.seed)?;
        w.f64_slice(&self.positions)?;
        w.f64_slice(&self.gains)?;
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = LeReader::new(BufReader::new(File::open(path)?), path);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
            });
        }
        let n_pos = r.u32()? as usize;
        let n_freq = r.u32()? as usize;
        let step = r.u32()?;
        let range = r.f64()?;
        let scan_start_mhz = r.f64()?;
        let seed = r.u64()?;
        let scan = ScanConfig::new(step, range).map_err(|e| r.dimension(e.to_string()))?;
        let expected = scan.grid(scan_start_mhz)?.count();
        if n_freq != expected {
            return Err(r.dimension(format!("{n_freq} frequencies, scan implies {expected}")));
        }
        let positions = r.f64_vec(n_pos)?;
        let gains = r.f64_vec(n_pos * n_freq)?;
        r.expect_eof()?;
        Ok(Self {
            positions,
            scan,
            scan_start_mhz,
            gains,
            seed,
        })
    }
}

fn position_seed(seed: u64, i: usize) -> u64 {
    crate::dataset::splitmix(seed ^ crate::dataset::splitmix(i as u64))
}

/// One noisy Lorentzian per position; heated segments shift the BFS by
/// `c_t ΔT` when `heated` is set.
pub fn simulate_trace(
    p: &FiberProfile,
    scan: &ScanConfig,
    heated: bool,
    seed: u64,
) -> Result<TraceMeasurement> {
    p.validate()?;
    let grid = scan.grid(0.0)?;
    let positions = p.positions();
    let n = grid.count();
    let mut gains = vec![0.0; positions.len() * n];
    for (i, (&z, row)) in positions.iter().zip(gains.chunks_exact_mut(n)).enumerate() {
        let section = p.section(z);
        let mut bfs = p.base_bfs_mhz(z);
        if heated {
            bfs += p.heating_shift_mhz(z);
        }
        let params = LorentzianParams::new(section.gain, bfs, section.linewidth_mhz)?;
        for (k, g) in row.iter_mut().enumerate() {
            *g = params.eval(grid.frequency(k));
        }
        add_noise_in_place(
            row,
            &NoiseSpec {
                snr_db: section.snr_db,
                seed: position_seed(seed, i),
            },
        );
    }
    Ok(TraceMeasurement {
        positions,
        scan: *scan,
        scan_start_mhz: 0.0,
        gains,
        seed,
    })
}

/// How BFS is read out of one local spectrum.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Fnn(&'a Network),
    Lcf(FitConfig),
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fnn(_) => "fnn",
            Method::Lcf(_) => "lcf",
        }
    }

    /// Resample and window, then estimate. Result is in scan coordinates.
    pub fn retrieve(&self, s: &Spectrum) -> Result<f64> {
        let prepared = prepare_input(s)?;
        match self {
            Method::Fnn(net) => predict_bfs(net, &prepared.spectrum),
            Method::Lcf(cfg) => fit_bfs(&prepared.spectrum, cfg),
        }
    }
}

/// Per-position BFS; `None` marks positions where retrieval failed.
pub type BfsProfile = Vec<Option<f64>>;

pub fn retrieve_bfs_profile(t: &TraceMeasurement, method: Method<'_>, workers: usize) -> BfsProfile {
    crate::par::map_indices(t.positions.len(), workers, |i| {
        match t.spectrum_at(i).and_then(|s| method.retrieve(&s)) {
            Ok(v) => Some(v),
            Err(e) => {
                log::debug!("position {i}: {e}");
                None
            }
        }
    })
}

/// Elementwise `after - before`.
pub fn frequency_difference(before: &[Option<f64>], after: &[Option<f64>]) -> Result<BfsProfile> {
    if before.len() != after.len() {
        return Err(Error::Shape {
            expected: before.len(),
            actual: after.len(),
        });
    }
    Ok(before
        .iter()
        .zip(after)
        .map(|(b, a)| Some(a.as_ref()? - b.as_ref()?))
        .collect())
}

/// Standard deviation of the frequency difference over `region`, in °C.
/// The region must hold at least 30 positions and avoid `excluded`.
pub fn measurement_uncertainty(
    diff: &[Option<f64>],
    region: Range<usize>,
    excluded: &[Range<usize>],
    c_t: f64,
) -> Result<f64> {
    if region.len() < 30 || region.end > diff.len() {
        return Err(Error::domain(format!(
            "uncertainty region {region:?} needs >= 30 positions inside 0..{}",
            diff.len()
        )));
    }
    if let Some(x) = excluded
        .iter()
        .find(|x| !x.is_empty() && x.start < region.end && region.start < x.end)
    {
        return Err(Error::domain(format!(
            "uncertainty region {region:?} overlaps heated positions {x:?}"
        )));
    }
    let vals: Vec<f64> = diff[region].iter().flatten().copied().collect();
    if vals.len() < 2 {
        return Err(Error::domain("uncertainty region has no usable positions"));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    delta_bfs_to_delta_temp(var.sqrt(), c_t)
}

/// Mean of `|a - b|` in consecutive `bin_km` bins along the fiber; the
/// trailing partial bin is kept and bins with no usable position are `None`.
pub fn per_km_mean_deviation(
    a: &[Option<f64>],
    b: &[Option<f64>],
    positions: &[f64],
    bin_km: f64,
) -> Result<Vec<Option<f64>>> {
    if a.len() != b.len() || a.len() != positions.len() {
        return Err(Error::Shape {
            expected: positions.len(),
            actual: a.len().min(b.len()),
        });
    }
    if !(bin_km > 0.0) {
        return Err(Error::domain("bin width must be positive"));
    }
    if positions.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("positions must be sorted"));
    }
    let Some(&last) = positions.last() else {
        return Ok(vec![]);
    };
    let bins = ((last / bin_km).ceil() as usize).max(1);
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for ((x, y), z) in a.iter().zip(b).zip(positions) {
        if let (Some(x), Some(y)) = (x, y) {
            let k = ((z / bin_km).floor() as usize).min(bins - 1);
            sum[k] += (x - y).abs();
            count[k] += 1;
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

/// Mean frequency difference over `range`, converted to °C.
pub fn mean_delta_temp(diff: &[Option<f64>], range: Range<usize>, c_t: f64) -> Result<f64> {
    let vals: Vec<f64> = diff[range].iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(Error::domain("no usable positions in the heated range"));
    }
    delta_bfs_to_delta_temp(vals.iter().sum::<f64>() / vals.len() as f64, c_t)
}

/// One estimator's view of a before/after acquisition pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: &'static str,
    pub bfs_before_mhz: BfsProfile,
    pub bfs_profile_mhz: BfsProfile,
    pub freq_difference_mhz: BfsProfile,
    pub uncertainty_c: f64,
    /// Mean ΔT over each heated segment.
    pub heated_delta_temp_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub positions_km: Vec<f64>,
    pub fnn: MethodReport,
    pub lcf: MethodReport,
    pub bin_km: f64,
    /// Per-bin mean |FNN - LCF| of the after-heating BFS.
    pub per_km_mean_deviation_mhz: Vec<Option<f64>>,
}

/// Where to measure uncertainty and which segments carry heating.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSetup {
    pub uncertainty_region: Range<usize>,
    pub heated: Vec<Range<usize>>,
    pub c_t: f64,
    pub bin_km: f64,
}

impl AnalysisSetup {
    /// Heated ranges from the profile; the uncertainty region is the
    /// `region_km` stretch ending 100 m before the first heated segment
    /// (or the fiber start when nothing is heated).
    pub fn from_profile(p: &FiberProfile, positions: &[f64], region_km: f64) -> Result<Self> {
        let heated = p.heated_ranges(positions);
        let (end_km, c_t) = match p.heated_segments.first() {
            Some(h) => (h.start_km - 0.1, h.c_t_mhz_per_c),
            None => (region_km, 1.0),
        };
        let start_km = (end_km - region_km).max(0.0);
        Ok(Self {
            uncertainty_region: index_range(positions, start_km, end_km),
            heated,
            c_t,
            bin_km: 1.0,
        })
    }
}

fn method_report(
    before: &TraceMeasurement,
    after: &TraceMeasurement,
    method: Method<'_>,
    setup: &AnalysisSetup,
    workers: usize,
) -> Result<MethodReport> {
    let b = retrieve_bfs_profile(before, method, workers);
    let a = retrieve_bfs_profile(after, method, workers);
    let diff = frequency_difference(&b, &a)?;
    let uncertainty_c =
        measurement_uncertainty(&diff, setup.uncertainty_region.clone(), &setup.heated, setup.c_t)?;
    let heated_delta_temp_c = setup
        .heated
        .iter()
        .map(|r| mean_delta_temp(&diff, r.clone(), setup.c_t))
        .collect::<Result<_>>()?;
    Ok(MethodReport {
        method: method.name(),
        bfs_before_mhz: b,
        bfs_profile_mhz: a,
        freq_difference_mhz: diff,
        uncertainty_c,
        heated_delta_temp_c,
    })
}

/// Retrieve both traces with both estimators and derive every report
/// quantity.
pub fn analyze(
    before: &TraceMeasurement,
    after: &TraceMeasurement,
    net: &Network,
    fit: &FitConfig,
    setup: &AnalysisSetup,
    workers: usize,
) -> Result<AnalysisReport> {
    if before.positions != after.positions || before.scan != after.scan {
        return Err(Error::domain("before/after traces cover different positions or scans"));
    }
    let fnn = method_report(before, after, Method::Fnn(net), setup, workers)?;
    let lcf = method_report(before, after, Method::Lcf(*fit), setup, workers)?;
    let per_km = per_km_mean_deviation(
        &fnn.bfs_profile_mhz,
        &lcf.bfs_profile_mhz,
        &after.positions,
        setup.bin_km,
    )?;
    Ok(AnalysisReport {
        positions_km: after.positions.clone(),
        fnn,
        lcf,
        bin_km: setup.bin_km,
        per_km_mean_deviation_mhz: per_km,
    })
}

fn opt(v: &Option<f64>) -> String {
    v.map(|x| format!("{x:.9}")).unwrap_or_default()
}

impl AnalysisReport {
    /// Writes `profiles.csv`, `deviation.csv` and `summary.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("profiles.csv"))?;
        w.write_record([
            "position_km",
            "bfs_fnn_mhz",
            "bfs_lcf_mhz",
            "diff_fnn_mhz",
            "diff_lcf_mhz",
        ])?;
        for (i, z) in self.positions_km.iter().enumerate() {
            w.write_record([
                format!("{z:.6}"),
                opt(&self.fnn.bfs_profile_mhz[i]),
                opt(&self.lcf.bfs_profile_mhz[i]),
                opt(&self.fnn.freq_difference_mhz[i]),
                opt(&self.lcf.freq_difference_mhz[i]),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("deviation.csv"))?;
        w.write_record(["bin_km", "deviation_mhz"])?;
        for (k, d) in self.per_km_mean_deviation_mhz.iter().enumerate() {
            w.write_record([format!("{:.3}", k as f64 * self.bin_km), opt(d)])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["method", "uncertainty_c", "heated_delta_temp_c"])?;
        for r in [&self.fnn, &self.lcf] {
            let temps: Vec<String> = r.heated_delta_temp_c.iter().map(|t| format!("{t:.4}")).collect();
            w.write_record([r.method.to_string(), format!("{:.4}", r.uncertainty_c), temps.join(" ")])?;
        }
        w.flush()?;
        Ok(())
    }
}
