//! Accuracy and speed comparisons between the network and curve fitting:
//! RMSE curves over SNR, linewidth and scan step, and per-step timing.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::splitmix;
use crate::fnn::{predict_bfs_batch, Network};
use crate::lcf::{fit_bfs, FitConfig};
use crate::resample::{prepare_input, ScanConfig, WINDOW_SPAN_MHZ};
use crate::spectra::{add_noise_in_place, LorentzianParams, NoiseSpec, Spectrum};
use crate::trace::Method;
use crate::{Error, Result};

/// Root-mean-square of `predicted - truth`.
pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(Error::domain(format!(
            "rmse needs equal non-empty lists, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let ss: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / predicted.len() as f64).sqrt())
}

/// What the abscissa of an [`RmseCurve`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Snr,
    Linewidth,
    Step,
}

impl CurveKind {
    pub fn column(self) -> &'static str {
        match self {
            CurveKind::Snr => "snr_db",
            CurveKind::Linewidth => "linewidth_mhz",
            CurveKind::Step => "step_mhz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseCurve {
    pub kind: CurveKind,
    pub abscissa: Vec<f64>,
    pub rmse_fnn_mhz: Vec<f64>,
    pub rmse_lcf_mhz: Vec<f64>,
    pub ensemble_size: usize,
    /// Members dropped at each point because either estimator failed.
    pub failures: Vec<usize>,
}

impl RmseCurve {
    pub fn ratios(&self) -> Vec<f64> {
        self.rmse_fnn_mhz
            .iter()
            .zip(&self.rmse_lcf_mhz)
            .map(|(f, l)| f / l)
            .collect()
    }

    /// Columns: abscissa (named by kind), `rmse_fnn_mhz`, `rmse_lcf_mhz`,
    /// `ratio`, `ensemble_size`, `failures`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            self.kind.column(),
            "rmse_fnn_mhz",
            "rmse_lcf_mhz",
            "ratio",
            "ensemble_size",
            "failures",
        ])?;
        for (i, x) in self.abscissa.iter().enumerate() {
            w.write_record([
                x.to_string(),
                format!("{:.6}", self.rmse_fnn_mhz[i]),
                format!("{:.6}", self.rmse_lcf_mhz[i]),
                format!("{:.6}", self.rmse_fnn_mhz[i] / self.rmse_lcf_mhz[i]),
                self.ensemble_size.to_string(),
                self.failures[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the random spectra behind each curve point are drawn.
///
/// Each member draws its linewidth uniformly from `linewidth_mhz` (unless
/// the curve fixes it) and its BFS uniformly over the scan range minus a
/// `margin_fraction` of the 156 MHz window at both ends. Seeds derive from
/// `(seed, point, member)`, so every point gets fresh noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub size: usize,
    pub seed: u64,
    pub linewidth_mhz: (f64, f64),
    pub margin_fraction: f64,
    pub gain: f64,
    pub workers: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            size: 2000,
            seed: 2022,
            linewidth_mhz: (10.0, 60.0),
            margin_fraction: 0.1,
            gain: 1.0,
            workers: 1,
        }
    }
}

/// One generated member: noisy spectrum on the scan grid plus true BFS.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub spectrum: Spectrum,
    pub bfs_mhz: f64,
}

/// Draw member `member` of curve point `point`.
pub fn draw_member(
    spec: &EnsembleSpec,
    point: usize,
    member: usize,
    scan: &ScanConfig,
    snr_db: f64,
    linewidth_mhz: Option<f64>,
) -> Result<Member> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed ^ splitmix(splitmix(point as u64) ^ member as u64),
    );
    let (lo, hi) = spec.linewidth_mhz;
    let lw = match linewidth_mhz {
        Some(lw) => lw,
        None if hi > lo => rng.random_range(lo..hi),
        None => lo,
    };
    let margin = spec.margin_fraction * WINDOW_SPAN_MHZ;
    let bfs = rng.random_range(margin..scan.range_mhz - margin);
    let grid = scan.grid(0.0)?;
    let params = LorentzianParams::new(spec.gain, bfs, lw)?;
    let mut gains: Vec<f64> = grid.frequencies().map(|v| params.eval(v)).collect();
    add_noise_in_place(&mut gains, &NoiseSpec::new(snr_db, rng.random())?);
    Ok(Member {
        spectrum: Spectrum::new(grid, gains)?,
        bfs_mhz: bfs,
    })
}

fn ensemble_rmse(
    net: &Network,
    fit: &FitConfig,
    spec: &EnsembleSpec,
    point: usize,
    scan: &ScanConfig,
    snr_db: f64,
    linewidth_mhz: Option<f64>,
) -> Result<(f64, f64, usize)> {
    let results = crate::par::map_indices(spec.size, spec.workers, |m| {
        let member = draw_member(spec, point, m, scan, snr_db, linewidth_mhz)?;
        let f = Method::Fnn(net).retrieve(&member.spectrum);
        let l = Method::Lcf(*fit).retrieve(&member.spectrum);
        Ok::<_, Error>((member.bfs_mhz, f.ok(), l.ok()))
    });
    let (mut truth, mut fnn, mut lcf) = (vec![], vec![], vec![]);
    let mut failures = 0;
    for r in results {
        match r? {
            (t, Some(f), Some(l)) => {
                truth.push(t);
                fnn.push(f);
                lcf.push(l);
            }
            _ => failures += 1,
        }
    }
    Ok((rmse(&fnn, &truth)?, rmse(&lcf, &truth)?, failures))
}

fn curve(
    kind: CurveKind,
    abscissa: Vec<f64>,
    spec: &EnsembleSpec,
    mut point: impl FnMut(usize, f64) -> Result<(f64, f64, usize)>,
) -> Result<RmseCurve> {
    if spec.size == 0 {
        return Err(Error::Config("ensemble size must be > 0".into()));
    }
    let mut c = RmseCurve {
        kind,
        abscissa: vec![],
        rmse_fnn_mhz: vec![],
        rmse_lcf_mhz: vec![],
        ensemble_size: spec.size,
        failures: vec![],
    };
    for (i, x) in abscissa.into_iter().enumerate() {
        let (f, l, fail) = point(i, x)?;
        log::info!("{} = {x}: fnn {f:.4} MHz, lcf {l:.4} MHz", kind.column());
        c.abscissa.push(x);
        c.rmse_fnn_mhz.push(f);
        c.rmse_lcf_mhz.push(l);
        c.failures.push(fail);
    }
    Ok(c)
}

/// 16..=46 dB at 1 dB.
pub fn default_snrs() -> Vec<f64> {
    (16..=46).map(f64::from).collect()
}

/// 10..=60 MHz at 1 MHz.
pub fn default_linewidths() -> Vec<f64> {
    (10..=60).map(f64::from).collect()
}

/// RMSE of both estimators per SNR on the network's native scan.
pub fn rmse_vs_snr(
    net: &Network,
    fit: &FitConfig,
    snrs_db: &[f64],
    spec: &EnsembleSpec,
) -> Result<RmseCurve> {
    let scan = ScanConfig::minimal(1)?;
    curve(CurveKind::Snr, snrs_db.to_vec(), spec, |i, snr| {
        ensemble_rmse(net, fit, spec, i, &scan, snr, None)
    })
}

/// RMSE per fixed linewidth at `snr_db`.
pub fn rmse_vs_linewidth(
    net: &Network,
    fit: &FitConfig,
    linewidths_mhz: &[f64],
    snr_db: f64,
    spec: &EnsembleSpec,
) -> Result<RmseCurve> {
    let scan = ScanConfig::minimal(1)?;
    curve(CurveKind::Linewidth, linewidths_mhz.to_vec(), spec, |i, lw| {
        ensemble_rmse(net, fit, spec, i, &scan, snr_db, Some(lw))
    })
}

/// RMSE per scan step, each at its minimum scan range and resampled before
/// either estimator sees it.
pub fn rmse_vs_step(
    net: &Network,
    fit: &FitConfig,
    steps_mhz: &[u32],
    snr_db: f64,
    spec: &EnsembleSpec,
) -> Result<RmseCurve> {
    let abscissa = steps_mhz.iter().map(|s| f64::from(*s)).collect();
    curve(CurveKind::Step, abscissa, spec, |i, step| {
        let scan = ScanConfig::minimal(step as u32)?;
        ensemble_rmse(net, fit, spec, i, &scan, snr_db, None)
    })
}

/// Host description attached to timing reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub step_mhz: Vec<u32>,
    /// Spectra actually timed per step (may exceed the request).
    pub n_spectra: Vec<usize>,
    pub seconds_lcf_1t: Vec<f64>,
    pub seconds_lcf_mt: Vec<f64>,
    pub seconds_fnn_1t: Vec<f64>,
    pub worker_count: usize,
    pub corpus_sha256: Vec<String>,
    pub machine: MachineInfo,
    pub notes: Vec<String>,
}

impl TimingReport {
    /// LCF single-thread over FNN single-thread, per step.
    pub fn ratios_1t(&self) -> Vec<f64> {
        self.seconds_lcf_1t
            .iter()
            .zip(&self.seconds_fnn_1t)
            .map(|(l, f)| l / f)
            .collect()
    }

    /// LCF on `worker_count` threads over FNN single-thread.
    pub fn ratios_mt(&self) -> Vec<f64> {
        self.seconds_lcf_mt
            .iter()
            .zip(&self.seconds_fnn_1t)
            .map(|(l, f)| l / f)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "step_mhz",
            "n_spectra",
            "seconds_lcf_1t",
            "seconds_lcf_mt",
            "seconds_fnn_1t",
            "ratio_1t",
            "ratio_mt",
            "worker_count",
            "corpus_sha256",
        ])?;
        let (r1, rm) = (self.ratios_1t(), self.ratios_mt());
        for i in 0..self.step_mhz.len() {
            w.write_record([
                self.step_mhz[i].to_string(),
                self.n_spectra[i].to_string(),
                format!("{:.6}", self.seconds_lcf_1t[i]),
                format!("{:.6}", self.seconds_lcf_mt[i]),
                format!("{:.6}", self.seconds_fnn_1t[i]),
                format!("{:.3}", r1[i]),
                format!("{:.3}", rm[i]),
                self.worker_count.to_string(),
                self.corpus_sha256[i].clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn corpus_hash(corpus: &[Spectrum]) -> String {
    let mut h = Sha256::new();
    for s in corpus {
        for g in s.gains() {
            h.update(g.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Shortest section that is timed as-is; anything faster gets a bigger
/// corpus.
const MIN_TIMED: Duration = Duration::from_millis(20);
/// Each section is timed this many times and the median kept.
const REPEATS: usize = 5;

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn time_step(
    net: &Network,
    fit: &FitConfig,
    corpus: &[Spectrum],
    workers: usize,
) -> Result<(Duration, Duration, Duration)> {
    let (lcf, t_lcf) = timed(|| corpus.iter().map(|s| fit_bfs(s, fit).ok()).collect::<Vec<_>>());
    let (lcf_mt, t_lcf_mt) = timed(|| crate::par::map_ordered(corpus, workers, |s| fit_bfs(s, fit).ok()));
    // the whole corpus goes through the network at once, as a trace would
    let (fnn, t_fnn) = timed(|| {
        let windows: Vec<Spectrum> = corpus
            .iter()
            .filter_map(|s| prepare_input(s).ok().map(|p| p.spectrum))
            .collect();
        predict_bfs_batch(net, &windows)
            .into_iter()
            .map(|r| r.ok())
            .collect::<Vec<_>>()
    });
    std::hint::black_box((&lcf, &lcf_mt, &fnn));
    if lcf != lcf_mt {
        return Err(Error::domain("threaded fits disagree with single-thread fits"));
    }
    Ok((t_lcf, t_lcf_mt, t_fnn))
}

/// Wall-clock comparison per scan step on one shared corpus of 16 dB
/// spectra. The fitter runs on the raw measured samples; the network time
/// includes resampling and windowing. Methods run one after another, never
/// overlapped, and each time is the median of five repeats.
pub fn timing_ratios(
    net: &Network,
    fit: &FitConfig,
    n_spectra: usize,
    steps_mhz: &[u32],
    workers: usize,
    spec: &EnsembleSpec,
) -> Result<TimingReport> {
    if n_spectra == 0 || workers == 0 {
        return Err(Error::Config("timing needs n_spectra > 0 and workers > 0".into()));
    }
    let mut r = TimingReport {
        step_mhz: vec![],
        n_spectra: vec![],
        seconds_lcf_1t: vec![],
        seconds_lcf_mt: vec![],
        seconds_fnn_1t: vec![],
        worker_count: workers,
        corpus_sha256: vec![],
        machine: MachineInfo::current(),
        notes: vec![],
    };
    // warm-up: touch every code path once
    let warm = draw_member(spec, usize::MAX, 0, &ScanConfig::minimal(1)?, 16.0, None)?;
    time_step(net, fit, std::slice::from_ref(&warm.spectrum), workers)?;

    for (i, &step) in steps_mhz.iter().enumerate() {
        let scan = ScanConfig::minimal(step)?;
        let mut n = n_spectra;
        loop {
            let corpus = crate::par::map_indices(n, workers, |m| {
                draw_member(spec, i, m, &scan, 16.0, None).map(|m| m.spectrum)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let hash = corpus_hash(&corpus);
            let mut runs = (0..REPEATS)
                .map(|_| time_step(net, fit, &corpus, workers))
                .collect::<Result<Vec<_>>>()?;
            let mut median = |pick: fn(&(Duration, Duration, Duration)) -> Duration| {
                runs.sort_by_key(pick);
                pick(&runs[REPEATS / 2])
            };
            let (t_lcf, t_mt, t_fnn) = (median(|r| r.0), median(|r| r.1), median(|r| r.2));
            if corpus_hash(&corpus) != hash {
                return Err(Error::domain("timing corpus changed during the run"));
            }
            if t_fnn.min(t_mt) < MIN_TIMED {
                let note = format!(
                    "step {step} MHz: {n} spectra timed under {MIN_TIMED:?}, corpus doubled"
                );
                log::info!("{note}");
                r.notes.push(note);
                n *= 2;
                continue;
            }
            log::info!(
                "step {step} MHz: lcf {:.3}s, lcf x{workers} {:.3}s, fnn {:.3}s",
                t_lcf.as_secs_f64(),
                t_mt.as_secs_f64(),
                t_fnn.as_secs_f64()
            );
            r.step_mhz.push(step);
            r.n_spectra.push(n);
            r.seconds_lcf_1t.push(t_lcf.as_secs_f64());
            r.seconds_lcf_mt.push(t_mt.as_secs_f64());
            r.seconds_fnn_1t.push(t_fnn.as_secs_f64());
            r.corpus_sha256.push(hash);
            break;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnn::{init_network, NetworkLayout};

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn default_abscissae() {
        assert_eq!(default_snrs().len(), 31);
        assert_eq!(default_linewidths().len(), 51);
    }

    #[test]
    fn members_are_seeded_and_inside_margin() {
        let spec = EnsembleSpec::default();
        let scan = ScanConfig::minimal(7).unwrap();
        for m in 0..200 {
            let a = draw_member(&spec, 3, m, &scan, 16.0, None).unwrap();
            assert_eq!(a, draw_member(&spec, 3, m, &scan, 16.0, None).unwrap());
            assert!(a.bfs_mhz >= 15.6 && a.bfs_mhz <= scan.range_mhz - 15.6);
            assert_eq!(a.spectrum.grid().step_mhz(), 7.0);
        }
        let a = draw_member(&spec, 0, 0, &scan, 16.0, None).unwrap();
        let b = draw_member(&spec, 1, 0, &scan, 16.0, None).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn curves_are_reproducible_across_workers() {
        let net = init_network(&NetworkLayout::new(&[157, 4, 1]).unwrap(), 3);
        let fit = FitConfig::default();
        let mut spec = EnsembleSpec {
            size: 40,
            ..EnsembleSpec::default()
        };
        let one = rmse_vs_step(&net, &fit, &[1, 4, 10], 16.0, &spec).unwrap();
        spec.workers = 3;
        let three = rmse_vs_step(&net, &fit, &[1, 4, 10], 16.0, &spec).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.abscissa, vec![1.0, 4.0, 10.0]);
        assert!(one.rmse_lcf_mhz.iter().all(|r| r.is_finite() && *r > 0.0));
    }

    #[test]
    fn timing_report_shape() {
        let net = init_network(&NetworkLayout::new(&[157, 4, 1]).unwrap(), 3);
        let spec = EnsembleSpec::default();
        let r = timing_ratios(&net, &FitConfig::default(), 50, &[1, 10], 2, &spec).unwrap();
        assert_eq!(r.step_mhz, vec![1, 10]);
        assert!(r.n_spectra.iter().all(|n| *n >= 50));
        assert!(r.seconds_fnn_1t.iter().all(|t| *t > 0.0));
        assert_eq!(r.ratios_1t().len(), 2);
        let dir = tempfile::tempdir().unwrap();
        r.write_csv(&dir.path().join("t.csv")).unwrap();
    }
}
