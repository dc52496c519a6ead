//! Synthetic training and test corpora over the
//! (linewidth × BFS position × SNR × noise realization) grid.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{len_u32, LeReader, LeWriter};
use crate::spectra::{
    add_noise_in_place, normalize_in_place, FrequencyGrid, LorentzianParams, NoiseSpec,
};
use crate::{Error, Result};

const MAGIC: &str = "BGSDSET1";
const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

/// Parameter grid a corpus is generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub scan_range_mhz: f64,
    pub step_mhz: f64,
    pub linewidths_mhz: Vec<f64>,
    /// Peak positions as fractions of the scan range.
    pub bfs_fractions: Vec<f64>,
    pub snrs_db: Vec<f64>,
    pub realizations_per_snr: usize,
    pub base_seed: u64,
    /// When false every column is the ideal spectrum; the SNR and
    /// realization axes still enumerate so the column count is unchanged.
    pub noisy: bool,
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl GridSpec {
    /// Full-size training grid: 51 linewidths (10..60 MHz), 126 peak
    /// positions between 10% and 90% of a 156 MHz window, SNR 16/26/36 dB,
    /// 20 noise realizations each; 385,560 columns of 157 samples.
    pub fn full() -> Self {
        Self {
            scan_range_mhz: 156.0,
            step_mhz: 1.0,
            linewidths_mhz: (10..=60).map(f64::from).collect(),
            bfs_fractions: linspace(0.1, 0.9, 126),
            snrs_db: vec![16.0, 26.0, 36.0],
            realizations_per_snr: 20,
            base_seed: 2020,
            noisy: true,
        }
    }

    /// Full-size 16 dB test grid (128,520 columns).
    pub fn full_test() -> Self {
        Self {
            snrs_db: vec![16.0],
            base_seed: 2021,
            ..Self::full()
        }
    }

    /// Reduced grid for quick runs: every third linewidth and peak position
    /// of the full grid (17 × 42) with 2 realizations per SNR.
    pub fn reduced() -> Self {
        let full = Self::full();
        Self {
            linewidths_mhz: full.linewidths_mhz.iter().copied().step_by(3).collect(),
            bfs_fractions: full.bfs_fractions.iter().copied().step_by(3).collect(),
            realizations_per_snr: 2,
            ..full
        }
    }

    pub fn reduced_test() -> Self {
        Self {
            snrs_db: vec![16.0],
            base_seed: 2021,
            ..Self::reduced()
        }
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.realizations_per_snr = n;
        self
    }

    /// Same grid without noise.
    pub fn ideal(mut self) -> Self {
        self.noisy = false;
        self
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::from_range(0.0, self.step_mhz, self.scan_range_mhz)
    }

    pub fn column_count(&self) -> usize {
        self.linewidths_mhz.len()
            * self.bfs_fractions.len()
            * self.snrs_db.len()
            * self.realizations_per_snr
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scan_range_mhz > 0.0) || !(self.step_mhz > 0.0) {
            return Err(Error::Config("scan range and step must be positive".into()));
        }
        self.grid()?;
        if self.linewidths_mhz.is_empty() {
            return Err(Error::Config("linewidth list is empty".into()));
        }
        if self.bfs_fractions.is_empty() {
            return Err(Error::Config("BFS fraction list is empty".into()));
        }
        if self.snrs_db.is_empty() {
            return Err(Error::Config("SNR list is empty".into()));
        }
        if self.realizations_per_snr == 0 {
            return Err(Error::Config("need at least one realization per SNR".into()));
        }
        if let Some(w) = self.linewidths_mhz.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::domain(format!("linewidth must be > 0, got {w}")));
        }
        if let Some(f) = self.bfs_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::domain(format!("BFS fraction must lie in (0, 1), got {f}")));
        }
        if let Some(s) = self.snrs_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::domain(format!("SNR must be finite, got {s}")));
        }
        Ok(())
    }
}

/// Normalized spectra (one per column) with normalized BFS targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    meta: GridSpec,
}

impl Dataset {
    /// Column-major `inputs` of `rows × targets.len()`.
    pub fn from_parts(
        rows: usize,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        meta: GridSpec,
    ) -> Result<Self> {
        if rows == 0 || inputs.len() != rows * targets.len() {
            return Err(Error::Shape {
                expected: rows * targets.len(),
                actual: inputs.len(),
            });
        }
        Ok(Self {
            rows,
            inputs,
            targets,
            meta,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.rows)
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn meta(&self) -> &GridSpec {
        &self.meta
    }

    /// Columns picked by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(idx.len() * self.rows);
        let mut targets = Vec::with_capacity(idx.len());
        for &j in idx {
            inputs.extend_from_slice(self.column(j));
            targets.push(self.targets[j]);
        }
        Dataset {
            rows: self.rows,
            inputs,
            targets,
            meta: self.meta.clone(),
        }
    }

    /// SHA-256 over the shape, inputs and targets.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for v in self.inputs.iter().chain(&self.targets) {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes up to `max_cols` columns as CSV (`target,g0,g1,...`).
    pub fn export_csv(&self, path: &Path, max_cols: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["target".to_string()];
        header.extend((0..self.rows).map(|i| format!("g{i}")));
        w.write_record(&header)?;
        for j in 0..self.len().min(max_cols) {
            let mut rec = vec![format!("{:.16e}", self.targets[j])];
            rec.extend(self.column(j).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-column seed: `base ^ hash(stream, indices)`.
fn column_seed(base: u64, stream: u64, idx: [usize; 4]) -> u64 {
    let mut h = splitmix(stream);
    for i in idx {
        h = splitmix(h ^ i as u64);
    }
    base ^ h
}

fn generate(spec: &GridSpec, stream: u64, workers: usize) -> Result<Dataset> {
    spec.validate()?;
    let grid = spec.grid()?;
    let rows = grid.count();
    let cols = spec.column_count();
    let (nf, ns, nr) = (
        spec.bfs_fractions.len(),
        spec.snrs_db.len(),
        spec.realizations_per_snr,
    );
    let decode = |j: usize| {
        let r = j % nr;
        let s = (j / nr) % ns;
        let f = (j / (nr * ns)) % nf;
        let l = j / (nr * ns * nf);
        [l, f, s, r]
    };

    let targets: Vec<f64> = (0..cols).map(|j| spec.bfs_fractions[decode(j)[1]]).collect();
    let mut inputs = vec![0.0; rows * cols];

    let fill = |first: usize, block: &mut [f64]| -> Result<()> {
        for (k, col) in block.chunks_exact_mut(rows).enumerate() {
            let idx = decode(first + k);
            let params = LorentzianParams::new(
                1.0,
                spec.bfs_fractions[idx[1]] * spec.scan_range_mhz,
                spec.linewidths_mhz[idx[0]],
            )?;
            for (i, g) in col.iter_mut().enumerate() {
                *g = params.eval(grid.frequency(i));
            }
            if spec.noisy {
                let noise = NoiseSpec {
                    snr_db: spec.snrs_db[idx[2]],
                    seed: column_seed(spec.base_seed, stream, idx),
                };
                add_noise_in_place(col, &noise);
            }
            normalize_in_place(col)?;
        }
        Ok(())
    };

    let workers = workers.max(1);
    if workers == 1 {
        fill(0, &mut inputs)?;
    } else {
        let per = cols.div_ceil(workers);
        std::thread::scope(|scope| -> Result<()> {
            let handles: Vec<_> = inputs
                .chunks_mut(per * rows)
                .enumerate()
                .map(|(w, block)| {
                    let fill = &fill;
                    scope.spawn(move || fill(w * per, block))
                })
                .collect();
            for h in handles {
                h.join().expect("generator worker panicked")?;
            }
            Ok(())
        })?;
    }

    Dataset::from_parts(rows, inputs, targets, spec.clone())
}

/// One normalized noisy column per grid tuple, in lexicographic
/// (linewidth, position, SNR, realization) order.
pub fn generate_training_set(spec: &GridSpec) -> Result<Dataset> {
    generate(spec, TRAIN_STREAM, 1)
}

pub fn generate_training_set_par(spec: &GridSpec, workers: usize) -> Result<Dataset> {
    generate(spec, TRAIN_STREAM, workers)
}

/// Like [`generate_training_set`] but on a separate seed stream; refuses a
/// base seed equal to the training corpus seed.
pub fn generate_test_set(spec: &GridSpec, training_base_seed: u64) -> Result<Dataset> {
    generate_test_set_par(spec, training_base_seed, 1)
}

pub fn generate_test_set_par(
    spec: &GridSpec,
    training_base_seed: u64,
    workers: usize,
) -> Result<Dataset> {
    if spec.base_seed == training_base_seed {
        return Err(Error::Config(format!(
            "test base seed {} collides with the training seed",
            spec.base_seed
        )));
    }
    generate(spec, TEST_STREAM, workers)
}

/// Fraction of the scan range back to MHz. Out-of-range fractions are an
/// error in strict mode and pass through with a warning otherwise.
pub fn denormalize_target(h: f64, scan_range_mhz: f64, strict: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        if strict || !h.is_finite() {
            return Err(Error::domain(format!("normalized target {h} outside [0, 1]")));
        }
        log::warn!("normalized target {h} outside [0, 1]");
    }
    Ok(h * scan_range_mhz)
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC.as_bytes())?;
    w.u32(len_u32(d.rows)?)?;
    w.u32(len_u32(d.len())?)?;
    w.u64(d.meta.base_seed)?;
    w.f64(d.meta.scan_range_mhz)?;
    w.f64(d.meta.step_mhz)?;
    w.u32(len_u32(d.meta.realizations_per_snr)?)?;
    w.u8(d.meta.noisy as u8)?;
    w.f64_list(&d.meta.linewidths_mhz)?;
    w.f64_list(&d.meta.bfs_fractions)?;
    w.f64_list(&d.meta.snrs_db)?;
    w.f64_slice(&d.inputs)?;
    w.f64_slice(&d.targets)?;
    use std::io::Write;
    w.into_inner().flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?), path);
    let mut magic = [0u8; 8];
    r.exact(&mut magic)?;
    if &magic[..7] == b"BGSDSET" && magic[7] != b'1' {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: u32::from(magic[7].wrapping_sub(b'0')),
        });
    }
    if magic != MAGIC.as_bytes() {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: MAGIC,
        });
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let base_seed = r.u64()?;
    let scan_range_mhz = r.f64()?;
    let step_mhz = r.f64()?;
    let realizations_per_snr = r.u32()? as usize;
    let noisy = r.u8()? != 0;
    let linewidths_mhz = r.f64_list()?;
    let bfs_fractions = r.f64_list()?;
    let snrs_db = r.f64_list()?;
    let meta = GridSpec {
        scan_range_mhz,
        step_mhz,
        linewidths_mhz,
        bfs_fractions,
        snrs_db,
        realizations_per_snr,
        base_seed,
        noisy,
    };
    if rows == 0 {
        return Err(r.dimension("zero rows"));
    }
    let expected_rows = meta.grid().map(|g| g.count()).unwrap_or(0);
    if rows != expected_rows {
        return Err(r.dimension(format!("{rows} rows but the grid holds {expected_rows}")));
    }
    let inputs = r.f64_vec(rows * cols)?;
    let targets = r.f64_vec(cols)?;
    r.expect_eof()?;
    Dataset::from_parts(rows, inputs, targets, meta)
}

/// Deterministic shuffle, then split into `⌈N(1 - f)⌉` and the remainder.
pub fn shuffle_split(d: &Dataset, validation_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(Error::domain(format!(
            "validation fraction must lie in [0, 1), got {validation_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (d.len() as f64 * (1.0 - validation_fraction)).ceil() as usize;
    let n_train = n_train.min(d.len());
    Ok((d.select(&idx[..n_train]), d.select(&idx[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcf::{fit_lorentzian, FitConfig};
    use crate::spectra::synth_spectrum;
    use std::collections::HashSet;

    fn tiny(seed: u64) -> GridSpec {
        GridSpec {
            linewidths_mhz: vec![12.0, 30.0, 55.0],
            bfs_fractions: vec![0.1, 0.5, 0.9],
            snrs_db: vec![16.0, 36.0],
            realizations_per_snr: 2,
            base_seed: seed,
            ..GridSpec::full()
        }
    }

    #[test]
    fn full_grid_cardinality() {
        let spec = GridSpec::full();
        assert_eq!(spec.linewidths_mhz.len(), 51);
        assert_eq!(spec.bfs_fractions.len(), 126);
        assert_eq!(spec.grid().unwrap().count(), 157);
        // explicit enumeration of the grid tuples
        let mut n = 0usize;
        for _ in &spec.linewidths_mhz {
            for _ in &spec.bfs_fractions {
                for _ in &spec.snrs_db {
                    for _ in 0..spec.realizations_per_snr {
                        n += 1;
                    }
                }
            }
        }
        assert_eq!(n, 385_560);
        assert_eq!(spec.column_count(), 385_560);
        assert_eq!(GridSpec::full_test().column_count(), 128_520);
        assert_eq!(GridSpec::reduced().column_count(), 17 * 42 * 3 * 2);
    }

    #[test]
    fn singleton_grid() {
        let spec = GridSpec {
            linewidths_mhz: vec![30.0],
            bfs_fractions: vec![0.5],
            snrs_db: vec![16.0],
            realizations_per_snr: 1,
            ..GridSpec::full()
        };
        let d = generate_training_set(&spec).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.rows(), 157);
    }

    #[test]
    fn columns_are_normalized_and_targets_in_range() {
        let d = generate_training_set(&tiny(3)).unwrap();
        assert_eq!(d.len(), 36);
        for (col, t) in d.columns().zip(d.targets()) {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(lo, 0.0);
            assert_eq!(hi, 1.0);
            assert!((0.0..=1.0).contains(t));
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut s = tiny(1);
        s.bfs_fractions = vec![1.2];
        assert!(matches!(generate_training_set(&s), Err(Error::Domain(_))));
        let mut s = tiny(1);
        s.linewidths_mhz.clear();
        assert!(generate_test_set(&s, 99).is_err());
        assert!(matches!(generate_test_set(&tiny(5), 5), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_deterministic_and_worker_independent() {
        let a = generate_training_set(&tiny(11)).unwrap();
        let b = generate_training_set_par(&tiny(11), 4).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = generate_training_set(&tiny(12)).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn test_and_training_columns_never_coincide() {
        let train = generate_training_set(&tiny(7)).unwrap();
        let test = generate_test_set(&tiny(8), 7).unwrap();
        let hash = |c: &[f64]| c.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let seen: HashSet<Vec<u64>> = train.columns().map(hash).collect();
        assert!(test.columns().all(|c| !seen.contains(&hash(c))));
    }

    #[test]
    fn ideal_targets_are_recovered_by_fitting() {
        let spec = tiny(1);
        let grid = spec.grid().unwrap();
        for &lw in &spec.linewidths_mhz {
            for &f in &spec.bfs_fractions {
                let p = LorentzianParams::new(1.0, f * spec.scan_range_mhz, lw).unwrap();
                let fit = fit_lorentzian(&synth_spectrum(&p, &grid), &FitConfig::default()).unwrap();
                assert!((fit.params.bfs_mhz - f * spec.scan_range_mhz).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn denormalize() {
        assert_eq!(denormalize_target(0.5, 156.0, true).unwrap(), 78.0);
        assert!((denormalize_target(0.1, 156.0, true).unwrap() - 15.6).abs() < 1e-12);
        assert!((denormalize_target(0.9, 156.0, true).unwrap() - 140.4).abs() < 1e-12);
        assert!(denormalize_target(1.1, 156.0, true).is_err());
        assert!((denormalize_target(1.1, 156.0, false).unwrap() - 171.6).abs() < 1e-9);
    }

    #[test]
    fn save_load_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bgsd");
        let spec = GridSpec {
            linewidths_mhz: vec![20.0],
            bfs_fractions: vec![0.3, 0.6, 0.8],
            snrs_db: vec![26.0],
            realizations_per_snr: 1,
            ..GridSpec::full()
        };
        let d = generate_training_set(&spec).unwrap();
        save_dataset(&d, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, d);

        let mut bytes = std::fs::read(&path).unwrap();
        let bad = dir.path().join("bad.bgsd");
        bytes[0] = b'X';
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_dataset(&bad), Err(Error::BadMagic { .. })));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[7] = b'2';
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_dataset(&bad), Err(Error::Version { found: 2, .. })));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&bad, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_dataset(&bad), Err(Error::Truncated { .. })));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 8]);
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_dataset(&bad), Err(Error::Dimension { .. })));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&100u32.to_le_bytes());
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_dataset(&bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn split_sizes_and_pairing() {
        let d = generate_training_set(&GridSpec {
            linewidths_mhz: vec![20.0, 40.0],
            bfs_fractions: linspace(0.2, 0.8, 5),
            snrs_db: vec![26.0],
            realizations_per_snr: 1,
            ..GridSpec::full()
        })
        .unwrap();
        assert_eq!(d.len(), 10);
        let (a, b) = shuffle_split(&d, 0.0, 1).unwrap();
        assert_eq!((a.len(), b.len()), (10, 0));
        let (a, b) = shuffle_split(&d, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let key = |c: &[f64], t: f64| {
            let mut k: Vec<u64> = c.iter().map(|v| v.to_bits()).collect();
            k.push(t.to_bits());
            k
        };
        let mut orig: Vec<_> = d.columns().zip(d.targets()).map(|(c, t)| key(c, *t)).collect();
        let mut parts: Vec<_> = a
            .columns()
            .zip(a.targets())
            .chain(b.columns().zip(b.targets()))
            .map(|(c, t)| key(c, *t))
            .collect();
        orig.sort();
        parts.sort();
        assert_eq!(orig, parts);
        assert!(shuffle_split(&d, 1.0, 1).is_err());
    }
}
