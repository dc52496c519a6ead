//! Full-batch trainers: steepest descent and Levenberg-Marquardt.

use std::path::Path;
use std::time::Instant;

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, Par, Side};
use serde::{Deserialize, Serialize};

use super::{backprop_gradient, batch_mse, check_dataset, output_jacobian_row, Network, Scratch};
use crate::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SteepestDescent,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Learning rate for steepest descent, applied to the gradient of the
    /// batch-mean cost.
    pub eta: f64,
    pub max_iterations: usize,
    pub lm_lambda0: f64,
    pub lm_lambda_up: f64,
    pub lm_lambda_down: f64,
    /// Damping level past which an iteration gives up.
    pub lm_lambda_max: f64,
    pub seed: u64,
    /// Stop after this many iterations without a new best test MSE; 0
    /// disables early stopping.
    pub early_stop_patience: usize,
    /// Samples per Jacobian block when accumulating the normal equations.
    pub block_size: usize,
    /// Return the weights with the lowest test error seen rather than the
    /// last ones (only when a test set is given).
    #[serde(default = "yes")]
    pub restore_best: bool,
}

fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::LevenbergMarquardt,
            eta: 0.1,
            max_iterations: 30,
            lm_lambda0: 1e-3,
            lm_lambda_up: 10.0,
            lm_lambda_down: 10.0,
            lm_lambda_max: 1e10,
            seed: 1,
            early_stop_patience: 5,
            block_size: 256,
            restore_best: true,
        }
    }
}

impl TrainConfig {
    pub fn steepest_descent(eta: f64, max_iterations: usize) -> Self {
        Self {
            algorithm: Algorithm::SteepestDescent,
            eta,
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.algorithm {
            Algorithm::SteepestDescent if !(self.eta >= 0.0 && self.eta.is_finite()) => {
                Err(Error::Config(format!("learning rate must be >= 0, got {}", self.eta)))
            }
            Algorithm::LevenbergMarquardt
                if !(self.lm_lambda0 > 0.0
                    && self.lm_lambda_up > 1.0
                    && self.lm_lambda_down > 1.0
                    && self.lm_lambda_max > self.lm_lambda0) =>
            {
                Err(Error::Config("LM damping controls must be positive, factors > 1".into()))
            }
            _ if self.block_size == 0 => Err(Error::Config("block size must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_mse: f64,
    /// `NaN` when no test set was supplied.
    pub test_mse: f64,
    pub lambda: Option<f64>,
    pub wall_seconds: f64,
}

/// Per-iteration errors; iteration 0 is the untrained network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<IterationRecord>,
    /// Why training ended early, if it did.
    pub stop_reason: Option<String>,
    /// Iteration whose weights were returned, when that is not the last.
    pub returned_iteration: Option<usize>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Record describing the returned network.
    pub fn returned(&self) -> Option<&IterationRecord> {
        match self.returned_iteration {
            Some(n) => self.records.iter().find(|r| r.iteration == n),
            None => self.last(),
        }
    }

    /// Test MSE over train MSE of the returned network.
    pub fn generalization_ratio(&self) -> Option<f64> {
        self.returned().map(|r| r.test_mse / r.train_mse)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "train_mse", "test_mse", "lambda", "wall_seconds"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.12e}", r.train_mse),
                format!("{:.12e}", r.test_mse),
                r.lambda.map(|l| format!("{l:e}")).unwrap_or_default(),
                format!("{:.6}", r.wall_seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn test_mse(net: &Network, test: Option<&Dataset>) -> Result<f64> {
    match test {
        Some(t) if !t.is_empty() => batch_mse(net, t),
        _ => Ok(f64::NAN),
    }
}

/// Tracks the best test error and its weights.
struct Patience {
    limit: usize,
    best: f64,
    best_iteration: usize,
    best_params: Vec<f64>,
    since: usize,
}

impl Patience {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            best: f64::INFINITY,
            best_iteration: 0,
            best_params: vec![],
            since: 0,
        }
    }

    /// True once the test error has not improved for `limit` iterations.
    fn exhausted(&mut self, n: usize, test_mse: f64, params: &[f64]) -> bool {
        if test_mse.is_nan() {
            return false;
        }
        if test_mse < self.best {
            self.best = test_mse;
            self.best_iteration = n;
            self.best_params.clear();
            self.best_params.extend_from_slice(params);
            self.since = 0;
        } else {
            self.since += 1;
        }
        self.limit > 0 && self.since >= self.limit
    }

    fn finish(self, net: &mut Network, log: &mut TrainLog, cfg: &TrainConfig) {
        let last = log.last().map(|r| r.iteration);
        if cfg.restore_best && !self.best_params.is_empty() && last != Some(self.best_iteration) {
            net.params_mut().copy_from_slice(&self.best_params);
            log.returned_iteration = Some(self.best_iteration);
        }
    }
}

/// Dispatch on `cfg.algorithm`.
pub fn train(
    net: Network,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    match cfg.algorithm {
        Algorithm::SteepestDescent => train_steepest_descent(net, train, test, cfg),
        Algorithm::LevenbergMarquardt => train_lm(net, train, test, cfg),
    }
}

/// Tag stored in every trained model: a hash of the training corpus
/// content and the training configuration.
pub fn training_provenance(train: &Dataset, cfg: &TrainConfig) -> String {
    let cfg_json = serde_json::to_string(cfg).unwrap_or_default();
    crate::io::sha256_hex(format!("{}|{}", train.content_hash(), cfg_json).as_bytes())
}

fn prepare(net: &Network, train: &Dataset, test: Option<&Dataset>, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    check_dataset(net, train)?;
    if train.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    if let Some(t) = test {
        check_dataset(net, t)?;
    }
    Ok(())
}

/// `θ(n+1) = θ(n) - η ∂ē/∂θ` on the batch-mean cost, full batch.
pub fn train_steepest_descent(
    mut net: Network,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    if cfg.algorithm != Algorithm::SteepestDescent {
        return Err(Error::Config("config is not set up for steepest descent".into()));
    }
    prepare(&net, train, test, cfg)?;
    let clock = Instant::now();
    let mut log = TrainLog::default();
    let mut patience = Patience::new(cfg.early_stop_patience);
    let record = |net: &Network, n: usize, log: &mut TrainLog| -> Result<f64> {
        let tr = batch_mse(net, train)?;
        let te = test_mse(net, test)?;
        log.records.push(IterationRecord {
            iteration: n,
            train_mse: tr,
            test_mse: te,
            lambda: None,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        Ok(te)
    };
    let te = record(&net, 0, &mut log)?;
    patience.exhausted(0, te, net.params());
    let scale = cfg.eta / train.len() as f64;
    for n in 1..=cfg.max_iterations {
        let g = backprop_gradient(&net, train)?;
        for (p, d) in net.params_mut().iter_mut().zip(&g.0) {
            *p -= scale * d;
        }
        let te = record(&net, n, &mut log)?;
        let last = log.last().unwrap();
        if !last.train_mse.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::TrainingDiverged {
                iteration: n,
                reason: "non-finite training error".into(),
                log,
            });
        }
        if patience.exhausted(n, te, net.params()) {
            log.stop_reason = Some(format!("test error flat for {} iterations", cfg.early_stop_patience));
            break;
        }
    }
    patience.finish(&mut net, &mut log, cfg);
    net.set_provenance(training_provenance(train, cfg));
    Ok((net, log))
}

/// Normal equations `JᵀJ` and `Jᵀe` accumulated over sample blocks, where
/// `J` holds `∂y/∂θ` per sample and `e = h - y`.
fn normal_equations(net: &Network, d: &Dataset, block: usize) -> (Mat<f64>, Mat<f64>, f64) {
    let p = net.params().len();
    let mut jtj = Mat::<f64>::zeros(p, p);
    let mut jte = Mat::<f64>::zeros(p, 1);
    let mut sse = 0.0;
    let mut scratch = Scratch::new(net.layout());
    let mut row = vec![0.0; p];
    let mut jb = Mat::<f64>::zeros(block.min(d.len()), p);
    let mut eb = Mat::<f64>::zeros(block.min(d.len()), 1);
    let mut start = 0;
    while start < d.len() {
        let rows = block.min(d.len() - start);
        for r in 0..rows {
            let j = start + r;
            let y = output_jacobian_row(net, d.column(j), &mut scratch, &mut row);
            let e = d.targets()[j] - y;
            sse += e * e;
            eb[(r, 0)] = e;
            for (c, v) in row.iter().enumerate() {
                jb[(r, c)] = *v;
            }
        }
        let jv = jb.as_ref().subrows(0, rows);
        let ev = eb.as_ref().subrows(0, rows);
        // lower triangle only; the Cholesky solve never reads the rest
        triangular::matmul(
            jtj.as_mut(),
            BlockStructure::TriangularLower,
            Accum::Add,
            jv.transpose(),
            BlockStructure::Rectangular,
            jv,
            BlockStructure::Rectangular,
            1.0,
            Par::Seq,
        );
        faer::linalg::matmul::matmul(jte.as_mut(), Accum::Add, jv.transpose(), ev, 1.0, Par::Seq);
        start += rows;
    }
    (jtj, jte, sse)
}

/// Levenberg-Marquardt over all weights: solve
/// `(JᵀJ + λ diag(JᵀJ)) δ = Jᵀe`, accept when the training error drops
/// (λ shrinks), otherwise raise λ and retry.
pub fn train_lm(
    mut net: Network,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    if cfg.algorithm != Algorithm::LevenbergMarquardt {
        return Err(Error::Config("config is not set up for Levenberg-Marquardt".into()));
    }
    prepare(&net, train, test, cfg)?;
    let clock = Instant::now();
    let mut log = TrainLog::default();
    let mut patience = Patience::new(cfg.early_stop_patience);
    let mut lambda = cfg.lm_lambda0;
    let mut train_mse = batch_mse(&net, train)?;
    let te = test_mse(&net, test)?;
    patience.exhausted(0, te, net.params());
    log.records.push(IterationRecord {
        iteration: 0,
        train_mse,
        test_mse: te,
        lambda: Some(lambda),
        wall_seconds: clock.elapsed().as_secs_f64(),
    });
    if !train_mse.is_finite() {
        return Err(Error::TrainingDiverged {
            iteration: 0,
            reason: "non-finite initial error".into(),
            log,
        });
    }

    for n in 1..=cfg.max_iterations {
        let (jtj, jte, sse) = normal_equations(&net, train, cfg.block_size);
        if sse == 0.0 {
            log.stop_reason = Some("zero residual".into());
            break;
        }
        let p = jtj.nrows();
        let diag: Vec<f64> = (0..p).map(|i| jtj[(i, i)]).collect();
        let floor = 1e-12 * diag.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let base = net.params().to_vec();
        let mut accepted = false;
        let mut solved_any = false;
        while lambda <= cfg.lm_lambda_max {
            let mut damped = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                damped[(i, i)] += lambda * d.max(floor);
            }
            let step = match damped.llt(Side::Lower) {
                Ok(llt) => llt.solve(&jte),
                Err(_) => {
                    lambda *= cfg.lm_lambda_up;
                    continue;
                }
            };
            solved_any = true;
            for (i, (dst, b)) in net.params_mut().iter_mut().zip(&base).enumerate() {
                *dst = b + step[(i, 0)];
            }
            let trial = batch_mse(&net, train)?;
            if trial < train_mse {
                train_mse = trial;
                lambda = (lambda / cfg.lm_lambda_down).max(1e-20);
                accepted = true;
                break;
            }
            lambda *= cfg.lm_lambda_up;
        }
        if !accepted {
            net.params_mut().copy_from_slice(&base);
            if !solved_any {
                return Err(Error::TrainingDiverged {
                    iteration: n,
                    reason: format!("normal equations not solvable up to λ = {:e}", cfg.lm_lambda_max),
                    log,
                });
            }
            log.stop_reason = Some(format!("no improving step up to λ = {:e}", cfg.lm_lambda_max));
            break;
        }
        let te = test_mse(&net, test)?;
        log.records.push(IterationRecord {
            iteration: n,
            train_mse,
            test_mse: te,
            lambda: Some(lambda),
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        log::debug!("lm iteration {n}: train {train_mse:.3e} test {te:.3e} λ {lambda:.1e}");
        if patience.exhausted(n, te, net.params()) {
            log.stop_reason = Some(format!("test error flat for {} iterations", cfg.early_stop_patience));
            break;
        }
    }
    patience.finish(&mut net, &mut log, cfg);
    net.set_provenance(training_provenance(train, cfg));
    Ok((net, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GridSpec;
    use crate::fnn::{forward, init_network, sigmoid, NetworkLayout};

    fn data(xs: &[f64], hs: &[f64]) -> Dataset {
        Dataset::from_parts(1, xs.to_vec(), hs.to_vec(), GridSpec::reduced()).unwrap()
    }

    #[test]
    fn zero_rate_leaves_weights_alone() {
        let net = init_network(&NetworkLayout::new(&[1, 3, 1]).unwrap(), 2);
        let d = data(&[0.1, 0.5, 0.9], &[0.2, 0.4, 0.1]);
        let (out, log) = train_steepest_descent(net.clone(), &d, None, &TrainConfig::steepest_descent(0.0, 10)).unwrap();
        assert_eq!(out.params(), net.params());
        assert_eq!(log.records.len(), 11);
    }

    #[test]
    fn descent_reaches_least_squares_line() {
        let xs = [0.0, 0.2, 0.5, 0.7, 1.0];
        let hs = [0.1, 0.35, 0.42, 0.8, 0.95];
        // closed-form least squares for y = a x + b
        let n = xs.len() as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), hs.iter().sum::<f64>());
        let sxx = xs.iter().map(|x| x * x).sum::<f64>();
        let sxy = xs.iter().zip(&hs).map(|(x, y)| x * y).sum::<f64>();
        let a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let b = (sy - a * sx) / n;

        let net = init_network(&NetworkLayout::new(&[1, 1]).unwrap(), 5);
        let cfg = TrainConfig {
            early_stop_patience: 0,
            ..TrainConfig::steepest_descent(0.5, 20_000)
        };
        let (out, log) = train_steepest_descent(net, &data(&xs, &hs), None, &cfg).unwrap();
        assert!((out.weights(0)[0] - a).abs() < 1e-6);
        assert!((out.biases(0).unwrap()[0] - b).abs() < 1e-6);
        assert!(log
            .records
            .windows(2)
            .all(|w| w[1].train_mse <= w[0].train_mse * (1.0 + 1e-12)));
    }

    #[test]
    fn divergence_is_reported_with_log() {
        let net = init_network(&NetworkLayout::new(&[1, 1]).unwrap(), 5);
        let d = data(&[10.0, -30.0, 50.0], &[1.0, 2.0, 3.0]);
        let cfg = TrainConfig {
            early_stop_patience: 0,
            ..TrainConfig::steepest_descent(1e6, 500)
        };
        match train_steepest_descent(net, &d, None, &cfg) {
            Err(Error::TrainingDiverged { log, .. }) => assert!(!log.records.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn lm_on_exact_fit_changes_nothing() {
        let mut net = init_network(&NetworkLayout::new(&[1, 2, 1]).unwrap(), 8);
        net.biases_mut(1).unwrap()[0] = 0.1;
        let xs = [0.1, 0.4, 0.8];
        let hs: Vec<f64> = xs.iter().map(|x| forward(&net, &[*x]).unwrap()).collect();
        let (out, log) = train_lm(net.clone(), &data(&xs, &hs), None, &TrainConfig::default()).unwrap();
        assert_eq!(out.params(), net.params());
        assert_eq!(log.stop_reason.as_deref(), Some("zero residual"));
    }

    #[test]
    fn lm_recovers_known_weight() {
        let layout = NetworkLayout::new(&[1, 1]).unwrap();
        let layout = NetworkLayout::with_options(
            layout.sizes(),
            crate::fnn::Activation::Sigmoid,
            crate::fnn::Activation::Sigmoid,
            false,
        )
        .unwrap();
        let w_true = 1.7;
        let xs: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let hs: Vec<f64> = xs.iter().map(|x| sigmoid(w_true * x)).collect();
        let mut net = init_network(&layout, 3);
        net.weights_mut(0)[0] = -0.5;
        let cfg = TrainConfig {
            max_iterations: 20,
            early_stop_patience: 0,
            ..TrainConfig::default()
        };
        let (out, log) = train_lm(net, &data(&xs, &hs), None, &cfg).unwrap();
        assert!((out.weights(0)[0] - w_true).abs() < 1e-4, "{}", out.weights(0)[0]);
        assert!(log.records.len() <= 21);
        assert!(log.records.windows(2).all(|w| w[1].train_mse < w[0].train_mse));
    }

    #[test]
    fn lm_training_is_order_independent() {
        let spec = GridSpec {
            linewidths_mhz: vec![20.0, 45.0],
            bfs_fractions: vec![0.3, 0.5, 0.7],
            snrs_db: vec![26.0],
            realizations_per_snr: 2,
            ..GridSpec::reduced()
        };
        let d = crate::dataset::generate_training_set(&spec).unwrap();
        let rev: Vec<usize> = (0..d.len()).rev().collect();
        let shuffled = d.select(&rev);
        let layout = NetworkLayout::new(&[157, 3, 1]).unwrap();
        let cfg = TrainConfig {
            max_iterations: 3,
            block_size: 5,
            ..TrainConfig::default()
        };
        let (a, _) = train_lm(init_network(&layout, 1), &d, None, &cfg).unwrap();
        let (b, _) = train_lm(init_network(&layout, 1), &shuffled, None, &cfg).unwrap();
        for (x, y) in a.params().iter().zip(b.params()) {
            assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn wrong_algorithm_is_a_config_error() {
        let net = init_network(&NetworkLayout::new(&[1, 1]).unwrap(), 1);
        let d = data(&[0.5], &[0.5]);
        assert!(matches!(train_lm(net.clone(), &d, None, &TrainConfig::steepest_descent(0.1, 1)), Err(Error::Config(_))));
        assert!(matches!(train_steepest_descent(net, &d, None, &TrainConfig::default()), Err(Error::Config(_))));
    }
}
