//! Lorentzian curve fitting: least-squares estimation of gain, BFS and
//! linewidth by Levenberg-Marquardt on the three-parameter gain model.

use serde::{Deserialize, Serialize};

use crate::spectra::{argmax, half_max_crossings, smooth5, LorentzianParams, Spectrum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once an accepted step improves R² by less than this fraction.
    pub tolerance: f64,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Fit an additive baseline as a fourth parameter.
    pub with_offset: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            with_offset: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("fit tolerance must be > 0 and max_iterations >= 1".into()));
        }
        if !(self.lambda0 > 0.0 && self.lambda_up > 1.0 && self.lambda_down > 1.0) {
            return Err(Error::Config("damping controls must be positive, factors > 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: LorentzianParams,
    /// Fitted baseline; zero unless `with_offset` was set.
    pub offset: f64,
    pub r_squared: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Some accepted step had to be pulled back inside the parameter bounds.
    pub projected: bool,
    /// R² after each accepted step, starting with the initial value.
    pub r2_history: Vec<f64>,
}

/// Starting point from the 5-point smoothed spectrum: peak location, peak
/// height above the lowest-decile baseline, and half-maximum width.
pub fn initial_guess(s: &Spectrum) -> Result<LorentzianParams> {
    Ok(guess_with_baseline(s)?.0)
}

fn guess_with_baseline(s: &Spectrum) -> Result<(LorentzianParams, f64)> {
    let n = s.len();
    if n < 5 {
        return Err(Error::domain(format!("need at least 5 samples, got {n}")));
    }
    let grid = s.grid();
    let sm = smooth5(s.gains());
    let p = argmax(&sm);
    let mut sorted = sm.clone();
    sorted.sort_by(f64::total_cmp);
    let decile = (n / 10).max(1);
    let baseline = sorted[..decile].iter().sum::<f64>() / decile as f64;
    let amp = sm[p] - baseline;
    if !(amp > 1e-12 * sm[p].abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("flat spectrum has no peak".into()));
    }
    let width_samples = match half_max_crossings(&sm, p, baseline) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (p as f64 - l),
        (None, Some(r)) => 2.0 * (r - p as f64),
        (None, None) => (n - 1) as f64,
    };
    let linewidth = (width_samples * grid.step_mhz()).clamp(grid.step_mhz(), grid.span());
    Ok((
        LorentzianParams {
            gain: amp,
            bfs_mhz: grid.frequency(p),
            linewidth_mhz: linewidth,
        },
        baseline,
    ))
}

/// `Σ [g(v_i) - y_i]^2`.
pub fn residual_r2(params: &LorentzianParams, s: &Spectrum) -> f64 {
    r2_with_offset(params, 0.0, s)
}

fn r2_with_offset(params: &LorentzianParams, offset: f64, s: &Spectrum) -> f64 {
    s.grid()
        .frequencies()
        .zip(s.gains())
        .map(|(v, y)| {
            let d = params.eval(v) + offset - y;
            d * d
        })
        .sum()
}

struct Bounds {
    gain_min: f64,
    lw: (f64, f64),
    bfs: (f64, f64),
}

impl Bounds {
    fn for_spectrum(s: &Spectrum) -> Self {
        let g = s.grid();
        let scale = s.gains().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self {
            gain_min: 1e-12 * scale.max(f64::MIN_POSITIVE),
            lw: (g.step_mhz(), g.span()),
            bfs: (g.start_mhz() - 0.5 * g.span(), g.start_mhz() + 1.5 * g.span()),
        }
    }

    /// Clamp in place; true if anything moved.
    fn project(&self, x: &mut [f64; 4]) -> bool {
        let before = *x;
        x[0] = x[0].max(self.gain_min);
        x[1] = x[1].clamp(self.bfs.0, self.bfs.1);
        x[2] = x[2].clamp(self.lw.0, self.lw.1);
        before != *x
    }
}

fn to_params(x: &[f64; 4]) -> LorentzianParams {
    LorentzianParams {
        gain: x[0],
        bfs_mhz: x[1],
        linewidth_mhz: x[2],
    }
}

/// Solves the `k × k` SPD system `a x = b` by Cholesky; `None` if not PD.
fn solve_spd(a: &[[f64; 4]; 4], b: &[f64; 4], k: usize) -> Option<[f64; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[i][j];
            for m in 0..j {
                sum -= l[i][m] * l[j][m];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = [0.0; 4];
    for i in 0..k {
        let mut sum = b[i];
        for m in 0..i {
            sum -= l[i][m] * y[m];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = [0.0; 4];
    for i in (0..k).rev() {
        let mut sum = y[i];
        for m in i + 1..k {
            sum -= l[m][i] * x[m];
        }
        x[i] = sum / l[i][i];
    }
    x[..k].iter().all(|v| v.is_finite()).then_some(x)
}

/// Fit starting from [`initial_guess`].
pub fn fit_lorentzian(s: &Spectrum, cfg: &FitConfig) -> Result<FitResult> {
    let (guess, baseline) = guess_with_baseline(s)?;
    let offset = if cfg.with_offset { baseline } else { 0.0 };
    fit_lorentzian_from(s, &guess, offset, cfg)
}

/// Levenberg-Marquardt with Marquardt (diagonal) damping from a given start.
/// Running out of iterations yields `converged = false`, not an error.
pub fn fit_lorentzian_from(
    s: &Spectrum,
    start: &LorentzianParams,
    start_offset: f64,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let k = if cfg.with_offset { 4 } else { 3 };
    let bounds = Bounds::for_spectrum(s);
    let grid = *s.grid();
    let ys = s.gains();

    let mut x = [start.gain, start.bfs_mhz, start.linewidth_mhz, start_offset];
    let mut projected = bounds.project(&mut x);
    let r2_of = |x: &[f64; 4]| r2_with_offset(&to_params(x), x[3], s);
    let mut r2 = r2_of(&x);
    let mut history = vec![r2];
    let mut lambda = cfg.lambda0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        if r2 == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;

        let mut a = [[0.0; 4]; 4];
        let mut b = [0.0; 4];
        let (gain, bfs, lw) = (x[0], x[1], x[2]);
        for (i, y) in ys.iter().enumerate() {
            let v = grid.frequency(i);
            let t = 2.0 * (v - bfs) / lw;
            let den = 1.0 + t * t;
            let model = gain / den + x[3];
            let jac = [
                1.0 / den,
                4.0 * gain * t / (lw * den * den),
                2.0 * gain * t * t / (lw * den * den),
                1.0,
            ];
            let r = y - model;
            for p in 0..k {
                b[p] += jac[p] * r;
                for q in 0..=p {
                    a[p][q] += jac[p] * jac[q];
                }
            }
        }
        for p in 0..k {
            for q in 0..p {
                a[q][p] = a[p][q];
            }
        }
        let diag_floor = 1e-12 * (0..k).map(|p| a[p][p]).fold(0.0, f64::max);

        let mut accepted = false;
        while lambda <= 1e16 {
            let mut damped = a;
            for p in 0..k {
                damped[p][p] += lambda * a[p][p].max(diag_floor);
            }
            if let Some(delta) = solve_spd(&damped, &b, k) {
                let mut trial = x;
                for p in 0..k {
                    trial[p] += delta[p];
                }
                let moved = bounds.project(&mut trial);
                let r2_trial = r2_of(&trial);
                if r2_trial < r2 {
                    let rel = (r2 - r2_trial) / r2;
                    x = trial;
                    r2 = r2_trial;
                    history.push(r2);
                    projected |= moved;
                    lambda = (lambda / cfg.lambda_down).max(1e-15);
                    accepted = true;
                    if rel < cfg.tolerance {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= cfg.lambda_up;
        }
        if !accepted {
            // no damping level improves R²: at a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }

    Ok(FitResult {
        params: to_params(&x),
        offset: x[3],
        r_squared: r2,
        iterations,
        converged,
        projected,
        r2_history: history,
    })
}

/// BFS (in the spectrum's frequency coordinates) from a Lorentzian fit.
pub fn fit_bfs(s: &Spectrum, cfg: &FitConfig) -> Result<f64> {
    Ok(fit_lorentzian(s, cfg)?.params.bfs_mhz)
}
