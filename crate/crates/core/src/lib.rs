//! Brillouin frequency shift (BFS) retrieval from Brillouin gain spectra (BGS).
//!
//! Two estimators are provided side by side:
//!
//! - [`fnn`]: a small feedforward network (sigmoid hidden layers, linear
//!   output) trained on noise-augmented synthetic spectra, by steepest
//!   descent or Levenberg-Marquardt.
//! - [`lcf`]: Lorentzian curve fitting by damped Gauss-Newton on the
//!   three-parameter gain model.
//!
//! [`resample`] lets one trained network accept spectra scanned at any step
//! between 1 and 10 MHz, [`trace`] simulates position-resolved BOTDA
//! acquisitions with heated sections, and [`bench`] runs the accuracy and
//! timing comparisons between the two estimators.
//!
//! ```
//! use bfsnet::spectra::{synth_spectrum, FrequencyGrid, LorentzianParams};
//! use bfsnet::lcf::{fit_bfs, FitConfig};
//!
//! let grid = FrequencyGrid::new(0.0, 1.0, 157).unwrap();
//! let params = LorentzianParams::new(1.0, 78.0, 30.0).unwrap();
//! let s = synth_spectrum(&params, &grid);
//! let bfs = fit_bfs(&s, &FitConfig::default()).unwrap();
//! assert!((bfs - 78.0).abs() < 1e-6);
//! ```

pub mod bench;
pub mod cli;
pub mod dataset;
mod error;
pub mod fnn;
mod io;
pub mod lcf;
pub mod par;
pub mod resample;
pub mod spectra;
pub mod trace;

pub use error::{Error, Result};
