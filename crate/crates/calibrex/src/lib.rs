//! Calibration metrics for probabilistic classifiers.
//!
//! A classifier is calibrated when its scores behave like probabilities: among
//! samples scored 0.7, about 70% should carry the event. This crate estimates
//! how far a model is from that ideal, in the class-specific, class-wise, and
//! confidence settings:
//!
//! - binning-based expected calibration error in four variants (uniform or
//!   adaptive binning, one-bin or convex sample-to-bin mapping), plus the
//!   maximum calibration error and reliability-diagram points;
//! - a density-based estimator built on mirrored FFT kernel density estimation
//!   and the local calibration error, with reliability curves and bootstrap
//!   uncertainty bands;
//! - heuristics for the hyperparameters (sqrt bin count, Silverman bandwidth);
//! - a synthetic-benchmark harness with Gaussian-mixture ground truth for
//!   ranking estimators by approximation error versus holdout size.
//!
//! ```
//! use calibrex::binned::{binned_ece, AffectationMapping, BinningScheme};
//! use calibrex::core::{CalibrationSetting, ScoredEvents};
//!
//! let events = ScoredEvents::new(
//!     vec![0.2, 0.4, 0.6, 0.8],
//!     vec![false, false, true, true],
//!     CalibrationSetting::Confidence,
//! )?;
//! let binning = BinningScheme::uniform(2)?;
//! let mapping = AffectationMapping::one_bin(events.scores(), &binning)?;
//! let estimate = binned_ece(&events, &mapping)?;
//! assert!((estimate.value - 0.3).abs() < 1e-12);
//! assert_eq!(estimate.estimator_id, "ECE_l");
//! # Ok::<(), calibrex::Error>(())
//! ```

pub mod bench;
pub mod binned;
pub mod core;
pub mod density;
mod error;
pub mod io;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
