//! Benchmark configuration: which synthetic distributions, models, and
//! estimators to run, at which evaluation sizes, under which master seed.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binned::sqrt_bin_heuristic;
use crate::core::CalibrationSetting;
use crate::error::{Error, Result};
use crate::synth::{LogisticHyper, DEFAULT_MODES_PER_CLASS};

/// Bin-count policy: a fixed value or the sqrt(N) heuristic resolved per
/// evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinPolicy {
    Fixed(usize),
    Heuristic(BinHeuristic),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinHeuristic {
    Sqrt,
}

impl BinPolicy {
    pub fn resolve(&self, n_samples: usize) -> usize {
        match self {
            BinPolicy::Fixed(b) => *b,
            BinPolicy::Heuristic(BinHeuristic::Sqrt) => sqrt_bin_heuristic(n_samples),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            BinPolicy::Fixed(b) => format!("bins={b}"),
            BinPolicy::Heuristic(BinHeuristic::Sqrt) => "bins=sqrt".to_string(),
        }
    }
}

/// Bandwidth policy: a fixed value or Silverman's rule resolved per
/// evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthPolicy {
    Fixed(f64),
    Heuristic(BandwidthHeuristic),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthHeuristic {
    Silverman,
}

impl BandwidthPolicy {
    pub fn descriptor(&self) -> String {
        match self {
            BandwidthPolicy::Fixed(h) => format!("bandwidth={h}"),
            BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman) => {
                "bandwidth=silverman".to_string()
            }
        }
    }
}

/// An estimator under test together with its hyperparameter policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorConfig {
    /// Uniform binning, one-bin mapping (ECE_l).
    Legacy { bins: BinPolicy },
    /// Adaptive binning, one-bin mapping (ECE_a).
    Adaptive { bins: BinPolicy },
    /// Uniform binning, convex mapping (ECE_c).
    Convex { bins: BinPolicy },
    /// Adaptive binning, convex mapping (ECE_ac).
    AdaptiveConvex { bins: BinPolicy },
    /// Density-based estimator (ECE_d).
    Kde { bandwidth: BandwidthPolicy },
}

impl EstimatorConfig {
    pub fn estimator_id(&self) -> &'static str {
        match self {
            EstimatorConfig::Legacy { .. } => "ECE_l",
            EstimatorConfig::Adaptive { .. } => "ECE_a",
            EstimatorConfig::Convex { .. } => "ECE_c",
            EstimatorConfig::AdaptiveConvex { .. } => "ECE_ac",
            EstimatorConfig::Kde { .. } => "ECE_d",
        }
    }

    /// Stable description of the hyperparameter policy for report rows.
    pub fn descriptor(&self) -> String {
        match self {
            EstimatorConfig::Legacy { bins }
            | EstimatorConfig::Adaptive { bins }
            | EstimatorConfig::Convex { bins }
            | EstimatorConfig::AdaptiveConvex { bins } => bins.descriptor(),
            EstimatorConfig::Kde { bandwidth } => bandwidth.descriptor(),
        }
    }
}

/// A model entry in the zoo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    LogisticRegression {
        #[serde(flatten, default)]
        hyper: LogisticHyper,
    },
    GaussianNaiveBayes,
    AnalyticPosterior,
    DistortedPosterior { temperature: f64 },
}

impl ModelConfig {
    pub fn id(&self) -> String {
        match self {
            ModelConfig::LogisticRegression { .. } => "logistic_regression".into(),
            ModelConfig::GaussianNaiveBayes => "gaussian_naive_bayes".into(),
            ModelConfig::AnalyticPosterior => "analytic_posterior".into(),
            ModelConfig::DistortedPosterior { temperature } => {
                format!("distorted_posterior_t{temperature}")
            }
        }
    }
}

fn default_modes_per_class() -> usize {
    DEFAULT_MODES_PER_CLASS
}

/// Full benchmark description; serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub class_counts: Vec<usize>,
    pub dims: Vec<usize>,
    pub specs_per_combination: usize,
    #[serde(default = "default_modes_per_class")]
    pub modes_per_class: usize,
    pub models: Vec<ModelConfig>,
    pub train_size: usize,
    pub train_splits: usize,
    pub holdout_size: usize,
    pub truth_bins: usize,
    pub eval_sizes: Vec<usize>,
    pub n_boot_eval: usize,
    pub error_percentile: f64,
    pub estimators: Vec<EstimatorConfig>,
    pub settings: Vec<CalibrationSetting>,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let nonempty: [(&str, bool); 6] = [
            ("class_counts", self.class_counts.is_empty()),
            ("dims", self.dims.is_empty()),
            ("models", self.models.is_empty()),
            ("eval_sizes", self.eval_sizes.is_empty()),
            ("estimators", self.estimators.is_empty()),
            ("settings", self.settings.is_empty()),
        ];
        for (name, empty) in nonempty {
            if empty {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        if self.class_counts.iter().any(|&c| c < 2) {
            return Err(Error::Config("class counts must be at least 2".into()));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.specs_per_combination == 0 || self.train_splits == 0 || self.modes_per_class == 0 {
            return Err(Error::Config(
                "specs_per_combination, train_splits, and modes_per_class must be positive".into(),
            ));
        }
        if !self.eval_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("eval_sizes must be strictly increasing".into()));
        }
        let max_eval = *self.eval_sizes.last().unwrap();
        if self.eval_sizes[0] < 2 {
            return Err(Error::Config("evaluation sets need at least 2 samples".into()));
        }
        if max_eval > self.holdout_size {
            return Err(Error::Config(format!(
                "largest eval size {max_eval} exceeds holdout size {}",
                self.holdout_size
            )));
        }
        if !(self.error_percentile > 0.0 && self.error_percentile < 100.0) {
            return Err(Error::Config(format!(
                "error_percentile must lie in (0, 100), got {}",
                self.error_percentile
            )));
        }
        if self.n_boot_eval == 0 {
            return Err(Error::Config("n_boot_eval must be positive".into()));
        }
        let max_tested_bins = self
            .estimators
            .iter()
            .filter_map(|e| match e {
                EstimatorConfig::Legacy { bins }
                | EstimatorConfig::Adaptive { bins }
                | EstimatorConfig::Convex { bins }
                | EstimatorConfig::AdaptiveConvex { bins } => Some(bins.resolve(max_eval)),
                EstimatorConfig::Kde { .. } => None,
            })
            .max()
            .unwrap_or(1);
        if self.truth_bins < max_tested_bins {
            return Err(Error::Config(format!(
                "truth_bins {} below the largest tested bin count {max_tested_bins}",
                self.truth_bins
            )));
        }
        if self.holdout_size < 10 * self.truth_bins {
            return Err(Error::Config(format!(
                "holdout size {} too small for {} ground-truth bins",
                self.holdout_size, self.truth_bins
            )));
        }
        let min_classes = *self.class_counts.iter().min().unwrap();
        for setting in &self.settings {
            if let CalibrationSetting::ClassSpecific(c) = setting {
                if *c >= min_classes {
                    return Err(Error::Config(format!(
                        "class_specific setting index {c} out of range for {min_classes} classes"
                    )));
                }
            }
        }
        if self.train_size < 2 {
            return Err(Error::Config("train_size must be at least 2".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization; ties checkpoints and
    /// provenance back to the exact configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Number of score distributions (cells) the benchmark evaluates.
    pub fn n_cells(&self) -> usize {
        self.class_counts.len()
            * self.dims.len()
            * self.specs_per_combination
            * self.models.len()
            * self.train_splits
    }

    /// Desk-scale configuration: small enough to run in minutes while still
    /// reproducing the qualitative estimator ranking.
    pub fn desk() -> Self {
        Self {
            class_counts: vec![2, 5],
            dims: vec![2, 5],
            specs_per_combination: 2,
            modes_per_class: DEFAULT_MODES_PER_CLASS,
            models: vec![
                ModelConfig::LogisticRegression {
                    hyper: LogisticHyper::default(),
                },
                ModelConfig::DistortedPosterior { temperature: 2.0 },
            ],
            train_size: 300,
            train_splits: 2,
            holdout_size: 200_000,
            truth_bins: 500,
            eval_sizes: vec![30, 75, 200, 500],
            n_boot_eval: 100,
            error_percentile: 95.0,
            estimators: vec![
                EstimatorConfig::Legacy {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Adaptive {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Convex {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::AdaptiveConvex {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Kde {
                    bandwidth: BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman),
                },
            ],
            settings: vec![
                CalibrationSetting::Confidence,
                CalibrationSetting::ClassWise,
            ],
            seed: 20240801,
        }
    }

    /// Full-scale protocol: 45 distributions x 4 models x 3 splits = 540
    /// score distributions, 2e6-sample holdouts, 2000 ground-truth bins, 200
    /// bootstrap evaluation sets of sizes 30..500 (log-spaced). Hours of
    /// compute; not part of the test suite.
    pub fn paper() -> Self {
        Self {
            class_counts: vec![2, 5, 7],
            dims: vec![2, 5, 7],
            specs_per_combination: 5,
            modes_per_class: DEFAULT_MODES_PER_CLASS,
            models: vec![
                ModelConfig::LogisticRegression {
                    hyper: LogisticHyper::default(),
                },
                ModelConfig::GaussianNaiveBayes,
                ModelConfig::DistortedPosterior { temperature: 0.5 },
                ModelConfig::DistortedPosterior { temperature: 2.0 },
            ],
            train_size: 300,
            train_splits: 3,
            holdout_size: 2_000_000,
            truth_bins: 2000,
            eval_sizes: log_spaced_sizes(30, 500, 10),
            n_boot_eval: 200,
            error_percentile: 95.0,
            estimators: vec![
                EstimatorConfig::Legacy {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Legacy {
                    bins: BinPolicy::Fixed(15),
                },
                EstimatorConfig::Adaptive {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Adaptive {
                    bins: BinPolicy::Fixed(15),
                },
                EstimatorConfig::Convex {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::Convex {
                    bins: BinPolicy::Fixed(15),
                },
                EstimatorConfig::AdaptiveConvex {
                    bins: BinPolicy::Heuristic(BinHeuristic::Sqrt),
                },
                EstimatorConfig::AdaptiveConvex {
                    bins: BinPolicy::Fixed(15),
                },
                EstimatorConfig::Kde {
                    bandwidth: BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman),
                },
            ],
            settings: vec![
                CalibrationSetting::Confidence,
                CalibrationSetting::ClassWise,
            ],
            seed: 20240801,
        }
    }
}

/// Log-spaced integer sizes from `lo` to `hi` inclusive, deduplicated after
/// rounding.
pub fn log_spaced_sizes(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi > lo && count >= 2);
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut sizes: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (llo + t * (lhi - llo)).exp().round() as usize
        })
        .collect();
    sizes.dedup();
    sizes
}
