//! Domain types and the reduction of multiclass score matrices to the
//! one-dimensional (score, outcome) pairs each calibration setting requires.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums may deviate from 1 by up to this much and are silently
/// renormalized; larger deviations are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Which notion of calibration an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSetting {
    /// Calibration of the scores for one fixed class.
    ClassSpecific(usize),
    /// Mean of the class-specific errors over all classes.
    ClassWise,
    /// Calibration of the score assigned to the predicted class.
    Confidence,
}

impl fmt::Display for CalibrationSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationSetting::ClassSpecific(c) => write!(f, "class_specific_{c}"),
            CalibrationSetting::ClassWise => write!(f, "class_wise"),
            CalibrationSetting::Confidence => write!(f, "confidence"),
        }
    }
}

/// A validated holdout: an N x C matrix of simplex rows plus ground-truth labels.
#[derive(Debug, Clone)]
pub struct LabeledScores {
    scores: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledScores {
    /// Validates a raw score matrix against its labels.
    ///
    /// Rows must lie on the probability simplex: entries in [0, 1] and summing
    /// to 1. Rows whose sum deviates from 1 by less than [`ROW_SUM_TOLERANCE`]
    /// are renormalized; anything worse is rejected, as are NaN/infinite
    /// entries and out-of-range labels.
    pub fn new(mut scores: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, c) = scores.dim();
        if n == 0 {
            return Err(Error::EmptyInput("score matrix has no rows"));
        }
        if c < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {c}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "labels vs score rows",
                expected: n,
                got: labels.len(),
            });
        }
        for (i, &label) in labels.iter().enumerate() {
            if label >= c {
                return Err(Error::LabelOutOfRange {
                    sample: i,
                    label,
                    n_classes: c,
                });
            }
        }
        for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteScore { row: i, col: j });
                }
                if !(0.0..=1.0 + ROW_SUM_TOLERANCE).contains(&v) {
                    return Err(Error::ScoreOutOfRange { index: i, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() >= ROW_SUM_TOLERANCE {
                return Err(Error::RowSumViolation { row: i, sum });
            }
            if sum != 1.0 {
                row.mapv_inplace(|v| v / sum);
            }
        }
        Ok(Self {
            scores,
            labels,
            n_classes: c,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Predicted class of row `i`: the argmax score, ties broken toward the
    /// lowest class index.
    pub fn predicted_class(&self, i: usize) -> usize {
        let row = self.scores.row(i);
        let mut best = 0;
        for j in 1..self.n_classes {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    }

    /// Builds a new holdout from a subset of row indices (used by bootstrap
    /// draws). Indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let c = self.n_classes;
        let mut scores = Array2::zeros((indices.len(), c));
        let mut labels = Vec::with_capacity(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            scores.row_mut(out).assign(&self.scores.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            scores,
            labels,
            n_classes: c,
        }
    }

    /// Reduces the holdout to the (score, outcome) pairs of a setting.
    ///
    /// For `ClassSpecific(c)` the score is the class-c score and the outcome
    /// is "label equals c". For `Confidence` the score is the top score and
    /// the outcome is "prediction correct". `ClassWise` is not reducible to a
    /// single stream; callers iterate over classes and average (see
    /// [`aggregate_classwise`]).
    pub fn extract_events(&self, setting: CalibrationSetting) -> Result<ScoredEvents> {
        let n = self.n_samples();
        let mut score = Vec::with_capacity(n);
        let mut hit = Vec::with_capacity(n);
        match setting {
            CalibrationSetting::ClassSpecific(c) => {
                if c >= self.n_classes {
                    return Err(Error::LabelOutOfRange {
                        sample: 0,
                        label: c,
                        n_classes: self.n_classes,
                    });
                }
                for i in 0..n {
                    score.push(self.scores[(i, c)]);
                    hit.push(self.labels[i] == c);
                }
            }
            CalibrationSetting::Confidence => {
                for i in 0..n {
                    let pred = self.predicted_class(i);
                    score.push(self.scores[(i, pred)]);
                    hit.push(self.labels[i] == pred);
                }
            }
            CalibrationSetting::ClassWise => return Err(Error::ClassWiseNotReducible),
        }
        ScoredEvents::new(score, hit, setting)
    }
}

/// One-dimensional calibration data: a score in [0, 1] per sample and whether
/// the event of interest occurred.
#[derive(Debug, Clone)]
pub struct ScoredEvents {
    score: Vec<f64>,
    hit: Vec<bool>,
    class_prior: f64,
    setting: CalibrationSetting,
}

impl ScoredEvents {
    /// Builds an event stream, computing the empirical class prior.
    pub fn new(score: Vec<f64>, hit: Vec<bool>, setting: CalibrationSetting) -> Result<Self> {
        if score.is_empty() {
            return Err(Error::EmptyInput("scored events"));
        }
        if score.len() != hit.len() {
            return Err(Error::DimensionMismatch {
                context: "scores vs hits",
                expected: score.len(),
                got: hit.len(),
            });
        }
        for (i, &s) in score.iter().enumerate() {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::ScoreOutOfRange { index: i, value: s });
            }
        }
        let class_prior = hit.iter().filter(|&&h| h).count() as f64 / hit.len() as f64;
        Ok(Self {
            score,
            hit,
            class_prior,
            setting,
        })
    }

    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.score
    }

    pub fn hits(&self) -> &[bool] {
        &self.hit
    }

    /// Empirical frequency of the event; for confidence events this is the
    /// model's accuracy on the holdout.
    pub fn class_prior(&self) -> f64 {
        self.class_prior
    }

    pub fn setting(&self) -> CalibrationSetting {
        self.setting
    }

    /// All hits or all misses — the conditional event probability is constant
    /// and density-ratio estimators degenerate.
    pub fn is_degenerate(&self) -> bool {
        self.class_prior == 0.0 || self.class_prior == 1.0
    }

    /// Resamples `self` with replacement to the same size.
    pub fn resample<R: rand::Rng>(&self, rng: &mut R) -> Self {
        let n = self.len();
        let mut score = Vec::with_capacity(n);
        let mut hit = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            score.push(self.score[i]);
            hit.push(self.hit[i]);
        }
        let class_prior = hit.iter().filter(|&&h| h).count() as f64 / n as f64;
        Self {
            score,
            hit,
            class_prior,
            setting: self.setting,
        }
    }
}

/// A single calibration-error estimate together with what produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EceEstimate {
    pub value: f64,
    pub estimator_id: String,
    pub setting: CalibrationSetting,
    pub hyperparams: BTreeMap<String, String>,
}

impl EceEstimate {
    /// Absolute probability gaps are bounded by 1, so values land in [0, 1];
    /// quadrature roundoff up to 1e-6 is clamped away.
    pub fn new(
        value: f64,
        estimator_id: impl Into<String>,
        setting: CalibrationSetting,
        hyperparams: BTreeMap<String, String>,
    ) -> Self {
        debug_assert!(
            (-1e-6..=1.0 + 1e-6).contains(&value),
            "estimate {value} outside [0,1]"
        );
        Self {
            value: value.clamp(0.0, 1.0),
            estimator_id: estimator_id.into(),
            setting,
            hyperparams,
        }
    }
}

/// Mean of per-class estimates: the class-wise calibration error.
///
/// All inputs must come from the same estimator; the hyperparameters of the
/// first estimate are kept as representative.
pub fn aggregate_classwise(per_class: &[EceEstimate]) -> Result<EceEstimate> {
    let first = per_class
        .first()
        .ok_or(Error::EmptyInput("per-class estimates"))?;
    for e in per_class.iter().skip(1) {
        if e.estimator_id != first.estimator_id {
            return Err(Error::MixedEstimators(
                first.estimator_id.clone(),
                e.estimator_id.clone(),
            ));
        }
    }
    let value = per_class.iter().map(|e| e.value).sum::<f64>() / per_class.len() as f64;
    Ok(EceEstimate::new(
        value,
        first.estimator_id.clone(),
        CalibrationSetting::ClassWise,
        first.hyperparams.clone(),
    ))
}
