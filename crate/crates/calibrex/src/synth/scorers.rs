//! Score-producing models over synthetic datasets: natively trained logistic
//! regression and Gaussian naive Bayes, plus the exact and temperature-
//! distorted mixture posteriors.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::mixture::{analytic_posterior, distorted_posterior, softmax, Dataset, MixtureSpec};

/// Hyperparameters for the full-batch gradient-descent logistic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 5000,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic model: score(x) = softmax(W x + b).
#[derive(Debug, Clone)]
pub struct LogisticModel {
    weights: Array2<f64>, // C x d
    bias: Array1<f64>,    // C
}

impl LogisticModel {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .rows()
            .into_iter()
            .zip(&self.bias)
            .map(|(w, &b)| w.dot(&x) + b)
            .collect();
        softmax(&logits)
    }
}

/// Cross-entropy loss with L2 weight penalty and its gradient at the given
/// parameters. This is the objective the logistic fit descends; exposed so
/// the analytic gradient can be checked against finite differences.
pub fn logistic_loss_and_grad(
    features: &Array2<f64>,
    labels: &[usize],
    n_classes: usize,
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = labels.len();
    let d = features.ncols();
    let mut loss = 0.0;
    let mut grad_w = Array2::zeros((n_classes, d));
    let mut grad_b = Array1::zeros(n_classes);
    for (i, &label) in labels.iter().enumerate() {
        let x = features.row(i);
        let logits: Vec<f64> = weights
            .rows()
            .into_iter()
            .zip(bias)
            .map(|(w, &b)| w.dot(&x) + b)
            .collect();
        let probs = softmax(&logits);
        loss -= probs[label].max(1e-300).ln();
        for c in 0..n_classes {
            let residual = probs[c] - (c == label) as u8 as f64;
            grad_b[c] += residual;
            for j in 0..d {
                grad_w[(c, j)] += residual * x[j];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    grad_w.mapv_inplace(|g| g * inv_n);
    grad_b.mapv_inplace(|g| g * inv_n);
    // L2 penalty on weights only.
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    grad_w.scaled_add(l2, weights);
    (loss, grad_w, grad_b)
}

/// Fits a multinomial logistic regression by full-batch gradient descent on
/// the cross-entropy with L2 penalty, stopping when the loss change drops
/// below 1e-8 or the epoch budget runs out.
pub fn fit_logistic_regression(train: &Dataset, hyper: &LogisticHyper) -> Result<Scorer> {
    let c = train.n_classes();
    let present = distinct_classes(train.labels());
    if present < 2 {
        return Err(Error::Training(format!(
            "logistic regression needs at least 2 classes present, got {present}"
        )));
    }
    let d = train.dim();
    let mut weights = Array2::zeros((c, d));
    let mut bias = Array1::zeros(c);
    let mut prev_loss = f64::INFINITY;
    for _ in 0..hyper.epochs {
        let (loss, grad_w, grad_b) = logistic_loss_and_grad(
            train.features(),
            train.labels(),
            c,
            &weights,
            &bias,
            hyper.l2,
        );
        weights.scaled_add(-hyper.learning_rate, &grad_w);
        bias.scaled_add(-hyper.learning_rate, &grad_b);
        if (prev_loss - loss).abs() < 1e-8 {
            break;
        }
        prev_loss = loss;
    }
    Ok(Scorer::LogisticRegression(LogisticModel { weights, bias }))
}

/// Gaussian naive Bayes: per-class, per-feature mean and variance with
/// empirical class priors.
#[derive(Debug, Clone)]
pub struct NaiveBayesModel {
    log_priors: Vec<f64>, // -inf for absent classes
    means: Array2<f64>,   // C x d
    vars: Array2<f64>,    // C x d, floored
}

const VARIANCE_FLOOR: f64 = 1e-9;

impl NaiveBayesModel {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let d = self.means.ncols();
        let logits: Vec<f64> = (0..self.log_priors.len())
            .map(|c| {
                if self.log_priors[c] == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                let mut log_lik = self.log_priors[c];
                for j in 0..d {
                    let var = self.vars[(c, j)];
                    let diff = x[j] - self.means[(c, j)];
                    log_lik += -0.5 * ((2.0 * PI * var).ln() + diff * diff / var);
                }
                log_lik
            })
            .collect();
        softmax(&logits)
    }
}

/// Fits a Gaussian naive Bayes model. Classes absent from the training set
/// get prior 0; classes present with a single sample are rejected since their
/// variance is undefined.
pub fn fit_gaussian_naive_bayes(train: &Dataset) -> Result<Scorer> {
    let c = train.n_classes();
    let d = train.dim();
    let n = train.n_samples();
    let mut counts = vec![0usize; c];
    for &label in train.labels() {
        counts[label] += 1;
    }
    if counts.iter().filter(|&&k| k > 0).count() < 2 {
        return Err(Error::Training(
            "naive Bayes needs at least 2 classes present".into(),
        ));
    }
    let mut means: Array2<f64> = Array2::zeros((c, d));
    let mut vars: Array2<f64> = Array2::zeros((c, d));
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        if count < 2 {
            return Err(Error::Training(format!(
                "class {class} has {count} sample(s); need at least 2 for a variance"
            )));
        }
        for (i, &label) in train.labels().iter().enumerate() {
            if label == class {
                for j in 0..d {
                    means[(class, j)] += train.features()[(i, j)];
                }
            }
        }
        for j in 0..d {
            means[(class, j)] /= count as f64;
        }
        for (i, &label) in train.labels().iter().enumerate() {
            if label == class {
                for j in 0..d {
                    let diff = train.features()[(i, j)] - means[(class, j)];
                    vars[(class, j)] += diff * diff;
                }
            }
        }
        for j in 0..d {
            vars[(class, j)] = (vars[(class, j)] / (count - 1) as f64).max(VARIANCE_FLOOR);
        }
    }
    let log_priors = counts
        .iter()
        .map(|&k| {
            if k == 0 {
                f64::NEG_INFINITY
            } else {
                (k as f64 / n as f64).ln()
            }
        })
        .collect();
    Ok(Scorer::GaussianNaiveBayes(NaiveBayesModel {
        log_priors,
        means,
        vars,
    }))
}

fn distinct_classes(labels: &[usize]) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for &l in labels {
        seen.insert(l);
    }
    seen.len()
}

/// A score-producing model; every variant emits simplex vectors.
#[derive(Debug, Clone)]
pub enum Scorer {
    LogisticRegression(LogisticModel),
    GaussianNaiveBayes(NaiveBayesModel),
    AnalyticPosterior { spec: MixtureSpec },
    DistortedPosterior { spec: MixtureSpec, temperature: f64 },
}

impl Scorer {
    pub fn analytic(spec: MixtureSpec) -> Self {
        Scorer::AnalyticPosterior { spec }
    }

    pub fn distorted(spec: MixtureSpec, temperature: f64) -> Result<Self> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Scorer::DistortedPosterior { spec, temperature })
    }

    /// Simplex score vector for one feature vector.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Scorer::LogisticRegression(m) => m.score(ArrayView1::from(x)),
            Scorer::GaussianNaiveBayes(m) => m.score(ArrayView1::from(x)),
            Scorer::AnalyticPosterior { spec } => analytic_posterior(spec, x),
            Scorer::DistortedPosterior { spec, temperature } => {
                distorted_posterior(spec, x, *temperature).expect("temperature validated")
            }
        }
    }

    /// Scores a whole feature matrix into an N x C matrix.
    pub fn score_matrix(&self, features: &Array2<f64>) -> Array2<f64> {
        let n = features.nrows();
        let c = self.n_classes();
        let mut scores = Array2::zeros((n, c));
        let mut x = vec![0.0; features.ncols()];
        for i in 0..n {
            for (j, v) in x.iter_mut().enumerate() {
                *v = features[(i, j)];
            }
            let row = self.score(&x);
            for (j, &p) in row.iter().enumerate() {
                scores[(i, j)] = p;
            }
        }
        scores
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Scorer::LogisticRegression(m) => m.weights.nrows(),
            Scorer::GaussianNaiveBayes(m) => m.log_priors.len(),
            Scorer::AnalyticPosterior { spec } => spec.n_classes,
            Scorer::DistortedPosterior { spec, .. } => spec.n_classes,
        }
    }

    pub fn kind_id(&self) -> String {
        match self {
            Scorer::LogisticRegression(_) => "logistic_regression".into(),
            Scorer::GaussianNaiveBayes(_) => "gaussian_naive_bayes".into(),
            Scorer::AnalyticPosterior { .. } => "analytic_posterior".into(),
            Scorer::DistortedPosterior { temperature, .. } => {
                format!("distorted_posterior_t{temperature}")
            }
        }
    }
}
