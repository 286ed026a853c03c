//! Synthetic data distributions and score-producing models for the benchmark:
//! Gaussian mixtures with analytically known posteriors, temperature-distorted
//! variants with controlled miscalibration, and natively trained classifiers.

mod mixture;
mod scorers;

pub use mixture::{
    analytic_posterior, distorted_posterior, sample_dataset, Dataset, GaussianMode, MixtureSpec,
    DEFAULT_MODES_PER_CLASS,
};
pub use scorers::{
    fit_gaussian_naive_bayes, fit_logistic_regression, logistic_loss_and_grad, LogisticHyper,
    LogisticModel, NaiveBayesModel, Scorer,
};
