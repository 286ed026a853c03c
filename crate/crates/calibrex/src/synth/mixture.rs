//! Gaussian-mixture data distributions with analytically known posteriors.
//!
//! Each class owns a fixed number of mixture modes. Mode means are drawn
//! uniformly in [0, 1]^d and covariances are built as A * A^T from a matrix
//! with entries uniform in [-0.3, 0.3], regularized to strict positive
//! definiteness. Because the generating distribution is known, the exact
//! Bayes posterior is computable, which gives the benchmark calibrated-by-
//! construction reference scorers.

use std::f64::consts::PI;
use std::sync::OnceLock;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of mixture modes per class.
pub const DEFAULT_MODES_PER_CLASS: usize = 4;

const COV_REGULARIZATION: f64 = 1e-6;

/// Lower-triangular Cholesky factor with cached log-determinant of the
/// covariance.
#[derive(Debug, Clone)]
pub(crate) struct CholeskyFactor {
    lower: Vec<f64>, // d x d row-major, upper part zero
    dim: usize,
    log_det: f64,
}

impl CholeskyFactor {
    fn decompose(cov: &[f64], dim: usize) -> Result<Self> {
        let mut lower = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = cov[i * dim + j];
                for k in 0..j {
                    sum -= lower[i * dim + k] * lower[j * dim + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::InvalidParameter(
                            "covariance matrix is not positive definite".into(),
                        ));
                    }
                    lower[i * dim + j] = sum.sqrt();
                } else {
                    lower[i * dim + j] = sum / lower[j * dim + j];
                }
            }
        }
        let log_det = 2.0 * (0..dim).map(|i| lower[i * dim + i].ln()).sum::<f64>();
        Ok(Self {
            lower,
            dim,
            log_det,
        })
    }

    /// Solves L y = v in place.
    fn forward_solve(&self, v: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut sum = v[i];
            for k in 0..i {
                sum -= self.lower[i * d + k] * v[k];
            }
            v[i] = sum / self.lower[i * d + i];
        }
    }

    /// x = mean + L z for a standard normal z.
    fn transform(&self, mean: &[f64], z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut sum = mean[i];
            for k in 0..=i {
                sum += self.lower[i * d + k] * z[k];
            }
            out[i] = sum;
        }
    }
}

/// One multivariate-normal mixture mode belonging to a class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianMode {
    pub class: usize,
    pub mean: Vec<f64>,
    /// Covariance matrix, row-major d x d.
    pub cov: Vec<f64>,
    #[serde(skip)]
    chol: OnceLock<CholeskyFactor>,
}

impl GaussianMode {
    pub fn new(class: usize, mean: Vec<f64>, cov: Vec<f64>) -> Self {
        Self {
            class,
            mean,
            cov,
            chol: OnceLock::new(),
        }
    }

    fn chol(&self) -> &CholeskyFactor {
        self.chol.get_or_init(|| {
            CholeskyFactor::decompose(&self.cov, self.mean.len())
                .expect("mode covariance validated positive definite")
        })
    }

    /// Log density of the mode at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let chol = self.chol();
        let mut v: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        chol.forward_solve(&mut v);
        let quad: f64 = v.iter().map(|y| y * y).sum();
        -0.5 * (d as f64 * (2.0 * PI).ln() + chol.log_det + quad)
    }
}

/// A Gaussian-mixture generating distribution with uniform class priors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub modes_per_class: usize,
    pub seed: u64,
    pub modes: Vec<GaussianMode>,
}

impl MixtureSpec {
    /// Draws a random mixture: `modes_per_class` modes per class, mode means
    /// uniform in [0, 1]^d, covariances A * A^T (entries of A uniform in
    /// [-0.3, 0.3]) plus a small ridge for strict positive definiteness.
    pub fn sample_with_modes(
        n_classes: usize,
        dim: usize,
        modes_per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidParameter("need at least 2 classes".into()));
        }
        if dim == 0 || modes_per_class == 0 {
            return Err(Error::InvalidParameter(
                "dimension and modes per class must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::with_capacity(n_classes * modes_per_class);
        for class in 0..n_classes {
            for _ in 0..modes_per_class {
                let mean: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let a: Vec<f64> = (0..dim * dim)
                    .map(|_| rng.random::<f64>() * 0.6 - 0.3)
                    .collect();
                let mut cov = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        let mut sum = 0.0;
                        for k in 0..dim {
                            sum += a[i * dim + k] * a[j * dim + k];
                        }
                        cov[i * dim + j] = sum;
                    }
                    cov[i * dim + i] += COV_REGULARIZATION;
                }
                modes.push(GaussianMode {
                    class,
                    mean,
                    cov,
                    chol: OnceLock::new(),
                });
            }
        }
        let spec = Self {
            n_classes,
            dim,
            modes_per_class,
            seed,
            modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Draws a random mixture with the default 4 modes per class.
    pub fn sample(n_classes: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::sample_with_modes(n_classes, dim, DEFAULT_MODES_PER_CLASS, seed)
    }

    /// Builds a mixture from explicit modes.
    pub fn from_modes(
        n_classes: usize,
        dim: usize,
        modes_per_class: usize,
        seed: u64,
        modes: Vec<GaussianMode>,
    ) -> Result<Self> {
        let spec = Self {
            n_classes,
            dim,
            modes_per_class,
            seed,
            modes,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks structural invariants (also factors every covariance, so a
    /// deserialized spec fails fast on a non-PD matrix).
    pub fn validate(&self) -> Result<()> {
        if self.modes.len() != self.n_classes * self.modes_per_class {
            return Err(Error::InvalidParameter(format!(
                "expected {} modes, found {}",
                self.n_classes * self.modes_per_class,
                self.modes.len()
            )));
        }
        for mode in &self.modes {
            if mode.class >= self.n_classes {
                return Err(Error::InvalidParameter(format!(
                    "mode class {} out of range",
                    mode.class
                )));
            }
            if mode.mean.len() != self.dim || mode.cov.len() != self.dim * self.dim {
                return Err(Error::InvalidParameter("mode dimension mismatch".into()));
            }
            for i in 0..self.dim {
                for j in 0..i {
                    if (mode.cov[i * self.dim + j] - mode.cov[j * self.dim + i]).abs() > 1e-12 {
                        return Err(Error::InvalidParameter(
                            "covariance matrix is not symmetric".into(),
                        ));
                    }
                }
            }
            let factor = CholeskyFactor::decompose(&mode.cov, self.dim)?;
            let _ = mode.chol.set(factor);
        }
        Ok(())
    }

    fn modes_of_class(&self, class: usize) -> impl Iterator<Item = &GaussianMode> {
        self.modes.iter().filter(move |m| m.class == class)
    }

    /// Log of the unnormalized class-conditional density at `x` (uniform
    /// class and mode priors cancel in the posterior).
    fn class_log_density(&self, class: usize, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .modes_of_class(class)
            .map(|m| m.log_density(x))
            .collect();
        log_sum_exp(&logs)
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Exact Bayes posterior P(Y = c | x) of the mixture, stabilized by max-log
/// subtraction.
pub fn analytic_posterior(spec: &MixtureSpec, x: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = (0..spec.n_classes)
        .map(|c| spec.class_log_density(c, x))
        .collect();
    softmax(&logs)
}

/// Tempered posterior softmax(log P(Y|x) / T): T = 1 recovers the analytic
/// posterior, T > 1 is under-confident, T < 1 over-confident.
pub fn distorted_posterior(spec: &MixtureSpec, x: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let logs: Vec<f64> = (0..spec.n_classes)
        .map(|c| spec.class_log_density(c, x))
        .collect();
    // Normalize to log-posteriors before tempering so T scales the posterior,
    // not the arbitrary density magnitudes.
    let lse = log_sum_exp(&logs);
    let tempered: Vec<f64> = logs.iter().map(|l| (l - lse) / temperature).collect();
    Ok(softmax(&tempered))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Labeled feature samples drawn from a mixture.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    generator: MixtureSpec,
}

impl Dataset {
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.generator.n_classes
    }

    pub fn dim(&self) -> usize {
        self.generator.dim
    }

    pub fn generator(&self) -> &MixtureSpec {
        &self.generator
    }

    /// Builds a dataset from explicit parts, checking labels against the
    /// generating spec.
    pub fn from_parts(
        features: Array2<f64>,
        labels: Vec<usize>,
        generator: MixtureSpec,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "features vs labels",
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if features.ncols() != generator.dim {
            return Err(Error::DimensionMismatch {
                context: "feature dim vs spec dim",
                expected: generator.dim,
                got: features.ncols(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= generator.n_classes) {
            return Err(Error::LabelOutOfRange {
                sample: labels.iter().position(|&l| l == bad).unwrap(),
                label: bad,
                n_classes: generator.n_classes,
            });
        }
        Ok(Self {
            features,
            labels,
            generator,
        })
    }

    /// Writes the dataset as CSV with header `x_0..x_{d-1},label`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let d = self.dim();
        let header: Vec<String> = (0..d)
            .map(|j| format!("x_{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, &label) in self.features.rows().into_iter().zip(&self.labels) {
            let values: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{label}", values.join(","))?;
        }
        Ok(())
    }
}

/// Draws `n` labeled points: class uniform, mode uniform within the class,
/// point from the mode's multivariate normal. Deterministic per seed.
pub fn sample_dataset(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyInput("dataset size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim;
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    for i in 0..n {
        let class = rng.random_range(0..spec.n_classes);
        let mode_idx = rng.random_range(0..spec.modes_per_class);
        let mode = &spec.modes[class * spec.modes_per_class + mode_idx];
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        mode.chol().transform(&mode.mean, &z, &mut x);
        for (j, &v) in x.iter().enumerate() {
            features[(i, j)] = v;
        }
        labels.push(class);
    }
    Ok(Dataset {
        features,
        labels,
        generator: spec.clone(),
    })
}
