//! Estimator-assessment protocol: ground-truth calibration errors from large
//! holdouts, bootstrapped evaluation sets across sizes, percentile
//! approximation errors, and the cell grid the benchmark distributes over.
//!
//! Every cell derives its random streams from the master seed and its own
//! coordinates, so scheduling and worker counts cannot affect results.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::config::{BandwidthHeuristic, BandwidthPolicy, BenchConfig, EstimatorConfig, ModelConfig};
use crate::bench::report::{assemble_report, BenchmarkReport};
use crate::binned::{binned_ece, AffectationMapping, BinningScheme};
use crate::core::{aggregate_classwise, CalibrationSetting, EceEstimate, LabeledScores, ScoredEvents};
use crate::density::{ece_d, silverman_bandwidth, Grid};
use crate::error::{Error, Result};
use crate::stats::{mix_seed, percentile};
use crate::synth::{
    fit_gaussian_naive_bayes, fit_logistic_regression, sample_dataset, Dataset, MixtureSpec, Scorer,
};

// Stream tags keep the per-purpose RNG streams disjoint.
const STREAM_SPEC: u64 = 1;
const STREAM_HOLDOUT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_EVAL: u64 = 4;

/// Scores a dataset with a scorer into a validated holdout.
pub fn score_dataset(scorer: &Scorer, data: &Dataset) -> Result<LabeledScores> {
    let scores = scorer.score_matrix(data.features());
    LabeledScores::new(scores, data.labels().to_vec())
}

/// Applies an estimator policy to one event stream, resolving heuristic
/// hyperparameters against it.
pub fn apply_estimator(config: &EstimatorConfig, events: &ScoredEvents) -> Result<EceEstimate> {
    let scores = events.scores();
    match config {
        EstimatorConfig::Legacy { bins } => {
            let binning = BinningScheme::uniform(bins.resolve(events.len()))?;
            binned_ece(events, &AffectationMapping::one_bin(scores, &binning)?)
        }
        EstimatorConfig::Adaptive { bins } => {
            let binning = BinningScheme::adaptive(scores, bins.resolve(events.len()))?;
            binned_ece(events, &AffectationMapping::one_bin(scores, &binning)?)
        }
        EstimatorConfig::Convex { bins } => {
            let binning = BinningScheme::uniform(bins.resolve(events.len()))?;
            binned_ece(events, &AffectationMapping::convex(scores, &binning)?)
        }
        EstimatorConfig::AdaptiveConvex { bins } => {
            let binning = BinningScheme::adaptive(scores, bins.resolve(events.len()))?;
            binned_ece(events, &AffectationMapping::convex(scores, &binning)?)
        }
        EstimatorConfig::Kde { bandwidth } => {
            let h = match bandwidth {
                BandwidthPolicy::Fixed(h) => *h,
                BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman) => {
                    silverman_bandwidth(scores)?
                }
            };
            ece_d(events, h, &Grid::default())
        }
    }
}

/// Applies an estimator policy in a calibration setting; the class-wise
/// setting averages class-specific estimates over all classes.
pub fn estimate_for_setting(
    config: &EstimatorConfig,
    scored: &LabeledScores,
    setting: CalibrationSetting,
) -> Result<EceEstimate> {
    match setting {
        CalibrationSetting::ClassWise => {
            let per_class: Vec<EceEstimate> = (0..scored.n_classes())
                .map(|c| {
                    let events = scored.extract_events(CalibrationSetting::ClassSpecific(c))?;
                    apply_estimator(config, &events)
                })
                .collect::<Result<_>>()?;
            aggregate_classwise(&per_class)
        }
        other => apply_estimator(config, &scored.extract_events(other)?),
    }
}

/// Reference calibration error from a fine-grained legacy estimator on a
/// validated holdout.
pub fn truth_from_scores(
    scored: &LabeledScores,
    truth_bins: usize,
    setting: CalibrationSetting,
) -> Result<f64> {
    let config = EstimatorConfig::Legacy {
        bins: crate::bench::config::BinPolicy::Fixed(truth_bins),
    };
    estimate_for_setting(&config, scored, setting).map(|e| e.value)
}

/// Samples a fresh holdout from the spec, scores it, and computes the
/// ground-truth calibration error with a high-granularity uniform binning.
pub fn ground_truth_ece(
    scorer: &Scorer,
    spec: &MixtureSpec,
    holdout_size: usize,
    truth_bins: usize,
    setting: CalibrationSetting,
    seed: u64,
) -> Result<f64> {
    let holdout = sample_dataset(spec, holdout_size, seed)?;
    let scored = score_dataset(scorer, &holdout)?;
    truth_from_scores(&scored, truth_bins, setting)
}

/// Result of evaluating one estimator policy at one evaluation size.
#[derive(Debug, Clone, Copy)]
pub struct EvalSummary {
    /// The requested percentile of the per-draw approximation errors.
    pub percentile_error: f64,
    /// Set when the ground truth was 0 and absolute errors were used instead
    /// of relative ones.
    pub absolute_fallback: bool,
}

/// Draws bootstrap evaluation sets from the holdout pool, estimates on each,
/// and summarizes the approximation errors |estimate - truth| / truth by
/// their `error_percentile`-th percentile.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_estimator(
    estimator: &EstimatorConfig,
    pool: &LabeledScores,
    setting: CalibrationSetting,
    truth: f64,
    eval_size: usize,
    n_boot_eval: usize,
    error_percentile: f64,
    seed: u64,
) -> Result<EvalSummary> {
    if eval_size == 0 || eval_size > pool.n_samples() {
        return Err(Error::InvalidParameter(format!(
            "eval size {eval_size} outside pool of {}",
            pool.n_samples()
        )));
    }
    if n_boot_eval == 0 {
        return Err(Error::InvalidParameter("need at least one bootstrap draw".into()));
    }
    let absolute_fallback = truth <= 0.0;
    let n_pool = pool.n_samples();
    let mut errors = Vec::with_capacity(n_boot_eval);
    let mut indices = vec![0usize; eval_size];
    for draw in 0..n_boot_eval {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[draw as u64]));
        for slot in indices.iter_mut() {
            *slot = rng.random_range(0..n_pool);
        }
        let eval_set = pool.select_rows(&indices);
        let estimate = estimate_for_setting(estimator, &eval_set, setting)?;
        let error = if absolute_fallback {
            (estimate.value - truth).abs()
        } else {
            (estimate.value - truth).abs() / truth
        };
        errors.push(error);
    }
    Ok(EvalSummary {
        percentile_error: percentile(&errors, error_percentile),
        absolute_fallback,
    })
}

/// Coordinates of one benchmark cell (one score distribution).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCoords {
    pub class_idx: usize,
    pub dim_idx: usize,
    pub spec_idx: usize,
    pub model_idx: usize,
    pub split_idx: usize,
}

impl CellCoords {
    pub fn label(&self) -> String {
        format!(
            "c{}_d{}_s{}_m{}_t{}",
            self.class_idx, self.dim_idx, self.spec_idx, self.model_idx, self.split_idx
        )
    }
}

/// One (setting, estimator, size) measurement inside a cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRow {
    pub setting: CalibrationSetting,
    pub estimator_idx: usize,
    pub eval_size: usize,
    pub ground_truth: f64,
    pub p95_error: Option<f64>,
    pub absolute_fallback: bool,
    pub failure: Option<String>,
}

/// Everything measured for one score distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub coords: CellCoords,
    pub model_id: String,
    pub n_classes: usize,
    pub dim: usize,
    pub rows: Vec<CellRow>,
    pub failure: Option<String>,
}

fn build_scorer(model: &ModelConfig, spec: &MixtureSpec, train: &Dataset) -> Result<Scorer> {
    match model {
        ModelConfig::LogisticRegression { hyper } => fit_logistic_regression(train, hyper),
        ModelConfig::GaussianNaiveBayes => fit_gaussian_naive_bayes(train),
        ModelConfig::AnalyticPosterior => Ok(Scorer::analytic(spec.clone())),
        ModelConfig::DistortedPosterior { temperature } => {
            Scorer::distorted(spec.clone(), *temperature)
        }
    }
}

fn compute_cell_inner(config: &BenchConfig, coords: CellCoords) -> Result<CellOutcome> {
    let n_classes = config.class_counts[coords.class_idx];
    let dim = config.dims[coords.dim_idx];
    let distribution = [
        coords.class_idx as u64,
        coords.dim_idx as u64,
        coords.spec_idx as u64,
    ];
    let spec_seed = mix_seed(config.seed, &with_tag(STREAM_SPEC, &distribution));
    let spec = MixtureSpec::sample_with_modes(n_classes, dim, config.modes_per_class, spec_seed)?;

    let train_seed = mix_seed(
        config.seed,
        &with_tag(
            STREAM_TRAIN,
            &[
                coords.class_idx as u64,
                coords.dim_idx as u64,
                coords.spec_idx as u64,
                coords.split_idx as u64,
            ],
        ),
    );
    let train = sample_dataset(&spec, config.train_size, train_seed)?;
    let model = &config.models[coords.model_idx];
    let scorer = build_scorer(model, &spec, &train)?;

    // The holdout is shared by every model and split of this distribution.
    let holdout_seed = mix_seed(config.seed, &with_tag(STREAM_HOLDOUT, &distribution));
    let holdout = sample_dataset(&spec, config.holdout_size, holdout_seed)?;
    let scored = score_dataset(&scorer, &holdout)?;

    let mut rows = Vec::new();
    for (setting_idx, &setting) in config.settings.iter().enumerate() {
        let truth = truth_from_scores(&scored, config.truth_bins, setting)?;
        for (estimator_idx, estimator) in config.estimators.iter().enumerate() {
            for (size_idx, &eval_size) in config.eval_sizes.iter().enumerate() {
                let eval_seed = mix_seed(
                    config.seed,
                    &with_tag(
                        STREAM_EVAL,
                        &[
                            coords.class_idx as u64,
                            coords.dim_idx as u64,
                            coords.spec_idx as u64,
                            coords.model_idx as u64,
                            coords.split_idx as u64,
                            setting_idx as u64,
                            estimator_idx as u64,
                            size_idx as u64,
                        ],
                    ),
                );
                let row = match evaluate_estimator(
                    estimator,
                    &scored,
                    setting,
                    truth,
                    eval_size,
                    config.n_boot_eval,
                    config.error_percentile,
                    eval_seed,
                ) {
                    Ok(summary) => CellRow {
                        setting,
                        estimator_idx,
                        eval_size,
                        ground_truth: truth,
                        p95_error: Some(summary.percentile_error),
                        absolute_fallback: summary.absolute_fallback,
                        failure: None,
                    },
                    Err(e) => CellRow {
                        setting,
                        estimator_idx,
                        eval_size,
                        ground_truth: truth,
                        p95_error: None,
                        absolute_fallback: false,
                        failure: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
        }
    }
    Ok(CellOutcome {
        coords,
        model_id: model.id(),
        n_classes,
        dim,
        rows,
        failure: None,
    })
}

fn with_tag(tag: u64, parts: &[u64]) -> Vec<u64> {
    std::iter::once(tag).chain(parts.iter().copied()).collect()
}

/// Computes one cell; failures are recorded in the outcome, never propagated,
/// so a degenerate scorer cannot abort the run.
pub fn compute_cell(config: &BenchConfig, coords: CellCoords) -> CellOutcome {
    compute_cell_inner(config, coords).unwrap_or_else(|e| CellOutcome {
        coords,
        model_id: config.models[coords.model_idx].id(),
        n_classes: config.class_counts[coords.class_idx],
        dim: config.dims[coords.dim_idx],
        rows: Vec::new(),
        failure: Some(e.to_string()),
    })
}

/// Execution options for a benchmark run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where checkpoints are written; no checkpointing when unset.
    pub out_dir: Option<PathBuf>,
    /// Reuse completed cell checkpoints from a previous run.
    pub resume: bool,
    /// Worker thread count; rayon's default when unset.
    pub workers: Option<usize>,
}

/// All cell coordinates of a config, in deterministic order.
pub fn cell_grid(config: &BenchConfig) -> Vec<CellCoords> {
    let mut cells = Vec::with_capacity(config.n_cells());
    for class_idx in 0..config.class_counts.len() {
        for dim_idx in 0..config.dims.len() {
            for spec_idx in 0..config.specs_per_combination {
                for model_idx in 0..config.models.len() {
                    for split_idx in 0..config.train_splits {
                        cells.push(CellCoords {
                            class_idx,
                            dim_idx,
                            spec_idx,
                            model_idx,
                            split_idx,
                        });
                    }
                }
            }
        }
    }
    cells
}

fn checkpoint_path(dir: &Path, config_hash: &str, coords: CellCoords) -> PathBuf {
    let digest = Sha256::digest(format!("{config_hash}|{}", coords.label()).as_bytes());
    let key: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    dir.join(format!("cell_{key}.json"))
}

fn load_checkpoint(path: &Path, coords: CellCoords) -> Option<CellOutcome> {
    let text = std::fs::read_to_string(path).ok()?;
    let outcome: CellOutcome = serde_json::from_str(&text).ok()?;
    (outcome.coords == coords).then_some(outcome)
}

/// Runs every cell of the benchmark, optionally resuming from checkpoints.
/// Cell seeds depend only on coordinates, so the outcome vector is identical
/// for any worker count.
pub fn run_cells(config: &BenchConfig, opts: &RunOptions) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    let cells = cell_grid(config);
    let config_hash = config.config_hash();
    let checkpoint_dir = match &opts.out_dir {
        Some(dir) => {
            let ckpt = dir.join("checkpoints");
            std::fs::create_dir_all(&ckpt)?;
            Some(ckpt)
        }
        None => None,
    };

    let run = || -> Vec<CellOutcome> {
        cells
            .par_iter()
            .map(|&coords| {
                if let Some(dir) = &checkpoint_dir {
                    let path = checkpoint_path(dir, &config_hash, coords);
                    if opts.resume {
                        if let Some(outcome) = load_checkpoint(&path, coords) {
                            return outcome;
                        }
                    }
                    let outcome = compute_cell(config, coords);
                    if let Ok(json) = serde_json::to_string(&outcome) {
                        let _ = std::fs::write(&path, json);
                    }
                    outcome
                } else {
                    compute_cell(config, coords)
                }
            })
            .collect()
    };

    let outcomes = match opts.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    };
    Ok(outcomes)
}

/// Runs the full benchmark and aggregates the report.
pub fn run_benchmark(config: &BenchConfig, opts: &RunOptions) -> Result<BenchmarkReport> {
    let cells = run_cells(config, opts)?;
    Ok(assemble_report(config, &cells))
}
