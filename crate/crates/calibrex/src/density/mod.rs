//! Density-based calibration tools: mirrored FFT kernel density estimation,
//! the Local Calibration Error, reliability curves with bootstrap bands, and
//! the density-based estimator ECE_d.
//!
//! The local calibration error at score s is `lce(s) = P(event | score = s) - s`.
//! The conditional probability is torn down with the Bayes rule into a ratio
//! of score densities (hit scores vs all scores), both estimated with the same
//! Gaussian bandwidth, and the reliability curve is `rel(s) = lce(s) + s`. The
//! estimator
//!
//! ```text
//! ECE_d = integral over [0,1] of f(s) * |lce(s)| ds
//! ```
//!
//! is integrated in the division-free form `|prior * f_hit(s) - s * f(s)|`,
//! which equals the integrand wherever f > 0 and avoids low-density ratio
//! instability.

mod kde;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::core::{EceEstimate, ScoredEvents};
use crate::error::{Error, Result};
use crate::stats::{mix_seed, percentile_sorted};

pub use kde::silverman_bandwidth;

/// Default number of grid points (step ~ 0.000244).
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Coarsest supported grid step.
pub const MAX_GRID_STEP: f64 = 0.0003;

/// Densities below `EPS_FLOOR_SCALE / n` are treated as score-free regions
/// when forming the posterior ratio.
const EPS_FLOOR_SCALE: f64 = 1e-6;

/// Uniform subdivision of [0, 1] on which densities and curves are evaluated.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Vec<f64>,
    step: f64,
}

impl Grid {
    /// A grid with `n_points` points from 0 to 1 inclusive. The step
    /// 1/(n_points - 1) must not exceed [`MAX_GRID_STEP`].
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least 2 points".into(),
            ));
        }
        let step = 1.0 / (n_points - 1) as f64;
        if step > MAX_GRID_STEP {
            return Err(Error::InvalidParameter(format!(
                "grid step {step} exceeds maximum {MAX_GRID_STEP}; use at least 3335 points"
            )));
        }
        let points = (0..n_points)
            .map(|k| k as f64 / (n_points - 1) as f64)
            .collect();
        Ok(Self { points, step })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

/// A gridded probability density over [0, 1].
///
/// Mirroring at the domain limits leaks a little kernel mass, so the
/// trapezoidal integral sits slightly below 1 (within 0.02 for bandwidths up
/// to ~0.3) rather than exactly at it.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    grid: Grid,
    values: Vec<f64>,
    bandwidth: f64,
}

impl DensityEstimate {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Trapezoidal integral over [0, 1].
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step)
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let sum: f64 = values.iter().sum();
    step * (sum - 0.5 * (values[0] + values[values.len() - 1]))
}

/// Gaussian KDE of scores on [0, 1] with boundary mirroring, computed via FFT.
pub fn kde_mirrored(scores: &[f64], bandwidth: f64, grid: &Grid) -> Result<DensityEstimate> {
    let (values, _) = kde::mirrored_density_pair(scores, None, bandwidth, grid)?;
    Ok(DensityEstimate {
        grid: grid.clone(),
        values,
        bandwidth,
    })
}

/// Pointwise bootstrap percentile bands around a reliability curve.
#[derive(Debug, Clone)]
pub struct BootstrapBands {
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub percentiles: (f64, f64),
}

/// Gridded local calibration error and reliability curve, optionally with
/// bootstrap bands.
#[derive(Debug, Clone)]
pub struct ReliabilityCurve {
    grid: Grid,
    lce: Vec<f64>,
    rel: Vec<f64>,
    bands: Option<BootstrapBands>,
    degenerate: bool,
    bandwidth: f64,
}

impl ReliabilityCurve {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Local calibration error per grid point, in [-1, 1].
    pub fn lce(&self) -> &[f64] {
        &self.lce
    }

    /// Reliability rel(s) = lce(s) + s per grid point.
    pub fn rel(&self) -> &[f64] {
        &self.rel
    }

    pub fn bands(&self) -> Option<&BootstrapBands> {
        self.bands.as_ref()
    }

    /// Set when the events were all hits or all misses, making the posterior
    /// saturate at 1 or 0.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

/// Posterior event probability per grid point via the Bayes rule:
/// `prior * f_hit(s) / f(s)`, clamped to [0, 1]. Grid points where the score
/// density falls below the floor copy the nearest well-defined value.
fn posterior_curve(events: &ScoredEvents, bandwidth: f64, grid: &Grid) -> Result<Vec<f64>> {
    let prior = events.class_prior();
    if events.is_degenerate() {
        // Saturated posterior; still validate the inputs.
        kde::mirrored_density_pair(events.scores(), None, bandwidth, grid)?;
        return Ok(vec![prior; grid.len()]);
    }
    let hit_scores: Vec<f64> = events
        .scores()
        .iter()
        .zip(events.hits())
        .filter(|&(_, &h)| h)
        .map(|(&s, _)| s)
        .collect();
    let (f_all, f_hit) =
        kde::mirrored_density_pair(events.scores(), Some(&hit_scores), bandwidth, grid)?;
    let f_hit = f_hit.expect("pair evaluation returns the second density");

    let floor = EPS_FLOOR_SCALE / grid.len() as f64;
    let mut posterior = vec![f64::NAN; grid.len()];
    for j in 0..grid.len() {
        if f_all[j] >= floor {
            posterior[j] = (prior * f_hit[j] / f_all[j]).clamp(0.0, 1.0);
        }
    }
    fill_from_nearest(&mut posterior, prior);
    Ok(posterior)
}

/// Replaces NaN holes with the value at the nearest defined index (ties go
/// left). If nothing is defined the fallback is used throughout.
fn fill_from_nearest(values: &mut [f64], fallback: f64) {
    let n = values.len();
    let mut prev_valid: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for (j, slot) in prev_valid.iter_mut().enumerate() {
        if !values[j].is_nan() {
            last = Some(j);
        }
        *slot = last;
    }
    let mut next_valid: Vec<Option<usize>> = vec![None; n];
    let mut next = None;
    for j in (0..n).rev() {
        if !values[j].is_nan() {
            next = Some(j);
        }
        next_valid[j] = next;
    }
    for j in 0..n {
        if values[j].is_nan() {
            values[j] = match (prev_valid[j], next_valid[j]) {
                (Some(p), Some(q)) => {
                    if j - p <= q - j {
                        values[p]
                    } else {
                        values[q]
                    }
                }
                (Some(p), None) => values[p],
                (None, Some(q)) => values[q],
                (None, None) => fallback,
            };
        }
    }
}

/// Estimates the local calibration error curve of an event stream.
///
/// Both score densities use the same bandwidth. Degenerate event streams
/// (all hits or all misses) return a flagged constant curve instead of an
/// error so estimation loops never abort.
pub fn estimate_lce(events: &ScoredEvents, bandwidth: f64, grid: &Grid) -> Result<ReliabilityCurve> {
    let posterior = posterior_curve(events, bandwidth, grid)?;
    let lce: Vec<f64> = posterior
        .iter()
        .zip(grid.points())
        .map(|(&p, &s)| p - s)
        .collect();
    let rel: Vec<f64> = lce.iter().zip(grid.points()).map(|(&l, &s)| l + s).collect();
    Ok(ReliabilityCurve {
        grid: grid.clone(),
        lce,
        rel,
        bands: None,
        degenerate: events.is_degenerate(),
        bandwidth,
    })
}

/// Bootstrapped reliability curve: `n_boot` resamples with replacement, a
/// pointwise median curve, and pointwise percentile bands.
///
/// Resamples derive independent streams from `seed`, so the result is
/// deterministic regardless of evaluation parallelism.
pub fn bootstrap_reliability(
    events: &ScoredEvents,
    bandwidth: f64,
    grid: &Grid,
    n_boot: usize,
    band: (f64, f64),
    seed: u64,
) -> Result<ReliabilityCurve> {
    if n_boot < 2 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let (low, high) = band;
    if !(0.0..=100.0).contains(&low) || !(0.0..=100.0).contains(&high) || low >= high {
        return Err(Error::InvalidParameter(format!(
            "invalid percentile band ({low}, {high})"
        )));
    }

    let curves: Vec<Vec<f64>> = (0..n_boot)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[i as u64]));
            let resample = events.resample(&mut rng);
            posterior_curve(&resample, bandwidth, grid)
        })
        .collect::<Result<_>>()?;

    let n = grid.len();
    let mut lce = Vec::with_capacity(n);
    let mut rel = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut column = vec![0.0; n_boot];
    for j in 0..n {
        for (k, curve) in curves.iter().enumerate() {
            column[k] = curve[j];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = percentile_sorted(&column, 50.0);
        lower.push(percentile_sorted(&column, low));
        median.push(med);
        upper.push(percentile_sorted(&column, high));
        let s = grid.points()[j];
        let l = med - s;
        lce.push(l);
        rel.push(l + s);
    }

    Ok(ReliabilityCurve {
        grid: grid.clone(),
        lce,
        rel,
        bands: Some(BootstrapBands {
            lower,
            median,
            upper,
            percentiles: band,
        }),
        degenerate: events.is_degenerate(),
        bandwidth,
    })
}

/// Density-based expected calibration error: trapezoidal integration of
/// `|prior * f_hit(s) - s * f(s)|` over the grid.
pub fn ece_d(events: &ScoredEvents, bandwidth: f64, grid: &Grid) -> Result<EceEstimate> {
    let prior = events.class_prior();
    let integrand: Vec<f64> = if prior == 0.0 {
        let (f_all, _) = kde::mirrored_density_pair(events.scores(), None, bandwidth, grid)?;
        f_all
            .iter()
            .zip(grid.points())
            .map(|(&f, &s)| s * f)
            .collect()
    } else if prior == 1.0 {
        let (f_all, _) = kde::mirrored_density_pair(events.scores(), None, bandwidth, grid)?;
        f_all
            .iter()
            .zip(grid.points())
            .map(|(&f, &s)| f * (1.0 - s))
            .collect()
    } else {
        let hit_scores: Vec<f64> = events
            .scores()
            .iter()
            .zip(events.hits())
            .filter(|&(_, &h)| h)
            .map(|(&s, _)| s)
            .collect();
        let (f_all, f_hit) =
            kde::mirrored_density_pair(events.scores(), Some(&hit_scores), bandwidth, grid)?;
        let f_hit = f_hit.expect("pair evaluation returns the second density");
        f_all
            .iter()
            .zip(&f_hit)
            .zip(grid.points())
            .map(|((&f, &fh), &s)| (prior * fh - s * f).abs())
            .collect()
    };
    let value = trapezoid(&integrand, grid.step()).clamp(0.0, 1.0);
    Ok(EceEstimate::new(
        value,
        "ECE_d",
        events.setting(),
        BTreeMap::from([("bandwidth".to_string(), bandwidth.to_string())]),
    ))
}

/// Writes a reliability curve as CSV with columns `s,lce,rel[,band_low,band_high]`,
/// optionally keeping only every `downsample`-th grid point (the endpoints are
/// always kept).
pub fn write_curve_csv<W: std::io::Write>(
    out: &mut W,
    curve: &ReliabilityCurve,
    downsample: usize,
    header_comments: &[String],
) -> Result<()> {
    let every = downsample.max(1);
    for line in header_comments {
        writeln!(out, "# {line}")?;
    }
    if curve.is_degenerate() {
        writeln!(
            out,
            "# degenerate: all events share one outcome; posterior saturates"
        )?;
    }
    let with_bands = curve.bands.is_some();
    if with_bands {
        writeln!(out, "s,lce,rel,band_low,band_high")?;
    } else {
        writeln!(out, "s,lce,rel")?;
    }
    let n = curve.grid.len();
    let mut indices: Vec<usize> = (0..n).step_by(every).collect();
    if *indices.last().unwrap() != n - 1 {
        indices.push(n - 1);
    }
    for j in indices {
        let s = curve.grid.points()[j];
        if let Some(bands) = &curve.bands {
            writeln!(
                out,
                "{s},{},{},{},{}",
                curve.lce[j], curve.rel[j], bands.lower[j], bands.upper[j]
            )?;
        } else {
            writeln!(out, "{s},{},{}", curve.lce[j], curve.rel[j])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::CalibrationSetting;

    fn events(scores: Vec<f64>, hits: Vec<bool>) -> ScoredEvents {
        ScoredEvents::new(scores, hits, CalibrationSetting::Confidence).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = Grid::default();
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(*g.points().last().unwrap(), 1.0);
        assert!(g.step() <= MAX_GRID_STEP);
        assert!(Grid::new(1000).is_err());
        assert!(Grid::new(3335).is_ok());
    }

    #[test]
    fn silverman_sigma_branch_exact() {
        // 50 symmetric pairs at 0.5 +/- a with a chosen so the sample standard
        // deviation is exactly 0.2; the IQR (2a ~ 0.4) loses the min, and
        // h = 0.9 * 0.2 * 100^(-1/5) ~ 0.07166.
        let a = 0.2 * (99f64 / 100.0).sqrt();
        let mut scores = Vec::with_capacity(100);
        for _ in 0..50 {
            scores.push(0.5 - a);
            scores.push(0.5 + a);
        }
        let h = silverman_bandwidth(&scores).unwrap();
        assert!((h - 0.9 * 0.2 * (100f64).powf(-0.2)).abs() < 1e-12);
        assert!((h - 0.07166).abs() < 1e-5);
    }

    #[test]
    fn silverman_rejects_tiny_samples() {
        assert!(silverman_bandwidth(&[]).is_err());
        assert!(silverman_bandwidth(&[0.4]).is_err());
    }

    #[test]
    fn silverman_degenerate_fallback() {
        let scores = vec![0.4; 50];
        let h = silverman_bandwidth(&scores).unwrap();
        let expected = 0.01 * (50f64).powf(-0.2);
        assert!((h - expected).abs() < 1e-12);
        assert!((expected - 0.004573).abs() < 1e-6);
    }

    #[test]
    fn kde_single_score_symmetric() {
        let grid = Grid::default();
        for h in [0.02, 0.05, 0.1] {
            let d = kde_mirrored(&[0.5], h, &grid).unwrap();
            let v = d.values();
            let n = v.len();
            for k in 0..n / 2 {
                assert!(
                    (v[k] - v[n - 1 - k]).abs() < 1e-9,
                    "asymmetry at {k} for h={h}"
                );
            }
        }
    }

    #[test]
    fn kde_uniform_samples_flat_density() {
        let grid = Grid::default();
        let n = 2001;
        let scores: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let h = 0.01;
        let d = kde_mirrored(&scores, h, &grid).unwrap();
        for (s, &v) in grid.points().iter().zip(d.values()) {
            if *s >= h && *s <= 1.0 - h {
                assert!((v - 1.0).abs() < 0.05, "density {v} at s={s}");
            }
        }
    }

    #[test]
    fn kde_boundary_mass_doubles() {
        let grid = Grid::default();
        let h = 0.05;
        let d = kde_mirrored(&[0.0], h, &grid).unwrap();
        let peak = 2.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
        assert!((d.values()[0] - peak).abs() / peak < 1e-6);
    }

    #[test]
    fn kde_integral_near_one() {
        let grid = Grid::default();
        let scores = vec![0.1, 0.33, 0.5, 0.71, 0.94, 0.99];
        for h in [0.01, 0.05, 0.3] {
            let d = kde_mirrored(&scores, h, &grid).unwrap();
            let integral = d.integral();
            assert!(
                (0.98..=1.02).contains(&integral),
                "integral {integral} at h={h}"
            );
        }
    }

    #[test]
    fn kde_rejects_bad_inputs() {
        let grid = Grid::default();
        assert!(kde_mirrored(&[], 0.1, &grid).is_err());
        assert!(kde_mirrored(&[0.5], 0.0, &grid).is_err());
        assert!(kde_mirrored(&[1.5], 0.1, &grid).is_err());
    }

    #[test]
    fn lce_identical_distributions() {
        // Duplicated scores with alternating outcomes: hit scores and all
        // scores share the same distribution, so lce(s) = prior - s.
        let mut scores = Vec::new();
        let mut hits = Vec::new();
        for i in 0..200 {
            let s = i as f64 / 199.0;
            scores.extend([s, s]);
            hits.extend([true, false]);
        }
        let ev = events(scores, hits);
        let grid = Grid::default();
        let curve = estimate_lce(&ev, 0.05, &grid).unwrap();
        assert!(!curve.is_degenerate());
        for (j, &s) in grid.points().iter().enumerate() {
            assert!(
                (curve.lce()[j] - (0.5 - s)).abs() < 1e-9,
                "lce {} at s={s}",
                curve.lce()[j]
            );
        }
    }

    #[test]
    fn lce_saturates_on_all_hits() {
        let ev = events(vec![0.3, 0.6, 0.9], vec![true, true, true]);
        let curve = estimate_lce(&ev, 0.05, &Grid::default()).unwrap();
        assert!(curve.is_degenerate());
        assert!(curve.rel().iter().all(|&r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn curve_rel_equals_lce_plus_s() {
        let ev = events(
            vec![0.2, 0.4, 0.6, 0.8, 0.3, 0.7],
            vec![false, true, true, true, false, true],
        );
        let grid = Grid::default();
        let curve = estimate_lce(&ev, 0.08, &grid).unwrap();
        for j in 0..grid.len() {
            assert_eq!(curve.rel()[j], curve.lce()[j] + grid.points()[j]);
            assert!((-1.0..=1.0).contains(&curve.lce()[j]));
        }
    }

    #[test]
    fn bootstrap_bands_ordered_and_deterministic() {
        let ev = events(
            vec![0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.6, 0.35],
            vec![false, false, true, true, true, true, false, true],
        );
        let grid = Grid::default();
        let a = bootstrap_reliability(&ev, 0.08, &grid, 16, (5.0, 95.0), 42).unwrap();
        let b = bootstrap_reliability(&ev, 0.08, &grid, 16, (5.0, 95.0), 42).unwrap();
        assert_eq!(a.rel(), b.rel());
        let bands = a.bands().unwrap();
        assert_eq!(bands.lower, b.bands().unwrap().lower);
        for j in 0..grid.len() {
            assert!(bands.lower[j] <= bands.median[j] + 1e-15);
            assert!(bands.median[j] <= bands.upper[j] + 1e-15);
        }
    }

    #[test]
    fn bootstrap_single_sample_zero_width() {
        let ev = events(vec![0.5], vec![true]);
        let curve = bootstrap_reliability(&ev, 0.05, &Grid::default(), 8, (5.0, 95.0), 1).unwrap();
        let bands = curve.bands().unwrap();
        for j in 0..bands.lower.len() {
            assert_eq!(bands.lower[j], bands.upper[j]);
        }
    }

    #[test]
    fn bootstrap_rejects_bad_band() {
        let ev = events(vec![0.5, 0.6], vec![true, false]);
        let grid = Grid::default();
        assert!(bootstrap_reliability(&ev, 0.05, &grid, 8, (95.0, 5.0), 1).is_err());
        assert!(bootstrap_reliability(&ev, 0.05, &grid, 1, (5.0, 95.0), 1).is_err());
    }

    #[test]
    fn ece_d_saturated_perfect_prediction() {
        let ev = events(vec![1.0; 40], vec![true; 40]);
        let h = silverman_bandwidth(ev.scores()).unwrap();
        let est = ece_d(&ev, h, &Grid::default()).unwrap();
        assert!(est.value <= 0.01, "got {}", est.value);
        assert_eq!(est.estimator_id, "ECE_d");
    }

    #[test]
    fn curve_csv_shape() {
        let ev = events(vec![0.2, 0.8, 0.5, 0.6], vec![false, true, true, false]);
        let grid = Grid::default();
        let curve = bootstrap_reliability(&ev, 0.1, &grid, 4, (5.0, 95.0), 3).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &curve, 512, &["bandwidth: 0.1".to_string()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# bandwidth: 0.1");
        assert_eq!(lines.next().unwrap(), "s,lce,rel,band_low,band_high");
        // header + 8 stepped points + the appended endpoint
        let data_lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines.len(), 10);
        assert!(text.lines().last().unwrap().starts_with("1,"));
    }
}
