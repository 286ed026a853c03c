//! Binning schemes, affectation mappings, and the binning-based calibration
//! error estimators (ECE_l, ECE_a, ECE_c, ECE_ac), plus MCE and
//! reliability-diagram points.
//!
//! A binning scheme splits [0, 1] into B bins given by their right thresholds.
//! An affectation mapping is a row-stochastic N x B weight matrix assigning
//! samples to bins: `one_bin` puts unit weight on the containing bin, `convex`
//! (linear binning) splits weight between the two bins whose centers bracket
//! the score. The estimator
//!
//! ```text
//! ECE = (1/N) * sum_j | sum_i W_ij * (hit_i - score_i) |
//! ```
//!
//! covers all four binning/mapping combinations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{EceEstimate, ScoredEvents};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningKind {
    Uniform,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    OneBin,
    Convex,
}

/// Right bin thresholds t(1..B) in (0, 1] with t(B) = 1; the left edge 0 is
/// implied.
#[derive(Debug, Clone)]
pub struct BinningScheme {
    thresholds: Vec<f64>,
    kind: BinningKind,
}

impl BinningScheme {
    /// Equal-width binning: t(i) = i / B.
    pub fn uniform(n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidParameter("bin count must be positive".into()));
        }
        let thresholds = (1..=n_bins).map(|i| i as f64 / n_bins as f64).collect();
        Ok(Self {
            thresholds,
            kind: BinningKind::Uniform,
        })
    }

    /// Equal-frequency binning: the cut after bin i is the midpoint between
    /// the order statistics of rank floor(i*N/B) and floor(i*N/B)+1.
    ///
    /// A cut that falls inside a run of tied scores cannot separate them; such
    /// degenerate cuts are dropped, merging the adjacent bins. With heavy ties
    /// the scheme can collapse to a single bin.
    pub fn adaptive(scores: &[f64], n_bins: usize) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput("scores for adaptive binning"));
        }
        if n_bins == 0 {
            return Err(Error::InvalidParameter("bin count must be positive".into()));
        }
        let n = scores.len();
        if n_bins > n {
            return Err(Error::InvalidParameter(format!(
                "adaptive binning needs B <= N, got B={n_bins}, N={n}"
            )));
        }
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::ScoreOutOfRange { index: i, value: s });
            }
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut thresholds = Vec::with_capacity(n_bins);
        for i in 1..n_bins {
            let rank = i * n / n_bins; // 1-indexed order statistic
            let lo = sorted[rank - 1];
            let hi = sorted[rank];
            if lo == hi {
                continue; // cut inside a tied run: merge
            }
            let t = 0.5 * (lo + hi);
            if thresholds.last().is_none_or(|&prev| t > prev) && t < 1.0 {
                thresholds.push(t);
            }
        }
        thresholds.push(1.0);
        Ok(Self {
            thresholds,
            kind: BinningKind::Adaptive,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn kind(&self) -> BinningKind {
        self.kind
    }

    /// Bin index of a score under the right-closed rule: s in (t_{j-1}, t_j],
    /// with s = 0 assigned to the first bin.
    pub fn bin_of(&self, score: f64) -> usize {
        let j = self.thresholds.partition_point(|&t| t < score);
        j.min(self.thresholds.len() - 1)
    }

    /// Geometric bin centers c_j = (t_{j-1} + t_j) / 2 with t_0 = 0.
    pub fn centers(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.thresholds
            .iter()
            .map(|&t| {
                let c = 0.5 * (prev + t);
                prev = t;
                c
            })
            .collect()
    }
}

/// One row of the sparse sample-to-bin weight matrix.
#[derive(Debug, Clone, Copy)]
enum RowWeights {
    One(usize),
    Split { lo: usize, hi: usize, hi_weight: f64 },
}

/// Row-stochastic N x B weight matrix, stored sparse (at most two nonzeros
/// per row).
#[derive(Debug, Clone)]
pub struct AffectationMapping {
    rows: Vec<RowWeights>,
    n_bins: usize,
    binning_kind: BinningKind,
    kind: MappingKind,
}

impl AffectationMapping {
    /// Unit weight on the containing bin.
    pub fn one_bin(scores: &[f64], binning: &BinningScheme) -> Result<Self> {
        check_scores(scores)?;
        let rows = scores
            .iter()
            .map(|&s| RowWeights::One(binning.bin_of(s)))
            .collect();
        Ok(Self {
            rows,
            n_bins: binning.n_bins(),
            binning_kind: binning.kind(),
            kind: MappingKind::OneBin,
        })
    }

    /// Linear binning between adjacent bin centers: full weight on the first
    /// bin below its center and on the last bin above its center, otherwise a
    /// convex split between the two bracketing bins.
    pub fn convex(scores: &[f64], binning: &BinningScheme) -> Result<Self> {
        check_scores(scores)?;
        let centers = binning.centers();
        let b = centers.len();
        let rows = scores
            .iter()
            .map(|&s| {
                if s <= centers[0] {
                    return RowWeights::One(0);
                }
                if s >= centers[b - 1] {
                    return RowWeights::One(b - 1);
                }
                // first center >= s; s lies in [centers[j], centers[j+1]]
                let hi = centers.partition_point(|&c| c < s);
                let lo = hi - 1;
                let hi_weight = (s - centers[lo]) / (centers[hi] - centers[lo]);
                RowWeights::Split { lo, hi, hi_weight }
            })
            .collect();
        Ok(Self {
            rows,
            n_bins: b,
            binning_kind: binning.kind(),
            kind: MappingKind::Convex,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn binning_kind(&self) -> BinningKind {
        self.binning_kind
    }

    /// Nonzero (bin, weight) entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (first, second) = match self.rows[i] {
            RowWeights::One(bin) => ((bin, 1.0), None),
            RowWeights::Split { lo, hi, hi_weight } => {
                ((lo, 1.0 - hi_weight), Some((hi, hi_weight)))
            }
        };
        std::iter::once(first).chain(second)
    }

    /// Identifier of the estimator this binning/mapping combination realizes.
    pub fn estimator_id(&self) -> &'static str {
        match (self.binning_kind, self.kind) {
            (BinningKind::Uniform, MappingKind::OneBin) => "ECE_l",
            (BinningKind::Adaptive, MappingKind::OneBin) => "ECE_a",
            (BinningKind::Uniform, MappingKind::Convex) => "ECE_c",
            (BinningKind::Adaptive, MappingKind::Convex) => "ECE_ac",
        }
    }

    fn hyperparams(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("bins".to_string(), self.n_bins.to_string())])
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores for mapping"));
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange { index: i, value: s });
        }
    }
    Ok(())
}

fn check_lengths(events: &ScoredEvents, mapping: &AffectationMapping) -> Result<()> {
    if events.len() != mapping.n_samples() {
        return Err(Error::DimensionMismatch {
            context: "events vs mapping rows",
            expected: mapping.n_samples(),
            got: events.len(),
        });
    }
    Ok(())
}

/// Per-bin signed deviation mass sum_i W_ij (hit_i - score_i) and weight mass.
fn bin_accumulate(events: &ScoredEvents, mapping: &AffectationMapping) -> (Vec<f64>, Vec<f64>) {
    let mut deviation = vec![0.0; mapping.n_bins()];
    let mut mass = vec![0.0; mapping.n_bins()];
    for i in 0..events.len() {
        let residual = (events.hits()[i] as u8 as f64) - events.scores()[i];
        for (bin, w) in mapping.row(i) {
            deviation[bin] += w * residual;
            mass[bin] += w;
        }
    }
    (deviation, mass)
}

/// Binning-based expected calibration error (weighted mean of absolute
/// per-bin deviations).
pub fn binned_ece(events: &ScoredEvents, mapping: &AffectationMapping) -> Result<EceEstimate> {
    check_lengths(events, mapping)?;
    let (deviation, _) = bin_accumulate(events, mapping);
    let value = deviation.iter().map(|d| d.abs()).sum::<f64>() / events.len() as f64;
    Ok(EceEstimate::new(
        value,
        mapping.estimator_id(),
        events.setting(),
        mapping.hyperparams(),
    ))
}

/// Maximum calibration error: the worst per-bin deviation, normalized by the
/// bin's weight mass so the result is a probability-scale gap. Empty bins are
/// skipped.
pub fn binned_mce(events: &ScoredEvents, mapping: &AffectationMapping) -> Result<EceEstimate> {
    check_lengths(events, mapping)?;
    let (deviation, mass) = bin_accumulate(events, mapping);
    let value = deviation
        .iter()
        .zip(&mass)
        .filter(|&(_, &m)| m > 0.0)
        .map(|(d, m)| (d / m).abs())
        .fold(0.0, f64::max);
    Ok(EceEstimate::new(
        value,
        "MCE",
        events.setting(),
        mapping.hyperparams(),
    ))
}

/// One reliability-diagram point; bins with no weight mass have no defined
/// averages.
#[derive(Debug, Clone)]
pub struct DiagramBin {
    pub weight_mass: f64,
    pub mean_score: Option<f64>,
    pub event_rate: Option<f64>,
}

impl DiagramBin {
    pub fn is_empty(&self) -> bool {
        self.weight_mass == 0.0
    }
}

/// Per-bin diagram data: weight mass, weighted mean score, and weighted event
/// rate.
#[derive(Debug, Clone)]
pub struct DiagramPoints {
    pub bins: Vec<DiagramBin>,
}

impl DiagramPoints {
    pub fn n_empty(&self) -> usize {
        self.bins.iter().filter(|b| b.is_empty()).count()
    }
}

/// Computes the reliability-diagram points of an event stream under a mapping.
pub fn diagram_points(
    events: &ScoredEvents,
    mapping: &AffectationMapping,
) -> Result<DiagramPoints> {
    check_lengths(events, mapping)?;
    let b = mapping.n_bins();
    let mut mass = vec![0.0; b];
    let mut score_sum = vec![0.0; b];
    let mut hit_sum = vec![0.0; b];
    for i in 0..events.len() {
        for (bin, w) in mapping.row(i) {
            mass[bin] += w;
            score_sum[bin] += w * events.scores()[i];
            hit_sum[bin] += w * (events.hits()[i] as u8 as f64);
        }
    }
    let bins = (0..b)
        .map(|j| {
            if mass[j] > 0.0 {
                DiagramBin {
                    weight_mass: mass[j],
                    mean_score: Some(score_sum[j] / mass[j]),
                    event_rate: Some(hit_sum[j] / mass[j]),
                }
            } else {
                DiagramBin {
                    weight_mass: 0.0,
                    mean_score: None,
                    event_rate: None,
                }
            }
        })
        .collect();
    Ok(DiagramPoints { bins })
}

/// Bin-count heuristic: B = round(sqrt(N)), floored at 1.
pub fn sqrt_bin_heuristic(n_samples: usize) -> usize {
    ((n_samples as f64).sqrt().round() as usize).max(1)
}

/// Writes diagram points as CSV: `bin,mean_score,event_rate,weight_mass,empty`.
pub fn write_diagram_csv<W: std::io::Write>(
    out: &mut W,
    points: &DiagramPoints,
    header_comments: &[String],
) -> Result<()> {
    for line in header_comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "bin,mean_score,event_rate,weight_mass,empty")?;
    for (j, bin) in points.bins.iter().enumerate() {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            j,
            fmt(bin.mean_score),
            fmt(bin.event_rate),
            bin.weight_mass,
            bin.is_empty()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::CalibrationSetting;

    fn events(scores: &[f64], hits: &[bool]) -> ScoredEvents {
        ScoredEvents::new(
            scores.to_vec(),
            hits.to_vec(),
            CalibrationSetting::ClassSpecific(0),
        )
        .unwrap()
    }

    #[test]
    fn uniform_thresholds() {
        assert_eq!(BinningScheme::uniform(2).unwrap().thresholds(), &[0.5, 1.0]);
        assert_eq!(BinningScheme::uniform(1).unwrap().thresholds(), &[1.0]);
        assert_eq!(
            BinningScheme::uniform(4).unwrap().thresholds(),
            &[0.25, 0.5, 0.75, 1.0]
        );
        assert!(BinningScheme::uniform(0).is_err());
    }

    #[test]
    fn adaptive_thresholds_from_order_statistics() {
        let b = BinningScheme::adaptive(&[0.1, 0.2, 0.6, 0.9], 2).unwrap();
        assert_eq!(b.thresholds(), &[0.4, 1.0]);
    }

    #[test]
    fn adaptive_single_bin() {
        let b = BinningScheme::adaptive(&[0.3, 0.9, 0.1], 1).unwrap();
        assert_eq!(b.thresholds(), &[1.0]);
    }

    #[test]
    fn adaptive_merges_tied_runs() {
        let b = BinningScheme::adaptive(&[0.3, 0.3, 0.3, 0.3], 2).unwrap();
        assert_eq!(b.thresholds(), &[1.0]);
    }

    #[test]
    fn adaptive_rejects_oversized_bin_count() {
        assert!(BinningScheme::adaptive(&[0.5, 0.6], 3).is_err());
        assert!(BinningScheme::adaptive(&[], 1).is_err());
    }

    #[test]
    fn one_bin_interval_membership() {
        let binning = BinningScheme::uniform(2).unwrap();
        let m = AffectationMapping::one_bin(&[0.2, 0.6], &binning).unwrap();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(1, 1.0)]);
    }

    #[test]
    fn one_bin_boundaries_right_closed() {
        let binning = BinningScheme::uniform(2).unwrap();
        let m = AffectationMapping::one_bin(&[0.5, 0.0], &binning).unwrap();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(0, 1.0)]);
    }

    #[test]
    fn convex_weights_interpolate_between_centers() {
        let binning = BinningScheme::uniform(2).unwrap(); // centers 0.25, 0.75
        let m = AffectationMapping::convex(&[0.5, 0.1, 0.625], &binning).unwrap();
        let row0: Vec<_> = m.row(0).collect();
        assert_eq!(row0[0].0, 0);
        assert!((row0[0].1 - 0.5).abs() < 1e-12);
        assert!((row0[1].1 - 0.5).abs() < 1e-12);

        assert_eq!(m.row(1).collect::<Vec<_>>(), vec![(0, 1.0)]);

        let row2: Vec<_> = m.row(2).collect();
        assert!((row2[0].1 - 0.25).abs() < 1e-12);
        assert_eq!(row2[1].0, 1);
        assert!((row2[1].1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn hand_example_ece() {
        let ev = events(&[0.2, 0.4, 0.6, 0.8], &[false, false, true, true]);
        let binning = BinningScheme::uniform(2).unwrap();
        let m = AffectationMapping::one_bin(ev.scores(), &binning).unwrap();
        let est = binned_ece(&ev, &m).unwrap();
        assert!((est.value - 0.3).abs() < 1e-15);
        assert_eq!(est.estimator_id, "ECE_l");
        assert_eq!(est.hyperparams["bins"], "2");
    }

    #[test]
    fn in_bin_cancellation() {
        let ev = events(&[0.5, 0.5], &[true, false]);
        for b in [1usize, 2, 5] {
            let binning = BinningScheme::uniform(b).unwrap();
            let one = AffectationMapping::one_bin(ev.scores(), &binning).unwrap();
            let conv = AffectationMapping::convex(ev.scores(), &binning).unwrap();
            assert_eq!(binned_ece(&ev, &one).unwrap().value, 0.0);
            assert!(binned_ece(&ev, &conv).unwrap().value < 1e-15);
        }
    }

    #[test]
    fn perfect_confident_prediction() {
        let ev = events(&[1.0], &[true]);
        let binning = BinningScheme::uniform(1).unwrap();
        let m = AffectationMapping::one_bin(ev.scores(), &binning).unwrap();
        assert_eq!(binned_ece(&ev, &m).unwrap().value, 0.0);
    }

    #[test]
    fn mce_normalizes_by_bin_mass() {
        let ev = events(&[0.2, 0.4, 0.6, 0.8], &[false, false, true, true]);
        let binning = BinningScheme::uniform(2).unwrap();
        let m = AffectationMapping::one_bin(ev.scores(), &binning).unwrap();
        assert!((binned_mce(&ev, &m).unwrap().value - 0.3).abs() < 1e-15);

        let ev = events(&[0.5, 0.5], &[true, false]);
        let m =
            AffectationMapping::one_bin(ev.scores(), &BinningScheme::uniform(2).unwrap()).unwrap();
        assert_eq!(binned_mce(&ev, &m).unwrap().value, 0.0);

        let ev = events(&[0.9], &[false]);
        let m =
            AffectationMapping::one_bin(ev.scores(), &BinningScheme::uniform(1).unwrap()).unwrap();
        assert!((binned_mce(&ev, &m).unwrap().value - 0.9).abs() < 1e-15);
    }

    #[test]
    fn diagram_points_single_bin() {
        let ev = events(&[0.2, 0.4], &[false, true]);
        let m =
            AffectationMapping::one_bin(ev.scores(), &BinningScheme::uniform(1).unwrap()).unwrap();
        let d = diagram_points(&ev, &m).unwrap();
        assert_eq!(d.bins.len(), 1);
        assert!((d.bins[0].mean_score.unwrap() - 0.3).abs() < 1e-15);
        assert!((d.bins[0].event_rate.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(d.bins[0].weight_mass, 2.0);
    }

    #[test]
    fn diagram_points_calibrated_bin_on_diagonal() {
        let scores = vec![0.7; 10];
        let hits: Vec<bool> = (0..10).map(|i| i < 7).collect();
        let ev = events(&scores, &hits);
        let m =
            AffectationMapping::one_bin(ev.scores(), &BinningScheme::uniform(1).unwrap()).unwrap();
        let d = diagram_points(&ev, &m).unwrap();
        let b = &d.bins[0];
        assert!((b.mean_score.unwrap() - b.event_rate.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn diagram_points_one_sample_per_bin() {
        let ev = events(&[0.2, 0.8], &[true, false]);
        let m =
            AffectationMapping::one_bin(ev.scores(), &BinningScheme::uniform(2).unwrap()).unwrap();
        let d = diagram_points(&ev, &m).unwrap();
        assert!((d.bins[0].mean_score.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(d.bins[0].event_rate.unwrap(), 1.0);
        assert!((d.bins[1].mean_score.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(d.bins[1].event_rate.unwrap(), 0.0);
    }

    #[test]
    fn sqrt_heuristic_rounds() {
        assert_eq!(sqrt_bin_heuristic(100), 10);
        assert_eq!(sqrt_bin_heuristic(30), 5);
        assert_eq!(sqrt_bin_heuristic(1), 1);
    }

    #[test]
    fn ece_agrees_with_diagram_summary() {
        // With a one_bin mapping the estimator equals
        // sum_j (n_j/N) * |event_rate_j - mean_score_j| from the diagram.
        let scores = [0.05, 0.2, 0.35, 0.41, 0.52, 0.77, 0.9, 1.0];
        let hits = [false, true, false, true, true, false, true, true];
        let ev = events(&scores, &hits);
        let binning = BinningScheme::uniform(4).unwrap();
        let m = AffectationMapping::one_bin(ev.scores(), &binning).unwrap();
        let est = binned_ece(&ev, &m).unwrap().value;
        let d = diagram_points(&ev, &m).unwrap();
        let from_diagram: f64 = d
            .bins
            .iter()
            .filter(|b| !b.is_empty())
            .map(|b| {
                (b.weight_mass / ev.len() as f64)
                    * (b.event_rate.unwrap() - b.mean_score.unwrap()).abs()
            })
            .sum();
        assert!((est - from_diagram).abs() < 1e-12);
    }

    #[test]
    fn single_bin_mappings_coincide() {
        let scores = [0.1, 0.4, 0.8];
        let hits = [true, false, true];
        let ev = events(&scores, &hits);
        let binning = BinningScheme::uniform(1).unwrap();
        let one = AffectationMapping::one_bin(&scores, &binning).unwrap();
        let conv = AffectationMapping::convex(&scores, &binning).unwrap();
        assert_eq!(
            binned_ece(&ev, &one).unwrap().value,
            binned_ece(&ev, &conv).unwrap().value
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        let ev = events(&[0.5], &[true]);
        let m = AffectationMapping::one_bin(&[0.5, 0.6], &BinningScheme::uniform(2).unwrap())
            .unwrap();
        assert!(binned_ece(&ev, &m).is_err());
    }
}
