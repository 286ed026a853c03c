//! Independent oracle implementations shared by the acceptance and property
//! suites. Everything here recomputes results from first principles (dense
//! matrices, direct summation) without touching the library's estimator
//! internals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform thresholds t(i) = i/B.
pub fn oracle_uniform_thresholds(n_bins: usize) -> Vec<f64> {
    (1..=n_bins).map(|i| i as f64 / n_bins as f64).collect()
}

/// Equal-frequency thresholds: midpoints of the order statistics at ranks
/// floor(i*N/B) and floor(i*N/B)+1, dropping cuts that land inside tied runs,
/// then the closing 1.0.
pub fn oracle_adaptive_thresholds(scores: &[f64], n_bins: usize) -> Vec<f64> {
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut thresholds: Vec<f64> = Vec::new();
    for i in 1..n_bins {
        let rank = i * n / n_bins;
        let (lo, hi) = (sorted[rank - 1], sorted[rank]);
        if lo == hi {
            continue;
        }
        let t = 0.5 * (lo + hi);
        if thresholds.last().map(|&p| t > p).unwrap_or(true) && t < 1.0 {
            thresholds.push(t);
        }
    }
    thresholds.push(1.0);
    thresholds
}

/// Dense one-bin weight matrix: row i puts unit weight on the first bin whose
/// right threshold is >= the score (right-closed intervals, 0 in bin one).
pub fn oracle_dense_one_bin(scores: &[f64], thresholds: &[f64]) -> Vec<Vec<f64>> {
    scores
        .iter()
        .map(|&s| {
            let mut row = vec![0.0; thresholds.len()];
            let mut bin = thresholds.len() - 1;
            for (j, &t) in thresholds.iter().enumerate() {
                if s <= t {
                    bin = j;
                    break;
                }
            }
            row[bin] = 1.0;
            row
        })
        .collect()
}

/// Dense convex (linear binning) weight matrix over the bin centers.
pub fn oracle_dense_convex(scores: &[f64], thresholds: &[f64]) -> Vec<Vec<f64>> {
    let b = thresholds.len();
    let mut centers = Vec::with_capacity(b);
    let mut prev = 0.0;
    for &t in thresholds {
        centers.push(0.5 * (prev + t));
        prev = t;
    }
    scores
        .iter()
        .map(|&s| {
            let mut row = vec![0.0; b];
            if s <= centers[0] {
                row[0] = 1.0;
            } else if s >= centers[b - 1] {
                row[b - 1] = 1.0;
            } else {
                let mut j = 0;
                while !(centers[j] <= s && s <= centers[j + 1]) {
                    j += 1;
                }
                let w_hi = (s - centers[j]) / (centers[j + 1] - centers[j]);
                row[j] = 1.0 - w_hi;
                row[j + 1] = w_hi;
            }
            row
        })
        .collect()
}

/// Weighted mean of absolute per-bin deviations, straight off the dense
/// matrix.
pub fn oracle_ece(weights: &[Vec<f64>], scores: &[f64], hits: &[bool]) -> f64 {
    let n = scores.len();
    let b = weights[0].len();
    let mut total = 0.0;
    for j in 0..b {
        let mut dev = 0.0;
        for i in 0..n {
            dev += weights[i][j] * ((hits[i] as u8 as f64) - scores[i]);
        }
        total += dev.abs();
    }
    total / n as f64
}

/// Direct evaluation of the mirrored, linear-binned, truncated-Gaussian
/// density on the [0, 1] portion of the grid: O(N * n), no FFT.
pub fn oracle_direct_kde(scores: &[f64], bandwidth: f64, n_grid: usize) -> Vec<f64> {
    let segments = n_grid - 1;
    let step = 1.0 / segments as f64;
    let ext_len = 3 * segments + 1;
    let mut mass = vec![0.0; ext_len];
    for &x in scores {
        for p in [-x, x, 2.0 - x] {
            let pos = (p + 1.0) * segments as f64;
            let lo = (pos.floor().max(0.0) as usize).min(ext_len - 1);
            let frac = pos - lo as f64;
            if frac > 0.0 && lo + 1 < ext_len {
                mass[lo] += 1.0 - frac;
                mass[lo + 1] += frac;
            } else {
                mass[lo] += 1.0;
            }
        }
    }
    let nonzero: Vec<(usize, f64)> = mass
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m != 0.0)
        .map(|(i, &m)| (i, m))
        .collect();
    let radius = ((5.0 * bandwidth / step).ceil() as usize).min(ext_len - 1) as i64;
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let scale = 1.0 / scores.len() as f64;
    (0..n_grid)
        .map(|k| {
            let j = (segments + k) as i64;
            let mut sum = 0.0;
            for &(m, w) in &nonzero {
                let offset = (j - m as i64).abs();
                if offset <= radius {
                    let u = offset as f64 * step / bandwidth;
                    sum += w * norm * (-0.5 * u * u).exp();
                }
            }
            (sum * scale).max(0.0)
        })
        .collect()
}

/// Deterministic random event instance: scores uniform in [0, 1], outcomes
/// Bernoulli with a score-linked probability so hits and scores correlate.
pub fn random_instance(seed: u64, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let mut scores = Vec::with_capacity(n);
    let mut hits = Vec::with_capacity(n);
    for _ in 0..n {
        let s: f64 = rng.random();
        scores.push(s);
        hits.push(rng.random::<f64>() < 0.25 + 0.5 * s);
    }
    (scores, hits)
}
