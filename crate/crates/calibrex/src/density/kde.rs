//! Gaussian kernel density estimation on [0, 1], evaluated in Fourier space.
//!
//! Samples are reflected about both domain limits onto [-1, 2], linear-binned
//! onto the extended grid, and convolved with a discretized Gaussian kernel
//! via forward/inverse FFT. The result is truncated back to [0, 1]. Cost is
//! O(N + n log n) for N samples and n grid subdivisions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::density::Grid;
use crate::error::{Error, Result};
use crate::stats::{iqr, sample_std};

/// Silverman's rule of thumb: h = 0.9 * min(sigma, IQR/1.34) * N^(-1/5).
///
/// Degenerate samples (zero spread) fall back to h = 0.01 * N^(-1/5) so the
/// density stays well defined.
pub fn silverman_bandwidth(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::InvalidParameter(
            "Silverman's rule needs at least 2 samples".into(),
        ));
    }
    let spread = sample_std(scores).min(iqr(scores) / 1.34);
    let n_factor = (scores.len() as f64).powf(-0.2);
    if spread > 0.0 {
        Ok(0.9 * spread * n_factor)
    } else {
        Ok(0.01 * n_factor)
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

// One fresh planner per length, cached in our own map: the plan for a length
// then never depends on which other lengths were planned first, so results
// are bit-identical regardless of thread scheduling.
static PLANS: Lazy<Mutex<HashMap<usize, PlanPair>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize) -> PlanPair {
    let mut cache = PLANS.lock().expect("fft plan cache lock");
    cache
        .entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
        })
        .clone()
}

/// Reflects each sample about 0 and about 1 and spreads the resulting 3N unit
/// masses onto the uniform grid over [-1, 2] by linear binning.
pub(crate) fn linear_bin_mirrored(scores: &[f64], grid: &Grid) -> Vec<f64> {
    let segments = grid.len() - 1;
    let ext_len = 3 * segments + 1;
    let inv_step = segments as f64;
    let mut binned = vec![0.0; ext_len];
    for &x in scores {
        for p in [-x, x, 2.0 - x] {
            let pos = (p + 1.0) * inv_step;
            let lo = (pos.floor().max(0.0) as usize).min(ext_len - 1);
            let frac = pos - lo as f64;
            if frac > 0.0 && lo + 1 < ext_len {
                binned[lo] += 1.0 - frac;
                binned[lo + 1] += frac;
            } else {
                binned[lo] += 1.0;
            }
        }
    }
    binned
}

/// Gaussian kernel values at grid offsets 0..=M, truncated at 5 bandwidths.
pub(crate) fn gaussian_taps(bandwidth: f64, step: f64, max_radius: usize) -> Vec<f64> {
    let radius = ((5.0 * bandwidth / step).ceil() as usize).min(max_radius);
    let norm = 1.0 / (bandwidth * (2.0 * PI).sqrt());
    (0..=radius)
        .map(|m| {
            let u = m as f64 * step / bandwidth;
            norm * (-0.5 * u * u).exp()
        })
        .collect()
}

/// Convolves one or two mass vectors with a symmetric kernel in one complex
/// FFT by packing the second vector into the imaginary lane. A real symmetric
/// kernel has a real spectrum, so the lanes never mix.
fn fft_convolve_pair(
    masses_a: &[f64],
    masses_b: Option<&[f64]>,
    taps: &[f64],
) -> (Vec<f64>, Option<Vec<f64>>) {
    let len = masses_a.len();
    let radius = taps.len() - 1;
    let fft_len = (len + 2 * radius).next_power_of_two();

    let mut signal = vec![Complex::new(0.0, 0.0); fft_len];
    for (i, &a) in masses_a.iter().enumerate() {
        signal[i].re = a;
    }
    if let Some(b) = masses_b {
        for (i, &v) in b.iter().enumerate() {
            signal[i].im = v;
        }
    }

    let mut kernel = vec![Complex::new(0.0, 0.0); fft_len];
    kernel[0].re = taps[0];
    for (m, &t) in taps.iter().enumerate().skip(1) {
        kernel[m].re += t;
        kernel[fft_len - m].re += t;
    }

    let (forward, inverse) = plan(fft_len);
    forward.process(&mut signal);
    forward.process(&mut kernel);
    for (s, k) in signal.iter_mut().zip(&kernel) {
        // discard the spectrum's roundoff imaginary part (kernel is even)
        *s *= k.re;
    }
    inverse.process(&mut signal);

    let scale = 1.0 / fft_len as f64;
    let conv_a = signal[..len].iter().map(|c| c.re * scale).collect();
    let conv_b = masses_b.map(|_| signal[..len].iter().map(|c| c.im * scale).collect());
    (conv_a, conv_b)
}

fn check_kde_inputs(scores: &[f64], bandwidth: f64) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores for density estimation"));
    }
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange { index: i, value: s });
        }
    }
    Ok(())
}

/// Mirrored Gaussian KDE values on the [0, 1] grid for one sample set, and
/// optionally a second set sharing the bandwidth (both convolutions ride the
/// same FFT). Each density is normalized by its own sample count.
pub(crate) fn mirrored_density_pair(
    scores_a: &[f64],
    scores_b: Option<&[f64]>,
    bandwidth: f64,
    grid: &Grid,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    check_kde_inputs(scores_a, bandwidth)?;
    if let Some(b) = scores_b {
        check_kde_inputs(b, bandwidth)?;
    }
    let segments = grid.len() - 1;
    let ext_len = 3 * segments + 1;
    let binned_a = linear_bin_mirrored(scores_a, grid);
    let binned_b = scores_b.map(|b| linear_bin_mirrored(b, grid));
    let taps = gaussian_taps(bandwidth, grid.step(), ext_len - 1);
    let (conv_a, conv_b) = fft_convolve_pair(&binned_a, binned_b.as_deref(), &taps);

    let offset = segments; // extended index of s = 0
    let extract = |conv: &[f64], n_samples: usize| -> Vec<f64> {
        let scale = 1.0 / n_samples as f64;
        conv[offset..=offset + segments]
            .iter()
            .map(|&v| (v * scale).max(0.0))
            .collect()
    };
    let values_a = extract(&conv_a, scores_a.len());
    let values_b = conv_b
        .as_deref()
        .map(|c| extract(c, scores_b.unwrap().len()));
    Ok((values_a, values_b))
}
