//! Gaussian kernel density estimation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt, sum};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR/1.34) n^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Silverman's rule-of-thumb bandwidth. Falls back to the standard deviation
/// when the interquartile range is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    match n {
        0 => return Err(Error::TooFewRows { needed: 2, got: 0 }),
        1 => return Err(Error::DegenerateSample(samples[0])),
        _ => {}
    }
    let mean = sum(samples.iter().copied()) / n as f64;
    let var = sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample(samples[0]));
    }
    let sd = sqrt(var);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * libm::pow(n as f64, -0.2))
}

fn resolve(samples: &[f64], bandwidth: Bandwidth) -> Result<f64> {
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(samples)?,
        Bandwidth::Fixed(h) => {
            if samples.len() < 2 {
                return silverman_bandwidth(samples);
            }
            if samples.iter().all(|&x| x == samples[0]) {
                return Err(Error::DegenerateSample(samples[0]));
            }
            h
        }
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    Ok(h)
}

/// Gaussian KDE evaluated at each grid point.
///
/// Needs at least two samples with positive spread; a constant sample yields
/// [`Error::DegenerateSample`] carrying the spike location.
pub fn kde_density(samples: &[f64], grid: &[f64], bandwidth: Bandwidth) -> Result<Vec<f64>> {
    let h = resolve(samples, bandwidth)?;
    let norm = INV_SQRT_2PI / (samples.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&x| {
            norm * sum(samples.iter().map(|&s| {
                let u = (x - s) / h;
                exp(-0.5 * u * u)
            }))
        })
        .collect())
}

/// `points` evenly spaced values covering the sample range padded by
/// `pad_bandwidths * h` on both sides; returns the grid and `h`.
pub fn padded_grid(
    samples: &[f64],
    bandwidth: Bandwidth,
    points: usize,
    pad_bandwidths: f64,
) -> Result<(Vec<f64>, f64)> {
    let h = resolve(samples, bandwidth)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad_bandwidths * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad_bandwidths * h;
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    Ok(((0..points).map(|i| lo + step * i as f64).collect(), h))
}
