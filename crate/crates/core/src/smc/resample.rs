use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::math::floor;
use crate::{Error, Result};

/// Offspring allocation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleMode {
    /// N independent draws from the weights.
    Multinomial,
    /// ⌊N·wᵢ⌋ deterministic copies, the remainder drawn multinomially.
    Residual,
    /// One uniform draw per stratum [j/N, (j+1)/N).
    Stratified,
    /// One uniform offset shared by all strata.
    #[default]
    Systematic,
}

impl ResampleMode {
    pub const ALL: [ResampleMode; 4] = [
        ResampleMode::Multinomial,
        ResampleMode::Residual,
        ResampleMode::Stratified,
        ResampleMode::Systematic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResampleMode::Multinomial => "multinomial",
            ResampleMode::Residual => "residual",
            ResampleMode::Stratified => "stratified",
            ResampleMode::Systematic => "systematic",
        }
    }
}

impl fmt::Display for ResampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ResampleMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(alloc::format!("unknown resampling mode '{s}'")))
    }
}

/// Effective sample size (Σwᵢ)²/Σwᵢ², which is 1/Σwᵢ² for normalised
/// weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if !(sum > 0.0 && sum.is_finite() && sum_sq > 0.0) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(sum * sum / sum_sq)
}

/// Ancestor indices of `n_out` offspring drawn from `weights`.
///
/// Weights need not be normalised. The returned indices are sorted.
pub fn resample_indices<R: Rng + ?Sized>(
    weights: &[f64],
    n_out: usize,
    mode: ResampleMode,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty()
        || !(total > 0.0 && total.is_finite())
        || weights.iter().any(|w| !(*w >= 0.0))
    {
        return Err(Error::DegenerateWeights);
    }
    let n = n_out as f64;
    let mut out = Vec::with_capacity(n_out);
    match mode {
        ResampleMode::Multinomial => {
            let mut points: Vec<f64> = (0..n_out).map(|_| rng.random::<f64>()).collect();
            points.sort_unstable_by(f64::total_cmp);
            walk_cdf(weights, total, &points, &mut out);
        }
        ResampleMode::Stratified => {
            let points: Vec<f64> =
                (0..n_out).map(|j| (j as f64 + rng.random::<f64>()) / n).collect();
            walk_cdf(weights, total, &points, &mut out);
        }
        ResampleMode::Systematic => {
            let u: f64 = rng.random();
            let points: Vec<f64> = (0..n_out).map(|j| (j as f64 + u) / n).collect();
            walk_cdf(weights, total, &points, &mut out);
        }
        ResampleMode::Residual => {
            let mut residual = Vec::with_capacity(weights.len());
            for (i, w) in weights.iter().enumerate() {
                let expected = n * w / total;
                let copies = floor(expected);
                out.extend(core::iter::repeat_n(i, copies as usize));
                residual.push(expected - copies);
            }
            out.truncate(n_out);
            let remaining = n_out - out.len();
            if remaining > 0 {
                let rest = resample_indices(&residual, remaining, ResampleMode::Multinomial, rng)?;
                out.extend(rest);
                out.sort_unstable();
            }
        }
    }
    Ok(out)
}

/// Maps sorted points in [0, 1) to indices through the weight CDF.
fn walk_cdf(weights: &[f64], total: f64, points: &[f64], out: &mut Vec<usize>) {
    let last = weights.len() - 1;
    let mut i = 0;
    let mut cum = weights[0] / total;
    for &u in points {
        while u >= cum && i < last {
            i += 1;
            cum += weights[i] / total;
        }
        out.push(i);
    }
}
