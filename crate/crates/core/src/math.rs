//! Thin wrappers over `libm` so results are identical with and without `std`.

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// ln Γ(x + m) − ln Γ(x), i.e. the log of the rising factorial x⁽ᵐ⁾.
///
/// Summed term by term for moderate `m`: the lgamma difference cancels
/// catastrophically once `x` is large.
pub(crate) fn ln_rising(x: f64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if m <= 4096 {
        (0..m).map(|j| ln(x + j as f64)).sum()
    } else {
        ln_gamma(x + m as f64) - ln_gamma(x)
    }
}

/// ln C(n, k).
pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k <= 64 {
        (0..k)
            .map(|j| ln((n - j) as f64) - ln((j + 1) as f64))
            .sum()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

/// x·ln(y) with the convention 0·ln(0) = 0.
#[inline]
pub(crate) fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ln(y)
    }
}

/// Standard normal upper tail Q(z) = P(Z > z).
#[inline]
pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / core::f64::consts::SQRT_2)
}

/// ln Σ exp(xᵢ), `-inf` for an empty or all `-inf` input.
pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + ln(xs.map(|x| exp(x - max)).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rising_factorial_paths_agree() {
        for &x in &[0.5, 3.0, 250.0] {
            let summed: f64 = (0..5000u64).map(|j| ln(x + j as f64)).sum();
            let direct = ln_gamma(x + 5000.0) - ln_gamma(x);
            assert!((ln_rising(x, 5000) - summed).abs() < 1e-9 * summed.abs());
            assert!((direct - summed).abs() < 1e-9 * summed.abs());
        }
    }

    #[test]
    fn choose_small_and_large() {
        assert!((exp(ln_choose(5, 2)) - 10.0).abs() < 1e-12);
        assert!((exp(ln_choose(200, 100)) / 9.054851465610328e58 - 1.0).abs() < 1e-10);
        assert_eq!(ln_choose(7, 0), 0.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        let xs = [-1000.0, -1000.0];
        assert!((log_sum_exp(xs.iter().copied()) - (-1000.0 + ln(2.0))).abs() < 1e-12);
        let empty: [f64; 0] = [];
        assert_eq!(log_sum_exp(empty.iter().copied()), f64::NEG_INFINITY);
    }
}
