//! Count and continuous distributions used by the epidemic models.
//!
//! All mass/density functions are evaluated in log space and exponentiated at
//! the end, so populations in the millions do not overflow factorials.
//! Sampling goes through [`rand_distr`] for the base distributions; the
//! Negative-Binomial is drawn as a Gamma-mixed Poisson and the Beta-Binomial as
//! a Beta-mixed Binomial.
//!
//! The two overdispersion hooks, [`overdispersed_poisson`] and
//! [`overdispersed_binomial`], scale the base variance by `1 + ν`.

use rand::Rng;
use rand_distr::Distribution;

use crate::math::{self, ln, ln_1p, ln_choose, ln_gamma, ln_rising, xlny};
use crate::{Error, Result};

/// Largest γ used when ν/(n−1) would reach or exceed 1.
pub const GAMMA_CLAMP: f64 = 1.0 - 1e-9;

/// First two moments of a distribution.
pub trait Moments {
    fn mean(&self) -> f64;
    fn variance(&self) -> f64;
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("{what} must lie in [0, 1], got {p}")))
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("{what} must be positive and finite, got {x}")))
    }
}

fn check_non_negative(x: f64, what: &str) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("{what} must be non-negative and finite, got {x}")))
    }
}

/// Binomial(n, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialParams {
    n: u64,
    p: f64,
}

impl BinomialParams {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        check_probability(p, "binomial p")?;
        Ok(Self { n, p })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ln_pmf(&self, k: u64) -> Result<f64> {
        if k > self.n {
            return Err(Error::domain(alloc::format!(
                "binomial support is 0..={}, got k = {k}",
                self.n
            )));
        }
        let (k, n) = (k as f64, self.n as f64);
        Ok(ln_choose(self.n, k as u64) + xlny(k, self.p) + xlny(n - k, 1.0 - self.p))
    }
}

impl Moments for BinomialParams {
    fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }
    fn variance(&self) -> f64 {
        self.n as f64 * self.p * (1.0 - self.p)
    }
}

impl Distribution<u64> for BinomialParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.n == 0 {
            return 0;
        }
        rand_distr::Binomial::new(self.n, self.p)
            .expect("validated binomial parameters")
            .sample(rng)
    }
}

/// Poisson(λ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParams {
    lambda: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64) -> Result<Self> {
        check_non_negative(lambda, "poisson lambda")?;
        if lambda > rand_distr::Poisson::<f64>::MAX_LAMBDA {
            return Err(Error::domain("poisson lambda too large to sample"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if self.lambda == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let k = k as f64;
        k * ln(self.lambda) - self.lambda - ln_gamma(k + 1.0)
    }
}

impl Moments for PoissonParams {
    fn mean(&self) -> f64 {
        self.lambda
    }
    fn variance(&self) -> f64 {
        self.lambda
    }
}

impl Distribution<u64> for PoissonParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        sample_poisson(self.lambda, rng)
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    let x: f64 = rand_distr::Poisson::new(lambda)
        .expect("validated poisson rate")
        .sample(rng);
    x as u64
}

/// Gamma with shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    alpha: f64,
    beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_positive(alpha, "gamma shape")?;
        check_positive(beta, "gamma rate")?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha * ln(self.beta) + xlny(self.alpha - 1.0, x) - self.beta * x - ln_gamma(self.alpha)
    }
}

impl Moments for GammaParams {
    fn mean(&self) -> f64 {
        self.alpha / self.beta
    }
    fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }
}

impl Distribution<f64> for GammaParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("validated gamma parameters")
            .sample(rng)
    }
}

/// Beta(α, β).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_positive(alpha, "beta alpha")?;
        check_positive(beta, "beta beta")?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        xlny(self.alpha - 1.0, x) + xlny(self.beta - 1.0, 1.0 - x) - ln_beta(self.alpha, self.beta)
    }
}

impl Moments for BetaParams {
    fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
    fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

impl Distribution<f64> for BetaParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_beta(self.alpha, self.beta, rng)
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

// rand_distr's Cheng samplers lose precision for very small shapes, which the
// γ clamp produces. Below shape 1 go through log-space Gamma variates instead:
// Gamma(a) = Gamma(a + 1)·U^(1/a).
fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        return rand_distr::Beta::new(a, b)
            .expect("validated beta parameters")
            .sample(rng);
    }
    let ln_x = ln_gamma_variate(a, rng);
    let ln_y = ln_gamma_variate(b, rng);
    // x / (x + y) = 1 / (1 + e^(ln y − ln x))
    let p = 1.0 / (1.0 + math::exp(ln_y - ln_x));
    p.clamp(0.0, 1.0)
}

fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = rand_distr::Gamma::new(shape, 1.0)
            .expect("positive shape")
            .sample(rng);
        return ln(g);
    }
    let g: f64 = rand_distr::Gamma::new(shape + 1.0, 1.0)
        .expect("positive shape")
        .sample(rng);
    let u: f64 = rng.sample(rand_distr::Open01);
    ln(g) + ln(u) / shape
}

/// Negative-Binomial as a Gamma-mixed Poisson with mean `lambda` and
/// `r` "failures"; variance λ(1 + λ/r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinParams {
    lambda: f64,
    r: f64,
}

impl NegBinParams {
    pub fn new(lambda: f64, r: f64) -> Result<Self> {
        check_non_negative(lambda, "negative binomial mean")?;
        check_positive(r, "negative binomial r")?;
        Ok(Self { lambda, r })
    }

    /// Parameters whose variance is `(1 + nu)` times the Poisson variance:
    /// r = λ/ν.
    pub fn from_dispersion(lambda: f64, nu: f64) -> Result<Self> {
        check_positive(lambda, "negative binomial mean")?;
        check_positive(nu, "dispersion nu")?;
        Self::new(lambda, lambda / nu)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// ν = λ/r.
    pub fn dispersion(&self) -> f64 {
        self.lambda / self.r
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let (lambda, r) = (self.lambda, self.r);
        if lambda == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let kf = k as f64;
        // Γ(k+r)/(Γ(r) k!) · (r/(r+λ))^r · (λ/(r+λ))^k, arranged so that
        // r → ∞ stays accurate.
        let head = if k <= 4096 {
            (0..k).map(|j| ln_1p((j as f64 - lambda) / (r + lambda))).sum::<f64>()
                + kf * ln(lambda)
        } else {
            ln_rising(r, k) + kf * (ln(lambda) - ln(r + lambda))
        };
        head - ln_gamma(kf + 1.0) - r * ln_1p(lambda / r)
    }
}

impl Moments for NegBinParams {
    fn mean(&self) -> f64 {
        self.lambda
    }
    fn variance(&self) -> f64 {
        self.lambda * (1.0 + self.lambda / self.r)
    }
}

impl Distribution<u64> for NegBinParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        let rate: f64 = rand_distr::Gamma::new(self.r, self.lambda / self.r)
            .expect("validated negative binomial parameters")
            .sample(rng);
        sample_poisson(rate, rng)
    }
}

/// Beta-Binomial in mean/dispersion form: n trials, mean fraction μ and
/// dispersion γ = 1/(α + β + 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBinParams {
    n: u64,
    mu: f64,
    gamma: f64,
}

impl BetaBinParams {
    pub fn new(n: u64, mu: f64, gamma: f64) -> Result<Self> {
        check_probability(mu, "beta-binomial mean fraction")?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::domain(alloc::format!(
                "beta-binomial dispersion must lie in [0, 1), got {gamma}"
            )));
        }
        Ok(Self { n, mu, gamma })
    }

    /// γ = ν/(n − 1), clamped to [`GAMMA_CLAMP`]. The flag reports whether the
    /// clamp was hit. Needs `n ≥ 2`.
    pub fn from_dispersion(n: u64, mu: f64, nu: f64) -> Result<(Self, bool)> {
        check_non_negative(nu, "dispersion nu")?;
        if n < 2 {
            return Err(Error::domain("beta-binomial dispersion needs n >= 2"));
        }
        let gamma = nu / (n - 1) as f64;
        let clamped = gamma >= 1.0;
        Ok((Self::new(n, mu, if clamped { GAMMA_CLAMP } else { gamma })?, clamped))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Underlying Beta shapes α = μ(1/γ − 1), β = (1 − μ)(1/γ − 1), or `None`
    /// when γ = 0 (the Binomial limit).
    pub fn shapes(&self) -> Option<(f64, f64)> {
        if self.gamma == 0.0 {
            return None;
        }
        let s = 1.0 / self.gamma - 1.0;
        Some((self.mu * s, (1.0 - self.mu) * s))
    }

    pub fn ln_pmf(&self, k: u64) -> Result<f64> {
        let n = self.n;
        if k > n {
            return Err(Error::domain(alloc::format!(
                "beta-binomial support is 0..={n}, got k = {k}"
            )));
        }
        let Some((a, b)) = self.shapes() else {
            return BinomialParams::new(n, self.mu)?.ln_pmf(k);
        };
        if self.mu == 0.0 {
            return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
        }
        if self.mu == 1.0 {
            return Ok(if k == n { 0.0 } else { f64::NEG_INFINITY });
        }
        // B(k+α, n−k+β)/B(α, β) as rising factorials.
        Ok(ln_choose(n, k) + ln_rising(a, k) + ln_rising(b, n - k) - ln_rising(a + b, n))
    }
}

impl Moments for BetaBinParams {
    fn mean(&self) -> f64 {
        self.n as f64 * self.mu
    }
    fn variance(&self) -> f64 {
        let n = self.n as f64;
        n * self.mu * (1.0 - self.mu) * (1.0 + (n - 1.0) * self.gamma)
    }
}

impl Distribution<u64> for BetaBinParams {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.n == 0 || self.mu == 0.0 {
            return 0;
        }
        if self.mu == 1.0 {
            return self.n;
        }
        let p = match self.shapes() {
            Some((a, b)) => sample_beta(a, b, rng),
            None => self.mu,
        };
        BinomialParams { n: self.n, p }.sample(rng)
    }
}

pub fn binomial_pmf(k: u64, params: &BinomialParams) -> Result<f64> {
    params.ln_pmf(k).map(math::exp)
}

pub fn poisson_pmf(k: u64, params: &PoissonParams) -> f64 {
    math::exp(params.ln_pmf(k))
}

pub fn negbin_pmf(k: u64, params: &NegBinParams) -> f64 {
    math::exp(params.ln_pmf(k))
}

pub fn betabin_pmf(k: u64, params: &BetaBinParams) -> Result<f64> {
    params.ln_pmf(k).map(math::exp)
}

pub fn gamma_pdf(x: f64, params: &GammaParams) -> f64 {
    math::exp(params.ln_pdf(x))
}

pub fn beta_pdf(x: f64, params: &BetaParams) -> f64 {
    math::exp(params.ln_pdf(x))
}

/// ln 𝒩(x; mean, sd²), normalising constant included.
pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - ln(sd) - math::LN_SQRT_2PI
}

/// Poisson draw whose variance is scaled by `1 + nu`.
///
/// `nu = 0` is a plain Poisson draw; otherwise a Negative-Binomial with
/// r = λ/ν. A zero rate returns 0 without touching the stream.
pub fn overdispersed_poisson<R: Rng + ?Sized>(lambda: f64, nu: f64, rng: &mut R) -> Result<u64> {
    check_non_negative(lambda, "poisson lambda")?;
    check_non_negative(nu, "dispersion nu")?;
    if lambda == 0.0 {
        return Ok(0);
    }
    if nu == 0.0 {
        return Ok(PoissonParams::new(lambda)?.sample(rng));
    }
    Ok(NegBinParams::from_dispersion(lambda, nu)?.sample(rng))
}

/// Result of [`overdispersed_binomial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispersedDraw {
    pub count: u64,
    /// ν/(n − 1) reached 1 and γ was clamped to [`GAMMA_CLAMP`].
    pub gamma_clamped: bool,
}

/// Binomial draw whose variance is scaled by `1 + nu`.
///
/// `nu = 0` or `n ≤ 1` is a plain Binomial draw; otherwise a Beta-Binomial
/// with γ = ν/(n − 1).
pub fn overdispersed_binomial<R: Rng + ?Sized>(
    n: u64,
    p: f64,
    nu: f64,
    rng: &mut R,
) -> Result<DispersedDraw> {
    let base = BinomialParams::new(n, p)?;
    check_non_negative(nu, "dispersion nu")?;
    if nu == 0.0 || n <= 1 {
        return Ok(DispersedDraw { count: base.sample(rng), gamma_clamped: false });
    }
    let (params, gamma_clamped) = BetaBinParams::from_dispersion(n, p, nu)?;
    Ok(DispersedDraw { count: params.sample(rng), gamma_clamped })
}
