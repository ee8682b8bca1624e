//! Metropolis and Metropolis-Hastings sampling over model parameters.
//!
//! A chain proposes from a Normal kernel truncated to per-parameter bounds,
//! scores the proposal with a [`LogTarget`] and accepts it with probability
//! min(1, exp(score′ − score)). Rejected proposals leave the chain at the last
//! accepted value, which is also where the next proposal is centred. With
//! `hastings` enabled the ratio is corrected for the asymmetry the truncation
//! introduces.
//!
//! [`run_chain`] plugs a particle-filter score into this loop: every
//! iteration runs one filter with a fresh seed, so the score of a given θ is
//! itself random.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::epi::{CountState, ModelKind, ParamSet};
use crate::math::{exp, ln, normal_sf, LN_SQRT_2PI};
use crate::rng::{derive_seed, substream, CHAIN_KEY};
use crate::smc::{run_filter, ChainBinomialModel, FilterConfig, MeasurementSeries, ResampleMode, ScoreVariant};
use crate::{Error, Result};

/// A model parameter the chain can move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    Beta,
    Alpha,
    Gamma,
    Mu,
    PFrac,
}

impl Parameter {
    pub const ALL: [Parameter; 5] =
        [Parameter::Beta, Parameter::Alpha, Parameter::Gamma, Parameter::Mu, Parameter::PFrac];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Beta => "beta",
            Parameter::Alpha => "alpha",
            Parameter::Gamma => "gamma",
            Parameter::Mu => "mu",
            Parameter::PFrac => "p",
        }
    }

    pub fn get(self, params: &ParamSet) -> f64 {
        match self {
            Parameter::Beta => params.beta,
            Parameter::Alpha => params.alpha,
            Parameter::Gamma => params.gamma,
            Parameter::Mu => params.mu,
            Parameter::PFrac => params.p_frac,
        }
    }

    pub fn set(self, params: &mut ParamSet, value: f64) {
        match self {
            Parameter::Beta => params.beta = value,
            Parameter::Alpha => params.alpha = value,
            Parameter::Gamma => params.gamma = value,
            Parameter::Mu => params.mu = value,
            Parameter::PFrac => params.p_frac = value,
        }
    }

    /// Largest admissible value.
    pub fn upper_bound(self) -> f64 {
        match self {
            Parameter::PFrac => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Default starting point as a multiple of the reference value.
    pub fn initial_multiplier(self) -> f64 {
        match self {
            Parameter::PFrac => 1.5,
            _ => 2.0,
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "p_frac" => Ok(Parameter::PFrac),
            _ => Parameter::ALL
                .into_iter()
                .find(|p| p.name() == s)
                .ok_or_else(|| Error::domain(alloc::format!("unknown parameter '{s}'"))),
        }
    }
}

/// Parameters inferred for each model kind; the rest stay fixed.
pub fn free_parameters(kind: ModelKind) -> &'static [Parameter] {
    use Parameter::*;
    match kind {
        ModelKind::Sir => &[Beta, Alpha],
        ModelKind::Seir => &[Beta, Alpha, Gamma],
        ModelKind::Seiar => &[Beta, Alpha, Gamma, Mu, PFrac],
    }
}

/// Values of `parameters` in `params`.
pub fn parameter_values(params: &ParamSet, parameters: &[Parameter]) -> Vec<f64> {
    parameters.iter().map(|p| p.get(params)).collect()
}

/// `params` with `parameters` overwritten by `theta`.
pub fn with_parameters(params: &ParamSet, parameters: &[Parameter], theta: &[f64]) -> ParamSet {
    let mut out = params.clone();
    for (p, v) in parameters.iter().zip(theta) {
        p.set(&mut out, *v);
    }
    out
}

/// Independent truncated-Normal random-walk kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    stds: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ProposalSpec {
    /// A zero standard deviation pins that coordinate.
    pub fn new(stds: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if stds.len() != lower.len() || stds.len() != upper.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} standard deviations, {} lower and {} upper bounds",
                stds.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (i, ((s, l), u)) in stds.iter().zip(&lower).zip(&upper).enumerate() {
            if !(*s >= 0.0 && s.is_finite()) {
                return Err(Error::domain(alloc::format!("proposal std {i} must be finite and >= 0")));
            }
            if !(l < u) {
                return Err(Error::domain(alloc::format!("empty proposal range for coordinate {i}")));
            }
        }
        Ok(Self { stds, lower, upper })
    }

    /// No truncation.
    pub fn unbounded(stds: Vec<f64>) -> Result<Self> {
        let n = stds.len();
        Self::new(stds, alloc::vec![f64::NEG_INFINITY; n], alloc::vec![f64::INFINITY; n])
    }

    /// Bounds [0, upper] per parameter and std `scale·|θ₀|`.
    pub fn for_parameters(parameters: &[Parameter], theta0: &[f64], scale: f64) -> Result<Self> {
        if parameters.len() != theta0.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} parameters but {} initial values",
                parameters.len(),
                theta0.len()
            )));
        }
        Self::new(
            theta0.iter().map(|t| scale * t.abs()).collect(),
            alloc::vec![0.0; parameters.len()],
            parameters.iter().map(|p| p.upper_bound()).collect(),
        )
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn dim(&self) -> usize {
        self.stds.len()
    }

    fn contains(&self, i: usize, x: f64) -> bool {
        x >= self.lower[i] && x <= self.upper[i]
    }
}

/// Draws each coordinate from 𝒩(θᵢ, sᵢ²) restricted to its bounds, redrawing
/// until the value falls inside.
pub fn propose<R: Rng + ?Sized>(theta: &[f64], spec: &ProposalSpec, rng: &mut R) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let s = spec.stds[i];
            if s == 0.0 {
                return x;
            }
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let cand = x + s * z;
                if spec.contains(i, cand) {
                    return cand;
                }
            }
        })
        .collect()
}

/// ln q(`to` | `from`) for the truncated kernel. Pinned coordinates are
/// skipped (they cancel in any ratio).
pub fn log_proposal_density(to: &[f64], from: &[f64], spec: &ProposalSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..spec.dim() {
        let s = spec.stds[i];
        if s == 0.0 {
            continue;
        }
        if !spec.contains(i, to[i]) {
            return f64::NEG_INFINITY;
        }
        let z = (to[i] - from[i]) / s;
        let mass = normal_sf((spec.lower[i] - from[i]) / s) - normal_sf((spec.upper[i] - from[i]) / s);
        total += -0.5 * z * z - ln(s) - LN_SQRT_2PI - ln(mass);
    }
    total
}

/// min(1, exp(score_new − score_old)).
pub fn accept_ratio(score_new: f64, score_old: f64) -> f64 {
    if score_new >= score_old {
        1.0
    } else {
        exp(score_new - score_old)
    }
}

/// Metropolis-Hastings ratio with `log_q_forward` = ln q(new | old) and
/// `log_q_backward` = ln q(old | new).
pub fn accept_ratio_mh(score_new: f64, score_old: f64, log_q_forward: f64, log_q_backward: f64) -> f64 {
    let log_ratio = (score_new - score_old) + (log_q_backward - log_q_forward);
    if log_ratio >= 0.0 {
        1.0
    } else {
        exp(log_ratio)
    }
}

/// Log-score the chain samples from.
pub trait LogTarget {
    /// Score of `theta` at chain iteration `iteration` (0 for θ₀).
    fn log_score(&mut self, theta: &[f64], iteration: u64) -> Result<f64>;
}

impl<F: FnMut(&[f64]) -> f64> LogTarget for F {
    fn log_score(&mut self, theta: &[f64], _iteration: u64) -> Result<f64> {
        Ok(self(theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetropolisConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Correct the acceptance ratio for the truncated kernel.
    pub hastings: bool,
}

/// States visited by a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// θ after each iteration, starting with θ₀ (`iterations + 1` entries).
    pub samples: Vec<Vec<f64>>,
    /// Score of each entry of `samples`.
    pub scores: Vec<f64>,
    /// Whether iteration i + 1 accepted its proposal (`iterations` entries).
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
    /// Index into `samples` of the last accepted proposal (0 if none).
    pub last_accepted: usize,
}

impl Chain {
    pub fn iterations(&self) -> usize {
        self.accepted.len()
    }
}

/// Runs a Metropolis(-Hastings) chain from `theta0`.
///
/// Proposals whose score is not finite are rejected. A non-finite score at
/// θ₀ is an error.
pub fn run_metropolis<T: LogTarget + ?Sized>(
    target: &mut T,
    theta0: Vec<f64>,
    spec: &ProposalSpec,
    config: &MetropolisConfig,
) -> Result<Chain> {
    if theta0.len() != spec.dim() {
        return Err(Error::Dimension(alloc::format!(
            "θ₀ has {} entries, proposal has {}",
            theta0.len(),
            spec.dim()
        )));
    }
    let score0 = target.log_score(&theta0, 0)?;
    if !score0.is_finite() {
        return Err(Error::NonFiniteInitialScore(score0));
    }

    let mut rng = substream(config.seed, CHAIN_KEY);
    let mut samples = Vec::with_capacity(config.iterations + 1);
    let mut scores = Vec::with_capacity(config.iterations + 1);
    let mut accepted = Vec::with_capacity(config.iterations);
    let mut current = theta0;
    let mut current_score = score0;
    let mut last_accepted = 0;
    samples.push(current.clone());
    scores.push(current_score);

    for i in 1..=config.iterations {
        let cand = propose(&current, spec, &mut rng);
        let cand_score = target.log_score(&cand, i as u64)?;
        let u: f64 = rng.random();
        let alpha = if !cand_score.is_finite() {
            0.0
        } else if config.hastings {
            let forward = log_proposal_density(&cand, &current, spec);
            let backward = log_proposal_density(&current, &cand, spec);
            accept_ratio_mh(cand_score, current_score, forward, backward)
        } else {
            accept_ratio(cand_score, current_score)
        };
        let take = alpha >= 1.0 || u < alpha;
        if take {
            current = cand;
            current_score = cand_score;
            last_accepted = i;
        }
        accepted.push(take);
        samples.push(current.clone());
        scores.push(current_score);
    }

    let n_acc = accepted.iter().filter(|a| **a).count();
    let acceptance_rate = if accepted.is_empty() { 0.0 } else { n_acc as f64 / accepted.len() as f64 };
    Ok(Chain { samples, scores, accepted, acceptance_rate, last_accepted })
}

/// Settings of a particle-filter driven chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_particles: usize,
    pub iterations: usize,
    pub theta0: Vec<f64>,
    pub spec: ProposalSpec,
    pub seed: u64,
    pub score: ScoreVariant,
    pub ess_threshold: f64,
    pub mode: ResampleMode,
    /// Use the same filter seed for every iteration.
    pub pin_filter_seed: bool,
    pub hastings: bool,
}

/// Scores θ by one particle-filter run of the Chain-Binomial model.
#[derive(Debug, Clone)]
pub struct FilterTarget<'a> {
    pub base: ParamSet,
    pub initial: CountState,
    pub measurements: &'a MeasurementSeries,
    pub parameters: Vec<Parameter>,
    pub filter: FilterConfig,
    pub pin_seed: bool,
}

impl FilterTarget<'_> {
    /// Filter seed used at `iteration`.
    pub fn filter_seed(&self, iteration: u64) -> u64 {
        if self.pin_seed {
            self.filter.seed
        } else {
            derive_seed(self.filter.seed, iteration)
        }
    }
}

impl LogTarget for FilterTarget<'_> {
    fn log_score(&mut self, theta: &[f64], iteration: u64) -> Result<f64> {
        let params = with_parameters(&self.base, &self.parameters, theta);
        if params.validate().is_err() {
            return Ok(f64::NEG_INFINITY);
        }
        let model = ChainBinomialModel::new(params, self.initial, self.measurements)?;
        let cfg = FilterConfig { seed: self.filter_seed(iteration), ..self.filter };
        Ok(run_filter(&model, self.measurements.values(), &cfg)?.score)
    }
}

/// Particle-marginal Metropolis chain over `parameters`, with the remaining
/// rates taken from `base`.
pub fn run_chain(
    base: &ParamSet,
    initial: &CountState,
    measurements: &MeasurementSeries,
    parameters: &[Parameter],
    config: &ChainConfig,
) -> Result<Chain> {
    base.validate()?;
    initial.validate(base.n_pop)?;
    if config.theta0.len() != parameters.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} parameters but θ₀ has {} entries",
            parameters.len(),
            config.theta0.len()
        )));
    }
    let mut target = FilterTarget {
        base: base.clone(),
        initial: *initial,
        measurements,
        parameters: parameters.to_vec(),
        filter: FilterConfig {
            n_particles: config.n_particles,
            seed: config.seed,
            mode: config.mode,
            ess_threshold: config.ess_threshold,
            score: config.score,
        },
        pin_seed: config.pin_filter_seed,
    };
    let mcfg = MetropolisConfig {
        iterations: config.iterations,
        seed: config.seed,
        hastings: config.hastings,
    };
    run_metropolis(&mut target, config.theta0.clone(), &config.spec, &mcfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::{simulate_deterministic, Preset};
    use proptest::prelude::*;

    #[test]
    fn acceptance_ratio_examples() {
        assert_eq!(accept_ratio(-1.0, -2.0), 1.0);
        assert_eq!(accept_ratio(-3.0, -3.0), 1.0);
        assert!((accept_ratio(-2.0f64.ln(), 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(accept_ratio_mh(1.0, 1.0, 0.0, 2.0f64.ln()), 1.0);
        assert!((accept_ratio_mh(1.0, 1.0, 2.0f64.ln(), 0.0) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn symmetric_mh_reduces_to_metropolis(a in -50.0f64..50.0, b in -50.0f64..50.0, q in -20.0f64..20.0) {
            prop_assert_eq!(accept_ratio_mh(a, b, q, q), accept_ratio(a, b));
        }

        #[test]
        fn proposals_respect_bounds(theta in proptest::collection::vec(0.0f64..1.0, 1..5), seed in any::<u64>()) {
            let params: Vec<Parameter> = (0..theta.len()).map(|i| if i == 0 { Parameter::PFrac } else { Parameter::Beta }).collect();
            let spec = ProposalSpec::for_parameters(&params, &theta, 2.0).unwrap();
            let mut rng = substream(seed, 0);
            for _ in 0..50 {
                let x = propose(&theta, &spec, &mut rng);
                prop_assert!(x.iter().all(|v| *v >= 0.0));
                prop_assert!(x[0] <= 1.0);
            }
        }
    }

    #[test]
    fn zero_std_proposals_stay_put() {
        let spec = ProposalSpec::unbounded(alloc::vec![0.0, 0.0]).unwrap();
        let mut rng = substream(1, 0);
        assert_eq!(propose(&[0.13, 0.11], &spec, &mut rng), alloc::vec![0.13, 0.11]);
    }

    #[test]
    fn proposal_spread_matches_spec() {
        let spec = ProposalSpec::for_parameters(
            &[Parameter::Beta, Parameter::Alpha],
            &[0.13, 0.11],
            0.1,
        )
        .unwrap();
        let mut rng = substream(2, 0);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| propose(&[0.13, 0.11], &spec, &mut rng)).collect();
        for (j, s) in [0.013, 0.011].into_iter().enumerate() {
            let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // SE of a sample std is about s/√(2n)
            let se = s / (2.0 * n as f64).sqrt();
            assert!((var.sqrt() - s).abs() < 3.0 * se, "coordinate {j}: {}", var.sqrt());
        }
    }

    #[test]
    fn truncated_density_normalises() {
        let spec = ProposalSpec::for_parameters(&[Parameter::PFrac], &[0.9], 0.5).unwrap();
        let from = [0.9];
        let n = 20_000;
        let h = 1.0 / n as f64;
        let integral: f64 = (0..n)
            .map(|k| exp(log_proposal_density(&[(k as f64 + 0.5) * h], &from, &spec)) * h)
            .sum();
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
        assert_eq!(log_proposal_density(&[1.5], &from, &spec), f64::NEG_INFINITY);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let spec = ProposalSpec::unbounded(alloc::vec![1.0]).unwrap();
        let cfg = MetropolisConfig { iterations: 3, seed: 0, hastings: false };
        let mut target = |_: &[f64]| f64::NEG_INFINITY;
        assert!(matches!(
            run_metropolis(&mut target, alloc::vec![0.0], &spec, &cfg),
            Err(Error::NonFiniteInitialScore(_))
        ));
    }

    #[test]
    fn bookkeeping_and_improvements() {
        let spec = ProposalSpec::unbounded(alloc::vec![0.5]).unwrap();
        let cfg = MetropolisConfig { iterations: 500, seed: 3, hastings: false };
        let mut target = |t: &[f64]| -0.5 * t[0] * t[0];
        let chain = run_metropolis(&mut target, alloc::vec![3.0], &spec, &cfg).unwrap();
        assert_eq!(chain.samples.len(), 501);
        assert_eq!(chain.scores.len(), 501);
        assert_eq!(chain.accepted.len(), 500);
        for i in 0..500 {
            if chain.accepted[i] {
                assert_ne!(chain.samples[i + 1], chain.samples[i]);
            } else {
                assert_eq!(chain.samples[i + 1], chain.samples[i]);
            }
            // a rejected step never had a better proposal available
            if !chain.accepted[i] {
                assert!(chain.scores[i + 1] == chain.scores[i]);
            }
        }
        let last = chain.accepted.iter().rposition(|a| *a).map_or(0, |i| i + 1);
        assert_eq!(chain.last_accepted, last);
        let again = run_metropolis(&mut target, alloc::vec![3.0], &spec, &cfg).unwrap();
        assert_eq!(chain, again);
    }

    #[test]
    fn hastings_corrects_truncation_bias() {
        // Exponential(1) on [0, ∞): mean 1. Wide proposals near the boundary
        // make the truncated kernel strongly asymmetric.
        let spec = ProposalSpec::new(alloc::vec![2.0], alloc::vec![0.0], alloc::vec![f64::INFINITY]).unwrap();
        let mut target = |t: &[f64]| -t[0];
        let mean_of = |hastings: bool, target: &mut dyn FnMut(&[f64]) -> f64| {
            let cfg = MetropolisConfig { iterations: 200_000, seed: 11, hastings };
            let mut t = |x: &[f64]| target(x);
            let chain = run_metropolis(&mut t, alloc::vec![1.0], &spec, &cfg).unwrap();
            chain.samples[1000..].iter().map(|s| s[0]).sum::<f64>() / (chain.samples.len() - 1000) as f64
        };
        let corrected = mean_of(true, &mut target);
        let plain = mean_of(false, &mut target);
        assert!((corrected - 1.0).abs() < 0.05, "corrected mean {corrected}");
        assert!((plain - 1.0).abs() > 0.1, "uncorrected mean {plain}");
    }

    fn sir_setup(steps: usize) -> (ParamSet, CountState, MeasurementSeries) {
        let sc = Preset::SirTable1.scenario();
        let (det, _) = simulate_deterministic(&sc.params, &sc.initial.to_real(), steps).unwrap();
        let ys = MeasurementSeries::new(det[1..].iter().map(|s| s.i).collect(), 100.0).unwrap();
        (sc.params, sc.initial, ys)
    }

    fn chain_config(iterations: usize, stds: Vec<f64>, pin: bool) -> ChainConfig {
        ChainConfig {
            n_particles: 20,
            iterations,
            theta0: alloc::vec![0.26, 0.22],
            spec: ProposalSpec::new(stds, alloc::vec![0.0; 2], alloc::vec![f64::INFINITY; 2]).unwrap(),
            seed: 5,
            score: ScoreVariant::StepAverage,
            ess_threshold: 0.5,
            mode: ResampleMode::Systematic,
            pin_filter_seed: pin,
            hastings: false,
        }
    }

    #[test]
    fn zero_iterations_is_just_theta0() {
        let (params, initial, ys) = sir_setup(30);
        let chain = run_chain(&params, &initial, &ys, free_parameters(ModelKind::Sir), &chain_config(0, alloc::vec![0.01, 0.01], false)).unwrap();
        assert_eq!(chain.samples, alloc::vec![alloc::vec![0.26, 0.22]]);
        assert!(chain.accepted.is_empty());
    }

    #[test]
    fn pinned_filter_with_zero_steps_accepts_everything() {
        let (params, initial, ys) = sir_setup(30);
        let chain = run_chain(&params, &initial, &ys, free_parameters(ModelKind::Sir), &chain_config(20, alloc::vec![0.0, 0.0], true)).unwrap();
        assert_eq!(chain.acceptance_rate, 1.0);
        assert!(chain.samples.iter().all(|s| s == &alloc::vec![0.26, 0.22]));
        assert!(chain.scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn filter_chains_are_reproducible() {
        let (params, initial, ys) = sir_setup(30);
        let cfg = chain_config(15, alloc::vec![0.026, 0.022], false);
        let a = run_chain(&params, &initial, &ys, free_parameters(ModelKind::Sir), &cfg).unwrap();
        let b = run_chain(&params, &initial, &ys, free_parameters(ModelKind::Sir), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.accepted.iter().filter(|x| **x).count() + a.accepted.iter().filter(|x| !**x).count(), 15);
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in Parameter::ALL {
            assert_eq!(p.name().parse::<Parameter>().unwrap(), p);
        }
        assert_eq!(free_parameters(ModelKind::Seiar).len(), 5);
    }
}
