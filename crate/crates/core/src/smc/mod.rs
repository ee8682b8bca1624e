//! Bootstrap particle filter.
//!
//! Particles are propagated with the model's own transition, so each weight
//! update multiplies by the observation likelihood alone. Weights live in log
//! space and are normalised by subtracting the maximum. The ensemble is
//! resampled whenever the effective sample size drops below a fraction of the
//! particle count.
//!
//! A run is scored in one of two ways (see [`ScoreVariant`]): the average over
//! steps of the log mean particle likelihood, or the usual log-marginal
//! likelihood estimate.

mod resample;

pub use resample::{ess, resample_indices, ResampleMode};

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dist::normal_ln_pdf;
use crate::epi::{step_stochastic, Compartment, CountState, ParamSet};
use crate::math::{exp, ln, log_sum_exp};
use crate::rng::{substream, Stream, RESAMPLE_KEY};
use crate::{Error, Result};

/// Default observation noise scale.
pub const DEFAULT_SIGMA: f64 = 100.0;
/// Default resampling trigger as a fraction of the particle count.
pub const DEFAULT_ESS_THRESHOLD: f64 = 0.5;

/// A state-space model the filter can run.
///
/// `init` gives a particle's starting state, `step` samples the transition
/// (the bootstrap proposal), and `log_likelihood` scores a state against one
/// observation.
pub trait SmcModel: Sync {
    type State: Clone + Send + Sync;

    fn init(&self) -> Self::State;

    fn step(&self, state: &Self::State, rng: &mut Stream) -> Result<Self::State>;

    /// The observed quantity of a state.
    fn observe(&self, state: &Self::State) -> f64;

    fn log_likelihood(&self, state: &Self::State, y: f64) -> f64;
}

/// ln 𝒩(I − y; 0, σ²) for the infected count of `state`.
pub fn log_likelihood(state: &CountState, y: f64, sigma: f64) -> f64 {
    normal_ln_pdf(state.i as f64, y, sigma)
}

/// Observed series: `values[k]` is compared with the state after step k + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    values: Vec<f64>,
    sigma: f64,
    compartment: Compartment,
}

impl MeasurementSeries {
    /// Infected-count measurements with noise scale `sigma`.
    pub fn new(values: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::of_compartment(values, sigma, Compartment::I)
    }

    pub fn of_compartment(values: Vec<f64>, sigma: f64, compartment: Compartment) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyMeasurements);
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(alloc::format!(
                "observation noise must be positive, got {sigma}"
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::domain(alloc::format!(
                "measurements must be non-negative and finite, got {v}"
            )));
        }
        Ok(Self { values, sigma, compartment })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn compartment(&self) -> Compartment {
        self.compartment
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Chain-Binomial epidemic observed through one compartment with Normal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainBinomialModel {
    pub params: ParamSet,
    pub initial: CountState,
    pub sigma: f64,
    pub compartment: Compartment,
}

impl ChainBinomialModel {
    pub fn new(params: ParamSet, initial: CountState, measurements: &MeasurementSeries) -> Result<Self> {
        params.validate()?;
        initial.validate(params.n_pop)?;
        if !initial.kind.has(measurements.compartment) {
            return Err(Error::domain(alloc::format!(
                "the {} model has no {} compartment",
                initial.kind,
                measurements.compartment
            )));
        }
        Ok(Self {
            params,
            initial,
            sigma: measurements.sigma,
            compartment: measurements.compartment,
        })
    }
}

impl SmcModel for ChainBinomialModel {
    type State = CountState;

    fn init(&self) -> CountState {
        self.initial
    }

    fn step(&self, state: &CountState, rng: &mut Stream) -> Result<CountState> {
        Ok(step_stochastic(state, &self.params, rng)?.state)
    }

    fn observe(&self, state: &CountState) -> f64 {
        state.get(self.compartment) as f64
    }

    fn log_likelihood(&self, state: &CountState, y: f64) -> f64 {
        normal_ln_pdf(self.observe(state), y, self.sigma)
    }
}

/// How a filter run is condensed into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariant {
    /// (1/N_t)·Σₖ ln(mean particle likelihood at step k).
    #[default]
    StepAverage,
    /// Σₖ ln(Σᵢ w̃ᵢ·likelihoodᵢ) with w̃ the normalised weights before the
    /// update: the standard log-marginal likelihood estimate.
    LogMarginal,
}

impl ScoreVariant {
    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::StepAverage => "step-average",
            ScoreVariant::LogMarginal => "log-marginal",
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step-average" => Ok(ScoreVariant::StepAverage),
            "log-marginal" => Ok(ScoreVariant::LogMarginal),
            _ => Err(Error::domain(alloc::format!("unknown score variant '{s}'"))),
        }
    }
}

/// Bookkeeping for one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time index after the step.
    pub t: usize,
    /// ln of the unweighted mean particle likelihood.
    pub log_mean_likelihood: f64,
    /// ln of the likelihood averaged with the pre-update weights.
    pub log_weighted_likelihood: f64,
    /// ESS after the weight update, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    /// Weighted mean of the observed quantity after the update.
    pub filtered_mean: f64,
}

/// Particles, their weights and random streams.
///
/// Particle slot i always draws from stream i, also after resampling, so a
/// run depends only on the seed.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<S> {
    states: Vec<S>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    rngs: Vec<Stream>,
    resample_rng: Stream,
    log_lik: Vec<f64>,
    t: usize,
    ledger: Vec<StepRecord>,
}

impl<S: Clone + Send + Sync> ParticleEnsemble<S> {
    /// `n_p` copies of the model's initial state with uniform weights.
    pub fn new<M: SmcModel<State = S>>(model: &M, n_p: usize, seed: u64) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::domain("a particle filter needs at least one particle"));
        }
        let uniform = 1.0 / n_p as f64;
        Ok(Self {
            states: alloc::vec![model.init(); n_p],
            log_weights: alloc::vec![-ln(n_p as f64); n_p],
            weights: alloc::vec![uniform; n_p],
            rngs: (0..n_p as u64).map(|i| substream(seed, i)).collect(),
            resample_rng: substream(seed, RESAMPLE_KEY),
            log_lik: alloc::vec![0.0; n_p],
            t: 0,
            ledger: Vec::new(),
        })
    }

    /// Back to the initial state with fresh streams under `seed`.
    pub fn reset<M: SmcModel<State = S>>(&mut self, model: &M, seed: u64) {
        let n_p = self.len();
        *self = Self::new(model, n_p, seed).expect("non-empty ensemble");
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    /// Normalised weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn ledger(&self) -> &[StepRecord] {
        &self.ledger
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.weights)
    }

    /// Replaces the particles by offspring drawn from the current weights and
    /// resets all weights to 1/N_p.
    pub fn resample(&mut self, mode: ResampleMode) -> Result<()> {
        let n = self.len();
        let ancestors = resample_indices(&self.weights, n, mode, &mut self.resample_rng)?;
        self.states = ancestors.iter().map(|&a| self.states[a].clone()).collect();
        let uniform = 1.0 / n as f64;
        self.weights.fill(uniform);
        self.log_weights.fill(-ln(n as f64));
        Ok(())
    }

    /// Propagates every particle one step, weights it against `y` and
    /// resamples if the ESS falls below `ess_threshold · N_p`.
    pub fn filter_step<M: SmcModel<State = S>>(
        &mut self,
        model: &M,
        y: f64,
        ess_threshold: f64,
        mode: ResampleMode,
    ) -> Result<StepRecord> {
        self.propagate(model, y)?;
        let n = self.len() as f64;

        let log_mean_likelihood = log_sum_exp(self.log_lik.iter().copied()) - ln(n);
        let log_weighted_likelihood =
            log_sum_exp(self.log_weights.iter().zip(&self.log_lik).map(|(lw, ll)| lw + ll));

        for (lw, ll) in self.log_weights.iter_mut().zip(&self.log_lik) {
            *lw += ll;
        }
        self.normalise()?;
        let ess = ess(&self.weights)?;
        let filtered_mean = self
            .states
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * model.observe(s))
            .sum();

        let resampled = ess < ess_threshold * n;
        if resampled {
            self.resample(mode)?;
        }
        self.t += 1;
        let record = StepRecord {
            t: self.t,
            log_mean_likelihood,
            log_weighted_likelihood,
            ess,
            resampled,
            filtered_mean,
        };
        self.ledger.push(record);
        Ok(record)
    }

    #[cfg(feature = "parallel")]
    fn propagate<M: SmcModel<State = S>>(&mut self, model: &M, y: f64) -> Result<()> {
        use rayon::prelude::*;
        self.states
            .par_iter_mut()
            .zip(self.rngs.par_iter_mut())
            .zip(self.log_lik.par_iter_mut())
            .try_for_each(|((state, rng), ll)| {
                *state = model.step(state, rng)?;
                *ll = model.log_likelihood(state, y);
                Ok(())
            })
    }

    #[cfg(not(feature = "parallel"))]
    fn propagate<M: SmcModel<State = S>>(&mut self, model: &M, y: f64) -> Result<()> {
        for ((state, rng), ll) in self.states.iter_mut().zip(&mut self.rngs).zip(&mut self.log_lik) {
            *state = model.step(state, rng)?;
            *ll = model.log_likelihood(state, y);
        }
        Ok(())
    }

    fn normalise(&mut self) -> Result<()> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let mut total = 0.0;
        for (w, lw) in self.weights.iter_mut().zip(&self.log_weights) {
            *w = exp(lw - max);
            total += *w;
        }
        let log_total = ln(total);
        for (w, lw) in self.weights.iter_mut().zip(self.log_weights.iter_mut()) {
            *w /= total;
            *lw -= max + log_total;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub seed: u64,
    pub mode: ResampleMode,
    pub ess_threshold: f64,
    pub score: ScoreVariant,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            seed: 0,
            mode: ResampleMode::default(),
            ess_threshold: DEFAULT_ESS_THRESHOLD,
            score: ScoreVariant::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    /// The score selected by [`FilterConfig::score`].
    pub score: f64,
    pub step_average: f64,
    pub log_marginal: f64,
    pub ledger: Vec<StepRecord>,
}

/// Filters the whole measurement series and scores the run.
pub fn run_filter<M: SmcModel>(model: &M, measurements: &[f64], config: &FilterConfig) -> Result<FilterRun> {
    if measurements.is_empty() {
        return Err(Error::EmptyMeasurements);
    }
    if !(config.ess_threshold >= 0.0) {
        return Err(Error::domain("ESS threshold must be non-negative"));
    }
    let mut ensemble = ParticleEnsemble::new(model, config.n_particles, config.seed)?;
    for &y in measurements {
        ensemble.filter_step(model, y, config.ess_threshold, config.mode)?;
    }
    let ledger = ensemble.ledger;
    let log_marginal: f64 = ledger.iter().map(|r| r.log_weighted_likelihood).sum();
    let step_average =
        ledger.iter().map(|r| r.log_mean_likelihood).sum::<f64>() / ledger.len() as f64;
    let score = match config.score {
        ScoreVariant::StepAverage => step_average,
        ScoreVariant::LogMarginal => log_marginal,
    };
    Ok(FilterRun { score, step_average, log_marginal, ledger })
}
