use rand::Rng;

use super::{CountState, ModelKind, ParamSet, RealState};
use crate::dist::{overdispersed_binomial, overdispersed_poisson};
use crate::math::exp_m1;
use crate::Result;

/// Per-step infection probability 1 − exp(−β·c(t)·(infectious/N)·Δt).
///
/// SEIAR callers pass I + A as `infectious`.
pub fn infection_prob(params: &ParamSet, infectious: f64, t: u64) -> f64 {
    let force = params.beta * params.contact.at(t) * infectious / params.n_pop as f64;
    -exp_m1(-force * params.dt)
}

/// Per-step probability 1 − exp(−rate·Δt) of leaving a compartment.
pub fn transition_prob(rate: f64, dt: f64) -> f64 {
    -exp_m1(-rate * dt)
}

/// Result of one forward-Euler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerStep {
    pub state: RealState,
    /// Some outflow exceeded its source and was scaled down to it.
    pub clamped: bool,
}

/// One forward-Euler step x ← x + Δt·f(x) of the continuous model.
///
/// Each outflow is limited to the current content of its source compartment
/// (proportionally when a compartment has two outflows), which keeps every
/// compartment non-negative and the total unchanged.
pub fn step_deterministic(state: &RealState, params: &ParamSet) -> EulerStep {
    let dt = params.dt;
    let n = params.n_pop as f64;
    let beta_c = params.beta * params.contact.at(state.t);
    let mut clamped = false;
    let mut cap = |flow: f64, source: f64| {
        if flow > source {
            clamped = true;
            source
        } else {
            flow
        }
    };

    let mut next = *state;
    next.t += 1;
    match state.kind {
        ModelKind::Sir => {
            let infect = cap(dt * beta_c * state.s * state.i / n, state.s);
            let recover = cap(dt * params.alpha * state.i, state.i);
            next.s -= infect;
            next.i += infect - recover;
            next.r += recover;
        }
        ModelKind::Seir => {
            let infect = cap(dt * beta_c * state.s * state.i / n, state.s);
            let onset = cap(dt * params.gamma * state.e, state.e);
            let recover = cap(dt * params.alpha * state.i, state.i);
            next.s -= infect;
            next.e += infect - onset;
            next.i += onset - recover;
            next.r += recover;
        }
        ModelKind::Seiar => {
            let infect = cap(dt * beta_c * state.s * (state.i + state.a) / n, state.s);
            let mut to_i = dt * params.gamma * params.p_frac * state.e;
            let mut to_a = dt * params.gamma * (1.0 - params.p_frac) * state.e;
            let leaving = to_i + to_a;
            let allowed = cap(leaving, state.e);
            if allowed < leaving {
                let scale = allowed / leaving;
                to_i *= scale;
                to_a *= scale;
            }
            let recover_i = cap(dt * params.alpha * state.i, state.i);
            let recover_a = cap(dt * params.mu * state.a, state.a);
            next.s -= infect;
            next.e += infect - to_i - to_a;
            next.i += to_i - recover_i;
            next.a += to_a - recover_a;
            next.r += recover_i + recover_a;
        }
    }
    for c in state.kind.compartments() {
        if next.get(*c) < 0.0 {
            next.set(*c, 0.0);
        }
    }
    EulerStep { state: next, clamped }
}

/// Result of one Chain-Binomial step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticStep {
    pub state: CountState,
    /// A Beta-Binomial draw had ν/(n − 1) ≥ 1 and used a clamped γ.
    pub gamma_clamped: bool,
}

/// One Chain-Binomial step.
///
/// Every flow is drawn once and moved from its source to its destination:
/// infections from Poisson(S·p_E) (capped at S), all other transitions from
/// Binomial draws on the source count. SEIAR exposed departures are drawn
/// jointly with probability p_I + p_A − p_I·p_A and then split between I and
/// A in the ratio p_I : p_A, so E never goes negative. With ν > 0 the Poisson
/// and Binomial draws become Negative-Binomial and Beta-Binomial draws with
/// variance inflated by 1 + ν.
///
/// Parameters are assumed valid (see [`ParamSet::validate`]).
pub fn step_stochastic<R: Rng + ?Sized>(
    state: &CountState,
    params: &ParamSet,
    rng: &mut R,
) -> Result<StochasticStep> {
    let nu = params.nu;
    let dt = params.dt;
    let mut clamped = false;
    let mut binomial = |n: u64, p: f64, rng: &mut R| -> Result<u64> {
        let draw = overdispersed_binomial(n, p, nu, rng)?;
        clamped |= draw.gamma_clamped;
        Ok(draw.count)
    };

    let infectious = match state.kind {
        ModelKind::Seiar => state.i + state.a,
        _ => state.i,
    };
    let p_infect = infection_prob(params, infectious as f64, state.t);
    let infect = overdispersed_poisson(state.s as f64 * p_infect, nu, rng)?.min(state.s);

    let mut next = *state;
    next.t += 1;
    next.s -= infect;
    match state.kind {
        ModelKind::Sir => {
            let recover = binomial(state.i, transition_prob(params.alpha, dt), rng)?;
            next.i = state.i + infect - recover;
            next.r += recover;
        }
        ModelKind::Seir => {
            let onset = binomial(state.e, transition_prob(params.gamma, dt), rng)?;
            let recover = binomial(state.i, transition_prob(params.alpha, dt), rng)?;
            next.e = state.e + infect - onset;
            next.i = state.i + onset - recover;
            next.r += recover;
        }
        ModelKind::Seiar => {
            let p_i = transition_prob(params.gamma * params.p_frac, dt);
            let p_a = transition_prob(params.gamma * (1.0 - params.p_frac), dt);
            let p_leave = (p_i + p_a - p_i * p_a).min(1.0);
            let leave = binomial(state.e, p_leave, rng)?;
            let share_i = if p_i + p_a > 0.0 { p_i / (p_i + p_a) } else { 0.0 };
            let to_i = binomial(leave, share_i, rng)?;
            let to_a = leave - to_i;
            let recover_i = binomial(state.i, transition_prob(params.alpha, dt), rng)?;
            let recover_a = binomial(state.a, transition_prob(params.mu, dt), rng)?;
            next.e = state.e + infect - leave;
            next.i = state.i + to_i - recover_i;
            next.a = state.a + to_a - recover_a;
            next.r += recover_i + recover_a;
        }
    }
    Ok(StochasticStep { state: next, gamma_clamped: clamped })
}
