//! Compartmental epidemic models.
//!
//! Three model kinds share one state type: SIR, SEIR (adds an exposed stage)
//! and SEIAR (splits exposed individuals into symptomatic and asymptomatic
//! infectious stages). Compartments a kind does not use stay at zero.
//!
//! [`step_deterministic`] integrates the continuous equations with forward
//! Euler; [`step_stochastic`] draws each flow once per step from Poisson or
//! Binomial laws with hazard probabilities `1 − exp(−rate·Δt)`, optionally
//! overdispersed by ν.

mod ensemble;
mod step;

pub use ensemble::{
    simulate_deterministic, simulate_ensemble, simulate_trajectory, BandMode, BandSeries,
    EnsembleConfig, TrajectoryEnsemble,
};
pub use step::{
    infection_prob, step_deterministic, step_stochastic, transition_prob, EulerStep,
    StochasticStep,
};

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

/// Number of steps in the reference scenarios (days 0 to 201 at Δt = 1).
pub const TABLE_STEPS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sir,
    Seir,
    Seiar,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Sir, ModelKind::Seir, ModelKind::Seiar];

    /// Compartments used by this kind, in S, E, I, A, R order.
    pub fn compartments(self) -> &'static [Compartment] {
        use Compartment::*;
        match self {
            ModelKind::Sir => &[S, I, R],
            ModelKind::Seir => &[S, E, I, R],
            ModelKind::Seiar => &[S, E, I, A, R],
        }
    }

    pub fn has(self, c: Compartment) -> bool {
        self.compartments().contains(&c)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sir => "sir",
            ModelKind::Seir => "seir",
            ModelKind::Seiar => "seiar",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sir" => Ok(ModelKind::Sir),
            "seir" => Ok(ModelKind::Seir),
            "seiar" => Ok(ModelKind::Seiar),
            _ => Err(Error::domain(alloc::format!("unknown model kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Compartment {
    S,
    E,
    I,
    A,
    R,
}

impl Compartment {
    pub const ALL: [Compartment; 5] =
        [Compartment::S, Compartment::E, Compartment::I, Compartment::A, Compartment::R];

    pub fn label(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::E => "E",
            Compartment::I => "I",
            Compartment::A => "A",
            Compartment::R => "R",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Compartment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Compartment::S),
            "E" | "e" => Ok(Compartment::E),
            "I" | "i" => Ok(Compartment::I),
            "A" | "a" => Ok(Compartment::A),
            "R" | "r" => Ok(Compartment::R),
            _ => Err(Error::domain(alloc::format!("unknown compartment '{s}'"))),
        }
    }
}

/// Compartment counts at time index `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compartments<T> {
    pub kind: ModelKind,
    pub s: T,
    pub e: T,
    pub i: T,
    pub a: T,
    pub r: T,
    pub t: u64,
}

/// Integer state of a stochastic trajectory.
pub type CountState = Compartments<u64>;
/// Real-valued state of a deterministic trajectory.
pub type RealState = Compartments<f64>;

impl<T: Copy + Default + core::iter::Sum<T>> Compartments<T> {
    pub fn sir(s: T, i: T, r: T) -> Self {
        Self::with_kind(ModelKind::Sir, s, T::default(), i, T::default(), r)
    }

    pub fn seir(s: T, e: T, i: T, r: T) -> Self {
        Self::with_kind(ModelKind::Seir, s, e, i, T::default(), r)
    }

    pub fn seiar(s: T, e: T, i: T, a: T, r: T) -> Self {
        Self::with_kind(ModelKind::Seiar, s, e, i, a, r)
    }

    fn with_kind(kind: ModelKind, s: T, e: T, i: T, a: T, r: T) -> Self {
        Self { kind, s, e, i, a, r, t: 0 }
    }

    pub fn get(&self, c: Compartment) -> T {
        match c {
            Compartment::S => self.s,
            Compartment::E => self.e,
            Compartment::I => self.i,
            Compartment::A => self.a,
            Compartment::R => self.r,
        }
    }

    pub fn set(&mut self, c: Compartment, value: T) {
        match c {
            Compartment::S => self.s = value,
            Compartment::E => self.e = value,
            Compartment::I => self.i = value,
            Compartment::A => self.a = value,
            Compartment::R => self.r = value,
        }
    }

    /// Sum over the compartments of this kind.
    pub fn total(&self) -> T {
        self.kind.compartments().iter().map(|&c| self.get(c)).sum()
    }
}

impl CountState {
    pub fn to_real(&self) -> RealState {
        RealState {
            kind: self.kind,
            s: self.s as f64,
            e: self.e as f64,
            i: self.i as f64,
            a: self.a as f64,
            r: self.r as f64,
            t: self.t,
        }
    }

    /// Checks the kind's unused compartments are empty and the counts add up
    /// to `n_pop`.
    pub fn validate(&self, n_pop: u64) -> Result<()> {
        for c in Compartment::ALL {
            if !self.kind.has(c) && self.get(c) != 0 {
                return Err(Error::domain(alloc::format!(
                    "compartment {c} is not part of the {} model",
                    self.kind
                )));
            }
        }
        let total = self
            .kind
            .compartments()
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(self.get(c)))
            .ok_or_else(|| Error::domain("compartment counts overflow"))?;
        if total != n_pop {
            return Err(Error::domain(alloc::format!(
                "compartments sum to {total}, population is {n_pop}"
            )));
        }
        Ok(())
    }
}

/// Contact-rate multiplier c(t).
#[derive(Debug, Clone, PartialEq)]
pub enum Contact {
    Constant(f64),
    /// One value per time index; the last value holds beyond the schedule.
    Schedule(Vec<f64>),
}

impl Contact {
    pub fn at(&self, t: u64) -> f64 {
        match self {
            Contact::Constant(c) => *c,
            Contact::Schedule(values) => {
                let idx = usize::try_from(t).unwrap_or(usize::MAX).min(values.len() - 1);
                values[idx]
            }
        }
    }
}

impl Default for Contact {
    fn default() -> Self {
        Contact::Constant(1.0)
    }
}

/// Rates per day, dispersion and discretisation of a model run.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    /// Transmission rate.
    pub beta: f64,
    /// Recovery rate of (symptomatic) infectious individuals.
    pub alpha: f64,
    /// Incubation rate E → I/A.
    pub gamma: f64,
    /// Recovery rate of asymptomatic individuals.
    pub mu: f64,
    /// Fraction of exposed individuals that become symptomatic.
    pub p_frac: f64,
    /// Overdispersion ν; 0 gives plain Poisson/Binomial draws.
    pub nu: f64,
    pub dt: f64,
    pub n_pop: u64,
    pub contact: Contact,
}

impl ParamSet {
    /// Reference rates with the given population.
    pub fn table(n_pop: u64) -> Self {
        Self {
            beta: 0.13,
            alpha: 0.11,
            gamma: 0.33,
            mu: 0.11,
            p_frac: 0.5,
            nu: 0.0,
            dt: 1.0,
            n_pop,
            contact: Contact::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("nu", self.nu),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(alloc::format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.p_frac) {
            return Err(Error::domain(alloc::format!(
                "p_frac must lie in [0, 1], got {}",
                self.p_frac
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(alloc::format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_pop == 0 {
            return Err(Error::domain("population must be at least 1"));
        }
        let bad_contact = match &self.contact {
            Contact::Constant(c) => !(*c >= 0.0 && c.is_finite()),
            Contact::Schedule(v) => v.is_empty() || v.iter().any(|c| !(*c >= 0.0 && c.is_finite())),
        };
        if bad_contact {
            return Err(Error::domain("contact rates must be non-empty, non-negative and finite"));
        }
        Ok(())
    }

    /// Basic reproduction number β/α.
    pub fn r0(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// A named parameter set with its initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ParamSet,
    pub initial: CountState,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// SIR, N = 10000, S₀ = 9000, I₀ = 1000.
    SirTable1,
    /// SIR, N = 1000, S₀ = 900, I₀ = 100.
    SirSmall,
    /// SEIR, N = 10000, S₀ = 9000, E₀ = 0, I₀ = 1000.
    SeirTable1,
    /// SEIAR, N = 10000, S₀ = 9000, E₀ = A₀ = 0, I₀ = 1000.
    SeiarTable1,
    /// SIR, N = 10000, seeded with I₀ = 10.
    SirOutbreak,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::SirTable1,
        Preset::SirSmall,
        Preset::SeirTable1,
        Preset::SeiarTable1,
        Preset::SirOutbreak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SirTable1 => "sir-table1",
            Preset::SirSmall => "sir-small",
            Preset::SeirTable1 => "seir-table1",
            Preset::SeiarTable1 => "seiar-table1",
            Preset::SirOutbreak => "sir-outbreak",
        }
    }

    pub fn scenario(self) -> Scenario {
        let (params, initial) = match self {
            Preset::SirTable1 => (ParamSet::table(10_000), CountState::sir(9000, 1000, 0)),
            Preset::SirSmall => (ParamSet::table(1000), CountState::sir(900, 100, 0)),
            Preset::SeirTable1 => (ParamSet::table(10_000), CountState::seir(9000, 0, 1000, 0)),
            Preset::SeiarTable1 => {
                (ParamSet::table(10_000), CountState::seiar(9000, 0, 1000, 0, 0))
            }
            Preset::SirOutbreak => (ParamSet::table(10_000), CountState::sir(9990, 10, 0)),
        };
        Scenario { params, initial, steps: TABLE_STEPS }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::domain(alloc::format!(
                "unknown preset '{s}' (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        for preset in Preset::ALL {
            let sc = preset.scenario();
            sc.params.validate().unwrap();
            sc.initial.validate(sc.params.n_pop).unwrap();
            assert_eq!(preset.name().parse::<Preset>().unwrap(), preset);
        }
        assert!((Preset::SirTable1.scenario().params.r0() - 0.13 / 0.11).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_foreign_compartments() {
        let mut st = CountState::sir(9000, 1000, 0);
        st.e = 1;
        assert!(st.validate(10_001).is_err());
        assert!(CountState::sir(9000, 999, 0).validate(10_000).is_err());
    }

    #[test]
    fn contact_schedule_holds_last_value() {
        let c = Contact::Schedule(alloc::vec![1.0, 0.5]);
        assert_eq!(c.at(0), 1.0);
        assert_eq!(c.at(1), 0.5);
        assert_eq!(c.at(100), 0.5);
    }

    #[test]
    fn param_validation() {
        let mut p = ParamSet::table(100);
        p.p_frac = 1.5;
        assert!(p.validate().is_err());
        let mut p = ParamSet::table(100);
        p.contact = Contact::Schedule(Vec::new());
        assert!(p.validate().is_err());
        let mut p = ParamSet::table(0);
        assert!(p.validate().is_err());
        p.n_pop = 1;
        p.validate().unwrap();
    }
}
