//! Layered settings: command-line flags win over the config file, which wins
//! over presets and built-in defaults.
//!
//! The config file is TOML. Top-level keys hold the common settings and one
//! table per command holds that command's keys, e.g.
//!
//! ```toml
//! seed = 7
//!
//! [simulate]
//! preset = "seiar-table1"
//! nu = 4.0
//! trajectories = 500
//! ```

use std::path::{Path, PathBuf};

use epismc::epi::{Compartment, CountState, ModelKind, Preset, Scenario};
use serde::de::DeserializeOwned;
use toml::Table;

use crate::error::{CliError, Result};

/// Declares a settings struct whose fields are all optional, usable both as
/// clap arguments and as a config-file section.
macro_rules! layered {
    (
        $(#[$meta:meta])*
        pub struct $name:ident {
            $( $(#[$fmeta:meta])* $field:ident : $ty:ty, )*
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, serde::Deserialize, serde::Serialize)]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl $crate::config::Layered for $name {
            const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn or(self, fallback: Self) -> Self {
                Self { $($field: self.$field.or(fallback.$field),)* }
            }
        }
    };
}

/// A settings struct of optional values.
pub trait Layered: Sized + DeserializeOwned + serde::Serialize {
    /// Config-file keys, one per field.
    const KEYS: &'static [&'static str];

    /// Values set here win; the rest come from `fallback`.
    fn or(self, fallback: Self) -> Self;
}

pub(crate) use layered;

layered! {
    /// Settings shared by every command.
    pub struct CommonOpts {
        /// Base seed of every random stream [default: 0]
        #[arg(global = true)]
        seed: Seed,
        /// Output directory [default: out]
        #[arg(global = true, env = "EPISMC_OUT_DIR")]
        out_dir: PathBuf,
        /// Worker threads (results do not depend on it)
        #[arg(global = true)]
        threads: usize,
    }
}

layered! {
    /// Model, rates and initial state. Unset values come from the preset.
    pub struct ScenarioOpts {
        /// sir-table1, sir-small, seir-table1, seiar-table1 or sir-outbreak [default: sir-table1]
        preset: String,
        /// Model kind (sir, seir, seiar); keeps the preset's S, I and R counts
        model: String,
        /// Transmission rate
        beta: f64,
        /// Recovery rate of I
        alpha: f64,
        /// Incubation rate E → I, A
        gamma: f64,
        /// Recovery rate of A
        mu: f64,
        /// Symptomatic fraction of SEIAR
        p: f64,
        /// Overdispersion of the stochastic draws
        nu: f64,
        /// Step length in days
        dt: f64,
        /// Population; S is filled up unless init-s is given
        n_pop: u64,
        /// Initial susceptible count
        init_s: u64,
        /// Initial exposed count (SEIR, SEIAR)
        init_e: u64,
        /// Initial infectious count
        init_i: u64,
        /// Initial asymptomatic count (SEIAR)
        init_a: u64,
        /// Initial recovered count
        init_r: u64,
        /// Number of time steps
        steps: usize,
    }
}

/// A 64-bit seed. TOML integers stop at 2⁶³ − 1, so larger seeds are
/// written and read as strings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Seed(pub u64);

impl std::str::FromStr for Seed {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse().map(Seed)
    }
}

impl serde::Serialize for Seed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match i64::try_from(self.0) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Seed {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Seed(v)),
            Raw::Text(t) => t.parse().map(Seed).map_err(serde::de::Error::custom),
        }
    }
}

/// A parsed config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    dir: PathBuf,
    root: Table,
}

pub const SECTIONS: &[&str] = &["simulate", "generate-measurements", "infer", "identify", "dist-check"];

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let root: Table = text
            .parse()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        for (key, value) in &root {
            if SECTIONS.contains(&key.as_str()) {
                if !value.is_table() {
                    return Err(CliError::config(format!("'{key}' must be a section")));
                }
            } else if !CommonOpts::KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("unknown top-level key '{key}'")));
            }
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { dir, root })
    }

    pub fn common(&self) -> Result<CommonOpts> {
        let mut table = self.root.clone();
        table.retain(|k, _| !SECTIONS.contains(&k));
        let mut opts: CommonOpts = decode(table, "top level")?;
        opts.out_dir = opts.out_dir.map(|p| self.resolve(&p));
        Ok(opts)
    }

    /// The section of `command`, checked against the keys it may contain.
    pub fn section(&self, command: &str, keys: &[&[&str]]) -> Result<Table> {
        let Some(toml::Value::Table(table)) = self.root.get(command) else {
            return Ok(Table::new());
        };
        for key in table.keys() {
            if !keys.iter().any(|set| set.contains(&key.as_str())) {
                return Err(CliError::config(format!("unknown key '{key}' in [{command}]")));
            }
        }
        Ok(table.clone())
    }

    /// Paths in the file are relative to the file itself.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.dir.join(path)
        }
    }
}

pub fn decode<T: DeserializeOwned>(table: Table, what: &str) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::config(format!("{what}: {e}")))
}

pub fn parse<T>(value: &str, what: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::config(format!("{what}: {e}")))
}

impl ScenarioOpts {
    /// Builds the scenario and returns it with every setting filled in.
    pub fn resolve(&self) -> Result<(Scenario, ScenarioOpts)> {
        let preset: Preset = parse(self.preset.as_deref().unwrap_or("sir-table1"), "preset")?;
        let mut sc = preset.scenario();
        if let Some(model) = &self.model {
            let kind: ModelKind = parse(model, "model")?;
            if kind != sc.initial.kind {
                let Scenario { initial: old, .. } = sc;
                sc.initial = match kind {
                    ModelKind::Sir => CountState::sir(old.s, old.i, old.r),
                    ModelKind::Seir => CountState::seir(old.s, 0, old.i, old.r),
                    ModelKind::Seiar => CountState::seiar(old.s, 0, old.i, 0, old.r),
                };
            }
        }
        let p = &mut sc.params;
        p.beta = self.beta.unwrap_or(p.beta);
        p.alpha = self.alpha.unwrap_or(p.alpha);
        p.gamma = self.gamma.unwrap_or(p.gamma);
        p.mu = self.mu.unwrap_or(p.mu);
        p.p_frac = self.p.unwrap_or(p.p_frac);
        p.nu = self.nu.unwrap_or(p.nu);
        p.dt = self.dt.unwrap_or(p.dt);
        sc.steps = self.steps.unwrap_or(sc.steps);

        let kind = sc.initial.kind;
        let init = &mut sc.initial;
        for (value, slot, c) in [(self.init_e, &mut init.e, Compartment::E), (self.init_a, &mut init.a, Compartment::A)] {
            if let Some(v) = value {
                if v > 0 && !kind.has(c) {
                    return Err(CliError::config(format!("{kind} has no {} compartment", c.label())));
                }
                *slot = v;
            }
        }
        init.i = self.init_i.unwrap_or(init.i);
        init.r = self.init_r.unwrap_or(init.r);
        let rest = init.e + init.i + init.a + init.r;
        match (self.n_pop, self.init_s) {
            (_, Some(s)) => {
                init.s = s;
                sc.params.n_pop = self.n_pop.unwrap_or(s + rest);
            }
            (n, None) => {
                let n = n.unwrap_or(sc.params.n_pop);
                init.s = n.checked_sub(rest).ok_or_else(|| {
                    CliError::config(format!("initial E+I+A+R = {rest} exceeds the population {n}"))
                })?;
                sc.params.n_pop = n;
            }
        }
        sc.params.validate().map_err(|e| CliError::config(e.to_string()))?;
        sc.initial
            .validate(sc.params.n_pop)
            .map_err(|e| CliError::config(e.to_string()))?;

        let p = &sc.params;
        let i = &sc.initial;
        let resolved = ScenarioOpts {
            preset: Some(preset.name().to_string()),
            model: Some(kind.name().to_string()),
            beta: Some(p.beta),
            alpha: Some(p.alpha),
            gamma: Some(p.gamma),
            mu: Some(p.mu),
            p: Some(p.p_frac),
            nu: Some(p.nu),
            dt: Some(p.dt),
            n_pop: Some(p.n_pop),
            init_s: Some(i.s),
            init_e: kind.has(Compartment::E).then_some(i.e),
            init_i: Some(i.i),
            init_a: kind.has(Compartment::A).then_some(i.a),
            init_r: Some(i.r),
            steps: Some(sc.steps),
        };
        Ok((sc, resolved))
    }
}

/// Serialises settings into one TOML table.
pub fn to_table<T: serde::Serialize>(value: &T) -> Table {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t,
        _ => Table::new(),
    }
}
