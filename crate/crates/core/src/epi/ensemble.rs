use alloc::vec::Vec;

use rand::Rng;

use super::{step_deterministic, step_stochastic, Compartment, CountState, ModelKind, ParamSet, RealState};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

/// How the lower/upper band around the ensemble mean is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandMode {
    /// Empirical 5th and 95th percentiles (nearest-rank order statistics).
    #[default]
    OrderStatistic,
    /// mean ± the empirical 90th percentile of |x − mean|.
    DeviationFromMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_steps: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub band: BandMode,
    /// Keep every trajectory's states, not only the per-step summary.
    pub keep_trajectories: bool,
}

/// Per-step summary of one compartment; index k holds time step k.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSeries {
    pub compartment: Compartment,
    pub mean: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub kind: ModelKind,
    pub n_traj: usize,
    pub n_steps: usize,
    /// One entry per compartment of `kind`, in S, E, I, A, R order.
    pub bands: Vec<BandSeries>,
    /// `trajectories[j][k]` is trajectory j at step k, when requested.
    pub trajectories: Option<Vec<Vec<CountState>>>,
    /// Steps (over all trajectories) that needed the Beta-Binomial γ clamp.
    pub gamma_clamped_steps: u64,
}

impl TrajectoryEnsemble {
    pub fn band(&self, c: Compartment) -> Option<&BandSeries> {
        self.bands.iter().find(|b| b.compartment == c)
    }
}

/// Forward-Euler trajectory of `n_steps` steps (`n_steps + 1` states) and the
/// number of steps whose outflows had to be capped.
pub fn simulate_deterministic(
    params: &ParamSet,
    initial: &RealState,
    n_steps: usize,
) -> Result<(Vec<RealState>, usize)> {
    params.validate()?;
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut capped = 0;
    let mut cur = *initial;
    states.push(cur);
    for _ in 0..n_steps {
        let out = step_deterministic(&cur, params);
        capped += usize::from(out.clamped);
        cur = out.state;
        states.push(cur);
    }
    Ok((states, capped))
}

/// One Chain-Binomial trajectory of `n_steps` steps (`n_steps + 1` states).
pub fn simulate_trajectory<R: Rng + ?Sized>(
    params: &ParamSet,
    initial: &CountState,
    n_steps: usize,
    rng: &mut R,
) -> Result<Vec<CountState>> {
    params.validate()?;
    initial.validate(params.n_pop)?;
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut cur = *initial;
    states.push(cur);
    for _ in 0..n_steps {
        cur = step_stochastic(&cur, params, rng)?.state;
        states.push(cur);
    }
    Ok(states)
}

/// Runs `n_traj` independent trajectories and summarises them per step.
///
/// Trajectory j draws from stream `j` under `config.seed`, so the result is
/// the same whatever the thread count.
pub fn simulate_ensemble(
    params: &ParamSet,
    initial: &CountState,
    config: &EnsembleConfig,
) -> Result<TrajectoryEnsemble> {
    params.validate()?;
    initial.validate(params.n_pop)?;
    if config.n_traj == 0 {
        return Err(Error::domain("an ensemble needs at least one trajectory"));
    }
    let kind = initial.kind;
    let compartments = kind.compartments();
    let mut bands: Vec<BandSeries> = compartments
        .iter()
        .map(|&c| BandSeries {
            compartment: c,
            mean: Vec::with_capacity(config.n_steps + 1),
            low: Vec::with_capacity(config.n_steps + 1),
            high: Vec::with_capacity(config.n_steps + 1),
        })
        .collect();

    let mut states = alloc::vec![*initial; config.n_traj];
    let mut rngs: Vec<Stream> = (0..config.n_traj as u64).map(|j| substream(config.seed, j)).collect();
    let mut trajectories = config.keep_trajectories.then(|| {
        (0..config.n_traj)
            .map(|_| {
                let mut v = Vec::with_capacity(config.n_steps + 1);
                v.push(*initial);
                v
            })
            .collect::<Vec<_>>()
    });

    let mut scratch = Vec::with_capacity(config.n_traj);
    summarise(&states, &mut bands, config.band, &mut scratch);
    let mut gamma_clamped_steps = 0;
    for _ in 0..config.n_steps {
        gamma_clamped_steps += advance(&mut states, &mut rngs, params)?;
        summarise(&states, &mut bands, config.band, &mut scratch);
        if let Some(tr) = trajectories.as_mut() {
            for (traj, st) in tr.iter_mut().zip(&states) {
                traj.push(*st);
            }
        }
    }

    Ok(TrajectoryEnsemble {
        kind,
        n_traj: config.n_traj,
        n_steps: config.n_steps,
        bands,
        trajectories,
        gamma_clamped_steps,
    })
}

#[cfg(feature = "parallel")]
fn advance(states: &mut [CountState], rngs: &mut [Stream], params: &ParamSet) -> Result<u64> {
    use rayon::prelude::*;
    states
        .par_iter_mut()
        .zip(rngs.par_iter_mut())
        .map(|(st, rng)| {
            let out = step_stochastic(st, params, rng)?;
            *st = out.state;
            Ok(u64::from(out.gamma_clamped))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

#[cfg(not(feature = "parallel"))]
fn advance(states: &mut [CountState], rngs: &mut [Stream], params: &ParamSet) -> Result<u64> {
    let mut clamped = 0;
    for (st, rng) in states.iter_mut().zip(rngs.iter_mut()) {
        let out = step_stochastic(st, params, rng)?;
        *st = out.state;
        clamped += u64::from(out.gamma_clamped);
    }
    Ok(clamped)
}

fn summarise(states: &[CountState], bands: &mut [BandSeries], mode: BandMode, scratch: &mut Vec<f64>) {
    let n = states.len() as f64;
    for band in bands.iter_mut() {
        let c = band.compartment;
        let mean = states.iter().map(|s| s.get(c) as f64).sum::<f64>() / n;
        scratch.clear();
        let (low, high) = match mode {
            BandMode::OrderStatistic => {
                scratch.extend(states.iter().map(|s| s.get(c) as f64));
                scratch.sort_unstable_by(f64::total_cmp);
                (nearest_rank(scratch, 0.05), nearest_rank(scratch, 0.95))
            }
            BandMode::DeviationFromMean => {
                scratch.extend(states.iter().map(|s| (s.get(c) as f64 - mean).abs()));
                scratch.sort_unstable_by(f64::total_cmp);
                let half = nearest_rank(scratch, 0.90);
                (mean - half, mean + half)
            }
        };
        band.mean.push(mean);
        band.low.push(low);
        band.high.push(high);
    }
}

/// Nearest-rank percentile of sorted data: element ⌈q·n⌉ (1-based).
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = crate::math::ceil(q * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi::Preset;

    fn config(n_traj: usize, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_steps: 60,
            n_traj,
            seed,
            band: BandMode::OrderStatistic,
            keep_trajectories: true,
        }
    }

    #[test]
    fn nearest_rank_examples() {
        let xs: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 0.05), 1.0);
        assert_eq!(nearest_rank(&xs, 0.95), 19.0);
        assert_eq!(nearest_rank(&[7.0], 0.05), 7.0);
        assert_eq!(nearest_rank(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn single_trajectory_collapses_bands() {
        let sc = Preset::SeiarTable1.scenario();
        let ens = simulate_ensemble(&sc.params, &sc.initial, &config(1, 5)).unwrap();
        let traj = &ens.trajectories.as_ref().unwrap()[0];
        assert_eq!(traj.len(), 61);
        for band in &ens.bands {
            for (k, st) in traj.iter().enumerate() {
                let x = st.get(band.compartment) as f64;
                assert_eq!((band.low[k], band.mean[k], band.high[k]), (x, x, x));
            }
        }
    }

    #[test]
    fn ensembles_are_reproducible_and_match_single_runs() {
        let sc = Preset::SirSmall.scenario();
        let a = simulate_ensemble(&sc.params, &sc.initial, &config(16, 9)).unwrap();
        let b = simulate_ensemble(&sc.params, &sc.initial, &config(16, 9)).unwrap();
        assert_eq!(a, b);
        let mut rng = substream(9, 3);
        let alone = simulate_trajectory(&sc.params, &sc.initial, 60, &mut rng).unwrap();
        assert_eq!(a.trajectories.unwrap()[3], alone);
    }

    #[test]
    fn bands_are_ordered() {
        let mut sc = Preset::SirSmall.scenario();
        sc.params.nu = 4.0;
        for band_mode in [BandMode::OrderStatistic, BandMode::DeviationFromMean] {
            let cfg = EnsembleConfig { band: band_mode, ..config(200, 1) };
            let ens = simulate_ensemble(&sc.params, &sc.initial, &cfg).unwrap();
            for band in &ens.bands {
                for k in 0..=cfg.n_steps {
                    assert!(band.low[k] <= band.high[k]);
                }
            }
        }
    }

    #[test]
    fn deterministic_run_length_and_conservation() {
        let sc = Preset::SeiarTable1.scenario();
        let (states, capped) =
            simulate_deterministic(&sc.params, &sc.initial.to_real(), sc.steps).unwrap();
        assert_eq!(states.len(), 202);
        assert_eq!(capped, 0);
        for st in &states {
            assert!((st.total() - 10_000.0).abs() <= 1e-9 * 10_000.0);
        }
    }

    #[test]
    fn rejects_inconsistent_initial_state() {
        let sc = Preset::SirSmall.scenario();
        let bad = CountState::sir(900, 99, 0);
        assert!(simulate_ensemble(&sc.params, &bad, &config(2, 0)).is_err());
        assert!(simulate_ensemble(&sc.params, &sc.initial, &config(0, 0)).is_err());
    }
}
