use epismc::epi::{
    simulate_deterministic, simulate_ensemble, BandMode, Compartment, EnsembleConfig,
};

use super::Context;
use crate::config::{layered, parse, to_table, Layered, ScenarioOpts};
use crate::error::{CliError, Result};
use crate::output::{float, CsvOut, Manifest};

layered! {
    pub struct SimulateOpts {
        /// Number of stochastic trajectories [default: 1000]
        trajectories: usize,
        /// order-statistic (5th/95th percentiles) or deviation-from-mean [default: order-statistic]
        band: String,
        /// Also write every trajectory to trajectories.csv [default: false]
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        write_trajectories: bool,
    }
}

layered! {
    pub struct MeasureOpts {
        /// Compartment written as the measurement y [default: I]
        compartment: String,
    }
}

fn band_mode(name: &str) -> Result<BandMode> {
    match name {
        "order-statistic" => Ok(BandMode::OrderStatistic),
        "deviation-from-mean" => Ok(BandMode::DeviationFromMean),
        _ => Err(CliError::config(format!(
            "band: unknown mode '{name}' (use order-statistic or deviation-from-mean)"
        ))),
    }
}

pub fn simulate(ctx: &Context, scenario: ScenarioOpts, opts: SimulateOpts) -> Result<()> {
    const NAME: &str = "simulate";
    let table = ctx.section(NAME, &[ScenarioOpts::KEYS, SimulateOpts::KEYS])?;
    let (sc, scenario) = ctx.layer(scenario, &table, NAME)?.resolve()?;
    let opts = ctx.layer(opts, &table, NAME)?.or(SimulateOpts {
        trajectories: Some(1000),
        band: Some("order-statistic".into()),
        write_trajectories: Some(false),
    });
    let n_traj = opts.trajectories.unwrap_or_default();
    if n_traj == 0 {
        return Err(CliError::config("trajectories must be at least 1"));
    }
    let keep = opts.write_trajectories.unwrap_or_default();
    let cfg = EnsembleConfig {
        n_steps: sc.steps,
        n_traj,
        seed: ctx.seed.0,
        band: band_mode(opts.band.as_deref().unwrap_or_default())?,
        keep_trajectories: keep,
    };
    let ens = simulate_ensemble(&sc.params, &sc.initial, &cfg)?;
    let kind = sc.initial.kind;
    let labels: Vec<&str> = kind.compartments().iter().map(|c| c.label()).collect();

    let mut header = vec!["t".to_string()];
    for l in &labels {
        header.extend([format!("{l}_mean"), format!("{l}_p05"), format!("{l}_p95")]);
    }
    let mut summary = CsvOut::create(&ctx.out_dir, "summary.csv", &header)?;
    for k in 0..=sc.steps {
        let mut row = vec![k.to_string()];
        for band in &ens.bands {
            row.extend([float(band.mean[k]), float(band.low[k]), float(band.high[k])]);
        }
        summary.row(row)?;
    }
    summary.finish()?;

    if let Some(trajectories) = &ens.trajectories {
        let mut header = vec!["trajectory".to_string(), "t".to_string()];
        header.extend(labels.iter().map(|l| l.to_string()));
        let mut out = CsvOut::create(&ctx.out_dir, "trajectories.csv", &header)?;
        for (j, traj) in trajectories.iter().enumerate() {
            for state in traj {
                let mut row = vec![j.to_string(), state.t.to_string()];
                row.extend(kind.compartments().iter().map(|&c| state.get(c).to_string()));
                out.row(row)?;
            }
        }
        out.finish()?;
    }

    let (det, capped) = simulate_deterministic(&sc.params, &sc.initial.to_real(), sc.steps)?;
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    let mut out = CsvOut::create(&ctx.out_dir, "deterministic.csv", &header)?;
    for (k, state) in det.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(kind.compartments().iter().map(|&c| float(state.get(c))));
        out.row(row)?;
    }
    out.finish()?;

    let mut manifest = Manifest::new(NAME, ctx.seed);
    manifest.settings(to_table(&scenario));
    manifest.settings(to_table(&opts));
    manifest.note("r0", sc.params.r0());
    manifest.note("gamma_clamped_steps", ens.gamma_clamped_steps);
    manifest.note("deterministic_capped_steps", capped);
    manifest.write(&ctx.out_dir)?;
    Ok(())
}

pub fn generate_measurements(ctx: &Context, scenario: ScenarioOpts, opts: MeasureOpts) -> Result<()> {
    const NAME: &str = "generate-measurements";
    let table = ctx.section(NAME, &[ScenarioOpts::KEYS, MeasureOpts::KEYS])?;
    let (sc, scenario) = ctx.layer(scenario, &table, NAME)?.resolve()?;
    let opts = ctx.layer(opts, &table, NAME)?.or(MeasureOpts { compartment: Some("I".into()) });
    let c: Compartment = parse(opts.compartment.as_deref().unwrap_or_default(), "compartment")?;
    if !sc.initial.kind.has(c) {
        return Err(CliError::config(format!("{} has no {} compartment", sc.initial.kind, c.label())));
    }
    let (det, _) = simulate_deterministic(&sc.params, &sc.initial.to_real(), sc.steps)?;
    let mut out = CsvOut::create(&ctx.out_dir, "measurements.csv", &["t".into(), "y".into()])?;
    for (k, state) in det.iter().enumerate() {
        out.row([k.to_string(), float(state.get(c))])?;
    }
    out.finish()?;

    let mut manifest = Manifest::new(NAME, ctx.seed);
    manifest.settings(to_table(&scenario));
    manifest.settings(to_table(&opts));
    manifest.write(&ctx.out_dir)?;
    Ok(())
}
