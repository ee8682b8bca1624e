use std::path::PathBuf;

use epismc::epi::Compartment;
use epismc::mcmc::{free_parameters, parameter_values, run_chain, ChainConfig, Parameter, ProposalSpec};
use epismc::smc::{MeasurementSeries, ResampleMode, ScoreVariant, DEFAULT_ESS_THRESHOLD, DEFAULT_SIGMA};

use super::Context;
use crate::config::{layered, parse, to_table, Layered, ScenarioOpts};
use crate::error::{CliError, Result};
use crate::input::NumericTable;
use crate::output::{float, CsvOut, Manifest};

layered! {
    pub struct InferOpts {
        /// Measurement CSV with columns t and y (required)
        measurements: PathBuf,
        /// Compartment the measurements observe [default: I]
        compartment: String,
        /// Measurement noise standard deviation [default: 100]
        sigma: f64,
        /// Particles per filter run [default: 100]
        particles: usize,
        /// Metropolis iterations [default: 5000]
        iterations: usize,
        /// Comma-separated parameters to infer [default: beta,alpha for SIR; all rates otherwise]
        parameters: String,
        /// θ₀ as a multiple of the scenario values [default: 2, and 1.5 for p]
        theta0_multiplier: f64,
        /// Proposal standard deviations as a fraction of θ₀ [default: 0.1]
        proposal_scale: f64,
        /// Leading iterations left out of the summary [default: iterations/5]
        burn_in: usize,
        /// Keep every n-th iteration in the summary [default: 1]
        thin: usize,
        /// step-average or log-marginal [default: step-average]
        score: String,
        /// multinomial, residual, stratified or systematic [default: systematic]
        resample: String,
        /// Resample when ESS falls below this fraction of the particles [default: 0.5]
        ess_threshold: f64,
        /// Correct the acceptance ratio for the truncated proposal [default: false]
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        hastings: bool,
        /// Reuse one filter seed for every iteration [default: false]
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        pin_filter_seed: bool,
    }
}

/// Measurements for steps 1..=n; a row for t = 0 is skipped.
fn read_measurements(path: &std::path::Path) -> Result<Vec<f64>> {
    let table = NumericTable::read(path)?;
    let t = table.column("t")?;
    let y = table.column("y")?;
    let mut values = Vec::with_capacity(y.len());
    for (&t, &y) in t.iter().zip(y) {
        if t == 0.0 && values.is_empty() {
            continue;
        }
        if t != (values.len() + 1) as f64 {
            return Err(CliError::Data {
                path: path.to_path_buf(),
                message: format!("expected t = {} but found {t}", values.len() + 1),
            });
        }
        values.push(y);
    }
    if values.is_empty() {
        return Err(CliError::Data { path: path.to_path_buf(), message: "no measurements after t = 0".into() });
    }
    Ok(values)
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn infer(ctx: &Context, scenario: ScenarioOpts, opts: InferOpts) -> Result<()> {
    const NAME: &str = "infer";
    let table = ctx.section(NAME, &[ScenarioOpts::KEYS, InferOpts::KEYS])?;
    let (sc, scenario) = ctx.layer(scenario, &table, NAME)?.resolve()?;
    let mut file_opts: InferOpts = crate::config::decode(table, "[infer]")?;
    file_opts.measurements = file_opts.measurements.map(|p| ctx.file.resolve(&p));
    let flags = opts.or(file_opts);
    let iterations = flags.iterations.unwrap_or(5000);
    let mut opts = flags.or(InferOpts {
        compartment: Some("I".into()),
        sigma: Some(DEFAULT_SIGMA),
        particles: Some(100),
        iterations: Some(iterations),
        proposal_scale: Some(0.1),
        burn_in: Some(iterations / 5),
        thin: Some(1),
        score: Some(ScoreVariant::default().name().into()),
        resample: Some(ResampleMode::default().name().into()),
        ess_threshold: Some(DEFAULT_ESS_THRESHOLD),
        hastings: Some(false),
        pin_filter_seed: Some(false),
        ..Default::default()
    });

    let path = opts.measurements.clone().ok_or_else(|| CliError::config("infer needs a measurements file"))?;
    let path = std::fs::canonicalize(&path)
        .map_err(|e| CliError::config(format!("measurements {}: {e}", path.display())))?;
    opts.measurements = Some(path.clone());

    let kind = sc.initial.kind;
    let parameters: Vec<Parameter> = match &opts.parameters {
        Some(list) => list.split(',').map(|p| parse(p.trim(), "parameters")).collect::<Result<_>>()?,
        None => free_parameters(kind).to_vec(),
    };
    if parameters.is_empty() {
        return Err(CliError::config("parameters: nothing to infer"));
    }
    opts.parameters = Some(parameters.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));
    let compartment: Compartment = parse(opts.compartment.as_deref().unwrap_or_default(), "compartment")?;
    let score: ScoreVariant = parse(opts.score.as_deref().unwrap_or_default(), "score")?;
    let mode: ResampleMode = parse(opts.resample.as_deref().unwrap_or_default(), "resample")?;
    let burn_in = opts.burn_in.unwrap_or_default();
    let thin = opts.thin.unwrap_or(1);
    if burn_in > iterations {
        return Err(CliError::config(format!("burn_in {burn_in} exceeds iterations {iterations}")));
    }
    if thin == 0 {
        return Err(CliError::config("thin must be at least 1"));
    }

    let values = read_measurements(&path)?;
    let series = MeasurementSeries::of_compartment(values, opts.sigma.unwrap_or(DEFAULT_SIGMA), compartment)
        .map_err(|e| CliError::config(e.to_string()))?;
    let reference = parameter_values(&sc.params, &parameters);
    let theta0: Vec<f64> = parameters
        .iter()
        .zip(&reference)
        .map(|(p, v)| v * opts.theta0_multiplier.unwrap_or(p.initial_multiplier()))
        .collect();
    let spec = ProposalSpec::for_parameters(&parameters, &theta0, opts.proposal_scale.unwrap_or(0.1))
        .map_err(|e| CliError::config(e.to_string()))?;
    let cfg = ChainConfig {
        n_particles: opts.particles.unwrap_or(100),
        iterations,
        theta0: theta0.clone(),
        spec,
        seed: ctx.seed.0,
        score,
        ess_threshold: opts.ess_threshold.unwrap_or(DEFAULT_ESS_THRESHOLD),
        mode,
        pin_filter_seed: opts.pin_filter_seed.unwrap_or_default(),
        hastings: opts.hastings.unwrap_or_default(),
    };
    let chain = run_chain(&sc.params, &sc.initial, &series, &parameters, &cfg)?;

    let mut header = vec!["iteration".to_string()];
    header.extend(parameters.iter().map(|p| p.name().to_string()));
    header.extend(["score".to_string(), "accepted".to_string()]);
    let mut out = CsvOut::create(&ctx.out_dir, "chain.csv", &header)?;
    for (i, (theta, s)) in chain.samples.iter().zip(&chain.scores).enumerate() {
        let accepted = i == 0 || chain.accepted[i - 1];
        let mut row = vec![i.to_string()];
        row.extend(theta.iter().map(|&v| float(v)));
        row.extend([float(*s), u8::from(accepted).to_string()]);
        out.row(row)?;
    }
    out.finish()?;

    let header = ["parameter", "reference", "initial", "mean", "std", "q05", "q95"].map(String::from);
    let mut out = CsvOut::create(&ctx.out_dir, "posterior.csv", &header)?;
    for (j, p) in parameters.iter().enumerate() {
        let mut kept: Vec<f64> = chain.samples[burn_in..].iter().step_by(thin).map(|s| s[j]).collect();
        let n = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / n;
        let std = if kept.len() > 1 {
            (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        kept.sort_by(f64::total_cmp);
        out.row([
            p.name().to_string(),
            float(reference[j]),
            float(theta0[j]),
            float(mean),
            float(std),
            float(quantile(&kept, 0.05)),
            float(quantile(&kept, 0.95)),
        ])?;
    }
    out.finish()?;

    let mut manifest = Manifest::new(NAME, ctx.seed);
    manifest.settings(to_table(&scenario));
    manifest.settings(to_table(&opts));
    manifest.note("acceptance_rate", chain.acceptance_rate);
    manifest.note("last_accepted", chain.last_accepted);
    manifest.write(&ctx.out_dir)?;
    eprintln!("acceptance rate {:.4}", chain.acceptance_rate);
    Ok(())
}
