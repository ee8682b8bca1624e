use epismc::dist::{
    overdispersed_binomial, overdispersed_poisson, BetaBinParams, BinomialParams, Moments,
    NegBinParams, PoissonParams,
};
use epismc::rng::substream;
use rayon::prelude::*;

use super::Context;
use crate::config::{layered, to_table, Layered};
use crate::error::{CliError, Result};
use crate::output::{float, CsvOut, Manifest};

layered! {
    pub struct DistCheckOpts {
        /// Poisson and Negative-Binomial mean [default: 5]
        lambda: f64,
        /// Binomial and Beta-Binomial trials [default: 50]
        n: u64,
        /// Binomial and Beta-Binomial success probability [default: 0.3]
        p: f64,
        /// Draws per row [default: 1000000]
        samples: usize,
        /// Rows are written for ν = 0, 1, …, max_nu [default: 8]
        max_nu: u32,
    }
}

#[derive(Debug, Clone, Copy)]
enum Family {
    Poisson,
    NegBin,
    Binomial,
    BetaBin,
}

const FAMILIES: [Family; 4] = [Family::Poisson, Family::NegBin, Family::Binomial, Family::BetaBin];

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::NegBin => "negbin",
            Family::Binomial => "binomial",
            Family::BetaBin => "betabin",
        }
    }
}

struct Row {
    nu: u32,
    family: Family,
    mean: f64,
    var: f64,
    mc_mean: f64,
    mc_var: f64,
}

fn analytic(family: Family, nu: f64, o: &DistCheckOpts) -> epismc::Result<(f64, f64)> {
    let (lambda, n, p) = (o.lambda.unwrap_or(5.0), o.n.unwrap_or(50), o.p.unwrap_or(0.3));
    let poisson = PoissonParams::new(lambda)?;
    let binomial = BinomialParams::new(n, p)?;
    Ok(match family {
        Family::Poisson => (poisson.mean(), poisson.variance()),
        Family::Binomial => (binomial.mean(), binomial.variance()),
        Family::NegBin if nu > 0.0 => {
            let d = NegBinParams::from_dispersion(lambda, nu)?;
            (d.mean(), d.variance())
        }
        Family::NegBin => (poisson.mean(), poisson.variance()),
        Family::BetaBin if nu > 0.0 && n > 1 => {
            let (d, _) = BetaBinParams::from_dispersion(n, p, nu)?;
            (d.mean(), d.variance())
        }
        Family::BetaBin => (binomial.mean(), binomial.variance()),
    })
}

fn sample(family: Family, nu: f64, o: &DistCheckOpts, seed: u64, key: u64) -> epismc::Result<(f64, f64)> {
    let (lambda, n, p) = (o.lambda.unwrap_or(5.0), o.n.unwrap_or(50), o.p.unwrap_or(0.3));
    let count = o.samples.unwrap_or(1_000_000);
    let mut rng = substream(seed, key);
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let x = match family {
            Family::Poisson => overdispersed_poisson(lambda, 0.0, &mut rng)?,
            Family::NegBin => overdispersed_poisson(lambda, nu, &mut rng)?,
            Family::Binomial => overdispersed_binomial(n, p, 0.0, &mut rng)?.count,
            Family::BetaBin => overdispersed_binomial(n, p, nu, &mut rng)?.count,
        };
        draws.push(x as f64);
    }
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean, var))
}

pub fn dist_check(ctx: &Context, opts: DistCheckOpts) -> Result<()> {
    const NAME: &str = "dist-check";
    let table = ctx.section(NAME, &[DistCheckOpts::KEYS])?;
    let opts = ctx.layer(opts, &table, NAME)?.or(DistCheckOpts {
        lambda: Some(5.0),
        n: Some(50),
        p: Some(0.3),
        samples: Some(1_000_000),
        max_nu: Some(8),
    });
    if opts.samples.unwrap_or_default() < 2 {
        return Err(CliError::config("samples must be at least 2"));
    }
    let max_nu = opts.max_nu.unwrap_or_default();
    let tasks: Vec<(u32, Family)> =
        (0..=max_nu).flat_map(|nu| FAMILIES.into_iter().map(move |f| (nu, f))).collect();
    let rows = tasks
        .par_iter()
        .enumerate()
        .map(|(key, &(nu, family))| {
            let (mean, var) = analytic(family, f64::from(nu), &opts)?;
            let (mc_mean, mc_var) = sample(family, f64::from(nu), &opts, ctx.seed.0, key as u64)?;
            Ok(Row { nu, family, mean, var, mc_mean, mc_var })
        })
        .collect::<epismc::Result<Vec<Row>>>()
        .map_err(|e| CliError::config(e.to_string()))?;

    let samples = opts.samples.unwrap_or_default() as f64;
    let header = ["nu", "distribution", "analytic_mean", "analytic_var", "mc_mean", "mc_var", "mean_se", "mean_z"]
        .map(String::from);
    let mut out = CsvOut::create(&ctx.out_dir, "dist_check.csv", &header)?;
    for r in &rows {
        let se = (r.var / samples).sqrt();
        let z = if se > 0.0 { (r.mc_mean - r.mean) / se } else { 0.0 };
        out.row([
            r.nu.to_string(),
            r.family.name().to_string(),
            float(r.mean),
            float(r.var),
            float(r.mc_mean),
            float(r.mc_var),
            float(se),
            float(z),
        ])?;
    }
    out.finish()?;

    let mut manifest = Manifest::new(NAME, ctx.seed);
    manifest.settings(to_table(&opts));
    manifest.write(&ctx.out_dir)?;
    Ok(())
}
