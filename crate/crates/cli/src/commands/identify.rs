use std::path::PathBuf;

use epismc::sysid::{frols, volterra_terms, DesignMatrix, StopRule, Term, VolterraSpec, DEFAULT_RHO};

use super::Context;
use crate::config::{layered, to_table, Layered};
use crate::error::{CliError, Result};
use crate::input::NumericTable;
use crate::output::{float, CsvOut, Manifest};

layered! {
    pub struct IdentifyOpts {
        /// CSV of candidate columns plus the target, or of raw input and output series (required)
        data: PathBuf,
        /// Target column [default: y]
        target: String,
        /// Expand the input and target columns into Volterra terms [default: false]
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        expand: bool,
        /// Input column when expanding [default: u]
        input: String,
        /// Largest input lag when expanding [default: 2]
        max_lag: usize,
        /// Highest monomial order when expanding [default: 2]
        max_order: usize,
        /// Include a constant term when expanding [default: true]
        #[arg(num_args = 0..=1, default_missing_value = "true")]
        constant: bool,
        /// Lagged outputs added as base variables when expanding [default: 0]
        output_lags: usize,
        /// Stop once 1 − Σerr falls below rho [default: 1e-6]
        rho: f64,
        /// Upper bound on the number of selected terms [default: no bound]
        max_terms: usize,
    }
}

pub fn identify(ctx: &Context, opts: IdentifyOpts) -> Result<()> {
    const NAME: &str = "identify";
    let table = ctx.section(NAME, &[IdentifyOpts::KEYS])?;
    let mut file_opts: IdentifyOpts = crate::config::decode(table, "[identify]")?;
    file_opts.data = file_opts.data.map(|p| ctx.file.resolve(&p));
    let mut opts = opts.or(file_opts).or(IdentifyOpts {
        target: Some("y".into()),
        expand: Some(false),
        rho: Some(DEFAULT_RHO),
        ..Default::default()
    });
    let expand = opts.expand.unwrap_or_default();
    if expand {
        opts = opts.or(IdentifyOpts {
            input: Some("u".into()),
            max_lag: Some(2),
            max_order: Some(2),
            constant: Some(true),
            output_lags: Some(0),
            ..Default::default()
        });
    }
    let path = opts.data.clone().ok_or_else(|| CliError::config("identify needs a data file"))?;
    let path = std::fs::canonicalize(&path)
        .map_err(|e| CliError::config(format!("data {}: {e}", path.display())))?;
    opts.data = Some(path.clone());

    let data = NumericTable::read(&path)?;
    let target_name = opts.target.clone().unwrap_or_default();
    let y = data.column(&target_name)?.to_vec();
    let p = if expand {
        let u = data.column(opts.input.as_deref().unwrap_or_default())?;
        let spec = VolterraSpec {
            max_lag: opts.max_lag.unwrap_or_default(),
            max_order: opts.max_order.unwrap_or_default(),
            constant: opts.constant.unwrap_or_default(),
            output_lags: opts.output_lags.unwrap_or_default(),
        };
        volterra_terms(u, &y, &spec)?
    } else {
        let target = data.index_of(&target_name)?;
        let (terms, columns): (Vec<Term>, Vec<Vec<f64>>) = data
            .headers
            .iter()
            .zip(&data.columns)
            .enumerate()
            .filter(|&(j, _)| j != target)
            .map(|(_, (h, c))| (Term::Named(h.clone()), c.clone()))
            .unzip();
        if columns.is_empty() {
            return Err(CliError::Data { path, message: "no candidate columns besides the target".into() });
        }
        DesignMatrix::new(columns, y, terms)?
    };

    let stop = StopRule {
        rho: opts.rho.unwrap_or(DEFAULT_RHO),
        max_terms: opts.max_terms.unwrap_or(usize::MAX),
    };
    let sel = frols(&p, stop)?;

    let header = ["step", "index", "term", "err", "err_sum", "coefficient"].map(String::from);
    let mut out = CsvOut::create(&ctx.out_dir, "frols.csv", &header)?;
    let mut sum = 0.0;
    for (step, ((&j, &err), &b)) in sel.selected.iter().zip(&sel.err).zip(&sel.coefficients).enumerate() {
        sum += err;
        out.row([
            (step + 1).to_string(),
            j.to_string(),
            p.terms()[j].to_string(),
            float(err),
            float(sum),
            float(b),
        ])?;
    }
    out.finish()?;

    let mut manifest = Manifest::new(NAME, ctx.seed);
    manifest.settings(to_table(&opts));
    manifest.note("candidates", p.n_cols());
    manifest.note("rows", p.n_rows());
    manifest.note("selected", sel.selected.len());
    manifest.note("err_sum", sel.err_sum);
    manifest.note("residual_variance", sel.residual_variance);
    manifest.note("stop", format!("{:?}", sel.status));
    manifest.write(&ctx.out_dir)?;
    Ok(())
}
