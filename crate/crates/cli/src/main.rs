use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use helmcond::ellipse_modes::{EllipseGeom, GridSpec};
use helmcond::experiment::{
    run_convergence, run_lowk, run_modes, run_norms, write_convergence, write_lowk, write_modes,
    write_norms, ExperimentSpec, LowkSpec, OutputFormat, Quantity,
};
use helmcond::geometry::{ShapeKind, ShapeSpec};
use helmcond::operators::QuadratureConfig;

const DEFAULT_KS: &str = "5,10,20,40,80,160";

/// Norms and conditioning of 2D Helmholtz boundary integral operators.
#[derive(Parser)]
#[command(name = "helmcond", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Operator norms over a list of wavenumbers.
    Norms(NormsArgs),
    /// Bouncing-ball modes of an ellipse.
    Modes(ModesArgs),
    /// A_{k,k} against A_{k,eta*} at small k.
    Lowk(LowkArgs),
    /// The same k on meshes of increasing density.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or md.
    #[arg(long, default_value = "csv")]
    format: String,
}

impl Output {
    fn format(&self) -> Result<OutputFormat> {
        Ok(self.format.parse()?)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long)]
    shape: String,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
}

impl ShapeArgs {
    fn spec(&self) -> Result<ShapeSpec> {
        let kind = ShapeKind::from_name(&self.shape)?;
        let mut overrides = BTreeMap::new();
        for p in &self.params {
            let (key, value) = p
                .split_once('=')
                .with_context(|| format!("parameter `{p}` is not of the form name=value"))?;
            let value: f64 = value
                .trim()
                .parse()
                .with_context(|| format!("parameter `{p}` has a non-numeric value"))?;
            overrides.insert(key.trim().to_string(), value);
        }
        Ok(ShapeSpec::with_overrides(kind, &overrides)?)
    }
}

#[derive(Args)]
struct NormsArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Comma-separated wavenumbers, increasing.
    #[arg(long, default_value = DEFAULT_KS)]
    k: String,
    /// Append 320 and 640 to the wavenumber list (slow).
    #[arg(long)]
    extended: bool,
    /// eta_k, eta_k23, eta_star_2d, eta_star_log, kress_2d or kress_3d_maxrule.
    #[arg(long, default_value = "eta_k")]
    eta: String,
    #[arg(long, default_value_t = 10.0)]
    eppw: f64,
    #[arg(long, default_value_t = 1)]
    min_per_arc: usize,
    /// Subset of s,d,a,ainv.
    #[arg(long, default_value = "s,d,a,ainv")]
    quantities: String,
    /// Double every quadrature order.
    #[arg(long)]
    fine_quadrature: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ModesArgs {
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    #[arg(long, default_value_t = 0.5)]
    a2: f64,
    /// Comma-separated radial indices.
    #[arg(long, default_value = "1,4,9,14")]
    m: String,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    nu0: f64,
    /// Directory for per-mode field CSV files.
    #[arg(long)]
    field_dir: Option<PathBuf>,
    /// Field grid `NXxNY`.
    #[arg(long, default_value = "201x101")]
    grid: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LowkArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "1e-5,1e-4,1e-3,1e-2")]
    k: String,
    /// Elements per arc; defaults to 500 for the square, 100 otherwise.
    #[arg(long)]
    min_per_arc: Option<usize>,
    /// eta_star_2d or eta_star_log.
    #[arg(long, default_value = "eta_star_2d")]
    star_rule: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 5.0)]
    k: f64,
    #[arg(long, default_value = "10,20")]
    eppw: String,
    #[arg(long, default_value = "eta_k")]
    eta: String,
    #[command(flatten)]
    output: Output,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad {what} `{t}`: {e}"))
        })
        .collect()
}

/// Returns whether any row was flagged.
fn norms(a: NormsArgs) -> Result<bool> {
    let mut ks: Vec<f64> = parse_list(&a.k, "wavenumber")?;
    if a.extended {
        let last = ks.last().copied().unwrap_or(0.0);
        ks.extend([320.0, 640.0].into_iter().filter(|k| *k > last));
    }
    let mut spec = ExperimentSpec::new(a.shape.spec()?, ks, &a.eta);
    spec.eppw = a.eppw;
    spec.min_per_arc = a.min_per_arc;
    spec.quantities = parse_list::<Quantity>(&a.quantities, "quantity")?;
    spec.format = a.output.format()?;
    spec.out = a.output.out.clone();
    if a.fine_quadrature {
        spec.quadrature = QuadratureConfig::default().doubled();
    }
    let table = run_norms(&spec)?;
    let mut w = a.output.writer()?;
    write_norms(&table, spec.format, &mut w)?;
    w.flush()?;
    Ok(table.flagged())
}

fn modes(a: ModesArgs) -> Result<bool> {
    let geom = EllipseGeom::new(a.a1, a.a2)?;
    let ms: Vec<usize> = parse_list(&a.m, "mode index")?;
    if ms.is_empty() {
        bail!("no mode indices given");
    }
    let (nx, ny) = a
        .grid
        .split_once('x')
        .with_context(|| format!("grid `{}` is not of the form NXxNY", a.grid))?;
    let grid = GridSpec {
        nx: nx.trim().parse().context("bad grid width")?,
        ny: ny.trim().parse().context("bad grid height")?,
    };
    let format = a.output.format()?;
    let table = run_modes(&geom, &ms, a.nu0, a.field_dir.map(|d| (d, grid)))?;
    let mut w = a.output.writer()?;
    write_modes(&table, format, &mut w)?;
    w.flush()?;
    Ok(table.rows.iter().any(|r| r.error.is_some()))
}

fn lowk(a: LowkArgs) -> Result<bool> {
    let shape = a.shape.spec()?;
    let mut ks: Vec<f64> = parse_list(&a.k, "wavenumber")?;
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let default_min = if shape.kind == ShapeKind::Square {
        500
    } else {
        100
    };
    let mut spec = LowkSpec::new(shape, ks, a.min_per_arc.unwrap_or(default_min));
    spec.star_rule = a.star_rule;
    let format = a.output.format()?;
    let table = run_lowk(&spec)?;
    let mut w = a.output.writer()?;
    write_lowk(&table, format, &mut w)?;
    w.flush()?;
    Ok(table.rows.iter().any(|r| r.flagged()))
}

fn convergence(a: ConvergenceArgs) -> Result<bool> {
    let eppws: Vec<f64> = parse_list(&a.eppw, "mesh density")?;
    let format = a.output.format()?;
    let table = run_convergence(
        &a.shape.spec()?,
        a.k,
        &a.eta,
        &eppws,
        &QuadratureConfig::default(),
    )?;
    let mut w = a.output.writer()?;
    write_convergence(&table, format, &mut w)?;
    w.flush()?;
    Ok(table.rows.iter().any(|r| r.error.is_some()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Norms(a) => norms(a),
        Command::Modes(a) => modes(a),
        Command::Lowk(a) => lowk(a),
        Command::Convergence(a) => convergence(a),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("helmcond: some rows were flagged; see the error and near_singular columns");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("helmcond: {e:#}");
            ExitCode::from(1)
        }
    }
}
