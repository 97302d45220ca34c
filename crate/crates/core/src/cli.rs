//! Command-line front end. `main` only parses arguments and maps errors to
//! exit codes; everything else lives here so it can be driven from tests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::association::{association_report, rho_np, rho_sp, tau_from_rho};
use crate::basis::{BasisSet, DEFAULT_SMAX};
use crate::copula::{Condition, CopulaEvalConfig, Generator};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::fitter::{
    build_problem, fit_generator, rank_transform, CoefficientFile, FitOptions, FittedModel,
    DEFAULT_MIN_SUPPORT, DEFAULT_RIDGE,
};
use crate::io::{read_xy, write_uv};
use crate::numeric::DEFAULT_QUAD_POINTS;
use crate::regions::{
    cell_probs_np, cell_probs_sp, cell_probs_true, greedy_region, masks_to_pgm, CellProbabilities,
    RegionMask, DEFAULT_ALPHAS, DEFAULT_GRID_NONPARAMETRIC, DEFAULT_GRID_SEMIPARAMETRIC,
};
use crate::sampler::{sample_pairs, SampleConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "psicopula",
    version,
    about = "Semiparametric copula estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a sample from C_k and write it as `u,v` CSV.
    Simulate(SimulateArgs),
    /// Fit the generating function to the first two columns of a CSV file.
    Fit(FitArgs),
    /// Report Spearman's rho (and Kendall's tau) estimates.
    Rho(RhoArgs),
    /// Estimate high-probability regions and export the masks.
    Regions(RegionsArgs),
    /// Monte-Carlo study over several k.
    Table1(Table1Args),
    /// Real-data pipeline: rank transform, fit, rho, regions.
    Workflow(WorkflowArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator parameter, finite and >= 1.
    #[arg(long)]
    pub k: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SMAX)]
    pub smax: u32,
    /// Coefficient file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SolverArgs {
    /// Ridge weight; 0 disables it.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    /// Basis functions nonzero at fewer sample points are dropped.
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    pub min_support: usize,
}

impl SolverArgs {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            ridge: self.ridge,
            min_support: self.min_support,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RhoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Coefficient file from `fit`.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sp,
    Np,
    True,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Generator parameter for `--method true`; accepts `inf`.
    #[arg(long)]
    pub k: Option<f64>,
    /// Data file for `--method np`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Coefficient file for `--method sp`.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
    pub alpha: Vec<f64>,
    /// Grid size; 30 for sp/true and 8 for np when omitted.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output prefix for the mask files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 6.0, 8.0])]
    pub k: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SMAX)]
    pub smax: u32,
    #[arg(long, default_value_t = DEFAULT_QUAD_POINTS)]
    pub quad: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write the CSV report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WorkflowArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SMAX)]
    pub smax: u32,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output prefix for coefficients and masks.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::SingularKkt => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Rho(a) => rho(a, out, err),
        Command::Regions(a) => regions(a, out),
        Command::Table1(a) => table1(a, out),
        Command::Workflow(a) => workflow(a, out, err),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_data(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    read_xy(BufReader::new(File::open(path)?))
}

fn read_coeffs(path: &Path) -> Result<Generator> {
    CoefficientFile::read_from(BufReader::new(File::open(path)?))?.to_generator()
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let g = Generator::analytic(a.k)?;
    let pairs = sample_pairs(&g, &SampleConfig::new(a.n, a.seed))?;
    match a.out {
        Some(path) => {
            let mut f = create(&path)?;
            write_uv(&mut f, &pairs)?;
            f.flush()?;
        }
        None => write_uv(out, &pairs)?,
    }
    Ok(())
}

fn fit_data(
    x: &[f64],
    y: &[f64],
    smax: u32,
    solver: &SolverArgs,
) -> Result<(BasisSet, FittedModel)> {
    let basis = BasisSet::new(smax)?;
    let model = fit_generator(x, y, &basis, &solver.options())?;
    Ok((basis, model))
}

fn write_coeffs(path: &Path, basis: &BasisSet, model: &FittedModel) -> Result<()> {
    let file = CoefficientFile::from_fit(basis, model.sample.len(), &model.result.a)?;
    let mut f = create(path)?;
    file.write_to(&mut f)?;
    f.flush()?;
    Ok(())
}

fn fit_summary(out: &mut dyn Write, basis: &BasisSet, model: &FittedModel) -> Result<()> {
    let prob = build_problem(&model.sample, basis)?;
    let r = &model.result;
    let report = model
        .generator
        .validate(&CopulaEvalConfig::for_generator(&model.generator))?;
    let ok = |c: Condition| report.violation(c).is_none();
    writeln!(out, "n={}", model.sample.len())?;
    writeln!(out, "m={}", basis.len())?;
    writeln!(out, "nnz={}", r.nnz)?;
    writeln!(out, "objective={}", r.objective)?;
    writeln!(out, "kkt_residual={}", r.kkt_residual)?;
    writeln!(out, "iterations={}", r.iterations)?;
    writeln!(out, "max_violation={}", r.max_violation(&prob))?;
    writeln!(out, "feasible={}", r.is_feasible(&prob))?;
    writeln!(out, "grid_lipschitz={}", ok(Condition::Lipschitz))?;
    writeln!(out, "grid_nonnegative={}", ok(Condition::Nonnegative))?;
    writeln!(out, "grid_rectangles={}", ok(Condition::RectanglePositive))?;
    Ok(())
}

fn fit(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let (x, y) = read_data(&a.input)?;
    let (basis, model) = fit_data(&x, &y, a.smax, &a.solver)?;
    if let Some(path) = &a.out {
        write_coeffs(path, &basis, &model)?;
    }
    fit_summary(out, &basis, &model)
}

fn warn_if_negative(rho_np: f64, err: &mut dyn Write) -> Result<()> {
    if rho_np < 0.0 {
        writeln!(
            err,
            "warning: rho_np={rho_np} < 0; the model assumes positive quadrant dependence"
        )?;
    }
    Ok(())
}

fn rho(a: RhoArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (x, y) = read_data(&a.input)?;
    let ps = rank_transform(&x, &y)?;
    let np = rho_np(&ps)?;
    writeln!(out, "n={}", ps.len())?;
    writeln!(out, "rho_np={np}")?;
    writeln!(out, "tau_np={}", tau_from_rho(np))?;
    if let Some(path) = &a.coeffs {
        let fitted = CoefficientFile::read_from(BufReader::new(File::open(path)?))?.to_fitted()?;
        let sp = 12.0 * fitted.integral().powi(2);
        writeln!(out, "rho_sp={sp}")?;
        writeln!(out, "tau_sp={}", tau_from_rho(sp))?;
        writeln!(out, "gof_diff={}", (np - sp).abs())?;
    }
    warn_if_negative(np, err)
}

fn mask_path(prefix: &Path, method: &str, alpha: f64, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("_{method}_a{alpha}.{ext}"));
    PathBuf::from(name)
}

fn pgm_path(prefix: &Path, method: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("_{method}.pgm"));
    PathBuf::from(name)
}

fn export_regions(
    cp: &CellProbabilities,
    alphas: &[f64],
    prefix: &Path,
    out: &mut dyn Write,
) -> Result<Vec<RegionMask>> {
    let method = cp.source().as_str();
    let mut masks = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mask = greedy_region(cp, alpha)?;
        let mut f = create(&mask_path(prefix, method, alpha, "csv"))?;
        f.write_all(mask.to_csv().as_bytes())?;
        f.flush()?;
        writeln!(
            out,
            "method={method} grid={} alpha={alpha} cells={} area={} achieved_mass={}",
            cp.n_grid(),
            mask.selected(),
            mask.area,
            mask.achieved_mass
        )?;
        masks.push(mask);
    }
    let mut f = create(&pgm_path(prefix, method))?;
    f.write_all(masks_to_pgm(&masks)?.as_bytes())?;
    f.flush()?;
    Ok(masks)
}

fn regions(a: RegionsArgs, out: &mut dyn Write) -> Result<()> {
    let inconsistent = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
    let cp = match a.method {
        Method::True => {
            let Some(k) = a.k else {
                return inconsistent("--method true requires --k");
            };
            let grid = a.grid.unwrap_or(DEFAULT_GRID_SEMIPARAMETRIC);
            cell_probs_true(&Generator::analytic(k)?, grid)?
        }
        Method::Sp => {
            let Some(path) = &a.coeffs else {
                return inconsistent("--method sp requires --coeffs");
            };
            let grid = a.grid.unwrap_or(DEFAULT_GRID_SEMIPARAMETRIC);
            cell_probs_sp(&read_coeffs(path)?, grid)?
        }
        Method::Np => {
            let Some(path) = &a.input else {
                return inconsistent("--method np requires --in");
            };
            let (x, y) = read_data(path)?;
            let grid = a.grid.unwrap_or(DEFAULT_GRID_NONPARAMETRIC);
            cell_probs_np(&rank_transform(&x, &y)?, grid)?
        }
    };
    export_regions(&cp, &a.alpha, &a.out, out)?;
    Ok(())
}

fn table1(a: Table1Args, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig {
        ks: a.k,
        n: a.n,
        reps: a.reps,
        seed: a.seed,
        s_max: a.smax,
        quad_points: a.quad,
        fit: a.solver.options(),
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg)?;
    write!(out, "{}", report.to_table())?;
    writeln!(out)?;
    write!(out, "{}", report.to_csv())?;
    if let Some(path) = &a.out {
        let mut f = create(path)?;
        f.write_all(report.to_csv().as_bytes())?;
        f.flush()?;
    }
    Ok(())
}

fn workflow(a: WorkflowArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (x, y) = read_data(&a.input)?;
    let (basis, model) = fit_data(&x, &y, a.smax, &a.solver)?;
    let mut coeff_path = a.out.as_os_str().to_owned();
    coeff_path.push("_coeffs.txt");
    write_coeffs(Path::new(&coeff_path), &basis, &model)?;
    fit_summary(out, &basis, &model)?;

    let report = association_report(&model.sample, &model.result, &basis)?;
    debug_assert_eq!(report.rho_sp, rho_sp(&model.result, &basis)?);
    writeln!(out, "rho_np={}", report.rho_np)?;
    writeln!(out, "tau_np={}", report.tau_np)?;
    writeln!(out, "rho_sp={}", report.rho_sp)?;
    writeln!(out, "tau_sp={}", report.tau_sp)?;
    writeln!(out, "gof_diff={}", report.gof_diff)?;
    warn_if_negative(report.rho_np, err)?;

    let sp = cell_probs_sp(&model.generator, DEFAULT_GRID_SEMIPARAMETRIC)?;
    export_regions(&sp, &a.alpha, &a.out, out)?;
    let np = cell_probs_np(&model.sample, DEFAULT_GRID_NONPARAMETRIC)?;
    export_regions(&np, &a.alpha, &a.out, out)?;
    Ok(())
}
