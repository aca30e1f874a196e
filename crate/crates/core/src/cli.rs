//! Command-line front end.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::experiments::{
    run_condition_study, run_convergence, run_interpolation_limit, run_kh_check, ConditionConfig, ConvergenceConfig,
    ZetaSource,
};
use crate::kernel::{KernelSpec, TruncationPolicy, DEFAULT_TOLERANCE};
use crate::persist::{
    config_hash, csv_opt, load_model, read_data, read_queries, save_model, sidecar_path, write_atomic, REPORT_VERSION,
};
use crate::sampling::{generate, PointSetKind};
use crate::schedule::{margin_terms, suggest, ScheduleParams};
use crate::solver::{condition_diagnostics, evaluate_many, fit, FittedModel, DENSE_EIGEN_LIMIT};
use crate::targets::by_name;
use crate::torus::{FrequencyBound, TorusPoint};
use crate::trig::{grid_len, grid_node};

pub const CONVERGENCE_HEADER: &str =
    "n,zeta_proxy,zeta_measured,lambda,omega,l2_error,linf_error,data_rmse,kappa_measured,kappa_bound,wall_ms";

#[derive(Parser, Debug)]
#[command(name = "torus-fit", version, about = "Regularized scattered-data fitting on the torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a data file and write a model file.
    Fit(FitArgs),
    /// Evaluate a saved model at query points or on a grid.
    Eval(EvalArgs),
    /// Convergence study of a target under a parameter schedule.
    Convergence(ConvergenceArgs),
    /// Condition numbers across λ and n.
    Cond(CondArgs),
    /// Site residuals as λ grows.
    Limit(LimitArgs),
    /// Koksma–Hlawka check of a target on generated sites.
    Kh(KhArgs),
    /// Print the margin terms of a schedule.
    Feasibility(FeasibilityArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerArg {
    Halton,
    Kronecker,
    Random,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaArg {
    Proxy,
    Measured,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Data file: coordinates then value on each line, `#` comments.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long)]
    pub lambda: f64,
    /// Frequency bound per axis (`w` or `w1,w2,...`); omit for the full kernel.
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<u32>>,
    /// Truncation tolerance of the full kernel series.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query file with one point per line.
    #[arg(long, conflicts_with = "grid_res")]
    pub query: Option<PathBuf>,
    /// Tensor grid resolution (`r` or `r1,r2,...`).
    #[arg(long, value_delimiter = ',')]
    pub grid_res: Option<Vec<usize>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub target: String,
    /// Defaults to the suggested schedule for the target's dimension.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    /// Per-axis ω prefactors (one value is broadcast).
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Halton)]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024,4096")]
    pub n_list: Vec<usize>,
    /// Quadrature grid per axis.
    #[arg(long)]
    pub grid_res: Option<usize>,
    #[arg(long, value_enum, default_value_t = ZetaArg::Proxy)]
    pub zeta: ZetaArg,
    /// Record wall-clock time per row (reports are then not reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Run schedules whose margin is not positive.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CondArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<u32>>,
    /// Series radius for the full kernel.
    #[arg(long, default_value_t = 256)]
    pub radius: u64,
    #[arg(long, value_enum, default_value_t = SamplerArg::Halton)]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct LimitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, value_delimiter = ',')]
    pub omega: Vec<u32>,
    /// Ascending λ values, all above 1.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct KhArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = SamplerArg::Halton)]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
    pub n_list: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FeasibilityArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command, out: &mut dyn std::io::Write) -> Result<i32> {
    match command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Convergence(a) => cmd_convergence(a, out),
        Command::Cond(a) => cmd_cond(a, out),
        Command::Limit(a) => cmd_limit(a, out),
        Command::Kh(a) => cmd_kh(a, out),
        Command::Feasibility(a) => cmd_feasibility(a, out),
    }
}

fn sampler_kind(s: SamplerArg, seed: u64, m: usize) -> PointSetKind {
    match s {
        SamplerArg::Halton => PointSetKind::Halton,
        SamplerArg::Kronecker => PointSetKind::kronecker_default(m),
        SamplerArg::Random => PointSetKind::UniformRandom { seed },
        SamplerArg::Grid => PointSetKind::Grid,
    }
}

fn broadcast<T: Clone>(v: &[T], m: usize, what: &str) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); m]),
        l if l == m => Ok(v.to_vec()),
        l => Err(Error::Input(format!("{what} has {l} entries for dimension {m}"))),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e)
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize, S: Serialize> {
    version: &'static str,
    command: &'static str,
    config_hash: String,
    config: &'a C,
    summary: S,
}

fn write_report<C: Serialize, S: Serialize>(
    path: &std::path::Path,
    csv: &str,
    command: &'static str,
    config: &C,
    summary: S,
) -> Result<String> {
    let hash = config_hash(config)?;
    write_atomic(path, csv.as_bytes())?;
    let side = Sidecar { version: REPORT_VERSION, command, config_hash: hash.clone(), config, summary };
    let mut text = serde_json::to_string_pretty(&side)?;
    text.push('\n');
    write_atomic(&sidecar_path(path), text.as_bytes())?;
    Ok(hash)
}

fn cmd_fit(a: &FitArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let data = read_data(&a.input)?;
    let m = data.dim();
    let spec = match &a.omega {
        Some(w) => KernelSpec::truncated(FrequencyBound::new(broadcast(w, m, "--omega")?), a.k, a.lambda)?,
        None => KernelSpec::full(m, a.k, a.lambda)?.with_truncation(TruncationPolicy::Tolerance(a.tolerance))?,
    };
    // pin the series radius so the saved model evaluates identically
    let spec = match spec.omega() {
        Some(_) => spec,
        None => {
            let r = spec.resolve_radius()?;
            spec.with_truncation(TruncationPolicy::Radius(r))?
        }
    };
    let model = fit(&data, &spec)?;
    let hash = config_hash(a)?;
    save_model(&model, &hash, &a.out)?;
    let residual = max_site_residual(&model, data.values())?;
    writeln!(out, "n = {}", data.len()).map_err(io)?;
    writeln!(out, "m = {m}").map_err(io)?;
    writeln!(out, "lambda = {}", a.lambda).map_err(io)?;
    match spec.omega() {
        Some(w) => writeln!(out, "omega = {w}").map_err(io)?,
        None => writeln!(out, "omega = full (radius {})", spec.resolve_radius()?).map_err(io)?,
    }
    writeln!(out, "max_site_residual = {residual}").map_err(io)?;
    let cond_possible = spec.omega().is_some() || data.len() <= DENSE_EIGEN_LIMIT;
    if cond_possible {
        let matrix = crate::solver::assemble(data.points(), &spec)?;
        let d = condition_diagnostics(&matrix, a.lambda)?;
        writeln!(out, "kappa_measured = {}", d.kappa_measured).map_err(io)?;
        writeln!(out, "kappa_bound = {}", d.kappa_bound).map_err(io)?;
    }
    if let Some(rep) = model.report() {
        writeln!(out, "min_pivot = {}", rep.min_pivot).map_err(io)?;
    }
    writeln!(out, "model = {}", a.out.display()).map_err(io)?;
    Ok(0)
}

fn max_site_residual(model: &FittedModel, values: &[f64]) -> Result<f64> {
    let u = evaluate_many(model, model.points())?;
    Ok(u.iter().zip(values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    let m = model.dim();
    let queries: Vec<TorusPoint> = match (&a.query, &a.grid_res) {
        (Some(q), None) => read_queries(q, m)?,
        (None, Some(r)) => {
            let res = broadcast(r, m, "--grid-res")?;
            let total = grid_len(&res, m)?;
            let mut x = vec![0.0; m];
            (0..total)
                .map(|flat| {
                    grid_node(flat, &res, &mut x);
                    TorusPoint::wrap(&x)
                })
                .collect::<Result<_>>()?
        }
        _ => return Err(Error::Input("give either --query or --grid-res".into())),
    };
    let values = evaluate_many(&model, &queries)?;
    let mut text = String::new();
    for (p, v) in queries.iter().zip(&values) {
        for c in p.coords() {
            let _ = write!(text, "{c} ");
        }
        let _ = writeln!(text, "{v}");
    }
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => out.write_all(text.as_bytes()).map_err(io)?,
    }
    Ok(0)
}

fn cmd_convergence(a: &ConvergenceArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let target = by_name(&a.target)?;
    let m = target.dim();
    let base = suggest(m)?;
    let kappa = match &a.kappa {
        Some(k) => broadcast(k, m, "--kappa")?,
        None => base.kappa.clone(),
    };
    let params = ScheduleParams::new(
        a.alpha.unwrap_or(base.alpha),
        a.beta.unwrap_or(base.beta),
        a.k.unwrap_or(base.k),
        kappa,
    )?;
    let mut config = ConvergenceConfig::new(&target, params, a.n_list.clone(), sampler_kind(a.sampler, a.seed, m));
    config.zeta_source = match a.zeta {
        ZetaArg::Proxy => ZetaSource::Proxy,
        ZetaArg::Measured => ZetaSource::Measured,
    };
    config.grid_res = a.grid_res;
    config.force = a.force;
    config.timing = a.timing;
    let report = run_convergence(&target, &config)?;
    let mut csv = String::from(CONVERGENCE_HEADER);
    csv.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.zeta_proxy,
            csv_opt(r.zeta_measured),
            r.lambda,
            r.omega,
            r.l2_error,
            r.linf_error,
            r.data_rmse,
            r.kappa_measured,
            r.kappa_bound,
            r.wall_ms
        );
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        margin: f64,
        grid_res: &'a [usize],
        bound_chain_holds: Vec<bool>,
        failures: Vec<Option<String>>,
    }
    let summary = Summary {
        margin: config.params.margin(),
        grid_res: &report.grid_res,
        bound_chain_holds: report.rows.iter().map(|r| r.bound_chain_holds).collect(),
        failures: report.rows.iter().map(|r| r.failure.clone()).collect(),
    };
    let hash = write_report(&a.out, &csv, "convergence", &config, summary)?;
    out.write_all(csv.as_bytes()).map_err(io)?;
    writeln!(out, "config_hash = {hash}").map_err(io)?;
    Ok(0)
}

fn cmd_cond(a: &CondArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let omega = a.omega.as_ref().map(|w| broadcast(w, a.m, "--omega").map(FrequencyBound::new)).transpose()?;
    let config = ConditionConfig {
        m: a.m,
        k: a.k,
        omega,
        truncation: TruncationPolicy::Radius(a.radius),
        lambdas: a.lambda.clone(),
        n_list: a.n_list.clone(),
        sampler: sampler_kind(a.sampler, a.seed, a.m),
    };
    let report = run_condition_study(&config)?;
    let mut csv = String::from("lambda,n,kappa_measured,kappa_bound,min_eigenvalue,factorized\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.lambda, r.n, r.kappa_measured, r.kappa_bound, r.min_eigenvalue, r.factorized);
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        slopes_in_n: &'a [f64],
        slopes_in_lambda: &'a [f64],
    }
    let summary = Summary { slopes_in_n: &report.slopes_in_n, slopes_in_lambda: &report.slopes_in_lambda };
    write_report(&a.out, &csv, "cond", &config, summary)?;
    out.write_all(csv.as_bytes()).map_err(io)?;
    for (l, s) in config.lambdas.iter().zip(&report.slopes_in_n) {
        writeln!(out, "slope in n at lambda = {l}: {s}").map_err(io)?;
    }
    Ok(0)
}

fn cmd_limit(a: &LimitArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let data = read_data(&a.input)?;
    let m = data.dim();
    if a.omega.is_empty() || a.lambda.is_empty() {
        return Err(Error::Input("--omega and --lambda are required".into()));
    }
    let omega = FrequencyBound::new(broadcast(&a.omega, m, "--omega")?);
    let spec = KernelSpec::truncated(omega, a.k, a.lambda[0])?;
    let report = run_interpolation_limit(&data, &spec, &a.lambda)?;
    let mut csv = String::from("lambda,max_residual\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{}", r.lambda, r.max_residual);
    }
    #[derive(Serialize)]
    struct Summary {
        slope: f64,
        floor_doubled_omega: f64,
    }
    write_report(&a.out, &csv, "limit", a, Summary { slope: report.slope, floor_doubled_omega: report.floor_doubled })?;
    out.write_all(csv.as_bytes()).map_err(io)?;
    writeln!(out, "slope = {}", report.slope).map_err(io)?;
    writeln!(out, "floor with doubled omega = {}", report.floor_doubled).map_err(io)?;
    Ok(0)
}

fn cmd_kh(a: &KhArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let target = by_name(&a.target)?;
    let m = target.dim();
    let kind = sampler_kind(a.sampler, a.seed, m);
    let mut csv = String::from("n,qmc_error,discrepancy,variation,bound,holds\n");
    let mut all = true;
    for &n in &a.n_list {
        let pts = generate(&kind, n, m)?;
        let r = run_kh_check(&target, &pts)?;
        all &= r.holds;
        let _ = writeln!(csv, "{n},{},{},{},{},{}", r.qmc_error, r.discrepancy, r.variation, r.bound, r.holds);
    }
    #[derive(Serialize)]
    struct Summary {
        all_hold: bool,
    }
    write_report(&a.out, &csv, "kh", a, Summary { all_hold: all })?;
    out.write_all(csv.as_bytes()).map_err(io)?;
    Ok(0)
}

fn cmd_feasibility(a: &FeasibilityArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let r = crate::schedule::margin(a.alpha, a.beta, a.k)?;
    let names = ["1+2a-b", "2-(a+b)", "1-a(2k-1)", "1+b", "1-a", "b-a(2k-1)", "2b"];
    for (name, t) in names.iter().zip(margin_terms(a.alpha, a.beta, a.k)) {
        writeln!(out, "{name:>10} = {t}").map_err(io)?;
    }
    writeln!(out, "r = {r}").map_err(io)?;
    if r > 0.0 {
        writeln!(out, "feasible").map_err(io)?;
        Ok(0)
    } else {
        writeln!(out, "infeasible").map_err(io)?;
        Ok(Error::InfeasibleSchedule { margin: r }.exit_code())
    }
}
