use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bw_frechet::inference::{clt_covariance, confidence_interval, estimated_covariance_test};
use bw_frechet::io::{load_dataset, report_sidecar, save_report};
use bw_frechet::simulation::{
    coverage_report, null_qq_report, run_qq_experiment, run_test_trials, size_power_report, ExampleConfig,
    ExampleKind, ExperimentReport, TestTrialSettings,
};
use bw_frechet::{empirical_moments, fit, Dataset, Error, FitConfig, Init, Rho, TestOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "bwf", version, about = "Fréchet regression for SPD matrix responses under the Bures-Wasserstein metric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the conditional Fréchet mean at a covariate value.
    Fit(FitCmd),
    /// Test for no covariate effect.
    Test(TestCmd),
    /// Pointwise confidence intervals for every entry at a covariate value.
    Ci(CiCmd),
    /// Run a simulation experiment on synthetic data.
    Simulate(SimulateCmd),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Covariate CSV (header row, one row of p numbers per sample).
    #[arg(long)]
    covariates: PathBuf,
    /// Response CSV in long format (sample_id,row,col,value).
    #[arg(long)]
    responses: PathBuf,
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Ridge term: auto (1/n), zero, or a number.
    #[arg(long, default_value = "auto", value_parser = parse_rho)]
    rho: Rho,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 30)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Identity)]
    init: InitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Identity,
    Mean,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            eta: self.eta,
            max_iters: self.max_iters,
            eps: self.eps,
            init: match self.init {
                InitArg::Identity => Init::Identity,
                InitArg::Mean => Init::Mean,
            },
            ..FitConfig::default()
        }
    }

    fn echo(&self) -> Value {
        json!({
            "rho": rho_echo(self.rho),
            "eta": self.eta,
            "max_iters": self.max_iters,
            "eps": self.eps,
            "init": match self.init { InitArg::Identity => "identity", InitArg::Mean => "mean" },
        })
    }
}

#[derive(Args)]
struct FitCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Covariate value, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x: List,
    #[command(flatten)]
    fit: FitArgs,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    fit: FitArgs,
    /// Monte-Carlo draws for the null quantile.
    #[arg(long, default_value_t = bw_frechet::chisq::DEFAULT_MC)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace responses by sample covariances of this many Gaussian draws (0 = exact).
    #[arg(long, default_value_t = 0)]
    ntilde: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CiCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x: List,
    /// Intervals have confidence level 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Qq,
    Coverage,
    Size,
    Power,
    NullQq,
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(long, value_enum, default_value_t = Experiment::Size)]
    experiment: Experiment,
    /// Generating example (1 or 2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: u8,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta: f64,
    /// Effect sizes for the power experiment, comma separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    deltas: Option<List>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Covariate value for qq/coverage experiments (default: origin).
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    x: Option<List>,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value_t = bw_frechet::chisq::DEFAULT_MC)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    ntilde: usize,
    /// Report CSV path; a JSON sidecar is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Comma separated list of numbers, kept as one clap value.
#[derive(Clone, Debug)]
struct List(Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_rho(s: &str) -> Result<Rho, String> {
    match s {
        "auto" => Ok(Rho::Auto),
        "zero" => Ok(Rho::Zero),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|r| *r >= 0.0 && r.is_finite())
            .map(Rho::Value)
            .ok_or_else(|| format!("rho must be auto, zero or a non-negative number, got {v:?}")),
    }
}

fn rho_echo(rho: Rho) -> Value {
    match rho {
        Rho::Auto => json!("auto"),
        Rho::Zero => json!("zero"),
        Rho::Value(v) => json!(v),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::NumericalBreakdown(_)
        | Error::IterateNotPositiveDefinite { .. }
        | Error::SingularOperator { .. }
        | Error::ExperimentFailed { .. } => 4,
        _ => 2,
    }
}

fn error_json(command: &str, e: &Error) -> Value {
    let mut err = json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::NonConvergence { indices, barycenter_converged } = e {
        err["indices"] = json!(indices);
        err["barycenter_converged"] = json!(barycenter_converged);
    }
    json!({ "command": command, "version": VERSION, "error": err })
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn data_echo(d: &DataArgs) -> Value {
    json!({ "covariates": d.covariates.display().to_string(), "responses": d.responses.display().to_string() })
}

fn load(d: &DataArgs) -> Result<Dataset, Error> {
    load_dataset(&d.covariates, &d.responses)
}

fn covariate(x: &[f64], data: &Dataset) -> Result<DVector<f64>, Error> {
    if x.len() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), found: x.len() });
    }
    Ok(DVector::from_column_slice(x))
}

fn cmd_fit(c: &FitCmd) -> Result<Value, Error> {
    let data = load(&c.data)?;
    let x = covariate(&c.x.0, &data)?;
    let cfg = c.fit.config();
    let moments = empirical_moments(&data, c.fit.rho.resolve(data.n()))?;
    let f = fit(&x, &data, &moments, &cfg)?;
    if !f.converged {
        return Err(Error::NonConvergence { indices: vec![], barycenter_converged: false });
    }
    Ok(json!({
        "command": "fit",
        "version": VERSION,
        "inputs": { "data": data_echo(&c.data), "x": c.x.0, "fit": c.fit.echo() },
        "dimensions": { "n": data.n(), "p": data.p(), "d": data.d() },
        "estimate": f.estimate.to_rows(),
        "diagnostics": { "converged": f.converged, "iters": f.iters, "grad_norm": f.grad_norm },
    }))
}

fn cmd_test(c: &TestCmd) -> Result<Value, Error> {
    let data = load(&c.data)?;
    let opts = TestOptions { alpha: c.alpha, rho: c.fit.rho, fit: c.fit.config(), mc: c.mc, seed: c.seed };
    let r = estimated_covariance_test(&data, c.ntilde, c.seed.wrapping_add(1), &opts)?;
    Ok(json!({
        "command": "test",
        "version": VERSION,
        "inputs": {
            "data": data_echo(&c.data), "alpha": c.alpha, "fit": c.fit.echo(),
            "mc": c.mc, "seed": c.seed, "ntilde": c.ntilde,
        },
        "dimensions": { "n": data.n(), "p": data.p(), "d": data.d() },
        "result": r,
        "diagnostics": { "max_fit_iters": r.max_fit_iters },
    }))
}

fn cmd_ci(c: &CiCmd) -> Result<Value, Error> {
    let data = load(&c.data)?;
    let x = covariate(&c.x.0, &data)?;
    let level = 1.0 - c.alpha;
    let cfg = c.fit.config();
    let moments = empirical_moments(&data, c.fit.rho.resolve(data.n()))?;
    let f = fit(&x, &data, &moments, &cfg)?;
    if !f.converged {
        return Err(Error::NonConvergence { indices: vec![], barycenter_converged: false });
    }
    let clt = clt_covariance(&x, &data, &f, &moments)?;
    let mut intervals = Vec::new();
    for i in 0..data.d() {
        for j in i..data.d() {
            let (lo, hi) = confidence_interval((i, j), level, &clt, &f, data.n())?;
            intervals.push(json!({
                "row": i, "col": j, "estimate": f.estimate.as_matrix()[(i, j)],
                "lower": lo, "upper": hi, "variance": clt.entry_variances[(i, j)],
            }));
        }
    }
    Ok(json!({
        "command": "ci",
        "version": VERSION,
        "inputs": { "data": data_echo(&c.data), "x": c.x.0, "alpha": c.alpha, "fit": c.fit.echo() },
        "dimensions": { "n": data.n(), "p": data.p(), "d": data.d() },
        "level": level,
        "estimate": f.estimate.to_rows(),
        "intervals": intervals,
        "diagnostics": { "converged": f.converged, "iters": f.iters, "grad_norm": f.grad_norm },
    }))
}

fn cmd_simulate(c: &SimulateCmd) -> Result<Value, Error> {
    let which = if c.example == 1 { ExampleKind::Example1 } else { ExampleKind::Example2 };
    let cfg = ExampleConfig { which, n: c.n, p: c.p, d: c.d, delta: c.delta, seed: c.seed };
    cfg.validate()?;
    let fit_cfg = c.fit.config();
    let options = TestOptions { alpha: c.alpha, rho: c.fit.rho, fit: fit_cfg.clone(), mc: c.mc, seed: 0 };
    let settings = TestTrialSettings { trials: c.trials, options, n_tilde: c.ntilde };
    let x0 = match &c.x {
        Some(List(v)) if v.len() != c.p => return Err(Error::DimensionMismatch { expected: c.p, found: v.len() }),
        Some(List(v)) => DVector::from_column_slice(v),
        None => DVector::zeros(c.p),
    };
    let entries: Vec<(usize, usize)> = (0..c.d).flat_map(|j| (j..c.d).map(move |i| (i, j))).collect();
    let report: ExperimentReport = match c.experiment {
        Experiment::Qq => run_qq_experiment(&cfg, c.trials, &x0, &entries, &fit_cfg)?,
        Experiment::Coverage => {
            let qq = run_qq_experiment(&cfg, c.trials, &x0, &entries, &fit_cfg)?;
            coverage_report(&qq, 1.0 - c.alpha)?
        }
        Experiment::Size => size_power_report(&run_test_trials(&cfg, &[c.delta], &settings)?),
        Experiment::Power => {
            let deltas = c.deltas.clone().map(|l| l.0).unwrap_or_else(|| vec![0.0, 0.1, 0.2, 0.3]);
            size_power_report(&run_test_trials(&cfg, &deltas, &settings)?)
        }
        Experiment::NullQq => {
            let run = run_test_trials(&cfg, &[c.delta], &settings)?;
            null_qq_report(&run, c.delta, 2000)?
        }
    };
    let report_path = c
        .report
        .clone()
        .or_else(|| c.out.as_ref().map(|o| o.with_extension("report.csv")));
    let mut files = Value::Null;
    if let Some(csv) = &report_path {
        let sidecar = csv.with_extension("json");
        save_report(&report, csv, &sidecar)?;
        files = json!({ "csv": csv.display().to_string(), "metadata": sidecar.display().to_string() });
    }
    let experiment = match c.experiment {
        Experiment::Qq => "qq",
        Experiment::Coverage => "coverage",
        Experiment::Size => "size",
        Experiment::Power => "power",
        Experiment::NullQq => "null-qq",
    };
    let mut body = json!({
        "command": "simulate",
        "version": VERSION,
        "inputs": {
            "experiment": experiment, "example": c.example, "delta": c.delta, "deltas": c.deltas.as_ref().map(|l| &l.0),
            "n": c.n, "p": c.p, "d": c.d, "trials": c.trials, "alpha": c.alpha, "x": x0.as_slice(),
            "fit": c.fit.echo(), "mc": c.mc, "seed": c.seed, "ntilde": c.ntilde,
        },
        "report": files,
        "failed_trials": report.failures.len(),
    });
    let side = report_sidecar(&report);
    body["summary"] = side["summary"].clone();
    body["columns"] = side["columns"].clone();
    if report.rows.len() <= 64 {
        body["rows"] = json!(report.rows);
    }
    Ok(body)
}

fn configure_threads() {
    if let Some(n) = std::env::var("BWF_NUM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let (name, out, result) = match &cli.command {
        Command::Fit(c) => ("fit", c.out.as_deref(), cmd_fit(c)),
        Command::Test(c) => ("test", c.out.as_deref(), cmd_test(c)),
        Command::Ci(c) => ("ci", c.out.as_deref(), cmd_ci(c)),
        Command::Simulate(c) => ("simulate", c.out.as_deref(), cmd_simulate(c)),
    };
    match result {
        Ok(v) => match emit(&v, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("bwf: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("bwf {name}: {e}");
            let _ = emit(&error_json(name, &e), out);
            ExitCode::from(exit_code(&e))
        }
    }
}
