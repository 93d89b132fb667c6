//! The `gmnar` command line: simulate datasets, fit, select group numbers,
//! run inference and Monte Carlo benchmarks.
//!
//! Exit codes: 0 success, 1 unexpected runtime failure, 2 invalid
//! arguments or configuration, 3 non-stationary parameters, 4 unreadable or
//! inconsistent dataset.

pub mod bundle;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gmnar_core::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport};
use gmnar_core::estimate::{Estimator, FitOptions, FitResult, Step};
use gmnar_core::inference::{confidence_intervals, covariance, InferenceReport};
use gmnar_core::metrics::{misclustering_majority, misclustering_permutation, pseudo_distance};
use gmnar_core::model::ParameterSpec;
use gmnar_core::select::{select_on_cells, SelectionResult};
use gmnar_core::simulate::{simulate_gmnar, SimConfig};
use gmnar_core::GmnarError;
use serde::de::DeserializeOwned;
use serde::Serialize;

use bundle::Dataset;

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NONSTATIONARY: u8 = 3;
pub const EXIT_DATA: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_USAGE, e.to_string())
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_DATA, e.to_string())
    }

    /// Errors raised while computing on an already loaded dataset.
    fn compute(e: GmnarError) -> Self {
        let code = match e {
            GmnarError::NonStationary { .. } => EXIT_NONSTATIONARY,
            GmnarError::InvalidArgument(_) => EXIT_USAGE,
            GmnarError::Dimension(_) | GmnarError::Index(_) | GmnarError::Parse(_) | GmnarError::NonFinite(_) => EXIT_DATA,
            _ => EXIT_RUNTIME,
        };
        Self::new(code, e.to_string())
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_RUNTIME, e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gmnar", version, about = "Grouped matrix network autoregression")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GMNAR_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    pub data: PathBuf,
    /// FitOptions JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset bundle from a SimConfig JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit with fixed group numbers.
    Fit {
        #[command(flatten)]
        args: FitArgs,
        #[arg(long)]
        g: usize,
        #[arg(long)]
        h: usize,
    },
    /// Choose the group numbers by QIC.
    Select {
        #[command(flatten)]
        args: FitArgs,
        #[arg(long, default_value_t = 5)]
        gmax: usize,
        #[arg(long, default_value_t = 5)]
        hmax: usize,
        #[arg(long, default_value_t = 1)]
        gmin: usize,
        #[arg(long, default_value_t = 1)]
        hmin: usize,
        /// Only consider G = H.
        #[arg(long)]
        diagonal: bool,
    },
    /// Fit, then report standard errors, intervals and p-values.
    Infer {
        #[command(flatten)]
        args: FitArgs,
        #[arg(long)]
        g: usize,
        #[arg(long)]
        h: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Monte Carlo benchmark from a BenchmarkConfig JSON.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => bundle::write_json(path, value).map_err(CliError::io),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(CliError::io)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(e)),
                _ => Ok(()),
            }
        }
    }
}

fn fit_options(args: &FitArgs) -> CliResult<FitOptions> {
    let mut opts: FitOptions = match &args.config {
        Some(p) => read_config(p)?,
        None => FitOptions::default(),
    };
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    opts.validate().map_err(CliError::usage)?;
    Ok(opts)
}

fn load(dir: &Path) -> CliResult<Dataset> {
    bundle::load(dir).map_err(CliError::data)
}

fn check_groups(ds: &Dataset, g: usize, h: usize) -> CliResult<()> {
    if g == 0 || h == 0 || g > ds.data.n1() || h > ds.data.n2() {
        return Err(CliError::usage(format!("need 1 <= G <= {} and 1 <= H <= {}, got ({g}, {h})", ds.data.n1(), ds.data.n2())));
    }
    Ok(())
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<bundle::Manifest> {
    let mut cfg: SimConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = simulate_gmnar(&cfg).map_err(|e| match e {
        GmnarError::NonStationary { .. } => CliError::new(EXIT_NONSTATIONARY, e.to_string()),
        other => CliError::usage(other),
    })?;
    bundle::write_simulation(out, &sim, &cfg).map_err(CliError::io)
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthComparison {
    pub pseudo_distance: f64,
    /// Permutation-matched rates; present when the group counts match the truth.
    pub misclustering_rows: Option<f64>,
    pub misclustering_cols: Option<f64>,
    pub majority_rows: f64,
    pub majority_cols: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub row_groups: usize,
    pub col_groups: usize,
    pub parameters: Vec<NamedValue>,
    pub params: ParameterSpec,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub q_value: f64,
    pub q_trace: Vec<f64>,
    pub steps: Vec<Step>,
    pub sigma2_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_detected: bool,
    pub degenerate: bool,
    pub min_rcond: f64,
    pub effective_groups: (usize, usize),
    pub reseeds: usize,
    pub restarts_run: usize,
    pub warnings: Vec<String>,
    pub truth: Option<TruthComparison>,
}

pub fn fit_report(fit: &FitResult, ds: &Dataset) -> CliResult<FitReport> {
    let theta = fit.params.flatten();
    let parameters = fit.layout().names().into_iter().zip(theta.iter()).map(|(name, &value)| NamedValue { name, value }).collect();
    let truth = match &ds.truth {
        Some(t) => {
            let (tp, ta) = t.resolve().map_err(CliError::data)?;
            let same = (tp.row_groups(), tp.col_groups()) == (fit.assign.row_groups(), fit.assign.col_groups());
            Some(TruthComparison {
                pseudo_distance: pseudo_distance((&fit.params, &fit.assign), (&tp, &ta)).map_err(CliError::data)?,
                misclustering_rows: if same { Some(misclustering_permutation(fit.assign.rows(), ta.rows(), ta.row_groups()).map_err(CliError::data)?) } else { None },
                misclustering_cols: if same { Some(misclustering_permutation(fit.assign.cols(), ta.cols(), ta.col_groups()).map_err(CliError::data)?) } else { None },
                majority_rows: misclustering_majority(fit.assign.rows(), fit.assign.row_groups(), ta.rows(), ta.row_groups()).map_err(CliError::data)?,
                majority_cols: misclustering_majority(fit.assign.cols(), fit.assign.col_groups(), ta.cols(), ta.col_groups()).map_err(CliError::data)?,
            })
        }
        None => None,
    };
    Ok(FitReport {
        row_groups: fit.assign.row_groups(),
        col_groups: fit.assign.col_groups(),
        parameters,
        params: ParameterSpec::from(&fit.params),
        row_labels: fit.assign.rows().to_vec(),
        col_labels: fit.assign.cols().to_vec(),
        q_value: fit.q_value,
        q_trace: fit.q_trace.clone(),
        steps: fit.steps.clone(),
        sigma2_hat: fit.sigma2_hat,
        iterations: fit.iterations,
        converged: fit.converged,
        cycle_detected: fit.cycle_detected,
        degenerate: fit.degenerate,
        min_rcond: fit.min_rcond,
        effective_groups: fit.effective_groups,
        reseeds: fit.reseeds,
        restarts_run: fit.restarts_run,
        warnings: fit.warnings.clone(),
        truth,
    })
}

fn run_fit(ds: &Dataset, g: usize, h: usize, opts: &FitOptions) -> CliResult<FitResult> {
    check_groups(ds, g, h)?;
    let est = Estimator::new(&ds.data, &ds.nets).map_err(CliError::compute)?;
    est.fit(g, h, opts).map_err(CliError::compute)
}

pub fn cmd_fit(args: &FitArgs, g: usize, h: usize) -> CliResult<FitReport> {
    let opts = fit_options(args)?;
    let ds = load(&args.data)?;
    let fit = run_fit(&ds, g, h, &opts)?;
    let report = fit_report(&fit, &ds)?;
    emit(&report, args.out.as_deref())?;
    Ok(report)
}

pub fn cmd_select(args: &FitArgs, rows: (usize, usize), cols: (usize, usize), diagonal: bool) -> CliResult<SelectionResult> {
    let opts = fit_options(args)?;
    let ds = load(&args.data)?;
    let (gmin, gmax) = rows;
    let (hmin, hmax) = cols;
    if gmin == 0 || hmin == 0 || gmin > gmax || hmin > hmax {
        return Err(CliError::usage(format!("invalid grid {gmin}..={gmax} x {hmin}..={hmax}")));
    }
    check_groups(&ds, gmax, hmax)?;
    let cells: Vec<(usize, usize)> = (gmin..=gmax).flat_map(|g| (hmin..=hmax).map(move |h| (g, h))).filter(|&(g, h)| !diagonal || g == h).collect();
    if cells.is_empty() {
        return Err(CliError::usage("the diagonal of this grid is empty"));
    }
    let sel = select_on_cells(&ds.data, &ds.nets, &cells, &opts).map_err(CliError::compute)?;
    emit(&sel, args.out.as_deref())?;
    Ok(sel)
}

pub fn cmd_infer(args: &FitArgs, g: usize, h: usize, level: f64) -> CliResult<InferenceReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::usage(format!("level must lie in (0, 1), got {level}")));
    }
    let opts = fit_options(args)?;
    let ds = load(&args.data)?;
    let fit = run_fit(&ds, g, h, &opts)?;
    let mut inf = covariance(&fit, &ds.data, &ds.nets).map_err(CliError::compute)?;
    confidence_intervals(&mut inf, level).map_err(CliError::usage)?;
    let mut report = inf.report();
    report.warnings.extend(fit.warnings.iter().cloned());
    emit(&report, args.out.as_deref())?;
    Ok(report)
}

/// Run a benchmark and write `summary.csv`, `report.json` and `table.txt` into `out`.
pub fn cmd_benchmark(config: &Path, out: &Path, reps: Option<usize>, seed: Option<u64>) -> CliResult<BenchmarkReport> {
    let mut cfg: BenchmarkConfig = read_config(config)?;
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| match e {
        GmnarError::NonStationary { .. } => CliError::new(EXIT_NONSTATIONARY, e.to_string()),
        other => CliError::usage(other),
    })?;
    let report = run_benchmark(&cfg).map_err(CliError::compute)?;
    fs::create_dir_all(out).map_err(CliError::io)?;
    let csv = fs::File::create(out.join("summary.csv")).map_err(CliError::io)?;
    report.write_csv(std::io::BufWriter::new(csv)).map_err(CliError::io)?;
    bundle::write_json(&out.join("report.json"), &report).map_err(CliError::io)?;
    fs::write(out.join("table.txt"), report.table()).map_err(CliError::io)?;
    Ok(report)
}

/// Dispatch a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::io)?;
    }
    match &cli.command {
        Command::Simulate { config, out, seed } => {
            let m = cmd_simulate(config, out, *seed)?;
            eprintln!("wrote {}x{} panel with T = {} to {}", m.n1, m.n2, m.t, out.display());
        }
        Command::Fit { args, g, h } => {
            cmd_fit(args, *g, *h)?;
        }
        Command::Select { args, gmax, hmax, gmin, hmin, diagonal } => {
            cmd_select(args, (*gmin, *gmax), (*hmin, *hmax), *diagonal)?;
        }
        Command::Infer { args, g, h, level } => {
            cmd_infer(args, *g, *h, *level)?;
        }
        Command::Benchmark { config, out, reps, seed } => {
            let report = cmd_benchmark(config, out, *reps, *seed)?;
            let _ = write!(std::io::stdout().lock(), "{}", report.table());
        }
    }
    Ok(())
}
