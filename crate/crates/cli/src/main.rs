//! `fwdsearch`: forward plots, asymptotic bands, moment tables and
//! simulation reports as CSV or JSON.

mod input;
mod output;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fwdsearch::asymptotics::{self, BandStatistic};
use fwdsearch::forward_search::{corrected_sigma_sq, run_forward_search};
use fwdsearch::montecarlo::{run_experiment, ExperimentConfig};
use fwdsearch::{DgpSpec, ForwardConfig, FsError, InitialMethod, Regime, ReferenceDistribution};

use output::{float, Table};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Output(String),
    Core(FsError),
}

impl From<FsError> for CliError {
    fn from(e: FsError) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "malformed input: {m}"),
            CliError::Output(m) => write!(f, "cannot write output: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Output(_) => EXIT_INPUT,
            CliError::Core(FsError::InvalidDataset(_)) => EXIT_INPUT,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_DOMAIN,
        }
    }
}

#[derive(Parser)]
#[command(name = "fwdsearch", version, about = "Forward Search regression diagnostics and their asymptotic bands")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward search on a CSV file and print the forward plot.
    ///
    /// The input needs a header and a column named `y`; all other columns are
    /// regressors. A file with only `y` is treated as a location sample.
    ///
    /// CSV columns: m, psi, z, d, sigma, sigma_corr, z_scaled, d_scaled,
    /// beta_<name>..., band_mean, band_lower, band_upper. The band is the
    /// pointwise asymptotic band for z / sigma at psi = m / n.
    Analyze(AnalyzeArgs),
    /// Pointwise asymptotic bands on a psi grid.
    ///
    /// CSV columns: psi, mean, lower, upper.
    Bands(BandsArgs),
    /// Replicated simulation compared with the asymptotic theory.
    ///
    /// CSV has one row per probe psi: psi, m, observed, completed, failures,
    /// c, varsigma, mean/variance/quantiles of z / sigma, normalized means and
    /// variances, band edges, coverage, and per-coefficient variances.
    Simulate(SimulateArgs),
    /// Truncated moments and derived functions on a psi grid.
    ///
    /// CSV columns: psi, c, tau, kappa, varsigma_sq, rho, density, clamped.
    Moments(MomentsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Normal,
    T,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialArg {
    Lms,
    Ols,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    /// z / sigma_hat
    Hat,
    /// z / sigma_corr
    Corr,
    /// z / (sigma varsigma) with known sigma
    Known,
    /// one coefficient error with unit sigma and Sigma
    Beta,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Location,
    Ar1,
    Trend,
    RandomWalk,
}

#[derive(Args)]
struct DistArgs {
    /// Reference distribution of the errors.
    #[arg(long, value_enum, default_value = "normal")]
    dist: DistArg,
    /// Degrees of freedom of the scaled t.
    #[arg(long)]
    dof: Option<f64>,
}

impl DistArgs {
    fn resolve(&self) -> Result<ReferenceDistribution, CliError> {
        Ok(match self.dist {
            DistArg::Normal => ReferenceDistribution::standard_normal(),
            DistArg::T => {
                let d = self
                    .dof
                    .ok_or_else(|| FsError::InvalidDistribution("--dist t needs --dof".into()))?;
                ReferenceDistribution::scaled_t(d)?
            }
        })
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = asymptotics::DEFAULT_GRID_MIN)]
    psi_min: f64,
    #[arg(long, default_value_t = asymptotics::DEFAULT_GRID_MAX)]
    psi_max: f64,
    #[arg(long, default_value_t = asymptotics::DEFAULT_GRID_POINTS)]
    psi_points: usize,
}

impl GridArgs {
    fn resolve(&self) -> Result<Vec<f64>, CliError> {
        Ok(asymptotics::psi_grid(self.psi_min, self.psi_max, self.psi_points)?)
    }
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write to a file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Initial subset size; defaults to int(n / 2).
    #[arg(long)]
    m0: Option<usize>,
    /// Initial estimator.
    #[arg(long, value_enum, default_value = "lms")]
    initial: InitialArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Divide subset variances by m - dim x.
    #[arg(long)]
    dof_correct: bool,
}

impl SearchArgs {
    fn config(&self) -> ForwardConfig {
        ForwardConfig {
            m0: self.m0,
            initial: match self.initial {
                InitialArg::Lms => InitialMethod::default(),
                InitialArg::Ols => InitialMethod::FullLs,
            },
            seed: self.seed,
            dof_correct: self.dof_correct,
            hold_beta: false,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV input with a `y` column.
    input: PathBuf,
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Two-sided level of the band columns.
    #[arg(long, default_value_t = 0.90)]
    level: f64,
    /// Prepend a column of ones to the regressors.
    #[arg(long)]
    add_intercept: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BandsArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long, value_enum, default_value = "hat")]
    statistic: StatisticArg,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 0.90)]
    level: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    dist: DistArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment configuration; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    dist: DistArgs,
    #[arg(long, value_enum, default_value = "location")]
    regime: RegimeArg,
    /// AR(1) coefficient for `--regime ar1`.
    #[arg(long, default_value_t = 0.5)]
    ar_coef: f64,
    /// Number of regressors; the true coefficients are zero.
    #[arg(long)]
    dim_x: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    m0: Option<usize>,
    #[arg(long, value_enum)]
    initial: Option<InitialArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dof_correct: bool,
    #[arg(long)]
    level: Option<f64>,
    /// Comma separated probe values of psi.
    #[arg(long, value_delimiter = ',')]
    probes: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Serialize)]
struct AnalyzeRow {
    m: usize,
    psi: f64,
    z: f64,
    d: f64,
    sigma: f64,
    sigma_corr: f64,
    z_scaled: f64,
    d_scaled: f64,
    beta: Vec<f64>,
    band_mean: f64,
    band_lower: f64,
    band_upper: f64,
}

#[derive(Serialize)]
struct AnalyzeReport {
    n: usize,
    dim_x: usize,
    m0: usize,
    regressors: Vec<String>,
    level: f64,
    rows: Vec<AnalyzeRow>,
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let dist = args.dist.resolve()?;
    let z_crit = asymptotics::critical_value(args.level)?;
    let (dataset, names) = input::read_dataset(&args.input, args.add_intercept)?;
    let path = run_forward_search(&dataset, &args.search.config())?;
    let n = path.n;

    let mut rows = Vec::with_capacity(path.steps.len());
    for step in &path.steps {
        let psi = step.m as f64 / n as f64;
        let sigma = step.sigma_sq.sqrt();
        let sigma_corr = corrected_sigma_sq(step.sigma_sq, step.m, n, &dist)?.sqrt();
        let (mean, sd) = asymptotics::mean_and_sd(&dist, BandStatistic::ZOverSigmaHat, psi, n)?;
        rows.push(AnalyzeRow {
            m: step.m,
            psi,
            z: step.z,
            d: step.d,
            sigma,
            sigma_corr,
            z_scaled: step.z / sigma,
            d_scaled: step.d / sigma,
            beta: step.beta.clone(),
            band_mean: mean,
            band_lower: mean - z_crit * sd,
            band_upper: mean + z_crit * sd,
        });
    }

    let mut out = output::sink(args.out.output.as_deref())?;
    if args.out.format == Format::Json {
        let report = AnalyzeReport {
            n,
            dim_x: path.dim_x,
            m0: path.m0(),
            regressors: names,
            level: args.level,
            rows,
        };
        return output::write_json(&report, &mut out);
    }
    let mut header: Vec<String> = ["m", "psi", "z", "d", "sigma", "sigma_corr", "z_scaled", "d_scaled"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().map(|s| format!("beta_{s}")));
    header.extend(["band_mean", "band_lower", "band_upper"].map(String::from));
    let mut table = Table::new(header);
    for r in &rows {
        let mut cells = vec![r.m.to_string()];
        cells.extend(
            [r.psi, r.z, r.d, r.sigma, r.sigma_corr, r.z_scaled, r.d_scaled]
                .into_iter()
                .chain(r.beta.iter().copied())
                .chain([r.band_mean, r.band_lower, r.band_upper])
                .map(float),
        );
        table.push(cells);
    }
    table.write_csv(&mut out)
}

fn bands(args: &BandsArgs) -> Result<(), CliError> {
    let dist = args.dist.resolve()?;
    let grid = args.grid.resolve()?;
    let statistic = match args.statistic {
        StatisticArg::Hat => BandStatistic::ZOverSigmaHat,
        StatisticArg::Corr => BandStatistic::ZOverSigmaCorr,
        StatisticArg::Known => BandStatistic::ZOverKnownSigma,
        StatisticArg::Beta => BandStatistic::BetaComponent,
    };
    let curve = asymptotics::band(&dist, statistic, &grid, args.n, args.level)?;
    let mut out = output::sink(args.out.output.as_deref())?;
    if args.out.format == Format::Json {
        return output::write_json(&curve, &mut out);
    }
    let mut table = Table::new(["psi", "mean", "lower", "upper"]);
    for i in 0..grid.len() {
        table.push(
            [curve.psi_grid[i], curve.mean[i], curve.lower[i], curve.upper[i]]
                .map(float)
                .to_vec(),
        );
    }
    table.write_csv(&mut out)
}

fn moments(args: &MomentsArgs) -> Result<(), CliError> {
    let dist = args.dist.resolve()?;
    let grid = args.grid.resolve()?;
    let rows = grid
        .iter()
        .map(|&psi| dist.psi_functions(psi))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = output::sink(args.out.output.as_deref())?;
    if args.out.format == Format::Json {
        return output::write_json(&rows, &mut out);
    }
    let mut table = Table::new(["psi", "c", "tau", "kappa", "varsigma_sq", "rho", "density", "clamped"]);
    for r in &rows {
        let mut cells: Vec<String> = [r.psi, r.c, r.tau, r.kappa, r.varsigma_sq, r.rho, r.density]
            .map(float)
            .to_vec();
        cells.push(r.clamped.to_string());
        table.push(cells);
    }
    table.write_csv(&mut out)
}

fn simulation_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => {
            let dist = args.dist.resolve()?;
            let (regime, default_dim) = match args.regime {
                RegimeArg::Location => (Regime::LocationScale, 1),
                RegimeArg::Ar1 => (Regime::StationaryAr1(args.ar_coef), 2),
                RegimeArg::Trend => (Regime::LinearTrend, 2),
                RegimeArg::RandomWalk => (Regime::RandomWalk, 1),
            };
            let dim_x = args.dim_x.unwrap_or(default_dim);
            let spec = DgpSpec {
                regime,
                n: args.n.unwrap_or(128),
                dim_x,
                beta: vec![0.0; dim_x],
                sigma: args.sigma,
                error_dist: dist,
            };
            let mut config = ExperimentConfig::new(spec, 1000, 0);
            config.forward.initial = InitialMethod::FullLs;
            config
        }
    };
    if let Some(n) = args.n {
        config.dgp.n = n;
    }
    if let Some(r) = args.reps {
        config.replicates = r;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if let Some(l) = args.level {
        config.level = l;
    }
    if let Some(p) = &args.probes {
        config.psi_probes = p.clone();
    }
    if args.m0.is_some() {
        config.forward.m0 = args.m0;
    }
    if let Some(init) = args.initial {
        config.forward.initial = match init {
            InitialArg::Lms => InitialMethod::default(),
            InitialArg::Ols => InitialMethod::FullLs,
        };
    }
    if args.dof_correct {
        config.forward.dof_correct = true;
    }
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = simulation_config(args)?;
    let report = run_experiment(&config)?;
    let mut out = output::sink(args.out.output.as_deref())?;
    if args.out.format == Format::Json {
        return output::write_json(&report, &mut out);
    }
    let p = config.dgp.dim_x;
    let mut header: Vec<String> = [
        "psi", "m", "observed", "completed", "failures", "c", "varsigma", "z_hat_mean", "z_hat_variance",
    ]
    .map(String::from)
    .to_vec();
    header.extend(config.quantile_probs.iter().map(|q| format!("z_hat_q{q}")));
    header.extend(
        [
            "z_hat_norm_mean",
            "z_hat_norm_variance",
            "z_corr_norm_mean",
            "z_corr_norm_variance",
            "sigma_corr_norm_mean",
            "sigma_corr_norm_variance",
            "hat_lower",
            "hat_upper",
            "corr_lower",
            "corr_upper",
            "coverage_hat",
            "coverage_corr",
        ]
        .map(String::from),
    );
    header.extend((0..p).map(|j| format!("beta{j}_variance")));
    header.extend((0..p).map(|j| format!("beta{j}_variance_theory")));
    let mut table = Table::new(header);
    for probe in &report.probes {
        let mut cells = vec![
            float(probe.psi),
            probe.m.to_string(),
            probe.observed.to_string(),
            report.completed.to_string(),
            report.failures.to_string(),
        ];
        let s = &probe.z_over_sigma_hat;
        cells.extend(
            [probe.theory.c, probe.theory.varsigma, s.mean, s.variance]
                .into_iter()
                .chain(s.quantiles.iter().copied())
                .chain([
                    probe.z_hat_normalized.mean,
                    probe.z_hat_normalized.variance,
                    probe.z_corr_normalized.mean,
                    probe.z_corr_normalized.variance,
                    probe.sigma_corr_normalized.mean,
                    probe.sigma_corr_normalized.variance,
                    probe.theory.hat_lower,
                    probe.theory.hat_upper,
                    probe.theory.corr_lower,
                    probe.theory.corr_upper,
                    probe.coverage_hat,
                    probe.coverage_corr,
                ])
                .chain((0..p).map(|j| probe.beta_covariance[j][j]))
                .chain((0..p).map(|j| probe.theory.beta_variance[j][j]))
                .map(float),
        );
        table.push(cells);
    }
    table.write_csv(&mut out)
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("FS_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Input(format!("FS_THREADS must be a positive integer, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot configure threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Bands(a) => bands(a),
        Command::Simulate(a) => simulate(a),
        Command::Moments(a) => moments(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "fwdsearch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
