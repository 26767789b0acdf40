use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdpclust::fit::PeakMode;
use pdpclust::sparse::{SolverMethod, ThresholdMode, WeightMode};
use pdpclust::transform::WindowKind;
use pdpclust_cli::config::{Emit, InputSource, RunConfig};
use pdpclust_cli::emit::write_all;
use pdpclust_cli::error::{CliError, CliResult, Stage};
use pdpclust_cli::pipeline::{self, Outcome};

/// Power delay profiles from frequency sweeps, clustered by k-means and by
/// reweighted l1 minimization.
#[derive(Parser)]
#[command(name = "pdpclust", version, about)]
struct Cli {
    /// Seed for synthesis and k-means initialisation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: sweeps and ground-truth labels.
    Synth(SynthArgs),
    /// Sweeps to a prepared power delay profile (pdp.csv).
    Pdp(PdpArgs),
    /// Cluster a profile with both methods.
    Cluster(ClusterArgs),
    /// Fit the cluster and ray decay constants over a partition.
    Fit(FitArgs),
    /// Score partitions against ground truth.
    Eval(EvalArgs),
    /// Full pipeline from sweeps or a synthetic scenario.
    Run(RunArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON (SV parameters, optionally grid and ensemble settings).
    #[arg(long, value_name = "JSON")]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Sweep files or directories (`freq_hz,re,im` CSV or .s2p), or `synthetic`.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    input: Vec<PathBuf>,
    /// Ground truth `bin_index,cluster_id` CSV for measured input.
    #[arg(long, value_name = "CSV")]
    truth: Option<PathBuf>,
    /// Window applied before the inverse transform.
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
}

#[derive(Args)]
struct KmeansArgs {
    /// Number of k-means clusters (defaults to the true count when known).
    #[arg(long)]
    k: Option<usize>,
    /// k-means++ restarts; the lowest WCSS wins.
    #[arg(long)]
    restarts: Option<usize>,
    /// Feature scale of the bin index.
    #[arg(long)]
    kmeans_delay_scale: Option<f64>,
    /// Feature scale of power in dB.
    #[arg(long)]
    kmeans_power_scale: Option<f64>,
}

#[derive(Args)]
struct SparseArgs {
    /// Budget on the weighted curvature of the reconstruction.
    #[arg(long)]
    l_max: Option<f64>,
    /// Floor added to |curvature| in the reweighting.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Maximum reweighting iterations.
    #[arg(long)]
    outer_iters: Option<usize>,
    /// Stop reweighting once weights change by less than this, relatively.
    #[arg(long)]
    weight_tol: Option<f64>,
    /// Decision level on the curvature of the reconstruction.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Compare the signed curvature or its magnitude with the threshold.
    #[arg(long, value_enum)]
    threshold_mode: Option<ThresholdModeArg>,
    /// Crossings closer than this many bins merge.
    #[arg(long)]
    min_separation: Option<usize>,
    /// Reweight from the curvature of the fit or of the input profile.
    #[arg(long, value_enum)]
    weight_mode: Option<WeightModeArg>,
    /// Inner solver for each reweighted problem.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Initial ADMM penalty.
    #[arg(long)]
    rho: Option<f64>,
    /// Iteration cap of the inner solver.
    #[arg(long)]
    inner_iters: Option<usize>,
    /// Inner solver tolerance on feasibility.
    #[arg(long)]
    primal_tol: Option<f64>,
    /// Inner solver tolerance on optimality.
    #[arg(long)]
    dual_tol: Option<f64>,
}

#[derive(Args)]
struct FitOptions {
    /// Which bin of a segment gives the cluster's power.
    #[arg(long, value_enum)]
    peak: Option<PeakArg>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Window recorded with the scenario in realization.json.
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
}

#[derive(Args)]
struct PdpArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct ClusterArgs {
    /// Profile to cluster [default: <out>/pdp.csv].
    #[arg(long, value_name = "CSV")]
    pdp: Option<PathBuf>,
    /// Ground truth `bin_index,cluster_id` CSV.
    #[arg(long, value_name = "CSV")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    kmeans: KmeansArgs,
    #[command(flatten)]
    sparse: SparseArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Profile [default: <out>/pdp.csv].
    #[arg(long, value_name = "CSV")]
    pdp: Option<PathBuf>,
    /// Partition [default: <out>/partition_sparse.csv].
    #[arg(long, value_name = "CSV")]
    partition: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Args)]
struct EvalArgs {
    /// Partition files [default: <out>/partition_sparse.csv and partition_kmeans.csv].
    #[arg(long, num_args = 1.., value_name = "CSV")]
    partition: Vec<PathBuf>,
    /// Ground truth `bin_index,cluster_id` CSV.
    #[arg(long, value_name = "CSV")]
    truth: PathBuf,
    /// Onset matching tolerance, bins.
    #[arg(long)]
    slack: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    kmeans: KmeansArgs,
    #[command(flatten)]
    sparse: SparseArgs,
    #[command(flatten)]
    fit: FitOptions,
    /// Onset matching tolerance, bins.
    #[arg(long)]
    slack: Option<usize>,
    /// Artifacts to write [default: all].
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    emit: Vec<Emit>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Blackman,
    Rectangular,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdModeArg {
    Signed,
    Abs,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightModeArg {
    Curvature,
    Profile,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    InteriorPoint,
    Admm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PeakArg {
    FirstBin,
    MaxBin,
}

impl From<WindowArg> for WindowKind {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Blackman => WindowKind::Blackman,
            WindowArg::Rectangular => WindowKind::Rectangular,
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl InputArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if !self.input.is_empty() {
            cfg.input = if self.input.len() == 1 && self.input[0] == Path::new("synthetic") {
                InputSource::Synthetic
            } else {
                InputSource::Paths(self.input.clone())
            };
        }
        if self.truth.is_some() {
            cfg.truth = self.truth.clone();
        }
        set(&mut cfg.window, self.window.map(Into::into));
    }
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        if let Some(p) = &self.scenario {
            let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::input(Stage::Config, format!("{} does not exist", p.display())),
                _ => CliError::io(Stage::Config, p, e),
            })?;
            cfg.scenario = serde_json::from_str(&text)
                .map_err(|e| CliError::input(Stage::Config, format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

impl KmeansArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let km = &mut cfg.kmeans;
        if self.k.is_some() {
            km.k = self.k;
        }
        set(&mut km.restarts, self.restarts);
        set(&mut km.delay_scale, self.kmeans_delay_scale);
        set(&mut km.power_scale, self.kmeans_power_scale);
    }
}

impl SparseArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let sp = &mut cfg.sparse;
        set(&mut sp.l_max, self.l_max);
        set(&mut sp.epsilon, self.epsilon);
        set(&mut sp.max_outer_iters, self.outer_iters);
        set(&mut sp.weight_tol, self.weight_tol);
        set(&mut sp.threshold, self.threshold);
        set(
            &mut sp.threshold_mode,
            self.threshold_mode.map(|m| match m {
                ThresholdModeArg::Signed => ThresholdMode::Signed,
                ThresholdModeArg::Abs => ThresholdMode::Abs,
            }),
        );
        set(&mut sp.min_separation, self.min_separation);
        set(
            &mut sp.weight_mode,
            self.weight_mode.map(|m| match m {
                WeightModeArg::Curvature => WeightMode::Curvature,
                WeightModeArg::Profile => WeightMode::Profile,
            }),
        );
        set(
            &mut sp.solver.method,
            self.solver.map(|m| match m {
                SolverArg::InteriorPoint => SolverMethod::InteriorPoint,
                SolverArg::Admm => SolverMethod::Admm,
            }),
        );
        set(&mut sp.solver.rho, self.rho);
        set(&mut sp.solver.max_inner_iters, self.inner_iters);
        set(&mut sp.solver.primal_tol, self.primal_tol);
        set(&mut sp.solver.dual_tol, self.dual_tol);
    }
}

impl FitOptions {
    fn apply(&self, cfg: &mut RunConfig) {
        set(
            &mut cfg.fit.peak,
            self.peak.map(|p| match p {
                PeakArg::FirstBin => PeakMode::FirstBin,
                PeakArg::MaxBin => PeakMode::MaxBin,
            }),
        );
    }
}

fn execute(cli: Cli) -> CliResult<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out.clone());
    let out = cfg.out.clone();
    let outcome = match &cli.command {
        Command::Synth(a) => {
            a.scenario.apply(&mut cfg)?;
            set(&mut cfg.window, a.window.map(Into::into));
            pipeline::synth(&cfg)?
        }
        Command::Pdp(a) => {
            a.input.apply(&mut cfg);
            a.scenario.apply(&mut cfg)?;
            pipeline::pdp(&cfg)?
        }
        Command::Cluster(a) => {
            a.kmeans.apply(&mut cfg);
            a.sparse.apply(&mut cfg);
            let pdp = a.pdp.clone().unwrap_or_else(|| out.join("pdp.csv"));
            pipeline::cluster_file(&cfg, &pdp, a.truth.as_deref())?
        }
        Command::Fit(a) => {
            a.fit.apply(&mut cfg);
            let pdp = a.pdp.clone().unwrap_or_else(|| out.join("pdp.csv"));
            let part = a.partition.clone().unwrap_or_else(|| out.join("partition_sparse.csv"));
            pipeline::fit_file(&cfg, &pdp, &part)?
        }
        Command::Eval(a) => {
            set(&mut cfg.slack, a.slack);
            let parts = if a.partition.is_empty() {
                vec![out.join("partition_sparse.csv"), out.join("partition_kmeans.csv")]
            } else {
                a.partition.clone()
            };
            pipeline::eval_files(&cfg, &parts, &a.truth)?
        }
        Command::Run(a) => {
            a.input.apply(&mut cfg);
            a.scenario.apply(&mut cfg)?;
            a.kmeans.apply(&mut cfg);
            a.sparse.apply(&mut cfg);
            a.fit.apply(&mut cfg);
            set(&mut cfg.slack, a.slack);
            if !a.emit.is_empty() {
                cfg.emit = a.emit.iter().copied().collect();
            }
            pipeline::run(&cfg)?
        }
    };
    let written = write_all(&out, &outcome.artifacts)?;
    log::info!("wrote {} files to {}", written.len(), out.display());
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let quiet = cli.quiet;
    match execute(cli) {
        Ok(outcome) => {
            if !quiet {
                print!("{}", outcome.report);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("hint: {}", e.hint());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
