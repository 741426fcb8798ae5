use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taei::bench::{BenchmarkDataset, BinMaps, SphereSpec};
use taei::eval::{run_artificial, run_real, write_pareto_table, ExperimentConfig, RunReport, Task};
use taei::oversampler::{oversample, Amount, Method, OversamplerSpec};
use taei::tabular::{load_csv, write_csv, TabularSchema};
use taei::{rng, Error, Result};

/// Minority oversampling by interpolation in autoencoder latent space.
#[derive(Debug, Parser)]
#[command(name = "taei", version)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one sphere benchmark dataset.
    GenArtificial(GenArgs),
    /// Oversample the minority class of a CSV dataset.
    Oversample(OversampleArgs),
    /// Run the artificial benchmark described by a config file.
    EvalArtificial(EvalArgs),
    /// Run the real-data evaluation described by a config file.
    EvalReal(EvalArgs),
    /// Recompute the cover / error Pareto table of an artificial report.
    Pareto(ParetoArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    dims: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    minority_frac: f64,
    #[arg(long, default_value_t = 7)]
    bins: usize,
    /// Number of leading coordinates replaced with shuffled bin codes.
    #[arg(long, value_name = "K", default_value_t = 0)]
    discretize: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_data: PathBuf,
    #[arg(long)]
    out_schema: PathBuf,
    #[arg(long)]
    out_sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OversampleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// One of NoOS, ROS, SMOTE, SMOTE_NC, Poly, SMOTE_AE, SMOTE_VAE,
    /// SMOTE_RAE, Poly_AE, Poly_VAE, Poly_RAE.
    #[arg(long)]
    method: Method,
    /// Fraction of the majority-minority gap to fill.
    #[arg(long, conflicts_with = "n_syn", required_unless_present = "n_syn")]
    ratio: Option<f64>,
    #[arg(long)]
    n_syn: Option<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Autoencoder early-stopping rows; the input rows are used when absent.
    #[arg(long)]
    val_data: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Write only the synthetic rows instead of input plus synthetic rows.
    #[arg(long)]
    synthetic_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_report: Option<PathBuf>,
    #[arg(long)]
    out_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParetoArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenArtificial(a) => gen_artificial(a),
        Command::Oversample(a) => oversample_cmd(a),
        Command::EvalArtificial(a) => eval(a, Task::Artificial),
        Command::EvalReal(a) => eval(a, Task::Real),
        Command::Pareto(a) => pareto(a),
    }
}

fn gen_artificial(a: GenArgs) -> Result<()> {
    if a.discretize > a.dims {
        return Err(Error::InvalidArgument(format!(
            "cannot discretize {} of {} coordinates",
            a.discretize, a.dims
        )));
    }
    let spec = SphereSpec::new(a.dims, a.n, a.minority_frac, a.seed)?;
    let coords: Vec<usize> = (0..a.discretize).collect();
    let bins = BinMaps::random(a.dims, &coords, a.bins, rng::derive_seed(&[a.seed, 7]))?;
    let id = format!("sphere-d{}-n{}-s{}", a.dims, a.n, a.seed);
    let bench = BenchmarkDataset::from_parts(id.clone(), id, spec, bins)?;
    write_csv(&a.out_data, &bench.dataset)?;
    bench.dataset.schema().to_json_file(&a.out_schema)?;
    if let Some(p) = &a.out_sidecar {
        bench.sidecar().to_json_file(p)?;
    }
    log::info!(
        "wrote {} rows ({} minority), alpha = {:.6}",
        bench.dataset.len(),
        bench.dataset.minority_count(),
        bench.spec.slice_alpha
    );
    Ok(())
}

fn oversample_cmd(a: OversampleArgs) -> Result<()> {
    let schema = TabularSchema::from_json_file(&a.schema)?;
    let train = load_csv(&a.data, &schema)?;
    let val = match &a.val_data {
        Some(p) => load_csv(p, &schema)?,
        None => train.clone(),
    };
    let amount = match (a.ratio, a.n_syn) {
        (Some(r), _) => Amount::Ratio(r),
        (None, Some(n)) => Amount::NSyn(n),
        (None, None) => unreachable!("clap requires one of --ratio and --n-syn"),
    };
    let mut spec = OversamplerSpec::new(a.method, amount).with_seed(a.seed);
    spec.k = a.k;
    spec.arch.latent_dim = a.latent_dim;
    if let Some(e) = a.max_epochs {
        spec.train.max_epochs = e;
    }
    let aug = oversample(&train, &val, &spec)?;
    let out = if a.synthetic_only { aug.synthetic.clone() } else { aug.combined()? };
    write_csv(&a.out, &out)?;
    log::info!("{}: {} synthetic rows", a.method.label(), aug.n_syn());
    Ok(())
}

fn eval(a: EvalArgs, task: Task) -> Result<()> {
    let config = ExperimentConfig::from_json_file(&a.config)?;
    if config.task != task {
        return Err(Error::InvalidArgument(format!(
            "{} holds a {:?} configuration",
            a.config.display(),
            config.task
        )));
    }
    let report = match task {
        Task::Artificial => run_artificial(&config)?,
        Task::Real => run_real(&config)?,
    };
    let report_path = a.out_report.or_else(|| config.output.report.clone());
    let table_path = a.out_table.or_else(|| config.output.table.clone());
    if report_path.is_none() && table_path.is_none() {
        report.write_table(std::io::stdout().lock())?;
    }
    if let Some(p) = report_path {
        report.to_json_file(&p)?;
    }
    if let Some(p) = table_path {
        report.write_table_file(&p)?;
    }
    if report.failed_cells > 0 {
        log::warn!("{} cells failed; see the report", report.failed_cells);
    }
    Ok(())
}

fn pareto(a: ParetoArgs) -> Result<()> {
    let report = RunReport::from_json_file(&a.report)?;
    if report.task != Task::Artificial {
        return Err(Error::InvalidArgument("Pareto tables need an artificial report".into()));
    }
    let file = std::fs::File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
    write_pareto_table(std::io::BufWriter::new(file), &report.groups)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
