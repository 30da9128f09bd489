//! `lpdt`: evaluate, simulate, reference and render.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpd_temporal::config::RunConfig;
use lpd_temporal::evaluate::{evaluate, reference, ComparisonReport};
use lpd_temporal::ingest::{pair_datasets, read_long_table, read_strata, write_long_table, SpecFile};
use lpd_temporal::kernel::Bandwidth;
use lpd_temporal::marginal::QuantileLevels;
use lpd_temporal::model::VariableSpec;
use lpd_temporal::report::{
    emit_reference, emit_series, load_report, render_charts, summarize, summarize_reference, ChartOptions, Scalar,
};
use lpd_temporal::simgen::{simulate_study, StudyModel};
use lpd_temporal::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lpdt",
    version,
    about = "Temporal fidelity metrics for synthetic longitudinal data"
)]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare a synthetic dataset against the original.
    Evaluate(EvaluateArgs),
    /// Generate a dataset from a model document.
    Simulate(SimulateArgs),
    /// Original-vs-original baselines on disjoint halves of the roster.
    Reference(ReferenceArgs),
    /// Re-render charts from a report directory.
    Render(RenderArgs),
}

/// Flags shared by evaluate and reference; each overrides the config file.
#[derive(Debug, Args)]
struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    original: Option<PathBuf>,
    /// TOML variable spec; kinds and classes are inferred without it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated variables to include.
    #[arg(long, value_delimiter = ',')]
    vars: Option<Vec<String>>,
    /// Comma-separated variables to skip.
    #[arg(long, value_delimiter = ',')]
    exclude: Option<Vec<String>>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Comma-separated kernel bandwidths.
    #[arg(long, value_delimiter = ',')]
    bandwidth: Option<Vec<f64>>,
    /// Lag bandwidth for the variogram.
    #[arg(long)]
    variogram_bandwidth: Option<f64>,
    /// Comma-separated quantile levels.
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    /// `subject_id,stratum` table for trajectory panels.
    #[arg(long)]
    strata: Option<PathBuf>,
    #[arg(long)]
    per_stratum: Option<usize>,
    /// Ignore transition pairs further apart than this.
    #[arg(long)]
    max_gap: Option<f64>,
    /// Separate value axes for the original and synthetic panels.
    #[arg(long)]
    free_y: bool,
    /// Draw both sides in one panel.
    #[arg(long)]
    overlay: bool,
    /// Write series only.
    #[arg(long)]
    no_charts: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML model document.
    #[arg(long)]
    model: PathBuf,
    /// Output long-format table.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the document's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a matching spec file.
    #[arg(long)]
    spec_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReferenceArgs {
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Directory holding report.json; charts are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    free_y: bool,
    #[arg(long)]
    overlay: bool,
}

enum Failure {
    Usage(String),
    Run(Error),
    /// Results were written but some metrics failed.
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io { .. } | Error::UnknownVariable(_) => 1,
        Error::Parse { .. }
        | Error::NonFinite(_)
        | Error::Validation(_)
        | Error::KindMismatch { .. }
        | Error::NoMeasurements(_)
        | Error::VariogramUndefined(_)
        | Error::DimensionMismatch { .. }
        | Error::Csv(_)
        | Error::Json(_) => 2,
        Error::Assignment(_) => 3,
    }
}

fn base_config(flags: &RunFlags) -> Result<RunConfig> {
    let mut c = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = flags.$field.clone() {
                c.$field = v.into();
            }
        };
    }
    set!(original);
    set!(spec);
    set!(out);
    set!(grid_step);
    set!(subsample);
    set!(iterations);
    set!(epsilon);
    set!(seed);
    set!(vars);
    set!(exclude);
    set!(workers);
    Ok(c)
}

fn evaluate_config(args: &EvaluateArgs) -> Result<RunConfig> {
    let mut c = base_config(&args.run)?;
    if let Some(p) = &args.synthetic {
        c.synthetic = Some(p.clone());
    }
    if let Some(hs) = &args.bandwidth {
        c.bandwidths = hs.iter().map(|h| Bandwidth::new(*h)).collect::<Result<_>>()?;
    }
    if let Some(h) = args.variogram_bandwidth {
        c.variogram_bandwidth = Some(Bandwidth::new(h)?);
    }
    if let Some(q) = &args.quantiles {
        c.quantiles = QuantileLevels::new(q.clone())?;
    }
    if let Some(p) = &args.strata {
        c.strata = Some(p.clone());
    }
    if let Some(n) = args.per_stratum {
        c.per_stratum = n;
    }
    if let Some(g) = args.max_gap {
        c.max_gap = Some(g);
    }
    c.free_y |= args.free_y;
    c.overlay |= args.overlay;
    c.validate()?;
    Ok(c)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> std::result::Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::Usage(format!("missing --{flag} (or `{flag}` in the config file)")))
}

fn load_specs(config: &RunConfig) -> Result<Option<Vec<VariableSpec>>> {
    config.spec.as_ref().map(|p| SpecFile::load(p)?.specs()).transpose()
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn show(name: &str, s: &Scalar) -> String {
    match s.sd {
        Some(sd) => format!("{name} {} [sd {sd:.3}]", s.display),
        None => format!("{name} {} [sd n/a]", s.display),
    }
}

fn print_failures(failures: &[lpd_temporal::evaluate::Failure]) {
    for f in failures {
        let h = f.bandwidth.map(|h| format!(" (h={h})")).unwrap_or_default();
        eprintln!("error: `{}` {}{h}: {}", f.variable, f.metric, f.message);
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> std::result::Result<(), Failure> {
    let config = evaluate_config(&args)?;
    let original = required(&config.original, "original")?;
    let synthetic = required(&config.synthetic, "synthetic")?;
    let out = required(&config.out, "out")?;
    let specs = load_specs(&config)?;
    let options = config.table_options();
    let orig = read_long_table(original, &options, specs.as_deref())?;
    let synth = read_long_table(synthetic, &options, specs.as_deref())?;
    let pair = pair_datasets(orig, synth)?;
    let strata = config
        .strata
        .as_ref()
        .map(|p| read_strata(p, config.delimiter as u8))
        .transpose()?;
    let report: ComparisonReport = with_workers(config.workers, || evaluate(&pair, &config, strata.as_ref()))??;
    emit_series(&report, out)?;
    if !args.no_charts {
        let options = ChartOptions {
            free_y: config.free_y,
            overlay: config.overlay,
        };
        with_workers(config.workers, || render_charts(&report, out, options))??;
    }
    for s in summarize(&report) {
        println!(
            "{}: {}; {}; {}",
            s.variable,
            show("similarity", &s.similarity),
            show("frobenius", &s.frobenius),
            show("dropout divergence", &s.dropout_divergence)
        );
    }
    println!("report written to {}", out.display());
    print_failures(&report.failures);
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(report.failures.len()))
    }
}

fn cmd_simulate(args: SimulateArgs) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| Error::Io {
        path: args.model.display().to_string(),
        source: e,
    })?;
    let study = StudyModel::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", args.model.display())))?;
    let data = simulate_study(&study, args.seed)?;
    let mut buf = Vec::new();
    write_long_table(&data, &mut buf, b',')?;
    lpd_temporal::report::write_atomic(&args.out, &buf)?;
    if let Some(path) = &args.spec_out {
        let spec = SpecFile::from_specs(data.specs());
        lpd_temporal::report::write_atomic(path, spec.to_toml().as_bytes())?;
    }
    println!(
        "{} observations for {} subjects written to {}",
        data.observation_count(),
        data.n_subjects(),
        args.out.display()
    );
    Ok(())
}

fn cmd_reference(args: ReferenceArgs) -> std::result::Result<(), Failure> {
    let config = base_config(&args.run)?;
    config.validate()?;
    let original = required(&config.original, "original")?;
    let specs = load_specs(&config)?;
    let data = read_long_table(original, &config.table_options(), specs.as_deref())?;
    let report = with_workers(config.workers, || reference(&data, &config))??;
    if let Some(out) = &config.out {
        emit_reference(&report, out)?;
    }
    for s in summarize_reference(&report) {
        println!(
            "{}: reference {}; {}; {} (n={} per half)",
            s.variable,
            show("similarity", &s.similarity),
            show("frobenius", &s.frobenius),
            show("dropout divergence", &s.dropout_divergence),
            s.subsample_size
        );
    }
    print_failures(&report.failures);
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(report.failures.len()))
    }
}

fn cmd_render(args: RenderArgs) -> std::result::Result<(), Failure> {
    let report = load_report(&args.out.join("report.json"))?;
    let c = &report.metadata.config;
    let options = ChartOptions {
        free_y: args.free_y || c.free_y,
        overlay: args.overlay || c.overlay,
    };
    let written = render_charts(&report, &args.out, options)?;
    println!("{} charts written to {}", written.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reference(a) => cmd_reference(a),
        Command::Render(a) => cmd_render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} metric(s) failed; partial results and failures.json were written");
            ExitCode::from(2)
        }
    }
}
