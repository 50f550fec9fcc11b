use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsvt::alpha::AlphaMethod;
use qsvt::harness::commands::{format_alpha_table, format_result};
use qsvt::harness::config::{parse_list, ConfigFile};
use qsvt::harness::{
    cmd_alpha, cmd_example, cmd_pipeline, emit_plot, run_sweep, write_csv, ExampleOptions,
    SweepConfig, SweepSummary, TauPolicy,
};
use qsvt::pipeline::{AlphaChoice, PipelineConfig};
use qsvt::spectral::{decompose, InputMatrix, DEFAULT_RANK_TOL};
use qsvt::{QsvtError, Result};

#[derive(Parser)]
#[command(
    name = "qsvt",
    version,
    about = "Simulate quantum singular value thresholding and choose its rotation scale"
)]
struct Cli {
    /// key = value file with defaults for any flag below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the 2x3 worked example through the full circuit and check it
    Example(ExampleArgs),
    /// Compare rotation-scale methods over random low-rank inputs
    Sweep(SweepArgs),
    /// Tabulate every rotation-scale method for one spectrum
    Alpha(AlphaArgs),
    /// Run the circuit on a matrix file
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_method: Option<AlphaMethod>,
    #[arg(long)]
    t_bits: Option<usize>,
    #[arg(long)]
    m_bits: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// number of instances
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fixed threshold for every instance
    #[arg(long, conflicts_with = "tau_fraction")]
    tau: Option<f64>,
    /// threshold as a fraction of each instance's sigma_1
    #[arg(long)]
    tau_fraction: Option<f64>,
    /// comma-separated methods
    #[arg(long, value_delimiter = ',')]
    alpha_method: Option<Vec<AlphaMethod>>,
    /// run the full circuit per instance
    #[arg(long)]
    simulate: bool,
    #[arg(long)]
    t_bits: Option<usize>,
    #[arg(long)]
    m_bits: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG path
    #[arg(long)]
    plot: Option<PathBuf>,
    /// fill the wall_time column
    #[arg(long)]
    timing: bool,
    /// comma-separated singular values injected into every instance
    #[arg(long)]
    sigma: Option<String>,
}

#[derive(Args)]
struct AlphaArgs {
    #[arg(long)]
    tau: Option<f64>,
    /// comma-separated singular values
    #[arg(long, conflicts_with = "matrix")]
    sigma: Option<String>,
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_method: Option<AlphaMethod>,
    #[arg(long)]
    t_bits: Option<usize>,
    #[arg(long)]
    m_bits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// also sample the ancilla this many times
    #[arg(long)]
    shots: Option<u64>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| QsvtError::InvalidConfig(format!("--{flag} is required")))
}

fn flag(cli: bool, file: &ConfigFile, key: &str) -> Result<bool> {
    Ok(cli || file.get::<bool>(key)?.unwrap_or(false))
}

fn example(args: ExampleArgs, file: &ConfigFile) -> Result<bool> {
    let d = ExampleOptions::default();
    let opts = ExampleOptions {
        tau: file.pick(args.tau, "tau")?.unwrap_or(d.tau),
        alpha: file.pick(args.alpha, "alpha")?,
        alpha_method: file
            .pick(args.alpha_method, "alpha-method")?
            .unwrap_or(d.alpha_method),
        t_bits: file.pick(args.t_bits, "t-bits")?.unwrap_or(d.t_bits),
        m_bits: file.pick(args.m_bits, "m-bits")?.unwrap_or(d.m_bits),
    };
    let report = cmd_example(&opts)?;
    println!("{report}");
    Ok(report.passed())
}

fn sweep(args: SweepArgs, file: &ConfigFile) -> Result<bool> {
    let d = SweepConfig::default();
    let tau = match (
        file.pick(args.tau, "tau")?,
        file.pick(args.tau_fraction, "tau-fraction")?,
    ) {
        (Some(_), Some(_)) => {
            return Err(QsvtError::InvalidConfig(
                "tau and tau-fraction are exclusive".into(),
            ))
        }
        (Some(t), None) => TauPolicy::Fixed(t),
        (None, Some(f)) => TauPolicy::Fraction(f),
        (None, None) => d.tau,
    };
    let methods = match args.alpha_method {
        Some(m) => m,
        None => file
            .raw("alpha-method")
            .map(parse_list)
            .transpose()?
            .unwrap_or(d.methods),
    };
    let sigma = match args.sigma.as_deref().or(file.raw("sigma")) {
        Some(s) => Some(parse_list::<f64>(s)?),
        None => None,
    };
    let cfg = SweepConfig {
        n_instances: file.pick(args.n, "n")?.unwrap_or(d.n_instances),
        seed: file.pick(args.seed, "seed")?.unwrap_or(d.seed),
        tau,
        methods,
        simulate: flag(args.simulate, file, "simulate")?,
        t_bits: file.pick(args.t_bits, "t-bits")?,
        m_bits: file.pick(args.m_bits, "m-bits")?.unwrap_or(d.m_bits),
        jobs: file.pick(args.jobs, "jobs")?,
        timing: flag(args.timing, file, "timing")?,
        sigma,
        ..d
    };
    let out = file.pick(args.out, "out")?;
    let plot = file.pick(args.plot, "plot")?;
    let records = run_sweep(&cfg)?;
    let summary = SweepSummary::from_records(&records);
    match &out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_csv(&records, &mut w)?;
            w.flush()?;
            println!("{summary}");
        }
        None => {
            write_csv(&records, io::stdout().lock())?;
            eprintln!("{summary}");
        }
    }
    if let Some(path) = plot {
        emit_plot(&records, &path)?;
    }
    Ok(true)
}

fn alpha(args: AlphaArgs, file: &ConfigFile) -> Result<bool> {
    let tau = required(file.pick(args.tau, "tau")?, "tau")?;
    let sigma = match (
        args.sigma.as_deref().or(file.raw("sigma")),
        file.pick(args.matrix, "matrix")?,
    ) {
        (Some(s), _) => parse_list::<f64>(s)?,
        (None, Some(path)) => decompose(&InputMatrix::from_file(&path)?, DEFAULT_RANK_TOL)?
            .sigma()
            .to_vec(),
        (None, None) => return Err(QsvtError::InvalidConfig("give --sigma or --matrix".into())),
    };
    print!("{}", format_alpha_table(&cmd_alpha(&sigma, tau)?));
    Ok(true)
}

fn pipeline(args: PipelineArgs, file: &ConfigFile) -> Result<bool> {
    let path = required(file.pick(args.matrix, "matrix")?, "matrix")?;
    let matrix = InputMatrix::from_file(&path)?;
    let mut cfg = PipelineConfig::new(required(file.pick(args.tau, "tau")?, "tau")?);
    cfg.alpha = match file.pick(args.alpha, "alpha")? {
        Some(a) => AlphaChoice::Explicit(a),
        None => AlphaChoice::Method(
            file.pick(args.alpha_method, "alpha-method")?
                .unwrap_or(AlphaMethod::Intuitive),
        ),
    };
    cfg.t_bits = file.pick(args.t_bits, "t-bits")?;
    if let Some(m) = file.pick(args.m_bits, "m-bits")? {
        cfg.m_bits = m;
    }
    cfg.seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    cfg.shots = file.pick(args.shots, "shots")?;
    let (result, report) = cmd_pipeline(&matrix, &cfg)?;
    print!("{}", format_result(&result, &report));
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Example(a) => example(a, &file),
        Command::Sweep(a) => sweep(a, &file),
        Command::Alpha(a) => alpha(a, &file),
        Command::Pipeline(a) => pipeline(a, &file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
