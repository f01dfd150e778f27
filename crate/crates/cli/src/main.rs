//! `cascade`: config-driven front end for band queries, analytic solves,
//! exact evolutions, sweeps, cascades and the validation suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photon_cascade::experiments::validation::run_suite;
use photon_cascade::experiments::{run_as, RunOptions, ScenarioConfig, ScenarioKind};
use photon_cascade::Error;

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Photon scattering and cascaded bound-state conversion in a Bose-Hubbard waveguide")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "CASCADE_THREADS", default_value_t = 0)]
    threads: usize,

    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-photon, doublon and triplon dispersion tables.
    Bands(RunArgs),
    /// Analytic scattering amplitudes for the configured emitter.
    Solve(RunArgs),
    /// Exact evolution with space-time photon-number map.
    Evolve(RunArgs),
    /// Coupling sweep, optimum search or packet-shape comparison (as
    /// configured; a single-emitter sweep otherwise).
    Sweep(RunArgs),
    /// Two-emitter photon to doublon to triplon cascade.
    Cascade(RunArgs),
    /// Oracle and invariant suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file (TOML) or a previous run's manifest.json.
    #[arg(short, long)]
    config: PathBuf,

    /// Output directory (default: output/<scenario>).
    #[arg(short, long)]
    out: Option<PathBuf>,

    /// Override a config value, e.g. `--set rga.phi=0.05pi`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Also write validation.json here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

/// Exit status for failures that come from the input rather than the
/// physics.
const EXIT_CONFIG: u8 = 2;
const EXIT_PHYSICS: u8 = 3;
/// At least one validation check failed.
const EXIT_CHECKS: u8 = 1;

fn kind_for(command: &Command, configured: ScenarioKind) -> ScenarioKind {
    match command {
        Command::Bands(_) => ScenarioKind::Bands,
        Command::Solve(_) => ScenarioKind::Solve,
        Command::Evolve(_) => ScenarioKind::EvolutionMap,
        Command::Cascade(_) => ScenarioKind::Cascade,
        Command::Sweep(_) => match configured {
            ScenarioKind::RgaOptimum | ScenarioKind::LorentzianComparison => configured,
            _ => ScenarioKind::SingleEmitterSweep,
        },
        Command::Validate(_) => unreachable!("validate takes no scenario"),
    }
}

fn run(cli: &Cli, args: &RunArgs) -> Result<(), Error> {
    let loaded = ScenarioConfig::load(&args.config, &args.overrides)?;
    let cfg = loaded.config;
    let kind = kind_for(&cli.command, cfg.kind);
    let out: PathBuf = args.out.clone().unwrap_or_else(|| {
        Path::new(cfg.output_dir.as_deref().unwrap_or("output")).join(&cfg.scenario)
    });
    let opts = RunOptions {
        out_dir: Some(&out),
        overrides: &loaded.overrides,
        threads: rayon::current_num_threads(),
    };
    log::info!("running {:?} for scenario {:?} into {}", kind, cfg.scenario, out.display());
    let result = run_as(&cfg, kind, &opts)?;
    println!("{}", serde_json::to_string_pretty(&result.summary()?)?);
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool, Error> {
    let checks = run_suite()?;
    for c in &checks {
        println!("{}", c.line());
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&checks)?;
        std::fs::write(dir.join("validation.json"), text + "\n")?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn report(err: &Error) -> ExitCode {
    match err {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::Io(_) | Error::Json(_) => {
            eprintln!("{}: {err}", err.name());
            ExitCode::from(EXIT_CONFIG)
        }
        _ => {
            eprintln!("{}: {err}", err.name());
            ExitCode::from(EXIT_PHYSICS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        log::warn!("thread pool already initialized: {e}");
    }
    let outcome = match &cli.command {
        Command::Validate(args) => match validate(args) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(EXIT_CHECKS),
            Err(e) => Err(e),
        },
        Command::Bands(a) | Command::Solve(a) | Command::Evolve(a) | Command::Sweep(a) | Command::Cascade(a) => {
            run(&cli, a)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
