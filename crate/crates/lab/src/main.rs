use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chernlab::Scheme;
use chernlab_cli::commands::{self, output_root, scenario_dir};
use chernlab_cli::runner::certify;
use chernlab_cli::{parse_config, run_scenario, LabError, LabResult, ScenarioConfig};
use clap::{Parser, Subcommand};

/// Chern-Ricci flow laboratory.
#[derive(Parser)]
#[command(name = "chernlab", version)]
struct Cli {
    /// Output root (default: $CHERNLAB_OUT, else ./chernlab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenarios to run in parallel.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Override the derivative scheme (spectral or central4).
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Export the cutoff profile table.
    Profile {
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = chernlab::cutoff::MIN_NODES)]
        nodes: usize,
    },
    /// Identity residuals of a seeded random metric.
    Identities {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long = "N")]
        size: usize,
    },
    /// Evaluate initial-data certificates of a scenario.
    Certify { config: PathBuf },
}

fn load(path: &Path, scheme: Option<Scheme>) -> LabResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(LabError::io(path))?;
    let mut cfg = parse_config(&text).map_err(LabError::Config)?;
    if let Some(s) = scheme {
        cfg.scheme = s;
    }
    Ok(cfg)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
}

fn run_one(path: &Path, cli: &Cli) -> u8 {
    let outcome = load(path, cli.scheme).and_then(|cfg| {
        let dir = scenario_dir(cli.out.as_deref(), cfg.output_dir.as_deref(), &stem(path));
        let record = run_scenario(&cfg)?;
        record.write(&dir)?;
        Ok((dir, record))
    });
    match outcome {
        Ok((dir, record)) => {
            println!("{} -> {}", path.display(), dir.display());
            print!("{}", record.summary());
            record.exit_code() as u8
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            1
        }
    }
}

/// Worst code: an error beats a breakdown, which beats success.
fn combine(a: u8, b: u8) -> u8 {
    match (a, b) {
        (1, _) | (_, 1) => 1,
        (2, _) | (_, 2) => 2,
        _ => 0,
    }
}

fn run_all(configs: &[PathBuf], cli: &Cli) -> u8 {
    let next = AtomicUsize::new(0);
    let code = Mutex::new(0u8);
    std::thread::scope(|scope| {
        for _ in 0..cli.jobs.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = configs.get(i) else { break };
                let c = run_one(path, cli);
                let mut guard = code.lock().expect("exit code lock");
                *guard = combine(*guard, c);
            });
        }
    });
    code.into_inner().expect("exit code lock")
}

fn main_inner(cli: &Cli) -> LabResult<u8> {
    match &cli.command {
        Command::Run { configs } => Ok(run_all(configs, cli)),
        Command::Profile { kappa, nodes } => {
            let dir = output_root(cli.out.as_deref());
            let (profile, summary) = commands::profile(*kappa, *nodes)?;
            commands::write_profile(&dir, &profile, &summary)?;
            for (k, v) in &summary {
                println!("{k} = {v:e}");
            }
            Ok(0)
        }
        Command::Identities { seed, n, size } => {
            let dir = output_root(cli.out.as_deref());
            let rows = commands::identities(*seed, *n, *size, cli.scheme.unwrap_or(Scheme::Spectral))?;
            commands::write_identities(&dir, &rows)?;
            for (k, v) in &rows {
                println!("{k} = {v:e}");
            }
            Ok(0)
        }
        Command::Certify { config } => {
            let cfg = load(config, cli.scheme)?;
            let dir = scenario_dir(cli.out.as_deref(), cfg.output_dir.as_deref(), &stem(config));
            let record = certify(&cfg)?;
            record.write(&dir)?;
            for (name, s, beta, value, verdict) in &record.rows {
                println!("{name}: S = {s} beta = {beta} value = {value:e} {verdict}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
