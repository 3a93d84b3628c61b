use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rds_spectra::config::RunConfig;
use rds_spectra::runner;
use rds_spectra::scenarios::list_scenarios;

/// Spectral analysis of linear random dynamical systems.
#[derive(Parser)]
#[command(name = "rds-spectra", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured analyses and write a report.
    Run(RunArgs),
    /// Scenario registry commands.
    Scenarios {
        #[command(subcommand)]
        command: ScenariosCommand,
    },
}

#[derive(Subcommand)]
enum ScenariosCommand {
    /// List the named scenarios.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    out: PathBuf,
    /// Scenario name override.
    #[arg(long)]
    scenario: Option<String>,
    /// Scenario beta override.
    #[arg(long)]
    beta: Option<f64>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Largest horizon override.
    #[arg(long)]
    t_max: Option<i64>,
    /// Base-point sample count override.
    #[arg(long)]
    n_omega: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Scenarios { command: ScenariosCommand::List } => {
            for (name, blurb) in list_scenarios() {
                println!("{name:16} {blurb}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(pass) => {
                if pass {
                    ExitCode::SUCCESS
                } else {
                    // expected-vs-observed mismatch beyond tolerance
                    ExitCode::from(2)
                }
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        },
    }
}

fn run(args: RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(name) = args.scenario {
        config.scenario.name = name;
    }
    if let Some(beta) = args.beta {
        config.scenario.params.beta = beta;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(t_max) = args.t_max {
        config.t_max = t_max;
    }
    if let Some(n) = args.n_omega {
        config.n_omega = n;
    }
    config.validate()?;

    let workers = std::env::var("RDS_SPECTRA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);

    let bundle = runner::run(&config, workers)?;
    bundle.emit(&args.out)?;
    for c in &bundle.comparisons {
        let status = if c.pass { "pass" } else { "FAIL" };
        println!("{status} {}: expected {} observed {}", c.name, c.expected, c.observed);
    }
    println!(
        "report written to {} ({} comparisons, overall {})",
        args.out.display(),
        bundle.comparisons.len(),
        if bundle.overall_pass { "pass" } else { "fail" }
    );
    Ok(bundle.overall_pass)
}
