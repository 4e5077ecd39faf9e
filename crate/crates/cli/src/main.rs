use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;
mod validate;

use commands::{Failure, Run};
use config::{ExperimentConfig, Severity};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "lmalab", version, about = "Linearized Monge-Ampere numerical laboratory")]
struct Cli {
    /// Worker threads for concurrent solves (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (flat `key = value` text)
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Monge-Ampere problem and dump the potential
    SolveMa(Common),
    /// Assemble the divergence-form operator and export it
    Assemble(Common),
    /// Green's function sweep over poles and exponent ladders
    Green(Common),
    /// Divergence-form Dirichlet problem and the maximum-principle bound
    SolveDiv(Common),
    /// Hölder exponent fits of the divergence-form solution
    HolderScan(Common),
    /// Coupled fourth-order iteration
    Abreu(Common),
    /// Run the acceptance suite
    FullReport {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers (default: all)
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
    /// Check a config without running anything
    Validate {
        /// Experiment config
        config: PathBuf,
    },
}

fn load(path: Option<&PathBuf>) -> Result<(ExperimentConfig, String), Failure> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    match config::parse(&text) {
        Ok(c) => Ok((c, text)),
        Err(diags) => {
            for d in &diags {
                eprintln!("{d}");
            }
            Err(Failure::Config(format!("{} config error(s)", diags.len())))
        }
    }
}

/// Prints the diagnostics and fails on any error.
fn check(cfg: &ExperimentConfig, text: &str) -> Result<(), Failure> {
    let diags = validate::validate(cfg, text);
    for d in &diags {
        eprintln!("{d}");
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        return Err(Failure::Config(format!("{errors} config error(s)")));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let jobs = cli.jobs.unwrap_or_else(rayon::current_num_threads);
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Config(format!("--jobs {n}: {e}")))?;
    }
    let (name, common, criteria) = match cli.command {
        Command::Validate { config } => {
            let (cfg, text) = load(Some(&config))?;
            check(&cfg, &text)?;
            println!("{}: ok", config.display());
            return Ok(());
        }
        Command::SolveMa(c) => ("solve-ma", c, None),
        Command::Assemble(c) => ("assemble", c, None),
        Command::Green(c) => ("green", c, None),
        Command::SolveDiv(c) => ("solve-div", c, None),
        Command::HolderScan(c) => ("holder-scan", c, None),
        Command::Abreu(c) => ("abreu", c, None),
        Command::FullReport { common, criteria } => ("full-report", common, Some(criteria)),
    };
    let (cfg, text) = load(common.config.as_ref())?;
    check(&cfg, &text)?;
    let dir = common.out.unwrap_or_else(|| cfg.output.clone());
    let out = OutputDir::create(&dir, &cfg).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?;
    let mut run = Run::new(&cfg, out)?;
    let result = match name {
        "solve-ma" => commands::solve_ma_cmd(&mut run),
        "assemble" => commands::assemble_cmd(&mut run),
        "green" => commands::green_cmd(&mut run),
        "solve-div" => commands::solve_div_cmd(&mut run),
        "holder-scan" => commands::holder_scan_cmd(&mut run),
        "abreu" => commands::abreu_cmd(&mut run),
        _ => {
            let ids = criteria.filter(|c| !c.is_empty()).unwrap_or_else(|| (1..=11).collect());
            if let Some(bad) = ids.iter().find(|&&i| !(1..=11).contains(&i)) {
                return Err(Failure::Config(format!("no criterion {bad}")));
            }
            commands::full_report_cmd(&mut run, &ids)
        }
    };
    if let Err(e) = &result {
        run.out.note(format!("error: {}", e.message()));
    }
    run.out
        .write_manifest(name, &cfg, jobs)
        .map_err(|e| Failure::Config(format!("cannot write manifest: {e}")))?;
    result?;
    if run.failed_rows > 0 {
        return Err(Failure::Solver(format!("{} row(s) failed, see manifest.txt", run.failed_rows)));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lmalab: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
