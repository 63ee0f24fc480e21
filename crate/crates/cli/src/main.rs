use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use noether_paths::acceptance;
use noether_paths_cli::scenario::{EXPERIMENTS, FUNCTIONS, PROFILES, SHAPES};
use noether_paths_cli::{parse_scenario, run_scenario, write_record, CliError};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "noether-paths", version, about = "Run path-integral scenarios and the acceptance suite")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file, or every `*.json` in a directory with --batch.
    Run {
        config: Option<PathBuf>,
        /// Output directory for CSV tables and metadata.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Directory of scenario files, run concurrently.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// List built-in profiles, functions, shapes and experiments.
    ListProfiles,
    /// Run the acceptance criteria and print one line per criterion.
    Selftest {
        /// Run only these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn run_file(path: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let scenario = parse_scenario(&text)?;
    let start = Instant::now();
    log::info!("running {} ({})", scenario.name, scenario.experiment.name());
    let record = run_scenario(&scenario)?;
    write_record(&record, out, start.elapsed())
}

fn batch_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(format!("listing {}", dir.display()), e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(format!("listing {}", dir.display()), e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn run(config: Option<PathBuf>, out: PathBuf, batch: Option<PathBuf>) -> ExitCode {
    let mut files = match batch.as_deref().map(batch_files).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return report(&e),
    };
    files.extend(config);
    if files.is_empty() {
        eprintln!("error: give a scenario file or --batch <dir>");
        return ExitCode::from(2);
    }
    let outcomes: Vec<_> = files.par_iter().map(|f| (f, run_file(f, &out))).collect();
    let mut code = ExitCode::SUCCESS;
    for (file, outcome) in outcomes {
        match outcome {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
            }
            Err(e) => {
                eprintln!("{}:", file.display());
                code = report(&e);
            }
        }
    }
    code
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn list() {
    let sections: [(&str, &[(&str, &str)]); 4] = [
        ("profiles", &PROFILES),
        ("functions (for general rho / a)", &FUNCTIONS),
        ("shapes", &SHAPES),
        ("experiments", &EXPERIMENTS),
    ];
    for (title, items) in sections {
        println!("{title}:");
        for (name, about) in items {
            println!("  {name:<18} {about}");
        }
    }
}

fn selftest(only: &[u8]) -> ExitCode {
    let mut all_passed = true;
    for &(id, _) in acceptance::CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.0)) {
        if let Some(r) = acceptance::run_criterion(id) {
            all_passed &= r.passed;
            println!("{r}");
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Args::parse().command {
        Command::Run { config, out, batch } => run(config, out, batch),
        Command::ListProfiles => {
            list();
            ExitCode::SUCCESS
        }
        Command::Selftest { only } => selftest(&only),
    }
}
