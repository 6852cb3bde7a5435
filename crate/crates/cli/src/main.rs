use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracflow::Error;
use fracflow_cli::config::{default_output, RunConfig};
use fracflow_cli::registry::{self, EXPERIMENTS};
use fracflow_cli::runner::{self, Check};

#[derive(Parser)]
#[command(name = "fracflow", version, about = "Fractional convection-diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file, or the canned defaults of a named experiment.
    Run {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered experiments.
    List,
    /// Re-run a manifest and compare table digests.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(arg: &str) -> fracflow::Result<RunConfig> {
    let path = PathBuf::from(arg);
    if path.exists() {
        RunConfig::load(&path)
    } else if registry::find(arg).is_ok() {
        RunConfig::canned(arg)
    } else {
        Err(Error::Config(format!("{arg} is neither a config file nor an experiment name")))
    }
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "{} {:<32} value {:.6e}  threshold {:.6e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold,
            c.detail
        );
    }
}

fn report(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if matches!(err, Error::Config(_)) { EXIT_CONFIG } else { EXIT_FAIL })
}

fn workers(w: Option<usize>) -> fracflow::Result<usize> {
    match w {
        Some(0) => Err(Error::Config("--workers must be >= 1".into())),
        Some(n) => Ok(n),
        None => Ok(runner::default_workers()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in EXPERIMENTS {
                let crit = e.criterion.map_or("-".to_string(), |c| c.to_string());
                println!("{:<26} [{crit:>2}] {}", e.name, e.description);
                println!("{:<31} checks: {}", "", e.statement);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            workers: w,
            out,
        } => {
            let result = (|| {
                let mut cfg = load(&config)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                let out = out.unwrap_or_else(|| default_output(&cfg));
                cfg.output = Some(out.clone());
                let manifest = runner::run_experiment(&cfg, workers(w)?, &out)?;
                Ok((manifest, out))
            })();
            match result {
                Ok((m, out)) => {
                    print_checks(&m.checks);
                    for f in &m.failed_members {
                        println!("member {} (seed {}) failed: {}", f.member, f.seed, f.message);
                    }
                    println!(
                        "{} in {:.2} s; artifacts in {}",
                        if m.passed { "passed" } else { "FAILED" },
                        m.wall_clock_seconds,
                        out.display()
                    );
                    if m.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => report(e),
            }
        }
        Command::Replay {
            manifest,
            workers: w,
            out,
        } => match workers(w).and_then(|w| runner::replay(&manifest, w, out.as_deref())) {
            Ok(r) => {
                print_checks(&r.manifest.checks);
                if r.identical {
                    println!("replay identical: {} tables match", r.manifest.tables.len());
                    ExitCode::SUCCESS
                } else {
                    println!("replay differs in: {}", r.mismatches.join(", "));
                    ExitCode::from(EXIT_FAIL)
                }
            }
            Err(e) => report(e),
        },
    }
}
