use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use frac_ocp::cli::{self, exit};

/// Fractional optimal control experiments.
#[derive(Parser, Debug)]
#[command(name = "frac-ocp", version)]
struct Args {
    /// validate | solve | gamma-sweep | h-sweep
    command: String,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for assembly and sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Write A, M and B as plain-text matrices next to the output.
    #[arg(long)]
    dump_matrices: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::CONFIG } else { exit::SUCCESS };
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(args) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: Args) -> frac_ocp::Result<cli::Outcome> {
    let mut overrides = vec![("command".to_string(), args.command.clone())];
    for s in &args.set {
        overrides.push(cli::parse_override(s)?);
    }
    if let Some(out) = &args.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    if let Some(w) = args.workers {
        overrides.push(("workers".into(), w.to_string()));
    }
    if args.dump_matrices {
        overrides.push(("dump_matrices".into(), "true".into()));
    }
    let cfg = match &args.config {
        Some(path) => cli::load_config(path, &overrides)?,
        None => {
            return Err(frac_ocp::Error::Config(
                "missing --config <path> (use an empty file to run on defaults)".into(),
            ))
        }
    };
    cli::run(&cfg)
}
