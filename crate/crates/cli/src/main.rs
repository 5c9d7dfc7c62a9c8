use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rnls_cli::{execute, exit, Command, RunConfig, RunError};

/// Radial NLS spectral laboratory.
#[derive(Parser)]
#[command(name = "rnls", version)]
struct Args {
    /// Subcommand, which must match the `command` key of the config.
    #[arg(value_parser = parse_command)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown command `{s}`"))
}

fn fail(err: &RunError, command: Option<Command>, cfg: Option<&RunConfig>) -> ExitCode {
    let hash = cfg.map(RunConfig::hash);
    let report = err.report(command, hash.as_deref());
    eprintln!("{report}");
    if let Some(cfg) = cfg {
        if std::fs::create_dir_all(&cfg.output_dir).is_ok() {
            let path = cfg.output_dir.join("error.json");
            let _ = std::fs::write(&path, format!("{report:#}\n"));
        }
    }
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e.into(), Some(args.command), None),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    if cfg.command != args.command {
        let e = rnls_cli::ConfigError::Invalid(format!(
            "config is for `{}` but `{}` was requested",
            serde_json::to_value(cfg.command).unwrap_or_default().as_str().unwrap_or("?"),
            serde_json::to_value(args.command).unwrap_or_default().as_str().unwrap_or("?"),
        ));
        return fail(&e.into(), Some(args.command), Some(&cfg));
    }
    match execute(&cfg) {
        Ok(s) => {
            println!("{} [{}]", s.headline, s.config_hash);
            for f in &s.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => fail(&e, Some(args.command), Some(&cfg)),
    }
}
