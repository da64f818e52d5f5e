mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use config::{ConfigFile, SCHEMA};
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::usage(e.render().to_string().trim_end())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {w} workers: {e}")))?;
    }
    let mut file = match (&cli.config, &cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("--config replays a resolved run; do not combine it with a subcommand"))
        }
        (None, None) => return Err(CliError::usage("a subcommand or --config is required")),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            let file: ConfigFile = serde_json::from_str(&text)?;
            if file.schema != SCHEMA {
                return Err(CliError::usage(format!(
                    "config schema {} is not supported (expected {SCHEMA})",
                    file.schema
                )));
            }
            file
        }
        (None, Some(cmd)) => ConfigFile {
            schema: SCHEMA,
            run: commands::resolve(cmd)?,
        },
    };
    commands::annotate(&mut file.run);
    eprintln!("{}", serde_json::to_string(&file)?);
    if let Some(p) = &cli.save_config {
        std::fs::write(p, serde_json::to_string_pretty(&file)? + "\n")?;
    }
    commands::execute(&file.run)
}
