use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use gofd::cli::{run, ExperimentConfig, Flags};

fn main() -> ExitCode {
    match Flags::parse().resolve().and_then(|c| execute(&c)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: not every run converged");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(config: &ExperimentConfig) -> gofd::Result<bool> {
    let mut out: Box<dyn Write> = match &config.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let ok = run(config, &mut out)?;
    out.flush()?;
    Ok(ok)
}
