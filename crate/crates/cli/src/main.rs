//! `gradedchain`: checks, spectra and Bethe solves for multiplicity-lifted
//! graded spin chains, driven by a TOML config. Exit codes are listed in the
//! library docs.

use std::process::ExitCode;

use clap::Parser;
use gradedchain_cli::{run, Cli};

fn main() -> ExitCode {
    // sequential dense kernels keep every run bit-identical
    faer::set_global_parallelism(faer::Par::Seq);
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
