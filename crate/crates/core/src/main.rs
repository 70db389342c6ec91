use std::process::ExitCode;

use clap::Parser;

use mixmine::cli::{self, RunConfig};

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    if cfg.print_site_key {
        return match cli::site_key_hex(&cfg) {
            Ok(key) => {
                println!("{key}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("mixmine: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let report = match cli::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("mixmine: {e}");
            return ExitCode::FAILURE;
        }
    };
    print!("{}", report.to_text());
    if let Some(path) = &cfg.report {
        if let Err(e) = cli::write_report(&report, path) {
            eprintln!("mixmine: {e}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
