use std::process::ExitCode;

use clap::Parser;
use fairchannel::cli::{error_json, run, Cli};
use fairchannel::Error;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            println!("{}", error_json(&Error::Usage(e.kind().to_string())));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.stdout);
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", error_json(&e));
            ExitCode::from(e.exit_code())
        }
    }
}
