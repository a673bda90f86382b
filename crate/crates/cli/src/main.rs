use std::process::ExitCode;

use clap::Parser;
use fracmild_cli::{run, Cli};

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(first) = args.first_mut() {
        *first = "fracmild".into();
    }
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &args, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
