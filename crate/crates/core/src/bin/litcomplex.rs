use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use litcomplex::cli::{self, Cli, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = RunConfig::resolve(&args.global).and_then(|cfg| cli::execute(args.command, &cfg));
    match result {
        Ok(m) => {
            log::info!("{}: wrote {} files under {}", m.command, m.outputs.len(), m.config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
