use clap::Parser;
use eauq_cli::commands::{dispatch, Cli};

fn main() {
    // clap exits with code 2 on usage errors by itself.
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(eauq_cli::exit_code(&err));
    }
}
