use clap::Parser;
use lattice_tt_cli::{main_with, Cli};

fn main() {
    let cli = Cli::parse();
    match main_with(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
