use clap::Parser;
use std::process::exit;

fn main() {
    let cli = sorted_huber::cli::Cli::parse();
    match sorted_huber::cli::run(cli) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(2);
        }
    }
}
