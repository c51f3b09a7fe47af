use clap::Parser;

use excursion::cli::{exit_code, run_with_args, Args};

fn main() {
    let args = Args::parse();
    std::process::exit(exit_code(&run_with_args(&args)));
}
