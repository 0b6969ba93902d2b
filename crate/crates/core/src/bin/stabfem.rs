use clap::Parser;
use stabfem::cli::{error_report, exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", error_report(&e));
        std::process::exit(exit_code(&e));
    }
}
