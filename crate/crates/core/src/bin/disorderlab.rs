use clap::Parser;

use disorderlab::cli::{run, Cli};

fn main() {
    disorderlab::par::init_threads_from_env();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("disorderlab: {e}");
        std::process::exit(e.exit_code());
    }
}
