use clap::Parser;

fn main() {
    let cli = aptmag::cli::Cli::parse();
    if let Err(e) = aptmag::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
