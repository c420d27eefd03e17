use clap::Parser;

fn main() {
    let cli = cusconcept::cli::Cli::parse();
    if let Err(e) = cusconcept::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
