use clap::Parser;

fn main() {
    let cli = ndtmcl::cli::Cli::parse();
    if let Err(err) = ndtmcl::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
