use clap::Parser;

fn main() {
    let cli = flowcast::cli::Cli::parse();
    if let Err(e) = flowcast::cli::run(cli) {
        eprintln!("{}", flowcast::cli::error_line(&e));
        std::process::exit(1);
    }
}
