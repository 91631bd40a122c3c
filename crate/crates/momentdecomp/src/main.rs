use clap::Parser;

fn main() {
    let config = momentdecomp::cli::CliConfig::parse();
    std::process::exit(momentdecomp::cli::run(config));
}
