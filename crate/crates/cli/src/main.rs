use clap::Parser;

fn main() {
    let cli = downtilt_cli::Cli::parse();
    std::process::exit(downtilt_cli::run(&cli));
}
