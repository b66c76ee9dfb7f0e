use clap::Parser;

fn main() {
    let cli = dysonlab_cli::Cli::parse();
    std::process::exit(dysonlab_cli::run(&cli));
}
