use clap::Parser;

fn main() {
    std::process::exit(joinpoint_cli::execute(joinpoint_cli::Cli::parse()));
}
