use clap::Parser;
use stepforest::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
