//! Command-line driver and benchmark harness for `hypersat-core`.
//!
//! Subcommands: `gen`, `solve`, `bench`, `oracle`, `gradcheck`. Each has a
//! `run` function taking parsed arguments, the global seed and an output
//! sink, and returning the process exit code.

use std::io::Write;

pub mod args;
pub mod bench;
pub mod gen;
pub mod gradcheck;
pub mod inputs;
pub mod oracle;
pub mod solve;

pub use args::{Cli, Command};

pub fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Gen(args) => {
            let paths = gen::run(args, cli.seed)?;
            for p in paths {
                writeln!(out, "{}", p.display())?;
            }
            Ok(0)
        }
        Command::Solve(args) => solve::run(args, cli.seed, out),
        Command::Bench(args) => bench::run(args, cli.seed, out),
        Command::Oracle(args) => oracle::run(args, cli.seed, out),
        Command::Gradcheck(args) => gradcheck::run(args, cli.seed, out),
    }
}
