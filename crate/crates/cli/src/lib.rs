//! Command-line front end: experiment batches, bound calculators, plots and
//! distributed sessions.

pub mod args;
pub mod commands;
pub mod plot;

use std::fs;
use std::io::Write;

use anyhow::{Context, Result};

use crate::args::{Cli, Command};

/// Runs one parsed invocation. `Ok(false)` means the command ran but found a
/// violation and the process should exit nonzero.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<bool> {
    if let Some(workers) = cli.workers {
        // A second initialisation (e.g. in tests) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match &cli.command {
        Command::VerifyDesigns(a) => commands::verify_designs(a, out),
        Command::Simulate(a) => commands::simulate(a, out).map(|_| true),
        Command::Fit(a) => commands::fit(a, out).map(|_| true),
        Command::Bounds(a) => commands::bounds(a, out).map(|_| true),
        Command::Plot(a) => {
            let svg = plot::plot(&a.input, &a.x, &a.y, &a.group, a.title.as_deref())?;
            fs::write(&a.output, svg).with_context(|| format!("writing {}", a.output.display()))?;
            writeln!(out, "wrote {}", a.output.display())?;
            Ok(true)
        }
        Command::Session(a) => commands::session(a, out),
    }
}
