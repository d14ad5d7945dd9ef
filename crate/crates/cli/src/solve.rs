use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Result;
use hypersat_core::rng::derive_seed;
use hypersat_core::solver::solve;
use hypersat_core::{SolveConfig, SolveResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::SolveArgs;
use crate::inputs;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRecord {
    pub file: String,
    #[serde(flatten)]
    pub result: SolveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub instances: usize,
    pub failed: usize,
    pub mean_unsat_weight: f64,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a SolveSummary,
}

pub fn summarize(records: &[SolveRecord], failed: usize) -> SolveSummary {
    let mean = if records.is_empty() {
        0.0
    } else {
        records
            .iter()
            .map(|r| r.result.unsat_weight as f64)
            .sum::<f64>()
            / records.len() as f64
    };
    SolveSummary {
        instances: records.len(),
        failed,
        mean_unsat_weight: mean,
    }
}

/// Solves every input with seed `seed ^ fnv1a(name)`. Per-file failures
/// go to stderr and do not stop the run.
pub fn solve_files(
    files: &[PathBuf],
    config: &SolveConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<(Vec<SolveRecord>, usize)> {
    let pool = inputs::thread_pool(workers)?;
    let outcomes: Vec<Result<SolveRecord>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let inst = inputs::load(path)?;
                let config = SolveConfig {
                    seed: derive_seed(seed, &inst.name),
                    ..*config
                };
                Ok(SolveRecord {
                    file: path.display().to_string(),
                    result: solve(&inst, &config)?,
                })
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failed = 0;
    for (path, outcome) in files.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e:#}", path.display());
            }
        }
    }
    Ok((records, failed))
}

/// Writes one JSON line per solved instance, then a summary line.
pub fn write_records(
    records: &[SolveRecord],
    summary: &SolveSummary,
    out: &mut dyn Write,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    serde_json::to_writer(&mut *out, &SummaryLine { summary })?;
    writeln!(out)?;
    Ok(())
}

pub fn run(args: &SolveArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let files = inputs::expand(&args.inputs)?;
    let config = args.config.apply(SolveConfig::default());
    config.validate()?;
    let (records, failed) = solve_files(&files, &config, seed, args.workers)?;
    let summary = summarize(&records, failed);
    match &args.output {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            write_records(&records, &summary, &mut file)?;
            file.flush()?;
            writeln!(
                stdout,
                "{} records, mean unsat_weight {:.3}",
                summary.instances, summary.mean_unsat_weight
            )?;
        }
        None => write_records(&records, &summary, stdout)?,
    }
    Ok(i32::from(failed > 0))
}
