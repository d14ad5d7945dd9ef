use std::io::Write;

use anyhow::Result;
use hypersat_core::oracle::{exhaustive_optimum, local_search};
use hypersat_core::rng::derive_seed;
use hypersat_core::OracleResult;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{OracleArgs, OracleMethod};
use crate::inputs;

#[derive(Debug, Serialize)]
pub struct OracleRecord {
    pub file: String,
    pub instance: String,
    pub method: &'static str,
    pub seed: u64,
    #[serde(flatten)]
    pub result: OracleResult,
}

pub fn run(args: &OracleArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let files = inputs::expand(&args.inputs)?;
    let pool = inputs::thread_pool(args.workers)?;
    let outcomes: Vec<Result<OracleRecord>> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let inst = inputs::load(path)?;
                let run_seed = derive_seed(seed, &inst.name);
                let (method, result) = match args.method {
                    OracleMethod::Exhaustive => ("exhaustive", exhaustive_optimum(&inst)?),
                    OracleMethod::LocalSearch => {
                        ("local-search", local_search(&inst, args.steps, run_seed)?)
                    }
                };
                Ok(OracleRecord {
                    file: path.display().to_string(),
                    instance: inst.name,
                    method,
                    seed: run_seed,
                    result,
                })
            })
            .collect()
    });
    let mut failed = 0;
    for (path, outcome) in files.iter().zip(outcomes) {
        match outcome {
            Ok(record) => {
                serde_json::to_writer(&mut *stdout, &record)?;
                writeln!(stdout)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e:#}", path.display());
            }
        }
    }
    Ok(i32::from(failed > 0))
}
