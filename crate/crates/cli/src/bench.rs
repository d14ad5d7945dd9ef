//! Benchmark harness.
//!
//! Every (instance, method, seed) triple yields one [`BenchRecord`]. Runs
//! are independent and may execute on parallel workers; records are sorted
//! by instance name, method and seed before output so results do not depend
//! on scheduling. CSV columns, in order:
//!
//! ```text
//! dataset,instance,method,seed,unsat_weight,sat_weight,epochs,wall_time_ms
//! ```
//!
//! `seed` is the run seed (`base seed ^ fnv1a(instance name)`). `epochs`
//! is 0 for the oracles. `wall_time_ms` is the only nondeterministic column.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::ValueEnum;
use hypersat_core::oracle::{exhaustive_optimum, local_search};
use hypersat_core::rng::derive_seed;
use hypersat_core::solver::solve;
use hypersat_core::{HypergraphMode, SolveConfig, WcnfInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::BenchArgs;
use crate::inputs;

pub const CSV_HEADER: &str =
    "dataset,instance,method,seed,unsat_weight,sat_weight,epochs,wall_time_ms";

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Full model: literal nodes, transformer block, shared loss.
    Hypersat,
    /// Variable nodes, no block, no shared loss.
    HypersatVariable,
    /// Literal nodes, no block, no shared loss.
    HypersatPlain,
    /// Literal nodes with the block, no shared loss.
    HypersatTransformer,
    /// Literal nodes with the shared loss, no block.
    HypersatSrcl,
    LocalSearch,
    Exhaustive,
}

impl Method {
    pub const ABLATIONS: [Method; 5] = [
        Method::HypersatVariable,
        Method::HypersatPlain,
        Method::HypersatTransformer,
        Method::HypersatSrcl,
        Method::Hypersat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hypersat => "hypersat",
            Method::HypersatVariable => "hypersat-variable",
            Method::HypersatPlain => "hypersat-plain",
            Method::HypersatTransformer => "hypersat-transformer",
            Method::HypersatSrcl => "hypersat-srcl",
            Method::LocalSearch => "local-search",
            Method::Exhaustive => "exhaustive",
        }
    }

    /// Solver configuration for the neural methods, derived from `base`.
    pub fn solve_config(self, base: SolveConfig) -> Option<SolveConfig> {
        Some(match self {
            Method::Hypersat => base,
            Method::HypersatVariable => SolveConfig {
                mode: HypergraphMode::Variable,
                use_transformer: false,
                lambda: 0.0,
                ..base
            },
            Method::HypersatPlain => SolveConfig {
                use_transformer: false,
                lambda: 0.0,
                ..base
            },
            Method::HypersatTransformer => SolveConfig {
                lambda: 0.0,
                ..base
            },
            Method::HypersatSrcl => SolveConfig {
                use_transformer: false,
                ..base
            },
            Method::LocalSearch | Method::Exhaustive => return None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub instance: String,
    pub method: Method,
    pub seed: u64,
    pub unsat_weight: u64,
    pub sat_weight: u64,
    pub epochs: usize,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub base: SolveConfig,
    pub ls_steps: u64,
}

/// Runs one method on one instance with the base seed `seed`.
pub fn run_one(
    dataset: &str,
    instance: &WcnfInstance,
    method: Method,
    seed: u64,
    options: &BenchOptions,
) -> Result<BenchRecord> {
    let run_seed = derive_seed(seed, &instance.name);
    let start = Instant::now();
    let (unsat_weight, epochs) = match method.solve_config(options.base) {
        Some(config) => {
            let r = solve(
                instance,
                &SolveConfig {
                    seed: run_seed,
                    ..config
                },
            )?;
            (r.unsat_weight, r.epochs_run)
        }
        None if method == Method::LocalSearch => (
            local_search(instance, options.ls_steps, run_seed)?.best_unsat_weight,
            0,
        ),
        None => (exhaustive_optimum(instance)?.best_unsat_weight, 0),
    };
    Ok(BenchRecord {
        dataset: dataset.to_string(),
        instance: instance.name.clone(),
        method,
        seed: run_seed,
        unsat_weight,
        sat_weight: instance.total_weight() - unsat_weight,
        epochs,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// All (instance, method, seed) runs, sorted by instance, method and seed.
pub fn run_bench(
    dataset: &str,
    instances: &[WcnfInstance],
    methods: &[Method],
    seeds: &[u64],
    options: &BenchOptions,
    pool: &rayon::ThreadPool,
) -> Result<Vec<BenchRecord>> {
    let jobs: Vec<(&WcnfInstance, Method, u64)> = instances
        .iter()
        .flat_map(|inst| {
            methods
                .iter()
                .flat_map(move |&m| seeds.iter().map(move |&s| (inst, m, s)))
        })
        .collect();
    let mut records = pool.install(|| {
        jobs.par_iter()
            .map(|&(inst, method, seed)| {
                run_one(dataset, inst, method, seed, options)
                    .with_context(|| format!("{} / {method}", inst.name))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by(|a, b| (&a.instance, a.method, a.seed).cmp(&(&b.instance, b.method, b.seed)));
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub mean_unsat_weight: f64,
    /// Sample standard deviation (0 for a single run).
    pub std_unsat_weight: f64,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<MethodSummary> {
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.unsat_weight as f64)
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            MethodSummary {
                method,
                runs: values.len(),
                mean_unsat_weight: mean,
                std_unsat_weight: std,
            }
        })
        .collect()
}

pub fn write_summary(
    dataset: &str,
    instances: usize,
    summary: &[MethodSummary],
    out: &mut dyn Write,
) -> Result<()> {
    writeln!(out, "dataset {dataset}: {instances} instances")?;
    writeln!(
        out,
        "{:<22} {:>5}  mean_unsat_weight ± std",
        "method", "runs"
    )?;
    for s in summary {
        writeln!(
            out,
            "{:<22} {:>5}  {:.3} ± {:.3}",
            s.method.as_str(),
            s.runs,
            s.mean_unsat_weight,
            s.std_unsat_weight
        )?;
    }
    Ok(())
}

pub fn dataset_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn run(args: &BenchArgs, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let mut files = inputs::list_dir(&args.dataset)?;
    if let Some(limit) = args.limit {
        files.truncate(limit);
    }
    let instances = files
        .iter()
        .map(|p| inputs::load(p))
        .collect::<Result<Vec<_>>>()?;
    let seeds = if args.seeds.is_empty() {
        vec![seed]
    } else {
        args.seeds.clone()
    };
    let base = args.config.apply(SolveConfig::default());
    base.validate()?;
    let options = BenchOptions {
        base,
        ls_steps: args.ls_steps,
    };
    let label = dataset_label(&args.dataset);
    let pool = inputs::thread_pool(args.workers)?;
    let records = run_bench(&label, &instances, &args.methods, &seeds, &options, &pool)?;
    let summary = summarize(&records);
    match &args.csv {
        Some(path) => {
            write_csv(
                &records,
                std::fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?,
            )?;
            write_summary(&label, instances.len(), &summary, stdout)?;
        }
        None => {
            write_csv(&records, &mut *stdout)?;
            write_summary(&label, instances.len(), &summary, &mut std::io::stderr())?;
        }
    }
    Ok(0)
}
