use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use hypersat_core::dataset::{generate_dataset, shape, DatasetOptions};
use hypersat_core::wcnf::{assign_random_weights, generate_random_3sat, write_wcnf};
use hypersat_core::WcnfInstance;

use crate::args::GenArgs;

/// Builds the instances described by `args`. Plain instance `i` uses seed
/// `seed + i` for both clauses and weights.
pub fn generate(args: &GenArgs, seed: u64) -> Result<Vec<WcnfInstance>> {
    if let Some(label) = &args.family {
        let shape = shape(label).ok_or_else(|| anyhow!("unknown family `{label}`"))?;
        let options = DatasetOptions {
            weight_lo: args.weight_lo,
            weight_hi: args.weight_hi,
            ..DatasetOptions::new(args.count, seed)
        };
        return Ok(generate_dataset(&shape, &options)?);
    }
    let (n, m) = args
        .n
        .zip(args.m)
        .ok_or_else(|| anyhow!("--n and --m are required"))?;
    (0..args.count)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let inst = generate_random_3sat(n, m, s)?;
            let weighted = assign_random_weights(&inst, s, args.weight_lo, args.weight_hi)?;
            Ok(weighted.with_name(format!("{}-{:03}", args.prefix, i + 1)))
        })
        .collect()
}

/// Writes one `<name>.wcnf` per instance and returns the paths.
pub fn run(args: &GenArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let instances = generate(args, seed)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    instances
        .iter()
        .map(|inst| {
            let path = args.out_dir.join(format!("{}.wcnf", inst.name));
            fs::write(&path, write_wcnf(inst))
                .with_context(|| format!("writing {}", path.display()))?;
            Ok(path)
        })
        .collect()
}
