use std::io::Write;

use anyhow::{bail, Result};
use hypersat_core::model::{check_gradients, init_params};
use hypersat_core::objective::DEFAULT_LAMBDA;
use hypersat_core::wcnf::{assign_random_weights, generate_random_3sat};
use hypersat_core::ModelConfig;

use crate::args::GradcheckArgs;

pub const MAX_VARS: usize = 12;

/// Prints the worst relative error per parameter tensor; returns exit
/// code 1 when any exceeds the tolerance.
pub fn run(args: &GradcheckArgs, seed: u64, out: &mut dyn Write) -> Result<i32> {
    if args.n > MAX_VARS {
        bail!("gradcheck supports n <= {MAX_VARS}, got {}", args.n);
    }
    let m = args
        .m
        .unwrap_or(((4.26 * args.n as f64).round() as usize).max(1));
    let instance = assign_random_weights(&generate_random_3sat(args.n, m, seed)?, seed, 1, 10)?;
    let mut config = ModelConfig::for_vars(args.n, seed);
    if let Some(w) = args.width {
        config.d1 = w;
        config.ffn_hidden = w;
    }
    let report = check_gradients(&instance, &config, DEFAULT_LAMBDA, args.step)?;
    let names = init_params(&config)?.names();
    writeln!(
        out,
        "gradcheck n={} m={m} seed={seed} d1={} step={:e}",
        args.n, config.d1, args.step
    )?;
    for (name, err) in names.iter().zip(&report.per_tensor) {
        let verdict = if *err < args.tolerance { "ok" } else { "FAIL" };
        writeln!(out, "{name:<20} {err:.3e} {verdict}")?;
    }
    let passed = report.max_error < args.tolerance;
    writeln!(
        out,
        "max {:.3e} over {} coordinates ({} kinks): {}",
        report.max_error,
        report.coordinates,
        report.kinks,
        if passed { "PASS" } else { "FAIL" }
    )?;
    Ok(i32::from(!passed))
}
