//! Benchmark sets shaped like the SATLIB uniform random 3-SAT families.
//!
//! `uf` sets hold satisfiable instances and `uuf` sets unsatisfiable ones.
//! Real SATLIB files can be parsed with [`crate::wcnf::parse_dimacs`]; the
//! generators here produce stand-ins of the same shape. Candidates are
//! drawn with [`generate_random_3sat`] and classified by unit-weight local
//! search: a `uf` candidate is kept once a satisfying assignment is found,
//! a `uuf` candidate when none is found within the step budget. The second
//! test is one-sided, so `uuf` instances are only likely unsatisfiable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::local_search;
use crate::rng::{stream_rng, Stream};
use crate::wcnf::{assign_random_weights, generate_random_3sat, WcnfInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub label: &'static str,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub satisfiable: bool,
    /// Instances in the original SATLIB family.
    pub family_size: usize,
}

pub const SATLIB_SHAPES: [DatasetShape; 6] = [
    DatasetShape {
        label: "uf100-430",
        num_vars: 100,
        num_clauses: 430,
        satisfiable: true,
        family_size: 1000,
    },
    DatasetShape {
        label: "uuf100-430",
        num_vars: 100,
        num_clauses: 430,
        satisfiable: false,
        family_size: 1000,
    },
    DatasetShape {
        label: "uf200-860",
        num_vars: 200,
        num_clauses: 860,
        satisfiable: true,
        family_size: 100,
    },
    DatasetShape {
        label: "uuf200-860",
        num_vars: 200,
        num_clauses: 860,
        satisfiable: false,
        family_size: 100,
    },
    DatasetShape {
        label: "uf250-1065",
        num_vars: 250,
        num_clauses: 1065,
        satisfiable: true,
        family_size: 100,
    },
    DatasetShape {
        label: "uuf250-1065",
        num_vars: 250,
        num_clauses: 1065,
        satisfiable: false,
        family_size: 100,
    },
];

pub fn shape(label: &str) -> Option<DatasetShape> {
    SATLIB_SHAPES.iter().copied().find(|s| s.label == label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetOptions {
    pub count: usize,
    pub seed: u64,
    pub weight_lo: u64,
    pub weight_hi: u64,
    /// Local search flips per classification attempt.
    pub search_steps: u64,
    /// Independent local search attempts before a candidate counts as
    /// unsatisfiable.
    pub search_restarts: u64,
    /// Upper bound on candidates drawn.
    pub max_candidates: usize,
}

impl DatasetOptions {
    pub fn new(count: usize, seed: u64) -> Self {
        DatasetOptions {
            count,
            seed,
            weight_lo: 1,
            weight_hi: 10,
            search_steps: 200_000,
            search_restarts: 3,
            max_candidates: 100 * count.max(1),
        }
    }
}

/// Whether unit-weight local search finds a satisfying assignment.
pub fn appears_satisfiable(
    instance: &WcnfInstance,
    steps: u64,
    restarts: u64,
    seed: u64,
) -> Result<bool> {
    let unit = instance.reweighted(&vec![1; instance.num_clauses()])?;
    for r in 0..restarts.max(1) {
        if local_search(&unit, steps, seed.wrapping_add(r))?.best_unsat_weight == 0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Generates `options.count` weighted instances of `shape`, named
/// `<label>-<index>`.
pub fn generate_dataset(
    shape: &DatasetShape,
    options: &DatasetOptions,
) -> Result<Vec<WcnfInstance>> {
    let mut rng = stream_rng(options.seed, Stream::Dataset);
    let mut out = Vec::with_capacity(options.count);
    let mut drawn = 0;
    while out.len() < options.count {
        if drawn == options.max_candidates {
            return Err(Error::InvalidArgument(format!(
                "only {} of {} {} instances found in {drawn} candidates",
                out.len(),
                options.count,
                shape.label
            )));
        }
        drawn += 1;
        let candidate_seed: u64 = rng.random();
        let inst = generate_random_3sat(shape.num_vars, shape.num_clauses, candidate_seed)?;
        let sat = appears_satisfiable(
            &inst,
            options.search_steps,
            options.search_restarts,
            candidate_seed,
        )?;
        if sat != shape.satisfiable {
            continue;
        }
        let weighted =
            assign_random_weights(&inst, candidate_seed, options.weight_lo, options.weight_hi)?;
        out.push(weighted.with_name(format!("{}-{:02}", shape.label, out.len() + 1)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_optimum;

    #[test]
    fn shapes_match_the_family_table() {
        let s = shape("uuf250-1065").unwrap();
        assert_eq!(
            (s.num_vars, s.num_clauses, s.satisfiable, s.family_size),
            (250, 1065, false, 100)
        );
        assert_eq!(shape("uf100-430").unwrap().family_size, 1000);
        assert!(shape("uf50-218").is_none());
    }

    #[test]
    fn small_sets_are_classified_correctly() {
        let sat = DatasetShape {
            label: "t-sat",
            num_vars: 14,
            num_clauses: 66,
            satisfiable: true,
            family_size: 0,
        };
        let unsat = DatasetShape {
            satisfiable: false,
            label: "t-unsat",
            ..sat
        };
        let options = DatasetOptions {
            search_steps: 20_000,
            ..DatasetOptions::new(4, 11)
        };
        for inst in generate_dataset(&sat, &options).unwrap() {
            let unit = inst.reweighted(&vec![1; inst.num_clauses()]).unwrap();
            assert_eq!(exhaustive_optimum(&unit).unwrap().best_unsat_weight, 0);
            assert!(inst.weights().iter().all(|w| (1..=10).contains(w)));
        }
        let set = generate_dataset(&unsat, &options).unwrap();
        assert_eq!(set[0].name, "t-unsat-01");
        for inst in set {
            let unit = inst.reweighted(&vec![1; inst.num_clauses()]).unwrap();
            assert!(exhaustive_optimum(&unit).unwrap().best_unsat_weight > 0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = DatasetShape {
            label: "t",
            num_vars: 20,
            num_clauses: 85,
            satisfiable: true,
            family_size: 0,
        };
        let options = DatasetOptions::new(3, 5);
        let a = generate_dataset(&s, &options).unwrap();
        let b = generate_dataset(&s, &options).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().zip(&b).all(|(x, y)| x.name == y.name));
    }

    #[test]
    fn impossible_requests_fail() {
        // 40 clauses over 3 variables cover all 8 sign patterns
        let s = DatasetShape {
            label: "t",
            num_vars: 3,
            num_clauses: 40,
            satisfiable: true,
            family_size: 0,
        };
        let options = DatasetOptions {
            max_candidates: 5,
            ..DatasetOptions::new(1, 0)
        };
        assert!(generate_dataset(&s, &options).is_err());
    }
}
