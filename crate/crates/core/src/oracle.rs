//! Reference solvers: exhaustive enumeration for small instances and a
//! weighted WalkSAT-style local search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::wcnf::{Assignment, WcnfInstance};

/// Largest instance [`exhaustive_optimum`] accepts.
pub const EXHAUSTIVE_MAX_VARS: usize = 26;

/// Probability of a random (rather than greedy) flip in [`local_search`].
pub const NOISE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_unsat_weight: u64,
    pub best_assignment: Assignment,
    /// Assignments visited (exhaustive) or flips made (local search).
    pub steps: u64,
}

/// Incrementally maintained evaluation of one assignment.
struct Evaluator {
    weights: Vec<u64>,
    /// Per variable: `(clause, positive occurrences, negative occurrences)`.
    occurrences: Vec<Vec<(usize, u32, u32)>>,
    true_count: Vec<u32>,
    values: Vec<bool>,
    unsat_weight: u64,
    /// Unsatisfied clause ids, with `position[j]` locating `j` in it.
    unsat: Vec<usize>,
    position: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl Evaluator {
    fn new(instance: &WcnfInstance, values: Vec<bool>) -> Self {
        let mut occurrences: Vec<Vec<(usize, u32, u32)>> = vec![Vec::new(); instance.num_vars()];
        let mut true_count = vec![0; instance.num_clauses()];
        for (j, clause) in instance.clauses().iter().enumerate() {
            for &lit in clause.literals() {
                let v = lit.unsigned_abs() as usize - 1;
                let entry = match occurrences[v].last_mut() {
                    Some(e) if e.0 == j => e,
                    _ => {
                        occurrences[v].push((j, 0, 0));
                        occurrences[v].last_mut().expect("just pushed")
                    }
                };
                if lit > 0 {
                    entry.1 += 1;
                } else {
                    entry.2 += 1;
                }
                if values[v] == (lit > 0) {
                    true_count[j] += 1;
                }
            }
        }
        let mut eval = Evaluator {
            weights: instance.weights(),
            occurrences,
            true_count,
            values,
            unsat_weight: 0,
            unsat: Vec::new(),
            position: vec![ABSENT; instance.num_clauses()],
        };
        for j in 0..eval.weights.len() {
            if eval.true_count[j] == 0 {
                eval.mark_unsat(j);
            }
        }
        eval
    }

    fn mark_unsat(&mut self, j: usize) {
        self.position[j] = self.unsat.len();
        self.unsat.push(j);
        self.unsat_weight += self.weights[j];
    }

    fn mark_sat(&mut self, j: usize) {
        let at = self.position[j];
        let last = self.unsat.pop().expect("clause was unsatisfied");
        if last != j {
            self.unsat[at] = last;
            self.position[last] = at;
        }
        self.position[j] = ABSENT;
        self.unsat_weight -= self.weights[j];
    }

    /// Literal counts gained and lost in a clause when `v` flips.
    fn flip_counts(&self, v: usize, pos: u32, neg: u32) -> (u32, u32) {
        if self.values[v] {
            (neg, pos)
        } else {
            (pos, neg)
        }
    }

    /// Change in unsatisfied weight if `v` were flipped.
    fn flip_delta(&self, v: usize) -> i64 {
        let mut delta = 0i64;
        for &(j, pos, neg) in &self.occurrences[v] {
            let (gain, loss) = self.flip_counts(v, pos, neg);
            let before = self.true_count[j];
            let after = before + gain - loss;
            match (before == 0, after == 0) {
                (true, false) => delta -= self.weights[j] as i64,
                (false, true) => delta += self.weights[j] as i64,
                _ => {}
            }
        }
        delta
    }

    fn flip(&mut self, v: usize) {
        for k in 0..self.occurrences[v].len() {
            let (j, pos, neg) = self.occurrences[v][k];
            let (gain, loss) = self.flip_counts(v, pos, neg);
            let before = self.true_count[j];
            let after = before + gain - loss;
            self.true_count[j] = after;
            match (before == 0, after == 0) {
                (true, false) => self.mark_sat(j),
                (false, true) => self.mark_unsat(j),
                _ => {}
            }
        }
        self.values[v] = !self.values[v];
    }
}

/// Global minimum of the unsatisfied weight by enumerating all `2^n`
/// assignments in Gray-code order (one flip between neighbours).
pub fn exhaustive_optimum(instance: &WcnfInstance) -> Result<OracleResult> {
    let n = instance.num_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(Error::TooLarge(n));
    }
    let mut eval = Evaluator::new(instance, vec![false; n]);
    let mut best = (eval.unsat_weight, 0u64);
    let mut code = 0u64;
    let total = 1u64 << n;
    for i in 1..total {
        let v = i.trailing_zeros() as usize;
        eval.flip(v);
        code ^= 1 << v;
        if eval.unsat_weight < best.0 {
            best = (eval.unsat_weight, code);
        }
    }
    Ok(OracleResult {
        best_unsat_weight: best.0,
        best_assignment: Assignment::from_bits(n, best.1),
        steps: total,
    })
}

/// Weighted WalkSAT from a uniformly random start.
///
/// Each step picks an unsatisfied clause with probability proportional to
/// its weight. With probability [`NOISE`] a uniformly random variable of
/// that clause is flipped; otherwise the variable whose flip leaves the
/// least unsatisfied weight (first on ties). The best assignment seen is
/// returned; the walk ends early when nothing is unsatisfied.
pub fn local_search(instance: &WcnfInstance, max_steps: u64, seed: u64) -> Result<OracleResult> {
    let (result, _) = local_search_traced(instance, max_steps, seed)?;
    Ok(result)
}

/// [`local_search`] plus the best-so-far unsatisfied weight after each step
/// (entry 0 is the initial assignment).
pub fn local_search_traced(
    instance: &WcnfInstance,
    max_steps: u64,
    seed: u64,
) -> Result<(OracleResult, Vec<u64>)> {
    let n = instance.num_vars();
    let mut rng = stream_rng(seed, Stream::LocalSearch);
    let start = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut eval = Evaluator::new(instance, start);
    let mut best = (eval.unsat_weight, eval.values.clone());
    let mut trace = vec![best.0];
    let mut steps = 0;
    while steps < max_steps && eval.unsat_weight > 0 {
        let mut target = rng.random_range(0..eval.unsat_weight);
        let mut clause = eval.unsat[0];
        for &j in &eval.unsat {
            if target < eval.weights[j] {
                clause = j;
                break;
            }
            target -= eval.weights[j];
        }
        let vars: Vec<usize> = instance.clauses()[clause]
            .literals()
            .iter()
            .map(|l| l.unsigned_abs() as usize - 1)
            .collect();
        let v = if rng.random_bool(NOISE) {
            vars[rng.random_range(0..vars.len())]
        } else {
            let mut choice = (i64::MAX, vars[0]);
            for &v in &vars {
                let d = eval.flip_delta(v);
                if d < choice.0 {
                    choice = (d, v);
                }
            }
            choice.1
        };
        eval.flip(v);
        steps += 1;
        if eval.unsat_weight < best.0 {
            best = (eval.unsat_weight, eval.values.clone());
        }
        trace.push(best.0);
    }
    Ok((
        OracleResult {
            best_unsat_weight: best.0,
            best_assignment: Assignment::new(best.1),
            steps,
        },
        trace,
    ))
}
