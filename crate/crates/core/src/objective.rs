//! Unsupervised losses.
//!
//! The task loss is the expected weighted unsatisfaction of independent
//! Bernoulli(y_i) variables:
//!
//! ```text
//! task(Y) = Σ_j w_j · Π_{i ∈ C_j+} (1 - y_i) · Π_{i ∈ C_j-} y_i
//! ```
//!
//! It equals the exact unsatisfied weight on binary `Y`. The shared
//! representation loss is `‖L+ + L-‖_F²` over the penultimate literal banks.

use serde::{Deserialize, Serialize};

use crate::autodiff::{DenseMatrix, ScalarFunction};
use crate::error::{Error, Result};
use crate::wcnf::WcnfInstance;

pub const DEFAULT_LAMBDA: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task: f64,
    pub shared: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn new(task: f64, shared: f64, lambda: f64) -> Result<Self> {
        Ok(LossBreakdown {
            task,
            shared,
            total: total_loss(task, shared, lambda)?,
            lambda,
        })
    }
}

/// Clause structure flattened for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct ClauseTable {
    num_vars: usize,
    /// (variable, is_positive) per literal, clause by clause.
    literals: Vec<(usize, bool)>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

impl ClauseTable {
    pub fn new(instance: &WcnfInstance) -> Self {
        let mut literals = Vec::new();
        let mut offsets = vec![0];
        for c in instance.clauses() {
            literals.extend(
                c.literals()
                    .iter()
                    .map(|&l| (l.unsigned_abs() as usize - 1, l > 0)),
            );
            offsets.push(literals.len());
        }
        ClauseTable {
            num_vars: instance.num_vars(),
            literals,
            offsets,
            weights: instance
                .clauses()
                .iter()
                .map(|c| c.weight() as f64)
                .collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn clause(&self, j: usize) -> &[(usize, bool)] {
        &self.literals[self.offsets[j]..self.offsets[j + 1]]
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.num_vars {
            return Err(Error::Length {
                expected: self.num_vars,
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Probability that literal `(v, positive)` is false.
    #[inline]
    fn falsity(y: &[f64], (v, positive): (usize, bool)) -> f64 {
        if positive {
            1.0 - y[v]
        } else {
            y[v]
        }
    }

    pub fn value(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        Ok((0..self.weights.len())
            .map(|j| {
                let prod: f64 = self
                    .clause(j)
                    .iter()
                    .map(|&l| Self::falsity(y, l))
                    .product();
                self.weights[j] * prod
            })
            .sum())
    }

    pub fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut grad = vec![0.0; y.len()];
        for j in 0..self.weights.len() {
            let clause = self.clause(j);
            for (k, &(v, positive)) in clause.iter().enumerate() {
                // leave-one-out product; arity is small
                let others: f64 = clause
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, &l)| Self::falsity(y, l))
                    .product();
                let sign = if positive { -1.0 } else { 1.0 };
                grad[v] += self.weights[j] * sign * others;
            }
        }
        Ok(grad)
    }
}

/// Task loss as a tape node over an `n×1` probability column.
impl ScalarFunction for ClauseTable {
    fn value(&self, x: &DenseMatrix) -> Result<f64> {
        ClauseTable::value(self, x.data())
    }

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let g = ClauseTable::gradient(self, x.data())?;
        DenseMatrix::from_vec(x.rows(), x.cols(), g)
    }
}

/// Weighted expected unsatisfaction of `y` on `instance`.
pub fn task_loss(y: &[f64], instance: &WcnfInstance) -> Result<f64> {
    ClauseTable::new(instance).value(y)
}

/// `‖pos + neg‖_F²`.
pub fn shared_loss(penult_pos: &DenseMatrix, penult_neg: &DenseMatrix) -> Result<f64> {
    Ok(penult_pos.add(penult_neg)?.frobenius_sq())
}

pub fn total_loss(task: f64, shared: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    Ok(task + lambda * shared)
}
