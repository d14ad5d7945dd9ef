//! Weighted MaxSAT instances.
//!
//! Literals use the DIMACS convention: `+v` is `x_v`, `-v` is `¬x_v`, with
//! 1-based variable indices. All clauses are soft and carry an integer
//! weight `>= 1`. The accepted WCNF dialect is the pre-2022 `p wcnf n m`
//! format without a top weight.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// A weighted disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<i32>,
    weight: u64,
}

impl Clause {
    /// Builds a clause, rejecting empty clauses, zero literals, repeated
    /// literals and zero weight. Tautologies (`v` and `-v` together) are
    /// allowed.
    pub fn new(literals: Vec<i32>, weight: u64) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::InvalidInstance("empty clause".into()));
        }
        if weight == 0 {
            return Err(Error::InvalidInstance("clause weight must be >= 1".into()));
        }
        let mut seen = HashSet::with_capacity(literals.len());
        for &lit in &literals {
            if lit == 0 {
                return Err(Error::InvalidInstance("literal 0 inside clause".into()));
            }
            if !seen.insert(lit) {
                return Err(Error::InvalidInstance(format!("duplicate literal {lit}")));
            }
        }
        Ok(Clause { literals, weight })
    }

    pub fn literals(&self) -> &[i32] {
        &self.literals
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    /// 0-based indices of variables occurring positively.
    pub fn positive(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals
            .iter()
            .filter(|&&l| l > 0)
            .map(|&l| l as usize - 1)
    }

    /// 0-based indices of variables occurring negatively.
    pub fn negative(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals
            .iter()
            .filter(|&&l| l < 0)
            .map(|&l| l.unsigned_abs() as usize - 1)
    }

    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        self.literals
            .iter()
            .any(|&l| literal_value(l, &assignment.values))
    }
}

#[inline]
pub(crate) fn literal_value(lit: i32, values: &[bool]) -> bool {
    let v = values[lit.unsigned_abs() as usize - 1];
    if lit > 0 {
        v
    } else {
        !v
    }
}

/// A Weighted MaxSAT instance `(X, C, w)`.
///
/// Equality compares the variable count and the clause list only; `name`
/// is a label and does not survive a trip through DIMACS text.
#[derive(Debug, Clone)]
pub struct WcnfInstance {
    num_vars: usize,
    clauses: Vec<Clause>,
    pub name: String,
}

impl PartialEq for WcnfInstance {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.clauses == other.clauses
    }
}

impl WcnfInstance {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidInstance(
                "at least one variable required".into(),
            ));
        }
        if clauses.is_empty() {
            return Err(Error::InvalidInstance(
                "at least one clause required".into(),
            ));
        }
        for (j, c) in clauses.iter().enumerate() {
            if let Some(&bad) = c
                .literals
                .iter()
                .find(|l| l.unsigned_abs() as usize > num_vars)
            {
                return Err(Error::InvalidInstance(format!(
                    "clause {j}: literal {bad} out of range 1..={num_vars}"
                )));
            }
        }
        Ok(WcnfInstance {
            num_vars,
            clauses,
            name: String::new(),
        })
    }

    /// Convenience constructor from `(literals, weight)` pairs.
    pub fn from_clauses<I, L>(num_vars: usize, clauses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, u64)>,
        L: Into<Vec<i32>>,
    {
        let clauses = clauses
            .into_iter()
            .map(|(lits, w)| Clause::new(lits.into(), w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(num_vars, clauses)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn total_weight(&self) -> u64 {
        self.clauses.iter().map(|c| c.weight).sum()
    }

    pub fn weights(&self) -> Vec<u64> {
        self.clauses.iter().map(|c| c.weight).collect()
    }

    /// Same clauses with new weights, in clause order.
    pub fn reweighted(&self, weights: &[u64]) -> Result<Self> {
        if weights.len() != self.clauses.len() {
            return Err(Error::Length {
                expected: self.clauses.len(),
                actual: weights.len(),
            });
        }
        let clauses = self
            .clauses
            .iter()
            .zip(weights)
            .map(|(c, &w)| Clause::new(c.literals.clone(), w))
            .collect::<Result<Vec<_>>>()?;
        Ok(WcnfInstance {
            num_vars: self.num_vars,
            clauses,
            name: self.name.clone(),
        })
    }

    /// Per-variable lists of clause indices the variable occurs in.
    pub fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.num_vars];
        for (j, c) in self.clauses.iter().enumerate() {
            for &l in &c.literals {
                let v = l.unsigned_abs() as usize - 1;
                if occ[v].last() != Some(&j) {
                    occ[v].push(j);
                }
            }
        }
        occ
    }
}

/// A truth assignment `A ∈ {0,1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    pub values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    pub fn all(n: usize, value: bool) -> Self {
        Assignment {
            values: vec![value; n],
        }
    }

    /// Bit `i` of `bits` is variable `i`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Assignment {
            values: (0..n).map(|i| (bits >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn complement(&self) -> Self {
        Assignment {
            values: self.values.iter().map(|v| !v).collect(),
        }
    }
}

/// Result of evaluating an assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub sat_weight: u64,
    pub unsat_weight: u64,
    pub clause_flags: Vec<bool>,
}

pub fn evaluate(instance: &WcnfInstance, assignment: &Assignment) -> Result<Evaluation> {
    if assignment.len() != instance.num_vars {
        return Err(Error::Length {
            expected: instance.num_vars,
            actual: assignment.len(),
        });
    }
    let mut sat_weight = 0;
    let mut unsat_weight = 0;
    let clause_flags = instance
        .clauses
        .iter()
        .map(|c| {
            let sat = c.is_satisfied(assignment);
            if sat {
                sat_weight += c.weight;
            } else {
                unsat_weight += c.weight;
            }
            sat
        })
        .collect();
    Ok(Evaluation {
        sat_weight,
        unsat_weight,
        clause_flags,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dialect {
    Cnf,
    Wcnf,
}

/// Parses DIMACS CNF; every clause gets weight 1.
pub fn parse_cnf(text: &str) -> Result<WcnfInstance> {
    parse(text, Some(Dialect::Cnf))
}

/// Parses pre-2022 DIMACS WCNF (`p wcnf n m`, weight first on each clause).
pub fn parse_wcnf(text: &str) -> Result<WcnfInstance> {
    parse(text, Some(Dialect::Wcnf))
}

/// Parses either dialect, chosen by the `p` line.
pub fn parse_dimacs(text: &str) -> Result<WcnfInstance> {
    parse(text, None)
}

fn parse(text: &str, expected: Option<Dialect>) -> Result<WcnfInstance> {
    let mut header: Option<(Dialect, usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    // (start line, weight if already read, literals)
    let mut pending: Option<(usize, Option<u64>, Vec<i32>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        // SATLIB files end with a "%" line followed by a stray "0".
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(Error::parse(line_no, "duplicate header"));
            }
            header = Some(parse_header(line, line_no, expected)?);
            continue;
        }
        let Some((dialect, n, _, _)) = header else {
            return Err(Error::parse(line_no, "clause before `p` header"));
        };
        for tok in line.split_whitespace() {
            let value: i64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid integer `{tok}`")))?;
            let (start, weight, lits) = pending.get_or_insert_with(|| (line_no, None, Vec::new()));
            if dialect == Dialect::Wcnf && weight.is_none() {
                if value < 1 {
                    return Err(Error::parse(*start, format!("nonpositive weight {value}")));
                }
                *weight = Some(value as u64);
                continue;
            }
            if value == 0 {
                let (start, weight, lits) = pending.take().expect("pending clause");
                if lits.is_empty() {
                    return Err(Error::parse(start, "empty clause"));
                }
                let clause = Clause::new(lits, weight.unwrap_or(1))
                    .map_err(|e| Error::parse(start, e.to_string()))?;
                clauses.push(clause);
                continue;
            }
            if value.unsigned_abs() as usize > n {
                return Err(Error::parse(
                    line_no,
                    format!("literal {value} out of range 1..={n}"),
                ));
            }
            lits.push(value as i32);
        }
    }

    let Some((_, n, m, header_line)) = header else {
        return Err(Error::parse(
            text.lines().count().max(1),
            "missing `p` header",
        ));
    };
    if let Some((start, _, _)) = pending {
        return Err(Error::parse(start, "clause not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(Error::parse(
            header_line,
            format!(
                "clause count mismatch: header says {m}, found {}",
                clauses.len()
            ),
        ));
    }
    WcnfInstance::new(n, clauses).map_err(|e| Error::parse(header_line, e.to_string()))
}

fn parse_header(
    line: &str,
    line_no: usize,
    expected: Option<Dialect>,
) -> Result<(Dialect, usize, usize, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let malformed = || Error::parse(line_no, format!("malformed header `{line}`"));
    if toks.len() != 4 || toks[0] != "p" {
        return Err(malformed());
    }
    let dialect = match toks[1] {
        "cnf" => Dialect::Cnf,
        "wcnf" => Dialect::Wcnf,
        _ => return Err(malformed()),
    };
    if expected.is_some_and(|e| e != dialect) {
        return Err(Error::parse(
            line_no,
            format!("unexpected format `{}`", toks[1]),
        ));
    }
    let n: usize = toks[2].parse().map_err(|_| malformed())?;
    let m: usize = toks[3].parse().map_err(|_| malformed())?;
    if n == 0 || m == 0 {
        return Err(Error::parse(line_no, "header requires n >= 1 and m >= 1"));
    }
    Ok((dialect, n, m, line_no))
}

/// Canonical WCNF text: header, then one `w l1 .. lk 0` line per clause in
/// clause order.
pub fn write_wcnf(instance: &WcnfInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "p wcnf {} {}",
        instance.num_vars,
        instance.clauses.len()
    );
    for c in &instance.clauses {
        let _ = write!(out, "{}", c.weight);
        for l in &c.literals {
            let _ = write!(out, " {l}");
        }
        out.push_str(" 0\n");
    }
    out
}

/// Replaces every clause weight with an independent uniform draw from
/// `lo..=hi` on the `Weights` stream of `seed`.
pub fn assign_random_weights(
    instance: &WcnfInstance,
    seed: u64,
    lo: u64,
    hi: u64,
) -> Result<WcnfInstance> {
    if lo < 1 || hi < lo {
        return Err(Error::InvalidArgument(format!(
            "weight range [{lo}, {hi}] must satisfy 1 <= lo <= hi"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Weights);
    let weights: Vec<u64> = (0..instance.num_clauses())
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    instance.reweighted(&weights)
}

/// Uniform random 3-SAT: each clause picks 3 distinct variables and an
/// independent fair polarity for each. All weights are 1.
pub fn generate_random_3sat(n: usize, m: usize, seed: u64) -> Result<WcnfInstance> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "random 3-SAT needs n >= 3, got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("random 3-SAT needs m >= 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::Generator);
    let clauses = (0..m)
        .map(|_| {
            let lits = index::sample(&mut rng, n, 3)
                .into_iter()
                .map(|v| {
                    let v = v as i32 + 1;
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            Clause::new(lits, 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WcnfInstance::new(n, clauses)?.with_name(format!("rand3sat-n{n}-m{m}-s{seed}")))
}
