//! Hypergraph views of an instance and the normalized convolution operator.
//!
//! In literal mode variable `x_i` owns two nodes: node `i` for `x_i` and
//! node `n + i` for `¬x_i` (0-based). Every clause becomes a hyperedge over
//! its literal nodes, weighted by the clause weight. Variable mode merges the
//! two literal nodes of a variable into one.
//!
//! The convolution operator is `S = D_v^{-1/2} Q D_v^{-1/2}` with
//! `Q = H De~^{-1} H^T - diag(H De~^{-1} H^T)` and `De~ = D_e - I`. Here
//! `D_v` holds the weighted node degrees and `D_e` the (unweighted) edge
//! cardinalities. Unit edges clamp `De~` to 1; isolated nodes get
//! `d^{-1/2} = 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::DenseMatrix;
use crate::error::{Error, Result};
use crate::wcnf::WcnfInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypergraphMode {
    Literal,
    Variable,
}

/// Incidence structure of a literal (or variable) hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralHypergraph {
    mode: HypergraphMode,
    num_vars: usize,
    num_nodes: usize,
    /// Node lists per edge (columns of H).
    edges: Vec<Vec<usize>>,
    /// Edge lists per node (rows of H).
    node_edges: Vec<Vec<usize>>,
    edge_weights: Vec<u64>,
    node_degree: Vec<f64>,
    edge_degree: Vec<usize>,
}

/// Node index of a DIMACS literal in literal mode.
pub fn literal_node(lit: i32, num_vars: usize) -> usize {
    let v = lit.unsigned_abs() as usize - 1;
    if lit > 0 {
        v
    } else {
        num_vars + v
    }
}

pub fn build_literal_hypergraph(instance: &WcnfInstance) -> LiteralHypergraph {
    let n = instance.num_vars();
    let edges = instance
        .clauses()
        .iter()
        .map(|c| c.literals().iter().map(|&l| literal_node(l, n)).collect())
        .collect();
    LiteralHypergraph::from_edges(HypergraphMode::Literal, n, 2 * n, edges, instance.weights())
}

pub fn build_variable_hypergraph(instance: &WcnfInstance) -> LiteralHypergraph {
    let n = instance.num_vars();
    let edges = instance
        .clauses()
        .iter()
        .map(|c| {
            let mut nodes: Vec<usize> = Vec::with_capacity(c.literals().len());
            for l in c.literals() {
                let v = l.unsigned_abs() as usize - 1;
                if !nodes.contains(&v) {
                    nodes.push(v);
                }
            }
            nodes
        })
        .collect();
    LiteralHypergraph::from_edges(HypergraphMode::Variable, n, n, edges, instance.weights())
}

pub fn build_hypergraph(instance: &WcnfInstance, mode: HypergraphMode) -> LiteralHypergraph {
    match mode {
        HypergraphMode::Literal => build_literal_hypergraph(instance),
        HypergraphMode::Variable => build_variable_hypergraph(instance),
    }
}

impl LiteralHypergraph {
    /// Builds from explicit edge node lists. Nodes within an edge must be
    /// distinct and below `num_nodes`.
    pub fn from_edges(
        mode: HypergraphMode,
        num_vars: usize,
        num_nodes: usize,
        edges: Vec<Vec<usize>>,
        edge_weights: Vec<u64>,
    ) -> Self {
        assert_eq!(edges.len(), edge_weights.len(), "one weight per edge");
        let mut node_edges = vec![Vec::new(); num_nodes];
        let mut node_degree = vec![0.0; num_nodes];
        for (j, (edge, &w)) in edges.iter().zip(&edge_weights).enumerate() {
            debug_assert!(!edge.is_empty());
            for &v in edge {
                node_edges[v].push(j);
                node_degree[v] += w as f64;
            }
        }
        let edge_degree = edges.iter().map(Vec::len).collect();
        LiteralHypergraph {
            mode,
            num_vars,
            num_nodes,
            edges,
            node_edges,
            edge_weights,
            node_degree,
            edge_degree,
        }
    }

    pub fn mode(&self) -> HypergraphMode {
        self.mode
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, j: usize) -> &[usize] {
        &self.edges[j]
    }

    pub fn node_edges(&self, i: usize) -> &[usize] {
        &self.node_edges[i]
    }

    pub fn edge_weights(&self) -> &[u64] {
        &self.edge_weights
    }

    /// Weighted vertex degrees `d(v) = Σ_j H_vj W_jj`.
    pub fn node_degree(&self) -> &[f64] {
        &self.node_degree
    }

    /// Edge cardinalities `δ(e) = Σ_v H_ve`.
    pub fn edge_degree(&self) -> &[usize] {
        &self.edge_degree
    }

    /// Dense 0/1 incidence matrix (nodes × edges).
    pub fn incidence_dense(&self) -> DenseMatrix {
        let mut h = DenseMatrix::zeros(self.num_nodes, self.edges.len());
        for (j, edge) in self.edges.iter().enumerate() {
            for &v in edge {
                h[(v, j)] = 1.0;
            }
        }
        h
    }

    /// Incidence matrix as sparse triplets, one `node edge 1` line per entry.
    pub fn incidence_triplets(&self) -> String {
        let nnz: usize = self.edge_degree.iter().sum();
        let mut out = format!(
            "%% incidence {} {} {}\n",
            self.num_nodes,
            self.edges.len(),
            nnz
        );
        for (j, edge) in self.edges.iter().enumerate() {
            for &v in edge {
                let _ = writeln!(out, "{v} {j} 1");
            }
        }
        out
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from triplets already sorted by (row, col) with no duplicates.
    fn from_sorted(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut row_ptr = vec![0; rows + 1];
        for &(r, _, _) in triplets {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets: Vec<(usize, usize, f64)> = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        triplets.sort_by_key(|t| (t.0, t.1));
        SparseMatrix::from_sorted(self.cols, self.rows, &triplets)
    }

    /// `self · x`.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.cols {
            return Err(Error::shape(
                "sparse_mul",
                format!("{}x{} · {}x{}", self.rows, self.cols, x.rows(), x.cols()),
            ));
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, d);
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (o, &xv) in dst.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// Sparse-triplet text, one `row col value` line per stored entry.
    pub fn to_triplets(&self, label: &str) -> String {
        let mut out = format!("%% {label} {} {} {}\n", self.rows, self.cols, self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{r} {c} {v}");
            }
        }
        out
    }
}

/// Options for operator construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorOptions {
    /// Diagnostic: use `H W De~^{-1} H^T` instead of `H De~^{-1} H^T`.
    pub edge_weights_in_q: bool,
}

/// The symmetric, zero-diagonal operator `S` applied by every conv layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedOperator {
    matrix: SparseMatrix,
}

impl NormalizedOperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.rows
    }

    /// The all-zero operator on `num_nodes` nodes.
    pub fn zero(num_nodes: usize) -> Self {
        NormalizedOperator {
            matrix: SparseMatrix::from_sorted(num_nodes, num_nodes, &[]),
        }
    }
}

/// Off-diagonal entries of `H De~^{-1} H^T`: entry (a, b) sums
/// `1 / max(δ(e) - 1, 1)` over edges holding both a and b.
pub fn q_tilde(hg: &LiteralHypergraph) -> SparseMatrix {
    q_tilde_with(hg, OperatorOptions::default())
}

pub fn q_tilde_with(hg: &LiteralHypergraph, options: OperatorOptions) -> SparseMatrix {
    let mut contributions: Vec<(usize, usize, f64)> = Vec::new();
    for (j, edge) in hg.edges.iter().enumerate() {
        let clamped = (hg.edge_degree[j].saturating_sub(1)).max(1) as f64;
        let mut value = 1.0 / clamped;
        if options.edge_weights_in_q {
            value *= hg.edge_weights[j] as f64;
        }
        for (ia, &a) in edge.iter().enumerate() {
            for &b in &edge[ia + 1..] {
                contributions.push((a, b, value));
                contributions.push((b, a, value));
            }
        }
    }
    // Summing in a canonical order makes the result independent of clause order.
    contributions.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(contributions.len());
    for (a, b, v) in contributions {
        match merged.last_mut() {
            Some(last) if last.0 == a && last.1 == b => last.2 += v,
            _ => merged.push((a, b, v)),
        }
    }
    SparseMatrix::from_sorted(hg.num_nodes, hg.num_nodes, &merged)
}

pub fn normalized_operator(hg: &LiteralHypergraph) -> NormalizedOperator {
    normalized_operator_with(hg, OperatorOptions::default())
}

pub fn normalized_operator_with(
    hg: &LiteralHypergraph,
    options: OperatorOptions,
) -> NormalizedOperator {
    let q = q_tilde_with(hg, options);
    let inv_sqrt: Vec<f64> = hg
        .node_degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut triplets = Vec::with_capacity(q.nnz());
    for r in 0..q.rows {
        for (c, v) in q.row(r) {
            let s = v * (inv_sqrt[r.min(c)] * inv_sqrt[r.max(c)]);
            if s != 0.0 {
                triplets.push((r, c, s));
            }
        }
    }
    NormalizedOperator {
        matrix: SparseMatrix::from_sorted(q.rows, q.cols, &triplets),
    }
}

/// `S · X`.
pub fn apply_operator(op: &NormalizedOperator, x: &DenseMatrix) -> Result<DenseMatrix> {
    op.matrix.mul_dense(x)
}
