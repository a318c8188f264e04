//! Undirected weighted graphs, the normalized Laplacian and its dense
//! eigendecomposition.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Default node-count limit for the dense eigensolver.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// A simple undirected graph with positive edge weights.
#[derive(Debug, Clone)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<Edge>,
    adjacency: CsrMatrix,
    degrees: Vec<f64>,
}

impl Graph {
    /// Builds a graph from undirected `(i, j, weight)` triples.
    pub fn new(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut triplets = Vec::with_capacity(2 * edges.len());
        let mut stored = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            for index in [i, j] {
                if index >= n_nodes {
                    return Err(Error::NodeOutOfRange { index, n_nodes });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight(i, j, w));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i, j));
            }
            triplets.push((i, j, w));
            triplets.push((j, i, w));
            stored.push(Edge {
                source: i,
                target: j,
                weight: w,
            });
        }
        let adjacency = CsrMatrix::from_triplets(n_nodes, n_nodes, &triplets);
        let degrees = (0..n_nodes).map(|r| adjacency.row_sum(r)).collect();
        Ok(Graph {
            n_nodes,
            edges: stored,
            adjacency,
            degrees,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(node).map(|(c, _)| c)
    }

    pub fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n_nodes];
        let mut stack = vec![0];
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !visited[u] {
                    visited[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n_nodes
    }

    /// Parses the edge-list text format: one `i j [weight]` per line, `#`
    /// comments, and an optional `n <N>` header fixing the node count.
    pub fn parse_edge_list(text: &str, origin: &Path) -> Result<Self> {
        let (declared, edges) = parse_edge_records(text, origin)?;
        let n_nodes = declared.unwrap_or_else(|| implied_nodes(&edges));
        Graph::new(n_nodes, &edges)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Graph::parse_edge_list(&text, path)
    }

    /// Serializes to the edge-list format, always with an `n` header.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n_nodes);
        for e in &self.edges {
            if e.weight == 1.0 {
                let _ = writeln!(out, "{} {}", e.source, e.target);
            } else {
                let _ = writeln!(out, "{} {} {}", e.source, e.target, e.weight);
            }
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn implied_nodes(edges: &[(usize, usize, f64)]) -> usize {
    edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0)
}

/// Header node count (if any) and raw `(i, j, w)` records of an edge list.
type EdgeRecords = (Option<usize>, Vec<(usize, usize, f64)>);

pub(crate) fn parse_edge_records(text: &str, origin: &Path) -> Result<EdgeRecords> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut declared = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "n" {
            let n = fields
                .get(1)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| parse_err(lineno + 1, "malformed node-count header".into()))?;
            declared = Some(n);
            continue;
        }
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(
                lineno + 1,
                format!("expected 2 or 3 fields, got {}", fields.len()),
            ));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(lineno + 1, format!("bad node index {s:?}: {e}")))
        };
        let i = index(fields[0])?;
        let j = index(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|e| parse_err(lineno + 1, format!("bad weight {s:?}: {e}")))?,
            None => 1.0,
        };
        edges.push((i, j, w));
    }
    Ok((declared, edges))
}

/// The symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}`.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    matrix: CsrMatrix,
    n_edges: usize,
}

impl NormalizedLaplacian {
    pub fn new(graph: &Graph) -> Result<Self> {
        let degrees = graph.degrees();
        if let Some(node) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::IsolatedNode(node));
        }
        let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        let n = graph.n_nodes();
        let mut triplets = Vec::with_capacity(n + graph.adjacency().nnz());
        for r in 0..n {
            triplets.push((r, r, 1.0));
            for (c, w) in graph.adjacency().row(r) {
                triplets.push((r, c, -w * inv_sqrt[r] * inv_sqrt[c]));
            }
        }
        Ok(NormalizedLaplacian {
            matrix: CsrMatrix::from_triplets(n, n, &triplets),
            n_edges: graph.n_edges(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.matvec_into(x, out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    /// Dirichlet energy `fᵀ L f`.
    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.len(),
            });
        }
        let lf = self.apply(f);
        Ok(f.iter().zip(&lf).map(|(a, b)| a * b).sum())
    }

    pub fn eigendecompose(&self) -> Result<SpectralDecomposition> {
        self.eigendecompose_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn eigendecompose_with_limit(&self, limit: usize) -> Result<SpectralDecomposition> {
        let n = self.dim();
        if n > limit {
            return Err(Error::TooLargeForDense { n, limit });
        }
        Ok(SpectralDecomposition::from_symmetric(self.to_dense()))
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Dense symmetric eigensolve. Each eigenvector is signed so that its
    /// largest-magnitude entry is positive.
    pub fn from_symmetric(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        let eig = SymmetricEigen::new(matrix);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(src);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            eigenvectors.set_column(dst, &(col * sign));
        }
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `U diag(values) Uᵀ`.
    pub fn spectral_matrix(&self, values: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        &scaled * self.eigenvectors.transpose()
    }

    /// Graph Fourier transform `Uᵀ f`.
    pub fn fourier(&self, f: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(f)
    }
}
