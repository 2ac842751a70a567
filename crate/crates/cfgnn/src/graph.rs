//! Undirected weighted graphs, their structural matrices, and product-graph
//! constructions.
//!
//! Graphs are dense and desk-scale by design: weights live in an `n x n`
//! symmetric matrix with a zero diagonal, and the Laplacian `L = D - W` is
//! materialized directly. Cartesian products are built either edge-wise or
//! through the Kronecker sum `L1 (+) L2 = L1 (x) I + I (x) L2`; under the
//! lexicographic vertex ordering the two agree exactly, which the tests pin
//! down.

use ndarray::{Array2, ArrayView2};
use std::collections::HashSet;
use std::io::{Read, Write};
use thiserror::Error;

/// Hard cap on product-graph sizes. Eigendecompositions are dense `O(n^3)`,
/// so anything past this is a mistake, not a workload.
pub const MAX_PRODUCT_NODES: usize = 4096;

/// Asymmetry beyond this is rejected instead of silently symmetrized.
const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("weights are asymmetric beyond tolerance: |w[{i}][{j}] - w[{j}][{i}]| = {delta:e}")]
    Asymmetric { i: usize, j: usize, delta: f64 },

    #[error("negative weight {weight} at ({i}, {j})")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("self-loop at node {0} (diagonal must be zero)")]
    SelfLoop(usize),

    #[error("product size {0} exceeds the {MAX_PRODUCT_NODES}-node guard")]
    SizeGuard(usize),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate undirected edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("edge list has wrong header: expected `src,dst,weight`")]
    BadHeader,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("unparseable field {field} on record {record}: {value:?}")]
    BadField { record: usize, field: &'static str, value: String },
}

/// A symmetric real matrix. Construction checks symmetry to 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self, GraphError> {
        let (r, c) = m.dim();
        if r != c {
            return Err(GraphError::NotSquare(r, c));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let delta = (m[[i, j]] - m[[j, i]]).abs();
                if delta > 1e-12 {
                    return Err(GraphError::Asymmetric { i, j, delta });
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Wrap a matrix that is symmetric by construction.
    pub(crate) fn new_unchecked(m: Array2<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymMatrix(m)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Kronecker sum `self (x) I_n + I_m (x) other`.
    pub fn kronecker_sum(&self, other: &SymMatrix) -> Result<SymMatrix, GraphError> {
        let (m, n) = (self.n(), other.n());
        guard_product_size(m, n)?;
        let size = m * n;
        let mut out = Array2::zeros((size, size));
        // a (x) I_n
        for i in 0..m {
            for j in 0..m {
                let a = self.0[[i, j]];
                if a != 0.0 {
                    for k in 0..n {
                        out[[i * n + k, j * n + k]] += a;
                    }
                }
            }
        }
        // I_m (x) b
        for k in 0..m {
            for i in 0..n {
                for j in 0..n {
                    out[[k * n + i, k * n + j]] += other.0[[i, j]];
                }
            }
        }
        Ok(SymMatrix(out))
    }
}

/// Standard Kronecker product with block `(i, j) = a[i][j] * b`.
pub fn kronecker_product(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>, GraphError> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    guard_product_size(ar.max(ac), br.max(bc))?;
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let scale = a[[i, j]];
            if scale == 0.0 {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[[i * br + p, j * bc + q]] = scale * b[[p, q]];
                }
            }
        }
    }
    Ok(out)
}

fn guard_product_size(m: usize, n: usize) -> Result<(), GraphError> {
    let size = m.checked_mul(n).ok_or(GraphError::SizeGuard(usize::MAX))?;
    if size > MAX_PRODUCT_NODES {
        return Err(GraphError::SizeGuard(size));
    }
    Ok(())
}

/// Lexicographic index of the product-graph vertex `(i1, i2)`:
/// vertices are ordered `(0,0), (0,1), ..., (n1-1, n2-1)`.
///
/// Panics if `i2 >= n2`; the caller owns the `i1 < n1` half of the contract.
pub fn lex_index(i1: usize, i2: usize, n2: usize) -> usize {
    assert!(i2 < n2, "lex_index: i2 = {i2} out of range for n2 = {n2}");
    i1 * n2 + i2
}

/// Inverse of [`lex_index`].
pub fn lex_split(index: usize, n2: usize) -> (usize, usize) {
    assert!(n2 > 0, "lex_split: n2 must be positive");
    (index / n2, index % n2)
}

/// An undirected weighted simple graph with dense adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: Array2<f64>,
    node_ids: Vec<String>,
}

impl Graph {
    /// Build a graph from a weight matrix.
    ///
    /// Mild asymmetry (up to 1e-9, e.g. CSV rounding noise) is repaired by
    /// averaging `(W + W^T) / 2`; anything larger is an error. The diagonal
    /// must be exactly zero and all weights nonnegative.
    pub fn from_weights(weights: Array2<f64>, node_ids: Option<Vec<String>>) -> Result<Self, GraphError> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(GraphError::NotSquare(r, c));
        }
        let mut w = weights;
        for i in 0..r {
            if w[[i, i]] != 0.0 {
                return Err(GraphError::SelfLoop(i));
            }
            for j in (i + 1)..r {
                let delta = (w[[i, j]] - w[[j, i]]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(GraphError::Asymmetric { i, j, delta });
                }
                let avg = 0.5 * (w[[i, j]] + w[[j, i]]);
                if avg < 0.0 {
                    return Err(GraphError::NegativeWeight { i, j, weight: avg });
                }
                w[[i, j]] = avg;
                w[[j, i]] = avg;
            }
        }
        let ids = match node_ids {
            Some(ids) => {
                assert_eq!(ids.len(), r, "node id count must match node count");
                ids
            }
            None => (0..r).map(|i| i.to_string()).collect(),
        };
        Ok(Graph { weights: w, node_ids: ids })
    }

    /// Build from an undirected edge list over `n` nodes.
    ///
    /// Rejects self-loops, negative weights, and duplicate undirected edges
    /// (seeing both `(a, b)` and `(b, a)` counts as a duplicate).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut w = Array2::zeros((n, n));
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for &(src, dst, weight) in edges {
            for &e in &[src, dst] {
                if e >= n {
                    return Err(GraphError::IndexOutOfRange { index: e, n });
                }
            }
            if src == dst {
                return Err(GraphError::SelfLoop(src));
            }
            if weight < 0.0 {
                return Err(GraphError::NegativeWeight { i: src, j: dst, weight });
            }
            let key = (src.min(dst), src.max(dst));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            w[[src, dst]] = weight;
            w[[dst, src]] = weight;
        }
        Graph::from_weights(w, None)
    }

    /// Path graph `P_n` with unit weights.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Graph::from_edges(n, &edges)
    }

    /// Cycle graph `C_n` with unit weights.
    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        assert!(n >= 3, "a simple cycle needs at least 3 nodes");
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        edges.push((n - 1, 0, 1.0));
        Graph::from_edges(n, &edges)
    }

    /// Complete graph `K_n` with unit weights.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j, 1.0));
            }
        }
        Graph::from_edges(n, &edges)
    }

    /// Graph with `n` nodes and no edges.
    pub fn edgeless(n: usize) -> Self {
        Graph {
            weights: Array2::zeros((n, n)),
            node_ids: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    /// Node degrees `d[i] = sum_j w[i][j]`.
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.weights.row(i).sum()).collect()
    }

    /// Sum of weights over undirected edges.
    pub fn total_edge_weight(&self) -> f64 {
        0.5 * self.weights.sum()
    }

    /// Number of edges with nonzero weight.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[[i, j]] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// The combinatorial Laplacian `L = D - W`.
    pub fn laplacian(&self) -> SymMatrix {
        let n = self.n();
        let degrees = self.degrees();
        let mut l = self.weights.mapv(|w| -w);
        for i in 0..n {
            l[[i, i]] = degrees[i];
        }
        SymMatrix::new_unchecked(l)
    }

    /// Cartesian product `self [] other` under lexicographic vertex ordering:
    /// `w((i1,i2),(j1,j2)) = w1(i1,j1) d(i2,j2) + d(i1,j1) w2(i2,j2)`.
    pub fn cartesian_product(&self, other: &Graph) -> Result<Graph, GraphError> {
        let (n1, n2) = (self.n(), other.n());
        guard_product_size(n1, n2)?;
        let size = n1 * n2;
        let mut w = Array2::zeros((size, size));
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let row = lex_index(i1, i2, n2);
                // w1 edge, second coordinate fixed
                for j1 in 0..n1 {
                    let w1 = self.weights[[i1, j1]];
                    if w1 != 0.0 {
                        w[[row, lex_index(j1, i2, n2)]] += w1;
                    }
                }
                // w2 edge, first coordinate fixed
                for j2 in 0..n2 {
                    let w2 = other.weights[[i2, j2]];
                    if w2 != 0.0 {
                        w[[row, lex_index(i1, j2, n2)]] += w2;
                    }
                }
            }
        }
        let ids = (0..n1)
            .flat_map(|i1| {
                let left = &self.node_ids[i1];
                (0..n2).map(move |i2| format!("({left},{})", other.node_ids[i2]))
            })
            .collect();
        Ok(Graph { weights: w, node_ids: ids })
    }

    /// Number of connected components (union-find over nonzero weights).
    pub fn connected_components(&self) -> usize {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[[i, j]] != 0.0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        (0..n).filter(|&i| find(&mut parent, i) == i).count()
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.connected_components() == 1
    }
}

/// One record of the `src,dst,weight` edge-list format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Read an edge list in the `src,dst,weight` CSV format (RFC 4180, UTF-8,
/// `.` decimal separator). Duplicate undirected edges are rejected here so
/// that a malformed file cannot silently double weights.
pub fn read_edge_csv<R: Read>(reader: R) -> Result<Vec<Edge>, GraphError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        if headers.len() != 3 || &headers[0] != "src" || &headers[1] != "dst" || &headers[2] != "weight" {
            return Err(GraphError::BadHeader);
        }
    }
    let mut edges = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let parse_usize = |field: &'static str, value: &str| {
            value.trim().parse::<usize>().map_err(|_| GraphError::BadField {
                record: idx + 1,
                field,
                value: value.to_string(),
            })
        };
        let src = parse_usize("src", &record[0])?;
        let dst = parse_usize("dst", &record[1])?;
        let weight = record[2].trim().parse::<f64>().map_err(|_| GraphError::BadField {
            record: idx + 1,
            field: "weight",
            value: record[2].to_string(),
        })?;
        if src == dst {
            return Err(GraphError::SelfLoop(src));
        }
        let key = (src.min(dst), src.max(dst));
        if !seen.insert(key) {
            return Err(GraphError::DuplicateEdge(key.0, key.1));
        }
        edges.push(Edge { src, dst, weight });
    }
    Ok(edges)
}

/// Write an edge list in the `src,dst,weight` format. Emits each undirected
/// edge once with `src < dst`, in row-major order, so output is byte-stable.
pub fn write_edge_csv<W: Write>(graph: &Graph, writer: W) -> Result<(), GraphError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["src", "dst", "weight"])?;
    let n = graph.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = graph.weights()[[i, j]];
            if w != 0.0 {
                wtr.write_record([i.to_string(), j.to_string(), w.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
