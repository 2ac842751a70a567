//! Dataset ingestion, preprocessing, synthetic corpora, splits, and
//! imbalance-ratio resampling.
//!
//! A [`Dataset`] bundles an `N x D` feature matrix, integer class labels, the
//! class vocabulary, and a graph over the samples. Feature files use the
//! RFC 4180 CSV format with a header row and a `label` column; when no edge
//! file accompanies the features, a cosine-similarity k-nearest-neighbor
//! graph is built over the min-max-normalized features (k = 10), so every
//! dataset is usable with the spectral pipeline out of the box.

mod sampling;
mod synthetic;

pub use sampling::{resample_imbalance, stratified_split, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticConfig};

use crate::graph::{read_edge_csv, Graph, GraphError};
use ndarray::Array2;
use std::io::{Read, Write};
use thiserror::Error;

/// Neighbor count for the fallback similarity graph.
pub const KNN_NEIGHBORS: usize = 10;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("graph: {0}")]
    Graph(#[from] GraphError),

    #[error("feature file has no `{0}` column")]
    MissingLabelColumn(String),

    #[error("unparseable value {value:?} in column {column} on row {row}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("unknown category {0:?}")]
    UnknownCategory(String),

    #[error("column contains NaN")]
    NaN,

    #[error("column is empty")]
    EmptyColumn,

    #[error("edge file addresses node {index} but the feature file has {n} rows")]
    EdgeOutOfRange { index: usize, n: usize },

    #[error("class {class:?} has {count} samples; at least {required} required")]
    ClassTooSmall { class: String, count: usize, required: usize },

    #[error("imbalance ratio {ratio} is infeasible: {reason}")]
    InfeasibleRatio { ratio: f64, reason: String },

    #[error("synthetic config infeasible: {0}")]
    InfeasibleConfig(String),

    #[error("dataset invariant violated: {0}")]
    Invalid(String),
}

/// Feature matrix, labels, class vocabulary, and the graph over samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub graph: Graph,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Imbalance ratio: total minority samples over majority-class samples.
    /// The majority class is the largest (ties to the lowest index).
    pub fn imbalance_ratio(&self) -> f64 {
        let counts = self.class_counts();
        let majority = counts.iter().copied().max().unwrap_or(0);
        if majority == 0 {
            return 0.0;
        }
        let minority_total: usize = counts.iter().sum::<usize>() - majority;
        minority_total as f64 / majority as f64
    }

    /// Check the construction invariants: finite features, labels in range,
    /// every class populated, graph size matching the sample count.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.graph.n() != self.n() {
            return Err(DataError::Invalid(format!(
                "graph has {} nodes but features have {} rows",
                self.graph.n(),
                self.n()
            )));
        }
        if !self.features.iter().all(|x| x.is_finite()) {
            return Err(DataError::Invalid("non-finite feature value".into()));
        }
        let counts = self.class_counts();
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(DataError::Invalid(format!("class {:?} has no samples", self.class_names[c])));
            }
        }
        if self.labels.iter().any(|&y| y >= self.num_classes()) {
            return Err(DataError::Invalid("label out of range".into()));
        }
        Ok(())
    }

    /// Features with every column min-max normalized.
    pub fn normalized_features(&self) -> Result<Array2<f64>, DataError> {
        normalize_columns(&self.features)
    }
}

/// One-hot encode `value` against an ordered vocabulary.
pub fn one_hot_encode(value: &str, vocabulary: &[&str]) -> Result<Vec<f64>, DataError> {
    let index = vocabulary
        .iter()
        .position(|&v| v == value)
        .ok_or_else(|| DataError::UnknownCategory(value.to_string()))?;
    let mut encoded = vec![0.0; vocabulary.len()];
    encoded[index] = 1.0;
    Ok(encoded)
}

/// Min-max normalize a column into `[0, 1]`.
///
/// `x~ = (x - min) / (max - min)`; a constant column (where the formula is
/// 0/0) maps to all zeros.
pub fn min_max_normalize(column: &[f64]) -> Result<Vec<f64>, DataError> {
    if column.is_empty() {
        return Err(DataError::EmptyColumn);
    }
    if column.iter().any(|x| x.is_nan()) {
        return Err(DataError::NaN);
    }
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; column.len()]);
    }
    Ok(column.iter().map(|&x| (x - min) / range).collect())
}

/// Min-max normalize each column of a feature matrix.
pub fn normalize_columns(features: &Array2<f64>) -> Result<Array2<f64>, DataError> {
    let mut out = features.clone();
    for mut col in out.columns_mut() {
        let normalized = min_max_normalize(&col.to_vec())?;
        for (slot, value) in col.iter_mut().zip(normalized) {
            *slot = value;
        }
    }
    Ok(out)
}

/// Load a dataset from a feature CSV and an optional edge CSV.
///
/// The class vocabulary is the set of distinct label strings sorted
/// lexicographically, so class indices are stable across runs and platforms.
/// Without an edge file the graph is the symmetrized cosine k-NN graph
/// (k = [`KNN_NEIGHBORS`]) over min-max-normalized features; nonpositive
/// similarities are dropped since edge weights must be nonnegative.
pub fn load_csv<R: Read>(
    features_reader: R,
    label_column: &str,
    edges_reader: Option<R>,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(features_reader);
    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> =
        headers.iter().enumerate().filter(|&(i, _)| i != label_idx).map(|(_, h)| h.to_string()).collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut label_strings: Vec<String> = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (col_idx, value) in record.iter().enumerate() {
            if col_idx == label_idx {
                label_strings.push(value.to_string());
            } else {
                let parsed = value.trim().parse::<f64>().map_err(|_| DataError::NonNumeric {
                    row: row_idx + 1,
                    column: headers[col_idx].to_string(),
                    value: value.to_string(),
                })?;
                row.push(parsed);
            }
        }
        rows.push(row);
    }

    let n = rows.len();
    let d = feature_names.len();
    let mut features = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            features[[i, j]] = value;
        }
    }

    let mut class_names: Vec<String> = label_strings.clone();
    class_names.sort();
    class_names.dedup();
    let labels: Vec<usize> = label_strings
        .iter()
        .map(|s| class_names.binary_search(s).expect("label came from the vocabulary"))
        .collect();

    let graph = match edges_reader {
        Some(reader) => {
            let edges = read_edge_csv(reader)?;
            for edge in &edges {
                for &index in &[edge.src, edge.dst] {
                    if index >= n {
                        return Err(DataError::EdgeOutOfRange { index, n });
                    }
                }
            }
            Graph::from_edges(n, &edges.iter().map(|e| (e.src, e.dst, e.weight)).collect::<Vec<_>>())?
        }
        None => knn_graph(&normalize_columns(&features)?, KNN_NEIGHBORS)?,
    };

    let dataset = Dataset { features, labels, class_names, feature_names, graph };
    dataset.validate()?;
    Ok(dataset)
}

/// Write the feature CSV (header + `label` column). Byte-stable for a given
/// dataset: floats print in shortest round-trip form.
pub fn write_features_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push("label");
    wtr.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut record: Vec<String> = dataset.features.row(i).iter().map(|x| x.to_string()).collect();
        record.push(dataset.class_names[dataset.labels[i]].clone());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Symmetrized cosine k-NN graph over feature rows.
fn knn_graph(features: &Array2<f64>, k: usize) -> Result<Graph, DataError> {
    let n = features.nrows();
    let norms: Vec<f64> = (0..n).map(|i| features.row(i).dot(&features.row(i)).sqrt()).collect();
    let cosine = |i: usize, j: usize| -> f64 {
        if norms[i] == 0.0 || norms[j] == 0.0 {
            return 0.0;
        }
        features.row(i).dot(&features.row(j)) / (norms[i] * norms[j])
    };

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..n {
        let mut sims: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, cosine(i, j))).collect();
        // Descending similarity, index as the deterministic tie-break.
        sims.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        for &(j, sim) in sims.iter().take(k) {
            if sim <= 0.0 {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if seen.insert(key) {
                edges.push((key.0, key.1, sim));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges)?)
}
