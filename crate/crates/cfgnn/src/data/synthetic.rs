//! Seeded synthetic failure-telemetry corpus.
//!
//! The generator is a stochastic block model with one community per class: a
//! deterministic ring backbone keeps every community internally connected
//! (so `inter_edge_prob = 0` gives exactly one component per class), extra
//! intra-community edges appear with `intra_edge_prob`, and cross-community
//! edges with `inter_edge_prob`. Features are drawn around a random unit mean
//! direction per class, scaled by `separation`, with isotropic noise on top.
//! Identical seeds produce identical datasets byte for byte.

use super::{DataError, Dataset};
use crate::graph::Graph;
use crate::rng::stream_rng;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    /// Number of classes; the first ("normal") is the majority.
    pub classes: usize,
    /// Total sample count when `class_counts` is not given.
    pub total: usize,
    /// Share of samples in the normal class (fraction mode).
    pub normal_fraction: f64,
    /// Explicit per-class counts; overrides `total`/`normal_fraction`.
    pub class_counts: Option<Vec<usize>>,
    pub feature_dim: usize,
    pub intra_edge_prob: f64,
    pub inter_edge_prob: f64,
    /// Distance scale between class feature means.
    pub separation: f64,
    /// Isotropic feature noise (standard deviation).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 16,
            total: 320,
            normal_fraction: 0.67,
            class_counts: None,
            feature_dim: 24,
            intra_edge_prob: 0.3,
            inter_edge_prob: 0.01,
            separation: 3.0,
            noise: 1.0,
            seed: 64,
        }
    }
}

impl SyntheticConfig {
    /// Per-class counts shaped like the published 16-class failure corpus
    /// from the network digital twin domain: 2456 normal samples against
    /// 1186 failure samples spread over 15 classes.
    ///
    /// Pinned as explicit counts: `round(3642 * 0.674) = 2455` would miss the
    /// published normal count by one.
    pub fn domain_a_counts() -> Vec<usize> {
        let mut counts = vec![2456];
        // 1186 = 80 + 14 * 79
        counts.push(80);
        counts.extend(std::iter::repeat(79).take(14));
        counts
    }

    /// Resolve the per-class counts this config describes.
    pub fn resolved_counts(&self) -> Result<Vec<usize>, DataError> {
        if self.classes < 2 {
            return Err(DataError::InfeasibleConfig("need at least 2 classes".into()));
        }
        let counts = match &self.class_counts {
            Some(counts) => {
                if counts.len() != self.classes {
                    return Err(DataError::InfeasibleConfig(format!(
                        "class_counts has {} entries for {} classes",
                        counts.len(),
                        self.classes
                    )));
                }
                counts.clone()
            }
            None => {
                if !(0.0..=1.0).contains(&self.normal_fraction) {
                    return Err(DataError::InfeasibleConfig("normal_fraction outside [0, 1]".into()));
                }
                let normal = (self.total as f64 * self.normal_fraction).round() as usize;
                if normal >= self.total {
                    return Err(DataError::InfeasibleConfig("normal class swallows every sample".into()));
                }
                let minority_total = self.total - normal;
                let minority_classes = self.classes - 1;
                let base = minority_total / minority_classes;
                let remainder = minority_total % minority_classes;
                let mut counts = vec![normal];
                for c in 0..minority_classes {
                    counts.push(base + usize::from(c < remainder));
                }
                counts
            }
        };
        if counts.iter().any(|&c| c == 0) {
            return Err(DataError::InfeasibleConfig("a class would get 0 samples".into()));
        }
        Ok(counts)
    }
}

/// Class names: `normal` plus zero-padded `fault-XX`.
fn class_names(classes: usize) -> Vec<String> {
    let mut names = vec!["normal".to_string()];
    for c in 1..classes {
        names.push(format!("fault-{c:02}"));
    }
    names
}

/// Generate the seeded synthetic dataset described by `config`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    for (name, p) in [("intra_edge_prob", config.intra_edge_prob), ("inter_edge_prob", config.inter_edge_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(DataError::InfeasibleConfig(format!("{name} = {p} outside [0, 1]")));
        }
    }
    let counts = config.resolved_counts()?;
    let names = class_names(config.classes);
    let n: usize = counts.iter().sum();
    let d = config.feature_dim;

    // Labels in class blocks; the vocabulary below is sorted, so map names
    // through their lexicographic ids.
    let mut sorted_names = names.clone();
    sorted_names.sort();
    let class_id: Vec<usize> =
        names.iter().map(|name| sorted_names.binary_search(name).expect("name in vocabulary")).collect();

    let mut labels = Vec::with_capacity(n);
    let mut block_of = Vec::with_capacity(n);
    for (block, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            labels.push(class_id[block]);
            block_of.push(block);
        }
    }

    // Class mean directions.
    let mut mean_rng = stream_rng(config.seed, "synthetic.means");
    let mut means = Array2::zeros((config.classes, d));
    for c in 0..config.classes {
        let mut norm_sq = 0.0;
        for j in 0..d {
            let x: f64 = StandardNormal.sample(&mut mean_rng);
            means[[c, j]] = x;
            norm_sq += x * x;
        }
        let scale = config.separation / norm_sq.sqrt().max(1e-12);
        for j in 0..d {
            means[[c, j]] *= scale;
        }
    }

    let mut feature_rng = stream_rng(config.seed, "synthetic.features");
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        let block = block_of[i];
        for j in 0..d {
            let noise: f64 = StandardNormal.sample(&mut feature_rng);
            features[[i, j]] = means[[block, j]] + config.noise * noise;
        }
    }

    // Block starts for the ring backbone.
    let mut starts = Vec::with_capacity(config.classes);
    let mut acc = 0;
    for &count in &counts {
        starts.push(acc);
        acc += count;
    }

    let mut edge_rng = stream_rng(config.seed, "synthetic.edges");
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    // Ring backbone inside each class keeps communities connected.
    for (block, &count) in counts.iter().enumerate() {
        let start = starts[block];
        if count >= 2 {
            for offset in 1..count {
                edges.push((start + offset - 1, start + offset, 1.0));
            }
            if count >= 3 {
                edges.push((start + count - 1, start, 1.0));
            }
        }
    }
    let backbone: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(a, b, _)| (a.min(b), a.max(b))).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if backbone.contains(&(i, j)) {
                continue;
            }
            let p = if block_of[i] == block_of[j] { config.intra_edge_prob } else { config.inter_edge_prob };
            if p > 0.0 && edge_rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }

    let graph = Graph::from_edges(n, &edges)?;
    let feature_names = (0..d).map(|j| format!("f{j:03}")).collect();
    let dataset = Dataset { features, labels, class_names: sorted_names, feature_names, graph };
    dataset.validate()?;
    Ok(dataset)
}
