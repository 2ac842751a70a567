//! Stratified splitting and imbalance-ratio resampling.

use super::{DataError, Dataset};
use crate::graph::Graph;
use crate::rng::stream_rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Stratified train/test split parameters. Splits are always stratified.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, seed: 64 }
    }
}

/// Split sample indices into train and test, preserving per-class
/// proportions.
///
/// Each class contributes `floor(count * fraction)` training samples,
/// clamped to `[1, count - 1]` so both sides keep every class; the global
/// remainder against `round(N * fraction)` is distributed one sample at a
/// time in seeded shuffled class order. Both returned index lists are sorted
/// ascending.
pub fn stratified_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(0.0 < spec.train_fraction && spec.train_fraction < 1.0) {
        return Err(DataError::Invalid(format!("train_fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let classes = dataset.num_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        members[y].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            return Err(DataError::ClassTooSmall {
                class: dataset.class_names[c].clone(),
                count: m.len(),
                required: 2,
            });
        }
    }

    let mut rng = stream_rng(spec.seed, "split");
    let mut take: Vec<usize> = members
        .iter()
        .map(|m| {
            let base = (m.len() as f64 * spec.train_fraction).floor() as usize;
            base.clamp(1, m.len() - 1)
        })
        .collect();

    // Settle the global remainder one sample at a time, in seeded order.
    let target = (dataset.n() as f64 * spec.train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut rng);
    let mut assigned: usize = take.iter().sum();
    let mut cursor = 0;
    while assigned < target && cursor < classes * 2 {
        let c = order[cursor % classes];
        if take[c] < members[c].len() - 1 {
            take[c] += 1;
            assigned += 1;
        }
        cursor += 1;
    }
    let mut cursor = 0;
    while assigned > target && cursor < classes * 2 {
        let c = order[cursor % classes];
        if take[c] > 1 {
            take[c] -= 1;
            assigned -= 1;
        }
        cursor += 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, m) in members.iter().enumerate() {
        let mut shuffled = m.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..take[c]]);
        test.extend_from_slice(&shuffled[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Resample minority classes so that the dataset's imbalance ratio (total
/// minority samples over majority samples) lands on `r` within rounding.
///
/// The majority class (largest; ties to the lowest class index) is left
/// untouched. The minority budget `round(r * majority)` is allocated across
/// minority classes proportionally to their current sizes (largest-remainder
/// rounding); classes above their allocation are down-sampled without
/// replacement, classes below it are up-sampled by duplicating seeded picks.
/// Retained nodes keep their original relative order; duplicates append at
/// the end and inherit their source node's edges.
pub fn resample_imbalance(dataset: &Dataset, r: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0 < r && r <= 1.0) {
        return Err(DataError::InfeasibleRatio { ratio: r, reason: "ratio must lie in (0, 1]".into() });
    }
    let counts = dataset.class_counts();
    let classes = counts.len();
    let majority = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .expect("dataset has classes");
    let minority_total: usize = counts.iter().enumerate().filter(|&(c, _)| c != majority).map(|(_, &n)| n).sum();
    if minority_total == 0 {
        return Err(DataError::InfeasibleRatio { ratio: r, reason: "no minority samples".into() });
    }
    let budget = (r * counts[majority] as f64).round() as usize;

    // Largest-remainder allocation proportional to current sizes.
    let mut targets = vec![0usize; classes];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut allocated = 0usize;
    for (c, &count) in counts.iter().enumerate() {
        if c == majority {
            targets[c] = count;
            continue;
        }
        let exact = budget as f64 * count as f64 / minority_total as f64;
        targets[c] = exact.floor() as usize;
        allocated += targets[c];
        remainders.push((c, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    for &(c, _) in remainders.iter().take(budget.saturating_sub(allocated)) {
        targets[c] += 1;
    }
    if let Some(c) = (0..classes).find(|&c| targets[c] == 0) {
        return Err(DataError::InfeasibleRatio {
            ratio: r,
            reason: format!("class {:?} would end up with 0 samples", dataset.class_names[c]),
        });
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        members[y].push(i);
    }

    let mut rng = stream_rng(seed, "resample");
    let mut retained: Vec<usize> = Vec::new();
    let mut duplicates: Vec<usize> = Vec::new();
    for (c, m) in members.iter().enumerate() {
        if targets[c] <= m.len() {
            let mut picks = m.clone();
            picks.shuffle(&mut rng);
            picks.truncate(targets[c]);
            retained.extend(picks);
        } else {
            retained.extend_from_slice(m);
            for _ in 0..(targets[c] - m.len()) {
                duplicates.push(m[rng.gen_range(0..m.len())]);
            }
        }
    }
    retained.sort_unstable();

    let origin: Vec<usize> = retained.iter().chain(duplicates.iter()).copied().collect();
    let new_n = origin.len();
    let mut features = Array2::zeros((new_n, dataset.feature_dim()));
    let mut labels = Vec::with_capacity(new_n);
    let mut node_ids = Vec::with_capacity(new_n);
    for (slot, &src) in origin.iter().enumerate() {
        features.row_mut(slot).assign(&dataset.features.row(src));
        labels.push(dataset.labels[src]);
        let base_id = dataset.graph.node_ids()[src].clone();
        if slot < retained.len() {
            node_ids.push(base_id);
        } else {
            node_ids.push(format!("{base_id}+d{}", slot - retained.len()));
        }
    }
    // Weights pull back through the origin map; a duplicate keeps its
    // source's edges and no self edge (w[src][src] = 0).
    let mut weights = Array2::zeros((new_n, new_n));
    for a in 0..new_n {
        for b in 0..new_n {
            if a != b {
                weights[[a, b]] = dataset.graph.weights()[[origin[a], origin[b]]];
            }
        }
    }
    let graph = Graph::from_weights(weights, Some(node_ids))?;
    let resampled = Dataset {
        features,
        labels,
        class_names: dataset.class_names.clone(),
        feature_names: dataset.feature_names.clone(),
        graph,
    };
    resampled.validate()?;
    Ok(resampled)
}
