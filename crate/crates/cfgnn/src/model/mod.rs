//! The trainable class-branch spectral classifier.
//!
//! Architecture: `num_layers` spectral layers feed `C` parallel class
//! branches. Every branch shares the per-layer feature transforms `W`, but
//! owns its filter parameters — per-node polynomial coefficients `Psi`, plus
//! an eigenvalue weighting (variant V) or a diagonal eigenvector attention
//! (variant E). A branch ends in one column of the linear head, giving an
//! `N x C` score matrix; row-softmax turns scores into class probabilities.
//! The global-baseline variant collapses everything to a single stream with
//! one shared row-constant filter, which is exactly what the base variant
//! degenerates to when its `Psi` rows are constant and equal across branches.
//!
//! All parameters live in one flat `theta` vector behind a [`ParamLayout`];
//! gradients come from hand-written reverse-mode passes and are checked
//! against central finite differences in the tests.

mod adam;
mod checkpoint;
mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use train::{adjacency_dropout, train, EpochStats, TrainConfig};

use crate::filters::{polynomial_values, softplus, BasisKind, FilterError, SOFTPLUS_UNIT_RAW};
use crate::graph::GraphError;
use crate::rng::stream_rng;
use crate::spectral::{SpectralBasis, SpectralError};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are floored at this value before `ln` so a confidently
/// wrong prediction cannot produce an infinite loss.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Clip range for inverse-frequency class weights.
pub const CLASS_WEIGHT_CLIP: (f64, f64) = (0.1, 100.0);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {0} (training diverged?)")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("filter: {0}")]
    Filter(#[from] FilterError),

    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),

    #[error("graph: {0}")]
    Graph(#[from] GraphError),

    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which spectral filter family the model trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Per-node, per-class polynomial filters.
    #[serde(rename = "base")]
    Base,
    /// Base plus a positive eigenvalue weighting per class branch.
    #[serde(rename = "v")]
    Eigenvalue,
    /// Base plus a diagonal eigenvector attention per class branch.
    #[serde(rename = "e")]
    Eigenvector,
    /// One globally shared row-constant filter; the comparison arm.
    #[serde(rename = "global")]
    GlobalBaseline,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Eigenvalue => "v",
            Variant::Eigenvector => "e",
            Variant::GlobalBaseline => "global",
        }
    }

    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Eigenvalue, Variant::Eigenvector, Variant::GlobalBaseline];
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Variant::Base),
            "v" => Ok(Variant::Eigenvalue),
            "e" => Ok(Variant::Eigenvector),
            "global" => Ok(Variant::GlobalBaseline),
            other => Err(format!("unknown variant {other:?} (expected base|v|e|global)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static shape information for a model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub num_layers: usize,
    pub order: usize,
}

/// One named slice of the flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Deterministic block table over the flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    blocks: Vec<ParamBlock>,
    len: usize,
}

impl ParamLayout {
    fn new() -> Self {
        ParamLayout { blocks: Vec::new(), len: 0 }
    }

    fn push(&mut self, name: String, rows: usize, cols: usize) {
        self.blocks.push(ParamBlock { name, rows, cols, offset: self.len });
        self.len += rows * cols;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> &ParamBlock {
        self.blocks.iter().find(|b| b.name == name).unwrap_or_else(|| panic!("no parameter block named {name:?}"))
    }
}

/// Row-stochastic class probabilities plus the argmax labels
/// (ties toward the lowest class index).
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Prediction {
    fn from_scores(scores: Array2<f64>) -> Result<Self, ModelError> {
        if !scores.iter().all(|x| x.is_finite()) {
            return Err(ModelError::NonFinite("activation"));
        }
        let (n, c) = scores.dim();
        let mut probs = Array2::zeros((n, c));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let row = scores.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                probs[[i, j]] = e;
                denom += e;
            }
            let mut best = 0usize;
            for j in 0..c {
                probs[[i, j]] /= denom;
                if probs[[i, j]] > probs[[i, best]] {
                    best = j;
                }
            }
            labels.push(best);
        }
        Ok(Prediction { probs, labels })
    }
}

/// Per-(layer, stream) intermediates kept for the backward pass.
struct LayerCache {
    spectrum: Array2<f64>,        // U^T (H_in W)
    g: Vec<Array2<f64>>,          // per k: U (w_k (*) spectrum)
    pre_activation: Array2<f64>,  // F before ReLU
    h_out: Array2<f64>,
    diag: Option<Array1<f64>>,    // gamma or alpha values in effect
}

/// Everything `backward` needs from a `forward` call.
pub struct ForwardCache {
    layers: Vec<Vec<LayerCache>>, // [layer][stream]
    scores: Array2<f64>,
    pvals: Array2<f64>,           // (K+1) x n polynomial values
}

enum PsiCol<'a> {
    PerNode(ArrayView1<'a, f64>),
    Shared(f64),
}

impl PsiCol<'_> {
    fn at(&self, i: usize) -> f64 {
        match self {
            PsiCol::PerNode(col) => col[i],
            PsiCol::Shared(value) => *value,
        }
    }
}

/// The class-Fourier graph neural network.
#[derive(Debug, Clone)]
pub struct CfgnnModel {
    variant: Variant,
    dims: ModelDims,
    basis_kind: BasisKind,
    theta: Vec<f64>,
    layout: ParamLayout,
}

impl CfgnnModel {
    /// Build a model with seeded initialization: Glorot-normal feature
    /// transforms and head, identity filters (`Psi` column 0 equal to 1,
    /// `gamma = 1`, `alpha = 1`), zero head bias.
    pub fn new(variant: Variant, dims: ModelDims, basis_kind: BasisKind, seed: u64) -> Self {
        let layout = Self::build_layout(variant, &dims);
        let mut theta = vec![0.0; layout.len()];
        let mut rng = stream_rng(seed, "init");
        for block in layout.blocks() {
            let slice = &mut theta[block.range()];
            if block.name.ends_with(".w") && block.name.starts_with("layer") {
                let std = (2.0 / (block.rows + block.cols) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("valid std");
                for slot in slice.iter_mut() {
                    *slot = normal.sample(&mut rng);
                }
            } else if block.name == "head.w" {
                let std = (2.0 / (block.rows + block.cols) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("valid std");
                for slot in slice.iter_mut() {
                    *slot = normal.sample(&mut rng);
                }
            } else if block.name.ends_with(".psi") {
                // Identity polynomial: coefficient 1 on p_0.
                for row in 0..block.rows {
                    slice[row * block.cols] = 1.0;
                }
            } else if block.name.ends_with(".gamma_raw") {
                slice.fill(SOFTPLUS_UNIT_RAW);
            } else if block.name.ends_with(".alpha") {
                slice.fill(1.0);
            }
            // head.b stays zero
        }
        CfgnnModel { variant, dims, basis_kind, theta, layout }
    }

    fn build_layout(variant: Variant, dims: &ModelDims) -> ParamLayout {
        let mut layout = ParamLayout::new();
        let k1 = dims.order + 1;
        for l in 0..dims.num_layers {
            let in_dim = if l == 0 { dims.input_dim } else { dims.hidden_dim };
            layout.push(format!("layer{l}.w"), in_dim, dims.hidden_dim);
            match variant {
                Variant::GlobalBaseline => layout.push(format!("layer{l}.psi"), 1, k1),
                _ => {
                    for c in 0..dims.num_classes {
                        layout.push(format!("layer{l}.branch{c}.psi"), dims.n, k1);
                        match variant {
                            Variant::Eigenvalue => layout.push(format!("layer{l}.branch{c}.gamma_raw"), dims.n, 1),
                            Variant::Eigenvector => layout.push(format!("layer{l}.branch{c}.alpha"), dims.n, 1),
                            _ => {}
                        }
                    }
                }
            }
        }
        layout.push("head.w".to_string(), dims.hidden_dim, dims.num_classes);
        layout.push("head.b".to_string(), 1, dims.num_classes);
        layout
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn basis_kind(&self) -> BasisKind {
        self.basis_kind
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut Vec<f64> {
        &mut self.theta
    }

    pub(crate) fn from_parts(
        variant: Variant,
        dims: ModelDims,
        basis_kind: BasisKind,
        theta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let layout = Self::build_layout(variant, &dims);
        if theta.len() != layout.len() {
            return Err(ModelError::Incompatible(format!(
                "parameter vector has {} entries, layout expects {}",
                theta.len(),
                layout.len()
            )));
        }
        Ok(CfgnnModel { variant, dims, basis_kind, theta, layout })
    }

    fn num_streams(&self) -> usize {
        match self.variant {
            Variant::GlobalBaseline => 1,
            _ => self.dims.num_classes,
        }
    }

    fn stream_of_class(&self, c: usize) -> usize {
        match self.variant {
            Variant::GlobalBaseline => 0,
            _ => c,
        }
    }

    fn block_view(&self, name: &str) -> ArrayView2<'_, f64> {
        let block = self.layout.block(name);
        ArrayView2::from_shape((block.rows, block.cols), &self.theta[block.range()]).expect("layout shape")
    }

    fn psi_col(&self, layer: usize, stream: usize, k: usize) -> PsiCol<'_> {
        match self.variant {
            Variant::GlobalBaseline => {
                let block = self.layout.block(&format!("layer{layer}.psi"));
                PsiCol::Shared(self.theta[block.offset + k])
            }
            _ => {
                let block = self.layout.block(&format!("layer{layer}.branch{stream}.psi"));
                let view = ArrayView2::from_shape((block.rows, block.cols), &self.theta[block.range()])
                    .expect("layout shape");
                // Column k of a row-major (n, K+1) block; strided view.
                PsiCol::PerNode(view.into_shape_with_order((block.rows, block.cols)).unwrap().index_axis_move(ndarray::Axis(1), k))
            }
        }
    }

    /// Spectral diagonal (gamma or alpha) for a (layer, stream), when the
    /// variant has one.
    fn stream_diag(&self, layer: usize, stream: usize) -> Option<Array1<f64>> {
        match self.variant {
            Variant::Eigenvalue => {
                let block = self.layout.block(&format!("layer{layer}.branch{stream}.gamma_raw"));
                Some(Array1::from_iter(self.theta[block.range()].iter().map(|&x| softplus(x))))
            }
            Variant::Eigenvector => {
                let block = self.layout.block(&format!("layer{layer}.branch{stream}.alpha"));
                Some(Array1::from_iter(self.theta[block.range()].iter().copied()))
            }
            _ => None,
        }
    }

    /// Full forward pass; returns probabilities plus the cache consumed by
    /// [`CfgnnModel::backward`].
    pub fn forward(&self, basis: &SpectralBasis, x: &Array2<f64>) -> Result<(Prediction, ForwardCache), ModelError> {
        let n = self.dims.n;
        if basis.n() != n {
            return Err(ModelError::DimensionMismatch { expected: n, got: basis.n() });
        }
        if x.nrows() != n {
            return Err(ModelError::DimensionMismatch { expected: n, got: x.nrows() });
        }
        if x.ncols() != self.dims.input_dim {
            return Err(ModelError::DimensionMismatch { expected: self.dims.input_dim, got: x.ncols() });
        }

        let pvals = polynomial_values(basis.eigenvalues(), self.dims.order, self.basis_kind, basis.lambda_max())?;
        let streams = self.num_streams();
        let mut layers: Vec<Vec<LayerCache>> = Vec::with_capacity(self.dims.num_layers);

        for l in 0..self.dims.num_layers {
            let w = self.block_view(&format!("layer{l}.w"));
            let mut row = Vec::with_capacity(streams);
            for s in 0..streams {
                let h_in = if l == 0 { x } else { &layers[l - 1][s].h_out };
                let a = h_in.dot(&w);
                let spectrum = basis.u().t().dot(&a);
                let diag = self.stream_diag(l, s);

                let mut pre_activation = Array2::zeros(a.raw_dim());
                let mut g = Vec::with_capacity(self.dims.order + 1);
                for k in 0..=self.dims.order {
                    let mut weighted = spectrum.clone();
                    for (j, mut wrow) in weighted.rows_mut().into_iter().enumerate() {
                        let mut gain = pvals[[k, j]];
                        if let Some(d) = &diag {
                            gain *= d[j];
                        }
                        wrow.mapv_inplace(|v| v * gain);
                    }
                    let g_k = basis.u().dot(&weighted);
                    let psi = self.psi_col(l, s, k);
                    for (i, grow) in g_k.rows().into_iter().enumerate() {
                        let coeff = psi.at(i);
                        if coeff != 0.0 {
                            let mut frow = pre_activation.row_mut(i);
                            frow.zip_mut_with(&grow, |f, &gv| *f += coeff * gv);
                        }
                    }
                    g.push(g_k);
                }
                let h_out = pre_activation.mapv(|v: f64| v.max(0.0));
                row.push(LayerCache { spectrum, g, pre_activation, h_out, diag });
            }
            layers.push(row);
        }

        let head_w = self.block_view("head.w");
        let head_b = self.block_view("head.b");
        let mut scores = Array2::zeros((n, self.dims.num_classes));
        for c in 0..self.dims.num_classes {
            let s = self.stream_of_class(c);
            let h_final = &layers[self.dims.num_layers - 1][s].h_out;
            let w_col = head_w.column(c);
            for i in 0..n {
                scores[[i, c]] = h_final.row(i).dot(&w_col) + head_b[[0, c]];
            }
        }

        let prediction = Prediction::from_scores(scores.clone())?;
        Ok((prediction, ForwardCache { layers, scores, pvals }))
    }

    /// Forward without keeping intermediates; argmax ties break low.
    pub fn predict(&self, basis: &SpectralBasis, x: &Array2<f64>) -> Result<Prediction, ModelError> {
        self.forward(basis, x).map(|(p, _)| p)
    }

    /// Reverse-mode gradient of a scalar loss with respect to every
    /// parameter, given the loss gradient with respect to the score matrix.
    pub fn backward(
        &self,
        basis: &SpectralBasis,
        x: &Array2<f64>,
        cache: &ForwardCache,
        d_scores: &Array2<f64>,
    ) -> Result<Vec<f64>, ModelError> {
        let n = self.dims.n;
        if d_scores.dim() != (n, self.dims.num_classes) {
            return Err(ModelError::DimensionMismatch { expected: n, got: d_scores.nrows() });
        }
        let streams = self.num_streams();
        let last = self.dims.num_layers - 1;
        let mut grad = vec![0.0; self.layout.len()];

        // Head.
        let head_w = self.block_view("head.w");
        let mut d_h: Vec<Array2<f64>> = (0..streams).map(|_| Array2::zeros((n, self.dims.hidden_dim))).collect();
        {
            let head_w_block = self.layout.block("head.w").clone();
            let head_b_block = self.layout.block("head.b").clone();
            for c in 0..self.dims.num_classes {
                let s = self.stream_of_class(c);
                let h_final = &cache.layers[last][s].h_out;
                let mut db = 0.0;
                for i in 0..n {
                    let ds = d_scores[[i, c]];
                    db += ds;
                    if ds != 0.0 {
                        for j in 0..self.dims.hidden_dim {
                            grad[head_w_block.offset + j * self.dims.num_classes + c] += h_final[[i, j]] * ds;
                            d_h[s][[i, j]] += ds * head_w[[j, c]];
                        }
                    }
                }
                grad[head_b_block.offset + c] += db;
            }
        }

        // Layers, top down.
        for l in (0..self.dims.num_layers).rev() {
            let w = self.block_view(&format!("layer{l}.w")).to_owned();
            let w_block = self.layout.block(&format!("layer{l}.w")).clone();
            let mut d_h_next: Vec<Array2<f64>> = if l > 0 {
                (0..streams).map(|_| Array2::zeros((n, self.dims.hidden_dim))).collect()
            } else {
                Vec::new()
            };

            for s in 0..streams {
                let layer = &cache.layers[l][s];
                // ReLU mask.
                let mut d_f = d_h[s].clone();
                d_f.zip_mut_with(&layer.pre_activation, |g, &f| {
                    if f <= 0.0 {
                        *g = 0.0;
                    }
                });

                let mut d_spectrum: Array2<f64> = Array2::zeros(layer.spectrum.raw_dim());
                let mut d_diag: Option<Array1<f64>> =
                    layer.diag.as_ref().map(|_| Array1::zeros(n));

                for k in 0..=self.dims.order {
                    // dPsi[i][k] = g_k[i] . dF[i]
                    match self.variant {
                        Variant::GlobalBaseline => {
                            let block = self.layout.block(&format!("layer{l}.psi")).clone();
                            let mut acc = 0.0;
                            for (grow, frow) in layer.g[k].rows().into_iter().zip(d_f.rows()) {
                                acc += grow.dot(&frow);
                            }
                            grad[block.offset + k] += acc;
                        }
                        _ => {
                            let block = self.layout.block(&format!("layer{l}.branch{s}.psi")).clone();
                            for (i, (grow, frow)) in layer.g[k].rows().into_iter().zip(d_f.rows()).enumerate() {
                                grad[block.offset + i * (self.dims.order + 1) + k] += grow.dot(&frow);
                            }
                        }
                    }

                    // M_k = U^T (psi_k (*) dF)
                    let psi = self.psi_col(l, s, k);
                    let mut scaled = d_f.clone();
                    for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
                        let coeff = psi.at(i);
                        row.mapv_inplace(|v| v * coeff);
                    }
                    let m_k = basis.u().t().dot(&scaled);

                    // dS += w_k (*) M_k  and  dDiag[j] += p_k[j] * (M_k[j] . S[j])
                    for j in 0..n {
                        let mut gain = cache.pvals[[k, j]];
                        if let Some(d) = &layer.diag {
                            if let Some(dd) = d_diag.as_mut() {
                                dd[j] += cache.pvals[[k, j]] * m_k.row(j).dot(&layer.spectrum.row(j));
                            }
                            gain *= d[j];
                        }
                        let mut ds_row = d_spectrum.row_mut(j);
                        ds_row.zip_mut_with(&m_k.row(j), |acc, &m| *acc += gain * m);
                    }
                }

                // Diagonal parameter gradients.
                if let Some(dd) = d_diag {
                    match self.variant {
                        Variant::Eigenvalue => {
                            let block = self.layout.block(&format!("layer{l}.branch{s}.gamma_raw")).clone();
                            for j in 0..n {
                                let raw = self.theta[block.offset + j];
                                let sigmoid = 1.0 / (1.0 + (-raw).exp());
                                grad[block.offset + j] += dd[j] * sigmoid;
                            }
                        }
                        Variant::Eigenvector => {
                            let block = self.layout.block(&format!("layer{l}.branch{s}.alpha")).clone();
                            for j in 0..n {
                                grad[block.offset + j] += dd[j];
                            }
                        }
                        _ => unreachable!("diag gradients only exist for V/E variants"),
                    }
                }

                // dA = U dS; then the shared feature transform.
                let d_a = basis.u().dot(&d_spectrum);
                let h_in: &Array2<f64> = if l == 0 { x } else { &cache.layers[l - 1][s].h_out };
                let dw = h_in.t().dot(&d_a);
                for (slot, &value) in grad[w_block.range()].iter_mut().zip(dw.iter()) {
                    *slot += value;
                }
                if l > 0 {
                    d_h_next[s] = d_a.dot(&w.t());
                }
            }
            if l > 0 {
                d_h = d_h_next;
            }
        }
        Ok(grad)
    }

    pub fn scores<'c>(&self, cache: &'c ForwardCache) -> &'c Array2<f64> {
        &cache.scores
    }
}

/// Inverse-frequency or uniform class weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeightMode {
    InverseFrequency,
    None,
}

/// Class weights over the evaluated subset: `w_c = N / (C * N_c)`, clipped
/// to [`CLASS_WEIGHT_CLIP`]. Classes absent from the subset are pinned to
/// the upper clip; they contribute nothing to a loss over that subset.
pub fn class_weights(mode: ClassWeightMode, labels: &[usize], indices: &[usize], num_classes: usize) -> Vec<f64> {
    match mode {
        ClassWeightMode::None => vec![1.0; num_classes],
        ClassWeightMode::InverseFrequency => {
            let mut counts = vec![0usize; num_classes];
            for &i in indices {
                counts[labels[i]] += 1;
            }
            let total = indices.len() as f64;
            (0..num_classes)
                .map(|c| {
                    if counts[c] == 0 {
                        CLASS_WEIGHT_CLIP.1
                    } else {
                        (total / (num_classes as f64 * counts[c] as f64)).clamp(CLASS_WEIGHT_CLIP.0, CLASS_WEIGHT_CLIP.1)
                    }
                })
                .collect()
        }
    }
}

/// Class-weighted cross entropy over `indices`:
/// `-(1 / sum_i w_{y_i}) sum_i w_{y_i} ln max(p_{i, y_i}, floor)`.
/// With equal weights this is the plain mean cross entropy.
pub fn class_weighted_cross_entropy(
    prediction: &Prediction,
    labels: &[usize],
    weights: &[f64],
    indices: &[usize],
) -> f64 {
    let mut weight_sum = 0.0;
    let mut acc = 0.0;
    for &i in indices {
        let w = weights[labels[i]];
        weight_sum += w;
        acc += w * prediction.probs[[i, labels[i]]].max(PROBABILITY_FLOOR).ln();
    }
    if weight_sum == 0.0 {
        return 0.0;
    }
    -acc / weight_sum
}

/// Gradient of [`class_weighted_cross_entropy`] with respect to the score
/// matrix (softmax inputs). Rows outside `indices` are zero; rows whose true
/// probability sits at the floor are zero too, matching the clamped loss.
pub fn cross_entropy_score_gradient(
    prediction: &Prediction,
    labels: &[usize],
    weights: &[f64],
    indices: &[usize],
) -> Array2<f64> {
    let (n, c) = prediction.probs.dim();
    let mut d_scores = Array2::zeros((n, c));
    let weight_sum: f64 = indices.iter().map(|&i| weights[labels[i]]).sum();
    if weight_sum == 0.0 {
        return d_scores;
    }
    for &i in indices {
        if prediction.probs[[i, labels[i]]] <= PROBABILITY_FLOOR {
            continue;
        }
        let scale = weights[labels[i]] / weight_sum;
        for j in 0..c {
            let target = f64::from(u8::from(j == labels[i]));
            d_scores[[i, j]] = scale * (prediction.probs[[i, j]] - target);
        }
    }
    d_scores
}
