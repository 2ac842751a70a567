//! Experiment harness behind the `cfgnn` binary.
//!
//! Every command is a pure function of `(config file, input files, seed)`:
//! rerunning with the same inputs reproduces history files, reports, and
//! checkpoints byte for byte. One master seed drives all randomness through
//! labeled sub-streams (`synthetic`, `split`, `init`, `train`,
//! `resample:<variant>:<ratio>`), so adding a consumer never shifts the
//! streams of existing ones.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! divergence.

use cfgnn::data::{
    generate_synthetic, load_csv, normalize_columns, resample_imbalance, stratified_split, DataError, Dataset,
    SplitSpec, SyntheticConfig,
};
use cfgnn::filters::BasisKind;
use cfgnn::graph::write_edge_csv;
use cfgnn::metrics::{confusion, MetricsReport};
use cfgnn::model::{
    load_checkpoint, save_checkpoint, train, CfgnnModel, Checkpoint, ModelDims, ModelError, TrainConfig, Variant,
};
use cfgnn::rng::subseed;
use cfgnn::spectral::eigendecompose;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const DEFAULT_SEED: u64 = 64;

/// Errors grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::Divergence { .. } | ModelError::NonFinite(_) | ModelError::Spectral(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<cfgnn::spectral::SpectralError> for CliError {
    fn from(e: cfgnn::spectral::SpectralError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<cfgnn::graph::GraphError> for CliError {
    fn from(e: cfgnn::graph::GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cfgnn::metrics::MetricsError> for CliError {
    fn from(e: cfgnn::metrics::MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_data(e: std::io::Error) -> CliError {
    CliError::Data(format!("io: {e}"))
}

/// Where a run's samples come from.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub features: PathBuf,
    pub edges: Option<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

fn default_label_column() -> String {
    "label".to_string()
}

/// The experiment file. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; the `--seed` flag takes precedence.
    pub seed: Option<u64>,
    /// Model variant; the `--variant` flag takes precedence.
    pub variant: Option<String>,
    pub dataset: Option<DatasetSection>,
    pub synthetic: Option<SyntheticConfig>,
    pub split: Option<SplitSpec>,
    pub train: Option<TrainConfig>,
}

impl ExperimentConfig {
    /// Parse a TOML experiment file; relative dataset paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<(Self, toml::Value), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let echo: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(section), Some(dir)) = (config.dataset.as_mut(), path.parent()) {
            if section.features.is_relative() {
                section.features = dir.join(&section.features);
            }
            if let Some(edges) = section.edges.as_mut() {
                if edges.is_relative() {
                    *edges = dir.join(&*edges);
                }
            }
        }
        Ok((config, echo))
    }
}

/// Run provenance, written atomically at the end of every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: toml::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub metric_summary: serde_json::Value,
    pub wall_clock_seconds: f64,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_data)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write via a temp file plus rename so partial files never appear.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_data)?;
    fs::rename(&tmp, path).map_err(io_data)?;
    Ok(())
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&out_dir.join("manifest.json"), format!("{text}\n").as_bytes())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))
}

fn input_hashes(config: &ExperimentConfig) -> Result<BTreeMap<String, String>, CliError> {
    let mut hashes = BTreeMap::new();
    if let Some(section) = &config.dataset {
        hashes.insert(section.features.display().to_string(), sha256_file(&section.features)?);
        if let Some(edges) = &section.edges {
            hashes.insert(edges.display().to_string(), sha256_file(edges)?);
        }
    }
    Ok(hashes)
}

/// Materialize the dataset a config describes. Synthetic datasets derive
/// their generator seed from the master seed.
fn load_dataset(config: &ExperimentConfig, master_seed: u64) -> Result<Dataset, CliError> {
    match (&config.dataset, &config.synthetic) {
        (Some(_), Some(_)) => Err(CliError::Config("config has both [dataset] and [synthetic]; pick one".into())),
        (Some(section), None) => {
            let features = fs::File::open(&section.features)
                .map_err(|e| CliError::Data(format!("{}: {e}", section.features.display())))?;
            let edges = match &section.edges {
                Some(path) => {
                    Some(fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?)
                }
                None => None,
            };
            Ok(load_csv(features, &section.label_column, edges)?)
        }
        (None, Some(synthetic)) => {
            let mut cfg = synthetic.clone();
            cfg.seed = subseed(master_seed, "synthetic");
            Ok(generate_synthetic(&cfg)?)
        }
        (None, None) => Err(CliError::Config("config needs a [dataset] or [synthetic] section".into())),
    }
}

fn resolve_seed(config: &ExperimentConfig, flag: Option<u64>) -> u64 {
    flag.or(config.seed).unwrap_or(DEFAULT_SEED)
}

fn resolve_variant(config: &ExperimentConfig, flag: Option<Variant>) -> Result<Variant, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match &config.variant {
        Some(name) => name.parse().map_err(CliError::Config),
        None => Ok(Variant::Base),
    }
}

/// `generate`: write the synthetic dataset as feature + edge CSVs.
pub fn run_generate(config_path: &Path, seed_flag: Option<u64>, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, echo) = ExperimentConfig::load(config_path)?;
    let seed = resolve_seed(&config, seed_flag);
    let mut synthetic =
        config.synthetic.clone().ok_or_else(|| CliError::Config("generate needs a [synthetic] section".into()))?;
    synthetic.seed = subseed(seed, "synthetic");
    let dataset = generate_synthetic(&synthetic)?;
    ensure_out_dir(out)?;

    let mut features = Vec::new();
    cfgnn::data::write_features_csv(&dataset, &mut features)?;
    write_atomic(&out.join("features.csv"), &features)?;
    let mut edges = Vec::new();
    write_edge_csv(&dataset.graph, &mut edges)?;
    write_atomic(&out.join("edges.csv"), &edges)?;

    let counts = dataset.class_counts();
    write_manifest(
        out,
        &RunManifest {
            command: "generate".into(),
            seed,
            config: echo,
            input_hashes: BTreeMap::new(),
            outputs: vec!["features.csv".into(), "edges.csv".into()],
            metric_summary: serde_json::json!({
                "samples": dataset.n(),
                "classes": dataset.num_classes(),
                "imbalance_ratio": dataset.imbalance_ratio(),
                "class_counts": counts,
            }),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// Everything a finished training run hands to evaluation.
struct TrainedRun {
    model: CfgnnModel,
    dataset: Dataset,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    history: Vec<cfgnn::model::EpochStats>,
    train_config: TrainConfig,
}

/// Shared pipeline: normalize features, split, init, train.
fn train_pipeline(
    dataset: Dataset,
    config: &ExperimentConfig,
    variant: Variant,
    master_seed: u64,
) -> Result<TrainedRun, CliError> {
    let mut working = dataset;
    working.features = normalize_columns(&working.features)?;

    let mut split = config.split.unwrap_or_default();
    split.seed = subseed(master_seed, "split");
    let (train_idx, test_idx) = stratified_split(&working, &split)?;

    let mut train_config = config.train.clone().unwrap_or_default();
    train_config.seed = subseed(master_seed, "train");
    let dims = ModelDims {
        n: working.n(),
        input_dim: working.feature_dim(),
        hidden_dim: train_config.hidden_dim,
        num_classes: working.num_classes(),
        num_layers: train_config.num_layers,
        order: train_config.order,
    };
    let mut model = CfgnnModel::new(variant, dims, BasisKind::Chebyshev, subseed(master_seed, "init"));
    let history = train(&mut model, &working, &train_idx, &train_config)?;
    Ok(TrainedRun { model, dataset: working, train_idx, test_idx, history, train_config })
}

fn history_csv(history: &[cfgnn::model::EpochStats]) -> Vec<u8> {
    let mut text = String::from("epoch,loss,cma,macro_f1\n");
    for row in history {
        text.push_str(&format!("{},{},{},{}\n", row.epoch, row.loss, row.cma, row.macro_f1));
    }
    text.into_bytes()
}

/// `train`: fit the selected variant, write checkpoint + per-epoch history.
pub fn run_train(
    config_path: &Path,
    seed_flag: Option<u64>,
    variant_flag: Option<Variant>,
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, echo) = ExperimentConfig::load(config_path)?;
    let seed = resolve_seed(&config, seed_flag);
    let variant = resolve_variant(&config, variant_flag)?;
    let dataset = load_dataset(&config, seed)?;
    let hashes = input_hashes(&config)?;

    let run = train_pipeline(dataset, &config, variant, seed)?;
    ensure_out_dir(out)?;

    write_atomic(&out.join("history.csv"), &history_csv(&run.history))?;
    let checkpoint = Checkpoint::from_model(&run.model, &run.dataset.class_names, &run.train_config, seed);
    let mut bytes = Vec::new();
    save_checkpoint(&checkpoint, &mut bytes)?;
    write_atomic(&out.join("checkpoint.json"), &bytes)?;

    let last = run.history.last();
    write_manifest(
        out,
        &RunManifest {
            command: "train".into(),
            seed,
            config: echo,
            input_hashes: hashes,
            outputs: vec!["checkpoint.json".into(), "history.csv".into()],
            metric_summary: serde_json::json!({
                "variant": variant.as_str(),
                "epochs": run.history.len(),
                "final_loss": last.map(|s| s.loss),
                "final_train_cma": last.map(|s| s.cma),
                "final_train_macro_f1": last.map(|s| s.macro_f1),
                "train_samples": run.train_idx.len(),
                "test_samples": run.test_idx.len(),
            }),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// Evaluation products for one (model, dataset, split) triple.
struct Evaluation {
    report: MetricsReport,
    confusion_csv: Vec<u8>,
    scores_csv: Vec<u8>,
    unsupported: Vec<usize>,
}

fn evaluate_on_split(model: &CfgnnModel, dataset: &Dataset, test_idx: &[usize]) -> Result<Evaluation, CliError> {
    let basis = eigendecompose(&dataset.graph.laplacian())?;
    let prediction = model.predict(&basis, &dataset.features)?;

    let y_true: Vec<usize> = test_idx.iter().map(|&i| dataset.labels[i]).collect();
    let y_pred: Vec<usize> = test_idx.iter().map(|&i| prediction.labels[i]).collect();
    let cm = confusion(&y_true, &y_pred, dataset.num_classes())?;
    let report = MetricsReport::from_confusion(&cm, &dataset.class_names);

    let mut confusion_csv = Vec::new();
    cm.write_csv(&dataset.class_names, &mut confusion_csv)?;

    // Per-class probabilities for the test nodes; ROC curves and the like
    // are plotted outside this tool.
    let mut scores = String::from("node_id,true_label");
    for name in &dataset.class_names {
        scores.push(',');
        scores.push_str(name);
    }
    scores.push('\n');
    for &i in test_idx {
        scores.push_str(&dataset.graph.node_ids()[i]);
        scores.push(',');
        scores.push_str(&dataset.class_names[dataset.labels[i]]);
        for c in 0..dataset.num_classes() {
            scores.push_str(&format!(",{}", prediction.probs[[i, c]]));
        }
        scores.push('\n');
    }

    Ok(Evaluation {
        unsupported: cm.unsupported_classes(),
        report,
        confusion_csv,
        scores_csv: scores.into_bytes(),
    })
}

/// `evaluate`: score a checkpoint on the config's dataset against the test
/// split re-derived from the checkpoint's seed.
pub fn run_evaluate(config_path: &Path, checkpoint_path: &Path, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, echo) = ExperimentConfig::load(config_path)?;
    let file = fs::File::open(checkpoint_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", checkpoint_path.display())))?;
    let (model, class_names, _, seed) = load_checkpoint(file)?.into_model()?;

    let mut dataset = load_dataset(&config, seed)?;
    let mut hashes = input_hashes(&config)?;
    hashes.insert(checkpoint_path.display().to_string(), sha256_file(checkpoint_path)?);

    if dataset.class_names != class_names {
        return Err(CliError::Data(format!(
            "checkpoint classes {:?} disagree with dataset classes {:?}",
            class_names, dataset.class_names
        )));
    }
    if dataset.n() != model.dims().n || dataset.feature_dim() != model.dims().input_dim {
        return Err(CliError::Data(format!(
            "checkpoint expects {} nodes x {} features, dataset has {} x {}",
            model.dims().n,
            model.dims().input_dim,
            dataset.n(),
            dataset.feature_dim()
        )));
    }

    dataset.features = normalize_columns(&dataset.features)?;
    let mut split = config.split.unwrap_or_default();
    split.seed = subseed(seed, "split");
    let (_, test_idx) = stratified_split(&dataset, &split)?;

    let evaluation = evaluate_on_split(&model, &dataset, &test_idx)?;
    if !evaluation.unsupported.is_empty() {
        eprintln!(
            "warning: classes without test samples excluded from cmA: {:?}",
            evaluation.unsupported.iter().map(|&c| dataset.class_names[c].as_str()).collect::<Vec<_>>()
        );
    }
    ensure_out_dir(out)?;
    write_atomic(&out.join("report.json"), format!("{}\n", evaluation.report.to_json_pretty()).as_bytes())?;
    write_atomic(&out.join("confusion.csv"), &evaluation.confusion_csv)?;
    write_atomic(&out.join("scores.csv"), &evaluation.scores_csv)?;

    write_manifest(
        out,
        &RunManifest {
            command: "evaluate".into(),
            seed,
            config: echo,
            input_hashes: hashes,
            outputs: vec!["report.json".into(), "confusion.csv".into(), "scores.csv".into()],
            metric_summary: serde_json::json!({
                "accuracy": evaluation.report.accuracy,
                "macro_f1": evaluation.report.macro_f1,
                "g_mean": evaluation.report.g_mean,
                "mcc": evaluation.report.mcc,
                "cma": evaluation.report.cma,
                "test_samples": test_idx.len(),
            }),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// `sweep-ir`: resample to each ratio, train every requested variant, and
/// tabulate the test metrics. Infeasible ratios are skipped with a warning
/// row rather than aborting the sweep.
pub fn run_sweep_ir(
    config_path: &Path,
    seed_flag: Option<u64>,
    variants: &[Variant],
    ratios: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, echo) = ExperimentConfig::load(config_path)?;
    let seed = resolve_seed(&config, seed_flag);
    if ratios.is_empty() {
        return Err(CliError::Config("sweep-ir needs at least one ratio".into()));
    }
    if variants.is_empty() {
        return Err(CliError::Config("sweep-ir needs at least one variant".into()));
    }
    let base_dataset = load_dataset(&config, seed)?;
    let hashes = input_hashes(&config)?;

    let mut table = String::from("variant,ratio,cma,g_mean,mcc,macro_f1,seed,status\n");
    let mut completed = 0usize;
    for &variant in variants {
        for &ratio in ratios {
            let stream = format!("resample:{}:{}", variant.as_str(), ratio);
            let resampled = match resample_imbalance(&base_dataset, ratio, subseed(seed, &stream)) {
                Ok(ds) => ds,
                Err(e) => {
                    eprintln!("warning: skipping variant={variant} ratio={ratio}: {e}");
                    table.push_str(&format!("{variant},{ratio},,,,,{seed},skipped\n"));
                    continue;
                }
            };
            let run = train_pipeline(resampled, &config, variant, seed)?;
            let evaluation = evaluate_on_split(&run.model, &run.dataset, &run.test_idx)?;
            table.push_str(&format!(
                "{variant},{ratio},{},{},{},{},{seed},ok\n",
                evaluation.report.cma,
                evaluation.report.g_mean,
                evaluation.report.mcc,
                evaluation.report.macro_f1,
            ));
            completed += 1;
        }
    }
    ensure_out_dir(out)?;
    write_atomic(&out.join("sweep.csv"), table.as_bytes())?;

    write_manifest(
        out,
        &RunManifest {
            command: "sweep-ir".into(),
            seed,
            config: echo,
            input_hashes: hashes,
            outputs: vec!["sweep.csv".into()],
            metric_summary: serde_json::json!({
                "variants": variants.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
                "ratios": ratios,
                "completed_runs": completed,
            }),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// `spectra`: dump the dataset graph's eigenvalues and eigenvector matrix.
pub fn run_spectra(config_path: &Path, seed_flag: Option<u64>, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, echo) = ExperimentConfig::load(config_path)?;
    let seed = resolve_seed(&config, seed_flag);
    let dataset = load_dataset(&config, seed)?;
    let hashes = input_hashes(&config)?;

    let basis = eigendecompose(&dataset.graph.laplacian())?;
    let near_zero = basis.eigenvalues().iter().filter(|&&l| l.abs() <= 1e-9).count();
    if near_zero > 1 {
        eprintln!("warning: graph appears disconnected ({near_zero} near-zero eigenvalues)");
    }

    let mut eigenvalues = String::from("index,eigenvalue\n");
    for (k, lambda) in basis.eigenvalues().iter().enumerate() {
        eigenvalues.push_str(&format!("{k},{lambda}\n"));
    }
    let mut vectors = String::new();
    for i in 0..basis.n() {
        let row: Vec<String> = (0..basis.n()).map(|k| basis.u()[[i, k]].to_string()).collect();
        vectors.push_str(&row.join(","));
        vectors.push('\n');
    }
    ensure_out_dir(out)?;
    write_atomic(&out.join("eigenvalues.csv"), eigenvalues.as_bytes())?;
    write_atomic(&out.join("eigenvectors.csv"), vectors.as_bytes())?;

    write_manifest(
        out,
        &RunManifest {
            command: "spectra".into(),
            seed,
            config: echo,
            input_hashes: hashes,
            outputs: vec!["eigenvalues.csv".into(), "eigenvectors.csv".into()],
            metric_summary: serde_json::json!({
                "nodes": basis.n(),
                "lambda_max": basis.lambda_max(),
                "near_zero_eigenvalues": near_zero,
            }),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// Parse `--ratios 0.1,0.3,0.5` style lists.
pub fn parse_ratio_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad ratio {part:?} in --ratios")))
        })
        .collect()
}
