use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DataSpec, ExperimentConfig, Scenario};
use crate::data::{generate, read_binary_records, Dataset, Labels, TaskPairData};
use crate::error::{Error, Result};
use crate::losses::LossPlan;
use crate::models::{build_target, load_checkpoint, save_checkpoint, NetworkSpec};
use crate::source::SourceTask;
use crate::training::{evaluate, train, MetricKind, RunMetrics, TrainConfig};

pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PretrainSource,
    Train,
}

/// Contents of `summary.json`. Everything except `wall_time_secs` is a pure
/// function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub role: Role,
    pub group: String,
    pub seed: u64,
    pub scenario: Scenario,
    /// Which pretrain recipe produced this run (source runs only).
    pub source_index: Option<usize>,
    pub metric: MetricKind,
    pub final_metric: f64,
    pub epochs: usize,
    pub wall_time_secs: f64,
    pub checkpoint_sha256: String,
    pub primary_path_checksum: String,
    pub source_checksums: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    SourceTrain,
    SourceTest,
    TargetTrain,
    TargetTest,
}

impl Split {
    pub fn pick(self, data: &TaskPairData) -> &Dataset {
        match self {
            Split::SourceTrain => &data.source_train,
            Split::SourceTest => &data.source_test,
            Split::TargetTrain => &data.target_train,
            Split::TargetTest => &data.target_test,
        }
    }
}

/// Generates or reads the four splits. Binary record data serves as both
/// the source and the target task.
pub fn load_splits(data: &DataSpec) -> Result<TaskPairData> {
    match data {
        DataSpec::Synthetic(pair) => generate(pair),
        DataSpec::Binary(b) => {
            let train = read_binary_records(&b.train, &b.records)?;
            let test = read_binary_records(&b.test, &b.records)?;
            Ok(TaskPairData {
                source_train: train.clone(),
                source_test: test.clone(),
                target_train: train,
                target_test: test,
            })
        }
    }
}

fn source_data(cfg: &ExperimentConfig, index: usize) -> Result<DataSpec> {
    let recipe = &cfg.pretrain[index];
    let mut data = cfg.data.clone();
    let overrides =
        recipe.k_source.is_some() || recipe.overlap.is_some() || recipe.source_variant.is_some();
    match &mut data {
        DataSpec::Synthetic(pair) => {
            if let Some(k) = recipe.k_source {
                pair.k_source = k;
            }
            if let Some(o) = recipe.overlap {
                pair.overlap = o;
            }
            if let Some(v) = recipe.source_variant {
                pair.source_variant = v;
            }
            pair.validate()?;
        }
        DataSpec::Binary(_) if overrides => {
            return Err(Error::config(
                format!("pretrain[{index}]"),
                "task overrides need synthetic data",
            ))
        }
        DataSpec::Binary(_) => {}
    }
    Ok(data)
}

fn write_run(
    dir: &Path,
    net: &crate::models::TargetNetwork,
    metrics: &RunMetrics,
) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = save_checkpoint(net, dir)?;
    let path = dir.join(METRICS_CSV);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    metrics.write_csv(file)?;
    Ok(manifest.sha256)
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let path = dir.join(SUMMARY_JSON);
    let text = serde_json::to_string_pretty(summary)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(SUMMARY_JSON);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::config("out_dir", "no output directory given"))
}

/// Trains source network `index` of `cfg.pretrain` on the source task and
/// writes its checkpoint. The final metric is source test accuracy.
pub fn pretrain_source(
    cfg: &ExperimentConfig,
    index: usize,
    out: Option<&Path>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let recipe = cfg.pretrain.get(index).ok_or_else(|| {
        Error::config(
            "pretrain",
            format!(
                "no recipe at index {index} ({} defined)",
                cfg.pretrain.len()
            ),
        )
    })?;
    let dir = out_dir(cfg, out)?;
    let start = Instant::now();
    let data = load_splits(&source_data(cfg, index)?)?;
    let shape = data.source_train.sample_shape();
    let input = [shape[0], shape[1], shape[2]];
    let trunk = recipe
        .trunk
        .clone()
        .unwrap_or_else(|| cfg.trunk.with_input(input));
    let mut net = build_target(
        NetworkSpec::new(trunk, data.source_train.num_classes()),
        recipe.train.seed,
    )?;
    let train_cfg = TrainConfig {
        loss: LossPlan::default(),
        ..recipe.train.clone()
    };
    let metrics = train(
        &mut net,
        &[],
        &data.source_train,
        &data.source_test,
        &train_cfg,
    )?;
    let sha = write_run(&dir, &net, &metrics)?;
    let summary = RunSummary {
        role: Role::PretrainSource,
        group: recipe
            .name
            .clone()
            .unwrap_or_else(|| format!("source_{index}")),
        seed: recipe.train.seed,
        scenario: cfg.scenario,
        source_index: Some(index),
        metric: metrics.metric,
        final_metric: metrics.final_metric().unwrap_or(f64::NAN),
        epochs: train_cfg.epochs,
        wall_time_secs: start.elapsed().as_secs_f64(),
        checkpoint_sha256: sha,
        primary_path_checksum: net.primary_path_checksum(),
        source_checksums: Vec::new(),
        config: cfg.clone(),
    };
    write_summary(&dir, &summary)?;
    Ok(summary)
}

/// Trains the target network with every source in `cfg.sources` attached
/// (none for a scratch baseline) and writes the run directory.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = out_dir(cfg, out)?;
    let start = Instant::now();
    let sources = cfg
        .sources
        .iter()
        .map(|s| SourceTask::load(&s.checkpoint, cfg.transform_for(s)))
        .collect::<Result<Vec<_>>>()?;
    let data = load_splits(&cfg.data)?;
    let train_cfg = cfg.resolved_train();
    let spec = NetworkSpec {
        tm_width: cfg.tm_width,
        ..NetworkSpec::new(cfg.trunk.clone(), data.target_train.num_classes()).with_sources(
            sources.iter().map(SourceTask::num_classes).collect(),
            cfg.use_tm,
        )
    };
    let mut net = build_target(spec, train_cfg.seed)?;
    let metrics = train(
        &mut net,
        &sources,
        &data.target_train,
        &data.target_test,
        &train_cfg,
    )?;
    if let Some(s) = sources.iter().find(|s| !s.is_unchanged()) {
        return Err(Error::Checkpoint(format!(
            "source `{}` changed during training",
            s.name()
        )));
    }
    let sha = write_run(&dir, &net, &metrics)?;
    let summary = RunSummary {
        role: Role::Train,
        group: cfg.group(),
        seed: train_cfg.seed,
        scenario: cfg.scenario,
        source_index: None,
        metric: metrics.metric,
        final_metric: metrics.final_metric().unwrap_or(f64::NAN),
        epochs: train_cfg.epochs,
        wall_time_secs: start.elapsed().as_secs_f64(),
        checkpoint_sha256: sha,
        primary_path_checksum: net.primary_path_checksum(),
        source_checksums: sources.iter().map(|s| s.checksum().to_string()).collect(),
        config: cfg.clone(),
    };
    write_summary(&dir, &summary)?;
    Ok(summary)
}

/// Scores a saved network on one split of the config's data.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    split: Split,
) -> Result<(MetricKind, f64)> {
    let net = load_checkpoint(checkpoint)?;
    let data = load_splits(&cfg.data)?;
    let set = split.pick(&data);
    if set.num_classes() != net.spec().num_classes {
        return Err(Error::invalid(format!(
            "checkpoint predicts {} classes, split {split:?} has {}",
            net.spec().num_classes,
            set.num_classes()
        )));
    }
    let metric = MetricKind::for_dataset(set);
    Ok((metric, evaluate(&net, set, metric)?))
}

#[derive(Serialize)]
struct SplitInfo {
    name: &'static str,
    len: usize,
    sample_shape: Vec<usize>,
    num_classes: usize,
    multi_label: bool,
    class_counts: Vec<usize>,
}

/// Writes `<split>.inputs.bin` (little-endian f64), `<split>.labels.csv`, and
/// `dataset.json` for every split.
pub fn write_dataset(data: &TaskPairData, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let splits = [
        ("source_train", &data.source_train),
        ("source_test", &data.source_test),
        ("target_train", &data.target_train),
        ("target_test", &data.target_test),
    ];
    let mut info = Vec::new();
    for (name, set) in splits {
        let bytes: Vec<u8> = set.inputs().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(format!("{name}.inputs.bin"));
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;

        let path = dir.join(format!("{name}.labels.csv"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let k = set.num_classes();
        match set.labels() {
            Labels::Class(l) => {
                w.write_record(["label"])?;
                for c in l {
                    w.write_record([c.to_string()])?;
                }
            }
            Labels::MultiHot(m) => {
                w.write_record((0..k).map(|c| format!("class_{c}")))?;
                for row in m.chunks(k) {
                    w.write_record(row.iter().map(|v| format!("{}", *v as u8)))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        info.push(SplitInfo {
            name,
            len: set.len(),
            sample_shape: set.sample_shape().to_vec(),
            num_classes: k,
            multi_label: set.is_multi_label(),
            class_counts: set.class_counts(),
        });
    }
    let path = dir.join("dataset.json");
    fs::write(&path, serde_json::to_string_pretty(&info)? + "\n").map_err(|e| Error::io(&path, e))
}
