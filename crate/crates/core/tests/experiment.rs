//! Run directories, config echo, determinism, and comparisons.

mod common;

use std::fs;
use std::path::{Path, PathBuf};

use sskt::experiment::{
    compare, pretrain_source, read_summary, run_experiment, ExperimentConfig, Overrides, Role,
    METRICS_CSV, SUMMARY_JSON,
};
use sskt::models::{read_manifest, CHECKPOINT_BIN, CHECKPOINT_MANIFEST};
use sskt::training::MetricKind;

fn with_sources(mut cfg: ExperimentConfig, sources: Vec<PathBuf>) -> ExperimentConfig {
    cfg.apply(&Overrides {
        sources: Some(sources),
        ..Overrides::default()
    })
    .unwrap();
    cfg
}

fn summary_without_wall_time(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_JSON)).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_secs");
    v
}

#[test]
fn single_source_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = common::tiny("ic_to_ic");
    let src = tmp.path().join("src");
    let s = pretrain_source(&cfg, 0, Some(&src)).unwrap();
    assert_eq!(s.role, Role::PretrainSource);
    assert_eq!(s.metric, MetricKind::Top1);

    let run = tmp.path().join("run");
    let summary = run_experiment(&with_sources(cfg, vec![src.clone()]), Some(&run)).unwrap();
    for f in [
        METRICS_CSV,
        SUMMARY_JSON,
        CHECKPOINT_BIN,
        CHECKPOINT_MANIFEST,
    ] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(run.join(METRICS_CSV)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,lr,loss_primary,loss_aux_0,loss_total,eval_metric"
    );
    assert_eq!(lines.count(), 3);

    assert_eq!(summary.source_checksums.len(), 1);
    assert_eq!(
        summary.checkpoint_sha256,
        read_manifest(&run).unwrap().sha256
    );
    assert_eq!(read_summary(&run).unwrap(), summary);

    // the echoed config parses back to the config that produced the run
    let echoed = serde_json::to_string(&summary_without_wall_time(&run)["config"]).unwrap();
    assert_eq!(
        ExperimentConfig::from_json_str(&echoed).unwrap(),
        summary.config
    );
}

#[test]
fn repeated_runs_are_directory_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let base = common::tiny("ic_to_ic");
    let src = tmp.path().join("src");
    pretrain_source(&base, 0, Some(&src)).unwrap();
    let cfg = with_sources(base, vec![src]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_experiment(&cfg, Some(&a)).unwrap();
    run_experiment(&cfg, Some(&b)).unwrap();
    for f in [METRICS_CSV, CHECKPOINT_BIN, CHECKPOINT_MANIFEST] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(summary_without_wall_time(&a), summary_without_wall_time(&b));
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(&b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    assert_eq!(names, other);
}

#[test]
fn multi_source_wires_two_heads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = common::tiny("multi_source");
    let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("s{i}"))).collect();
    for (i, d) in dirs.iter().enumerate() {
        pretrain_source(&cfg, i, Some(d)).unwrap();
    }
    let run = tmp.path().join("run");
    let s = run_experiment(&with_sources(cfg, dirs), Some(&run)).unwrap();
    assert_eq!(s.config.resolved_train().loss.aux.len(), 2);
    let manifest = read_manifest(&run).unwrap();
    assert_eq!(manifest.network.source_classes, vec![6, 8]);
    let header = fs::read_to_string(run.join(METRICS_CSV)).unwrap();
    assert!(header.starts_with("epoch,lr,loss_primary,loss_aux_0,loss_aux_1,loss_total"));
}

#[test]
fn cross_modality_and_multi_label_presets_run() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["ic_to_ac", "ic_to_mcic"] {
        let cfg = common::tiny(name);
        let src = tmp.path().join(format!("{name}_src"));
        pretrain_source(&cfg, 0, Some(&src)).unwrap();
        let run = tmp.path().join(name);
        let s = run_experiment(&with_sources(cfg, vec![src]), Some(&run)).unwrap();
        assert!(s.final_metric.is_finite());
        let expected = if name == "ic_to_mcic" {
            MetricKind::MeanAp
        } else {
            MetricKind::Top1
        };
        assert_eq!(s.metric, expected);
    }
}

#[test]
fn missing_source_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = with_sources(common::tiny("ic_to_ic"), vec![tmp.path().join("nope")]);
    let err = run_experiment(&cfg, Some(&tmp.path().join("run"))).unwrap_err();
    assert!(err.to_string().contains("nope"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    let text = common::tiny("ic_to_ic")
        .to_toml_string()
        .unwrap()
        .replace("lr = 0.02", "lr = -1.0");
    fs::write(&path, text).unwrap();
    let err = ExperimentConfig::from_path(&path).unwrap_err();
    assert!(err.to_string().contains("train.lr"), "{err}");

    let text = common::tiny("ic_to_ic").to_toml_string().unwrap() + "\nbogus_key = 3\n";
    fs::write(&path, text).unwrap();
    let err = ExperimentConfig::from_path(&path).unwrap_err();
    assert!(err.to_string().contains("bogus_key"), "{err}");
}

#[test]
fn toml_round_trip() {
    for name in sskt::experiment::PRESET_NAMES {
        let cfg = sskt::experiment::preset(name).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(
            ExperimentConfig::from_toml_str(&text).unwrap(),
            cfg,
            "{name}"
        );
    }
}

#[test]
fn compare_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let base = common::tiny("ic_to_ic");
    let run = |name: &str, seed: u64| {
        let mut cfg = base.clone();
        cfg.apply(&Overrides {
            seed: Some(seed),
            ..Overrides::default()
        })
        .unwrap();
        cfg.name = Some(name.into());
        let dir = tmp.path().join(format!("{name}{seed}"));
        run_experiment(&cfg, Some(&dir)).unwrap();
        dir
    };
    let (a, b) = (run("x", 0), run("y", 0));
    let cmp = compare(&[a.clone(), b]).unwrap();
    assert!(cmp.rows.iter().all(|r| r.delta_vs_first == 0.0));

    let dirs: Vec<PathBuf> = (1..4).map(|s| run("g", s)).collect();
    let cmp = compare(&dirs).unwrap();
    let v: Vec<f64> = cmp.rows.iter().map(|r| r.final_metric).collect();
    let mean = (v[0] + v[1] + v[2]) / 3.0;
    let std =
        (((v[0] - mean).powi(2) + (v[1] - mean).powi(2) + (v[2] - mean).powi(2)) / 2.0).sqrt();
    assert_eq!(cmp.groups.len(), 1);
    assert!((cmp.groups[0].mean - mean).abs() < 1e-12);
    assert!((cmp.groups[0].std - std).abs() < 1e-12);
    let csv = cmp.to_csv().unwrap();
    assert!(csv.starts_with("run,group,seed,metric,final,delta_vs_first\n"));
    assert!(cmp.to_text().contains('±'));

    // a multi-label run cannot be compared with an accuracy run
    let mcic = common::tiny("ic_to_mcic");
    let m = tmp.path().join("mcic");
    run_experiment(&mcic, Some(&m)).unwrap();
    assert!(compare(&[a.clone(), m]).is_err());
    assert!(compare(&[a]).is_err());
}

/// Source test accuracy of the `ic_to_ic` recipe on the sigma = 0.05 task, measured at bring-up.
const LOW_NOISE_SOURCE_ACCURACY: f64 = 0.942;

#[test]
fn low_noise_source_pretrains_well() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sskt::experiment::preset("ic_to_ic").unwrap();
    if let sskt::experiment::DataSpec::Synthetic(p) = &mut cfg.data {
        p.noise = 0.05;
    }
    let s = pretrain_source(&cfg, 0, Some(tmp.path())).unwrap();
    assert!(s.final_metric > 0.9, "{}", s.final_metric);
    assert!(
        (s.final_metric - LOW_NOISE_SOURCE_ACCURACY).abs() <= 0.02,
        "{}",
        s.final_metric
    );

    // the reloaded checkpoint scores exactly what the summary recorded
    let (_, acc) = sskt::experiment::evaluate_checkpoint(
        &cfg,
        tmp.path(),
        sskt::experiment::Split::SourceTest,
    )
    .unwrap();
    assert_eq!(acc.to_bits(), s.final_metric.to_bits());
}
