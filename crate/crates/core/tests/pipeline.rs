use std::fs;
use std::path::Path;

use crashcast::dataset::CrashRisk;
use crashcast::label::LabelPolicy;
use crashcast::models::{ModelKind, TrainOptions};
use crashcast::pipeline::{self, FeatureConfig, InputPaths, PrepareConfig, RunConfig};
use crashcast::synthgen::SynthSpec;
use tempfile::TempDir;

fn synth_default(dir: &Path, spec: &SynthSpec) -> InputPaths {
    pipeline::synth(spec, 7, dir).unwrap();
    InputPaths::in_dir(dir)
}

#[test]
fn default_year_matches_target_moments() {
    let tmp = TempDir::new().unwrap();
    let summary = pipeline::synth(&SynthSpec::default(), 3, tmp.path()).unwrap();
    assert_eq!(summary.crashes, 1293);
    let up = summary.report.features.iter().find(|f| f.name == "up_speed").unwrap();
    assert!((up.mean - 75.06).abs() <= 2.0, "up_speed mean {}", up.mean);
    for f in &summary.report.features {
        assert!(f.min >= f.target.min && f.max <= f.target.max, "{} outside its bounds", f.name);
    }
    for name in [pipeline::SENSORS_FILE, pipeline::WEATHER_FILE, pipeline::CRASHES_FILE, pipeline::SPEC_REPORT_FILE] {
        assert!(tmp.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn without_a_precursor_crash_windows_look_like_controls() {
    let tmp = TempDir::new().unwrap();
    let spec = SynthSpec { speed_drop_fraction: 0.0, volume_surge_fraction: 0.0, ..SynthSpec::default() };
    let inputs = synth_default(&tmp.path().join("data"), &spec);
    let config = PrepareConfig { policy: LabelPolicy::SingleWindow, seed: 7, ..PrepareConfig::default() };
    let summary = pipeline::prepare(&inputs, &config, &tmp.path().join("prepared")).unwrap();
    let data = &summary.labeled.dataset;

    let means = |class: CrashRisk| -> Vec<Vec<f64>> {
        data.windows.iter().filter(|w| w.label == class).map(|w| w.feature_means()).collect()
    };
    let (crash, control) = (means(CrashRisk::High), means(CrashRisk::None));
    for (f, name) in data.feature_names.iter().enumerate() {
        let stats = |rows: &[Vec<f64>]| {
            let n = rows.len() as f64;
            let m = rows.iter().map(|r| r[f]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, v / n)
        };
        let ((m1, v1), (m0, v0)) = (stats(&crash), stats(&control));
        let se = (v1 + v0).sqrt();
        assert!((m1 - m0).abs() <= 3.0 * se + 1e-12, "{name}: crash {m1} vs control {m0} (se {se})");
    }
}

#[test]
fn ratio_one_gives_balanced_classes() {
    let tmp = TempDir::new().unwrap();
    let inputs = synth_default(&tmp.path().join("data"), &SynthSpec::default());
    let config = PrepareConfig { ratio: 1, seed: 7, ..PrepareConfig::default() };
    let summary = pipeline::prepare(&inputs, &config, &tmp.path().join("prepared")).unwrap();
    let c = summary.labeled.dataset.class_counts();
    assert_eq!(c.get(CrashRisk::None), c.get(CrashRisk::High));
    assert_eq!(c.get(CrashRisk::Low), c.get(CrashRisk::High));
    assert!(summary.to_text().contains("achieved_ratio,1:1"));
    let split = summary.train_counts.total() + summary.test_counts.total();
    assert_eq!(split, c.total());
}

#[test]
fn prepare_is_idempotent_for_a_seed() {
    let tmp = TempDir::new().unwrap();
    let inputs = synth_default(&tmp.path().join("data"), &SynthSpec::default());
    let out = tmp.path().join("prepared");
    let config = PrepareConfig { seed: 11, ..PrepareConfig::default() };
    pipeline::prepare(&inputs, &config, &out).unwrap();
    let first: Vec<Vec<u8>> =
        [pipeline::DATASET_FILE, pipeline::TRAIN_FILE, pipeline::TEST_FILE].map(|f| fs::read(out.join(f)).unwrap()).into();
    pipeline::prepare(&inputs, &config, &out).unwrap();
    for (f, before) in [pipeline::DATASET_FILE, pipeline::TRAIN_FILE, pipeline::TEST_FILE].iter().zip(first) {
        assert_eq!(fs::read(out.join(f)).unwrap(), before, "{f}");
    }
}

#[test]
fn threshold_above_one_keeps_every_feature() {
    let tmp = TempDir::new().unwrap();
    let inputs = synth_default(&tmp.path().join("data"), &SynthSpec::default());
    let prepared = tmp.path().join("prepared");
    pipeline::prepare(&inputs, &PrepareConfig::default(), &prepared).unwrap();
    let config = FeatureConfig { corr_threshold: 1.1, tree_count: 10, seed: 1 };
    let report = pipeline::select(
        &prepared.join(pipeline::TRAIN_FILE),
        &prepared.join(pipeline::TEST_FILE),
        &config,
        &tmp.path().join("features"),
    )
    .unwrap();
    assert_eq!(report.kept.len(), report.importance.names.len());
    assert_eq!(report.kept.len(), 14);
}

#[test]
fn reduced_run_writes_every_stage() {
    let tmp = TempDir::new().unwrap();
    let mut config = RunConfig::new(5);
    config.spec = SynthSpec { sensor_count: 6, crash_count: 120, days: 60, ..SynthSpec::default() };
    config.features.tree_count = 20;
    config.train = TrainOptions::default().with_seed(5);
    config.train.cnn.epochs = 5;
    config.train.mlp.epochs = 5;
    let summary = pipeline::run(&config, tmp.path()).unwrap();
    assert_eq!(summary.reports.len(), 4);
    assert_eq!(summary.comparison.len(), 4);
    for kind in ModelKind::ALL {
        let model = tmp.path().join("models").join(kind.name()).join(pipeline::MODEL_FILE);
        let reloaded = pipeline::load_model(&model).unwrap();
        assert_eq!(reloaded.kind(), kind);
        assert_eq!(reloaded.feature_names(), summary.selection.kept_names().as_slice());
        let eval = tmp.path().join("eval").join(kind.name());
        for f in [pipeline::REPORT_CSV_FILE, pipeline::REPORT_JSON_FILE, pipeline::ROC_SVG_FILE] {
            assert!(eval.join(f).is_file(), "{kind} {f}");
        }
    }
    assert!(tmp.path().join("models/cnn").join(pipeline::TRACE_FILE).is_file());
    let table = fs::read_to_string(tmp.path().join(pipeline::COMPARISON_FILE)).unwrap();
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn missing_inputs_are_reported() {
    let tmp = TempDir::new().unwrap();
    let err = pipeline::prepare(&InputPaths::in_dir(tmp.path()), &PrepareConfig::default(), &tmp.path().join("o"))
        .unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}
