//! File-level stages. Each reads and writes the CSV, model and report formats
//! of the module that owns them, so the stages can run as separate processes
//! and [`run`] simply chains them in one output tree.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dataset::{read_dataset_csv, write_dataset_csv, ClassCounts, CrashRisk, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    one_vs_rest_report, regression_metrics, write_report_csv, write_report_json, write_roc_csv, write_roc_svg,
    EvalReport,
};
use crate::features::{
    extra_trees_importance, pearson_matrix, select_features, write_correlation_csv, write_selection_csv,
    SelectionReport,
};
use crate::ingest::{
    aggregate_intervals, join_weather, parse_crash_csv, parse_sensor_csv, parse_weather_csv, validate_crash_events,
    write_crash_csv, write_weather_csv, ParseOptions, SensorCsvWriter,
};
use crate::label::{build_labeled_dataset, split_train_test, LabelPolicy, LabeledData};
use crate::models::{train_model, AnyModel, ModelKind, TrainOptions};
use crate::synthgen::{generate_with, write_spec_report, SpecAccumulator, SpecReport, SynthSpec};
use crate::fmt_f64;

pub const SENSORS_FILE: &str = "sensors.csv";
pub const WEATHER_FILE: &str = "weather.csv";
pub const CRASHES_FILE: &str = "crashes.csv";
pub const SPEC_REPORT_FILE: &str = "spec_report.csv";
pub const DATASET_FILE: &str = "dataset.csv";
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SELECTION_FILE: &str = "selection.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const MODEL_FILE: &str = "model.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const ROC_SVG_FILE: &str = "roc.svg";
pub const COMPARISON_FILE: &str = "comparison.csv";

/// The three raw input logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub sensors: PathBuf,
    pub weather: PathBuf,
    pub crashes: PathBuf,
}

impl InputPaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        InputPaths { sensors: dir.join(SENSORS_FILE), weather: dir.join(WEATHER_FILE), crashes: dir.join(CRASHES_FILE) }
    }

    /// Errors on the first path that does not exist.
    pub fn check(&self) -> Result<()> {
        for p in [&self.sensors, &self.weather, &self.crashes] {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} not found", p.display())));
            }
        }
        Ok(())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> std::io::Result<BufWriter<File>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = body(BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Ok(read_dataset_csv(open(path)?)?)
}

fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_file(path, |out| write_dataset_csv(dataset, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub readings: usize,
    pub crashes: usize,
    pub report: SpecReport,
}

/// Generates the three input logs plus `spec_report.csv` in `out_dir`.
pub fn synth(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<SynthSummary> {
    spec.validate()?;
    create_dir(out_dir)?;
    let sensors_path = out_dir.join(SENSORS_FILE);
    let file = File::create(&sensors_path).map_err(|e| Error::io(&sensors_path, e))?;
    let mut writer = SensorCsvWriter::new(BufWriter::new(file)).map_err(|e| Error::io(&sensors_path, e))?;
    let mut acc = SpecAccumulator::new(spec);
    let mut readings = 0;
    let mut failure: Option<Error> = None;
    let logs = generate_with(spec, seed, |r| {
        if failure.is_some() {
            return;
        }
        readings += 1;
        if let Err(e) = writer.write(r) {
            failure = Some(Error::io(&sensors_path, e));
        } else if let Err(e) = acc.push(r) {
            failure = Some(e.into());
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    writer.finish().and_then(|mut w| w.flush()).map_err(|e| Error::io(&sensors_path, e))?;
    write_file(&out_dir.join(WEATHER_FILE), |out| write_weather_csv(&logs.weather, out))?;
    write_file(&out_dir.join(CRASHES_FILE), |out| write_crash_csv(&logs.crashes, out))?;
    let report = acc.finish(&logs.weather)?;
    write_file(&out_dir.join(SPEC_REPORT_FILE), |out| write_spec_report(&report, out))?;
    Ok(SynthSummary { readings, crashes: logs.crashes.len(), report })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareConfig {
    pub policy: LabelPolicy,
    /// Matched non-crash windows per crash.
    pub ratio: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { policy: LabelPolicy::NearFar, ratio: 5, train_fraction: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct PrepareSummary {
    pub labeled: LabeledData,
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
}

impl PrepareSummary {
    pub fn to_text(&self) -> String {
        let l = &self.labeled;
        let counts = l.dataset.class_counts();
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k},{v}\n"));
        line("crash_events", l.crash_events.to_string());
        line("skipped_crashes", l.skipped.to_string());
        line("far_window_missing", l.far_missing.to_string());
        line("matched_shortfalls", l.shortfalls.len().to_string());
        line("windows", l.dataset.len().to_string());
        for c in CrashRisk::ALL {
            line(&format!("class_{c}"), counts.get(c).to_string());
        }
        line("achieved_ratio", format!("1:{}", fmt_f64(l.achieved_ratio())));
        line("train_windows", self.train_counts.total().to_string());
        line("test_windows", self.test_counts.total().to_string());
        s
    }
}

/// Ingests the logs, labels windows, samples matched non-crash windows and
/// splits train/test. Writes `dataset.csv`, `train.csv`, `test.csv` and
/// `summary.txt`.
pub fn prepare(inputs: &InputPaths, config: &PrepareConfig, out_dir: &Path) -> Result<PrepareSummary> {
    inputs.check()?;
    let readings = parse_sensor_csv(open(&inputs.sensors)?, &ParseOptions::default())?;
    let weather = parse_weather_csv(open(&inputs.weather)?)?;
    let crashes = parse_crash_csv(open(&inputs.crashes)?)?;
    let intervals = join_weather(aggregate_intervals(&readings), &weather)?;
    drop(readings);
    validate_crash_events(&crashes, &intervals)?;
    let labeled = build_labeled_dataset(&intervals, &crashes, config.policy, config.ratio, config.seed)?;
    let (train, test) = split_train_test(&labeled.dataset, config.train_fraction, config.seed)?;

    create_dir(out_dir)?;
    write_dataset(&out_dir.join(DATASET_FILE), &labeled.dataset)?;
    write_dataset(&out_dir.join(TRAIN_FILE), &train)?;
    write_dataset(&out_dir.join(TEST_FILE), &test)?;
    let summary = PrepareSummary { train_counts: train.class_counts(), test_counts: test.class_counts(), labeled };
    let text = summary.to_text();
    write_file(&out_dir.join(SUMMARY_FILE), |mut out| out.write_all(text.as_bytes()).map(|_| out))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Pairs with `|r|` above this lose their less important member.
    pub corr_threshold: f64,
    pub tree_count: usize,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { corr_threshold: 0.5, tree_count: 100, seed: 0 }
    }
}

/// Ranks and prunes features on the training split only, then writes the
/// reduced `train.csv` and `test.csv` next to `selection.csv` and
/// `correlation.csv`.
pub fn select(train_path: &Path, test_path: &Path, config: &FeatureConfig, out_dir: &Path) -> Result<SelectionReport> {
    let train = read_dataset(train_path)?;
    let test = read_dataset(test_path)?;
    let importance = extra_trees_importance(&train, config.tree_count, config.seed)?;
    let corr = pearson_matrix(&train);
    let report = select_features(&importance, &corr, config.corr_threshold);
    let kept = report.kept_names();

    create_dir(out_dir)?;
    write_file(&out_dir.join(SELECTION_FILE), |out| write_selection_csv(&report, out))?;
    write_file(&out_dir.join(CORRELATION_FILE), |out| write_correlation_csv(&corr, out))?;
    write_dataset(&out_dir.join(TRAIN_FILE), &train.select_features(&kept)?)?;
    write_dataset(&out_dir.join(TEST_FILE), &test.select_features(&kept)?)?;
    Ok(report)
}

/// Trains one model on a raw training file. Writes `model.txt`, plus
/// `trace.csv` for the CNN.
pub fn train(train_path: &Path, kind: ModelKind, options: &TrainOptions, out_dir: &Path) -> Result<AnyModel> {
    let data = read_dataset(train_path)?;
    let (model, trace) = train_model(kind, &data, options)?;
    create_dir(out_dir)?;
    let text = model.to_text();
    write_file(&out_dir.join(MODEL_FILE), |mut out| out.write_all(text.as_bytes()).map(|_| out))?;
    if let Some(trace) = trace {
        write_file(&out_dir.join(TRACE_FILE), |out| trace.write_csv(out))?;
    }
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(AnyModel::from_text(&text)?)
}

/// One-vs-rest report and regression metrics for a model on a dataset.
pub fn score_model(model: &AnyModel, test: &Dataset) -> Result<EvalReport> {
    let predictions = model.predict_raw(test)?;
    let truth: Vec<CrashRisk> = test.windows.iter().map(|w| w.label).collect();
    let mut report = one_vs_rest_report(&predictions.class_scores, &truth)?;
    report.regression = Some(regression_metrics(&predictions.risk, &test.targets())?);
    Ok(report)
}

/// Writes `report.csv`, `report.json`, one `roc_<curve>.csv` per evaluated
/// class plus the micro curve, and `roc.svg`.
pub fn write_evaluation(report: &EvalReport, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    write_file(&out_dir.join(REPORT_CSV_FILE), |out| write_report_csv(report, out))?;
    write_file(&out_dir.join(REPORT_JSON_FILE), |out| write_report_json(report, out))?;
    let mut curves = Vec::new();
    for c in &report.classes {
        if let Some(curve) = &c.curve {
            curves.push((format!("class_{}", c.class), curve));
        }
    }
    if let Some(curve) = &report.micro_curve {
        curves.push(("micro".to_string(), curve));
    }
    for (name, curve) in &curves {
        write_file(&out_dir.join(format!("roc_{name}.csv")), |out| write_roc_csv(curve, out))?;
    }
    write_file(&out_dir.join(ROC_SVG_FILE), |out| write_roc_svg(&curves, out))
}

pub fn evaluate(model_path: &Path, test_path: &Path, out_dir: &Path) -> Result<EvalReport> {
    let model = load_model(model_path)?;
    let report = score_model(&model, &read_dataset(test_path)?)?;
    write_evaluation(&report, out_dir)?;
    Ok(report)
}

/// One row of the model comparison table, from the micro aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub auc: Option<f64>,
    pub false_alarm_rate: Option<f64>,
    pub precision: Option<f64>,
    pub mse: f64,
    pub rmse: f64,
    pub r: Option<f64>,
}

impl ComparisonRow {
    pub fn from_report(model: &str, report: &EvalReport) -> Result<Self> {
        let reg = report.regression.ok_or_else(|| Error::Config("report has no regression metrics".into()))?;
        Ok(ComparisonRow {
            model: model.to_string(),
            auc: report.micro.auc,
            false_alarm_rate: report.micro.fpr,
            precision: report.micro.precision,
            mse: reg.mse,
            rmse: reg.rmse,
            r: reg.r,
        })
    }
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut out: W) -> std::io::Result<W> {
    let cell = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt_f64);
    writeln!(out, "model,auc,false_alarm_rate,precision,mse,rmse,r")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            cell(r.auc),
            cell(r.false_alarm_rate),
            cell(r.precision),
            fmt_f64(r.mse),
            fmt_f64(r.rmse),
            cell(r.r)
        )?;
    }
    Ok(out)
}

/// Scores each model file on one test set and writes the comparison table.
pub fn compare(model_paths: &[PathBuf], test_path: &Path, out_csv: &Path) -> Result<Vec<ComparisonRow>> {
    let test = read_dataset(test_path)?;
    let mut rows = Vec::new();
    for path in model_paths {
        let model = load_model(path)?;
        let report = score_model(&model, &test)?;
        rows.push(ComparisonRow::from_report(model.kind().name(), &report)?);
    }
    if let Some(parent) = out_csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(out_csv, |out| write_comparison_csv(&rows, out))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Existing logs to use; synthetic data is generated when absent.
    pub inputs: Option<InputPaths>,
    pub spec: SynthSpec,
    pub seed: u64,
    pub prepare: PrepareConfig,
    pub features: FeatureConfig,
    pub train: TrainOptions,
    pub models: Vec<ModelKind>,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        RunConfig {
            inputs: None,
            spec: SynthSpec::default(),
            seed,
            prepare: PrepareConfig { seed, ..Default::default() },
            features: FeatureConfig { seed, ..Default::default() },
            train: TrainOptions::default().with_seed(seed),
            models: ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub prepare: PrepareSummary,
    pub selection: SelectionReport,
    pub reports: Vec<(ModelKind, EvalReport)>,
    pub comparison: Vec<ComparisonRow>,
}

/// The whole pipeline under one output tree:
///
/// ```text
/// data/       sensors.csv weather.csv crashes.csv spec_report.csv
/// prepared/   dataset.csv train.csv test.csv summary.txt
/// features/   selection.csv correlation.csv train.csv test.csv
/// models/<m>/ model.txt [trace.csv]
/// eval/<m>/   report.csv report.json roc_*.csv roc.svg
/// comparison.csv  roc.svg
/// ```
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let inputs = match &config.inputs {
        Some(inputs) => inputs.clone(),
        None => {
            let data = out_dir.join("data");
            synth(&config.spec, config.seed, &data)?;
            InputPaths::in_dir(&data)
        }
    };
    let prepared = out_dir.join("prepared");
    let prepare_summary = prepare(&inputs, &config.prepare, &prepared)?;
    let reduced = out_dir.join("features");
    let selection = select(&prepared.join(TRAIN_FILE), &prepared.join(TEST_FILE), &config.features, &reduced)?;
    let test = read_dataset(&reduced.join(TEST_FILE))?;

    let mut reports = Vec::new();
    let mut comparison = Vec::new();
    for &kind in &config.models {
        let model = train(&reduced.join(TRAIN_FILE), kind, &config.train, &out_dir.join("models").join(kind.name()))?;
        let report = score_model(&model, &test)?;
        write_evaluation(&report, &out_dir.join("eval").join(kind.name()))?;
        comparison.push(ComparisonRow::from_report(kind.name(), &report)?);
        reports.push((kind, report));
    }
    write_file(&out_dir.join(COMPARISON_FILE), |out| write_comparison_csv(&comparison, out))?;
    let micro: Vec<(String, &crate::eval::RocCurve)> = reports
        .iter()
        .filter_map(|(k, r)| r.micro_curve.as_ref().map(|c| (k.name().to_string(), c)))
        .collect();
    write_file(&out_dir.join(ROC_SVG_FILE), |out| write_roc_svg(&micro, out))?;
    Ok(RunSummary { prepare: prepare_summary, selection, reports, comparison })
}
