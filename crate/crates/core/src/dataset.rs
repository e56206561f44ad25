//! Labeled windows and the prepared-dataset CSV format.

use std::fmt;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::features::NormalizationParams;
use crate::{fmt_f64, TIMESTEPS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty dataset file")]
    EmptyFile,
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("feature mismatch: expected [{expected}], found [{found}]")]
    FeatureMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crash risk of a window: no, low or high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CrashRisk {
    None,
    Low,
    High,
}

impl CrashRisk {
    pub const ALL: [CrashRisk; 3] = [CrashRisk::None, CrashRisk::Low, CrashRisk::High];

    pub fn value(self) -> f64 {
        match self {
            CrashRisk::None => 0.0,
            CrashRisk::Low => 0.5,
            CrashRisk::High => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Exact inverse of [`CrashRisk::value`].
    pub fn from_value(value: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.value() == value)
    }

    pub fn label(self) -> &'static str {
        match self {
            CrashRisk::None => "0",
            CrashRisk::Low => "0.5",
            CrashRisk::High => "1",
        }
    }
}

impl fmt::Display for CrashRisk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    CrashDerived,
    MatchedNonCrash,
}

/// Three consecutive intervals of one sensor, oldest row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub sensor_id: String,
    /// End of the most recent interval.
    pub end_time: i64,
    /// Row-major `TIMESTEPS × F` values.
    pub values: Vec<f64>,
    pub label: CrashRisk,
    pub provenance: Provenance,
}

impl Window {
    pub fn feature_count(&self) -> usize {
        self.values.len() / TIMESTEPS
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let f = self.feature_count();
        &self.values[t * f..(t + 1) * f]
    }

    /// Mean of each feature across the timesteps.
    pub fn feature_means(&self) -> Vec<f64> {
        let f = self.feature_count();
        (0..f)
            .map(|j| (0..TIMESTEPS).map(|t| self.values[t * f + j]).sum::<f64>() / TIMESTEPS as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts(pub [usize; 3]);

impl ClassCounts {
    pub fn get(&self, class: CrashRisk) -> usize {
        self.0[class.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub feature_names: Vec<String>,
    /// Set once values have been min-max scaled.
    pub normalization: Option<NormalizationParams>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, windows: Vec<Window>) -> Self {
        Dataset { windows, feature_names, normalization: None }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = [0; 3];
        for w in &self.windows {
            counts[w.label.index()] += 1;
        }
        ClassCounts(counts)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.label.value()).collect()
    }

    /// Errors unless `names` equals this dataset's feature list.
    pub fn check_features(&self, names: &[String]) -> Result<(), DatasetError> {
        if self.feature_names == names {
            Ok(())
        } else {
            Err(DatasetError::FeatureMismatch {
                expected: names.join(","),
                found: self.feature_names.join(","),
            })
        }
    }

    /// Keeps only the named features, in the given order.
    pub fn select_features(&self, keep: &[String]) -> Result<Dataset, DatasetError> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|name| {
                self.feature_names.iter().position(|n| n == name).ok_or_else(|| {
                    DatasetError::FeatureMismatch {
                        expected: keep.join(","),
                        found: self.feature_names.join(","),
                    }
                })
            })
            .collect::<Result<_, _>>()?;
        let f = self.feature_count();
        let windows = self
            .windows
            .iter()
            .map(|w| {
                let values = (0..TIMESTEPS)
                    .flat_map(|t| idx.iter().map(move |&j| w.values[t * f + j]))
                    .collect();
                Window { values, ..w.clone() }
            })
            .collect();
        let normalization = self.normalization.as_ref().map(|p| p.select(&idx));
        Ok(Dataset { windows, feature_names: keep.to_vec(), normalization })
    }
}

/// Writes the prepared-dataset CSV: `sensor_id,end_time,label,` then
/// `f<t>_<name>` for each timestep (oldest first) and feature.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<W> {
    write!(out, "sensor_id,end_time,label")?;
    for t in 0..TIMESTEPS {
        for name in &dataset.feature_names {
            write!(out, ",f{t}_{name}")?;
        }
    }
    writeln!(out)?;
    for w in &dataset.windows {
        write!(out, "{},{},{}", w.sensor_id, w.end_time, w.label)?;
        for v in &w.values {
            write!(out, ",{}", fmt_f64(*v))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(out)
}

fn feature_names_from_header(header: &csv::StringRecord) -> Result<Vec<String>, DatasetError> {
    let malformed = |reason: String| DatasetError::Malformed { line: 1, reason };
    let fixed = ["sensor_id", "end_time", "label"];
    for (i, name) in fixed.iter().enumerate() {
        if header.get(i) != Some(*name) {
            return Err(malformed(format!("expected column {} to be `{name}`", i + 1)));
        }
    }
    let rest: Vec<&str> = header.iter().skip(fixed.len()).collect();
    if rest.is_empty() || !rest.len().is_multiple_of(TIMESTEPS) {
        return Err(malformed(format!("{} feature columns is not a multiple of {TIMESTEPS}", rest.len())));
    }
    let f = rest.len() / TIMESTEPS;
    let names: Vec<String> = rest[..f]
        .iter()
        .map(|c| {
            c.strip_prefix("f0_")
                .map(str::to_string)
                .ok_or_else(|| malformed(format!("bad feature column `{c}`")))
        })
        .collect::<Result<_, _>>()?;
    for t in 1..TIMESTEPS {
        for (j, name) in names.iter().enumerate() {
            let expected = format!("f{t}_{name}");
            if rest[t * f + j] != expected {
                return Err(malformed(format!("expected column `{expected}`, found `{}`", rest[t * f + j])));
            }
        }
    }
    Ok(names)
}

/// Reads a prepared-dataset CSV. Provenance is not stored on disk; windows
/// labeled 0 are treated as matched non-crash samples.
pub fn read_dataset_csv<R: Read>(source: R) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| DatasetError::Malformed { line: 1, reason: e.to_string() })?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DatasetError::EmptyFile);
    }
    let names = feature_names_from_header(&header)?;
    let width = 3 + TIMESTEPS * names.len();
    let mut windows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| DatasetError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| DatasetError::Malformed { line, reason };
        if record.len() != width {
            return Err(bad(format!("expected {width} fields, found {}", record.len())));
        }
        let sensor_id = record[0].to_string();
        let end_time: i64 = record[1].parse().map_err(|_| bad(format!("invalid end_time `{}`", &record[1])))?;
        let label = record[2]
            .parse::<f64>()
            .ok()
            .and_then(CrashRisk::from_value)
            .ok_or_else(|| bad(format!("invalid label `{}`", &record[2])))?;
        let values = record
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("invalid value `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let provenance = if label == CrashRisk::None {
            Provenance::MatchedNonCrash
        } else {
            Provenance::CrashDerived
        };
        windows.push(Window { sensor_id, end_time, values, label, provenance });
    }
    Ok(Dataset::new(names, windows))
}
