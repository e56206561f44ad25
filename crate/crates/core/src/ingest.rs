//! Raw file parsing and 4-minute interval aggregation.
//!
//! Three CSV wire formats come in: `sensors.csv`, `weather.csv` and
//! `crashes.csv`. Readings are averaged per `(sensor_id, 4-minute bucket)`;
//! empty buckets are left out rather than imputed.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate};
use thiserror::Error;

use crate::{fmt_f64, INTERVAL_SECS};

/// Traffic columns of `sensors.csv`, in wire order.
pub const TRAFFIC_COLUMNS: [&str; 12] = [
    "up_speed",
    "down_speed",
    "up_volume",
    "down_volume",
    "vl1",
    "vl2",
    "vl3",
    "vl4",
    "vl5",
    "vl6",
    "vl7",
    "vl8",
];

/// The 14 interval features, in the order used everywhere downstream.
pub const FEATURE_NAMES: [&str; 14] = [
    "up_speed",
    "down_speed",
    "up_volume",
    "down_volume",
    "vl1",
    "vl2",
    "vl3",
    "vl4",
    "vl5",
    "vl6",
    "vl7",
    "vl8",
    "temperature",
    "precipitation",
];

pub const TRAFFIC_COUNT: usize = TRAFFIC_COLUMNS.len();
pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();
pub const TEMPERATURE: usize = 12;
pub const PRECIPITATION: usize = 13;

const SENSOR_HEADER: &str =
    "timestamp,sensor_id,up_speed,down_speed,up_volume,down_volume,vl1,vl2,vl3,vl4,vl5,vl6,vl7,vl8";
const WEATHER_HEADER: &str = "date,temperature,precipitation";
const CRASH_HEADER: &str = "timestamp,sensor_id";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty file")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("no weather record for {0}")]
    MissingWeather(NaiveDate),
    #[error("crash at {timestamp} references unknown sensor `{sensor_id}`")]
    UnknownSensor { sensor_id: String, timestamp: i64 },
    #[error("two crashes at sensor `{sensor_id}` in the interval starting {interval_start}")]
    DuplicateCrash { sensor_id: String, interval_start: i64 },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One reading from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSensorRecord {
    pub timestamp: i64,
    pub sensor_id: String,
    /// Values in [`TRAFFIC_COLUMNS`] order: speeds in km/h, volumes in vehicles
    /// per reading.
    pub traffic: [f64; TRAFFIC_COUNT],
}

impl RawSensorRecord {
    pub fn up_speed(&self) -> f64 {
        self.traffic[0]
    }

    pub fn down_speed(&self) -> f64 {
        self.traffic[1]
    }

    pub fn up_volume(&self) -> f64 {
        self.traffic[2]
    }

    pub fn down_volume(&self) -> f64 {
        self.traffic[3]
    }

    /// Entry-lane volume, `lane` in `1..=8`.
    pub fn entry_lane(&self, lane: usize) -> f64 {
        self.traffic[3 + lane]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRecord {
    pub date: NaiveDate,
    pub temperature: f64,
    /// 0 (dry) or 1 (rain).
    pub precipitation: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrashEvent {
    pub timestamp: i64,
    pub sensor_id: String,
}

/// Averaged readings of one sensor over one 4-minute interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub sensor_id: String,
    /// Multiple of [`INTERVAL_SECS`].
    pub interval_start: i64,
    /// Values in [`FEATURE_NAMES`] order. Weather slots are zero until
    /// [`join_weather`] fills them.
    pub features: [f64; FEATURE_COUNT],
    pub sample_count: u32,
}

/// Start of the 4-minute bucket containing `timestamp`.
pub fn bucket_start(timestamp: i64) -> i64 {
    timestamp - timestamp.rem_euclid(INTERVAL_SECS)
}

/// UTC calendar date of a timestamp.
pub fn utc_date(timestamp: i64) -> NaiveDate {
    DateTime::from_timestamp(timestamp, 0)
        .map(|dt| dt.date_naive())
        .unwrap_or(NaiveDate::MIN)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Inclusive-exclusive timestamp range readings must fall in.
    pub study_range: Option<(i64, i64)>,
}

fn csv_error(err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::Io(_) => IngestError::Csv(err.to_string()),
        _ => IngestError::MalformedRow { line, reason: err.to_string() },
    }
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    columns: Vec<usize>,
}

impl<R: Read> Table<R> {
    fn open(source: R, required: &[&str]) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let headers = reader.headers().map_err(csv_error)?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(IngestError::EmptyFile);
        }
        let columns = required
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim() == *name)
                    .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Table { reader, columns })
    }

    fn for_each(
        &mut self,
        mut f: impl FnMut(u64, Vec<&str>) -> Result<(), String>,
    ) -> Result<(), IngestError> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map(|p| p.line()).unwrap_or(0);
                    let fields = self
                        .columns
                        .iter()
                        .map(|&c| record.get(c).map(str::trim).unwrap_or(""))
                        .collect();
                    f(line, fields).map_err(|reason| IngestError::MalformedRow { line, reason })?;
                }
                Err(err) => return Err(csv_error(err)),
            }
        }
    }
}

fn parse_timestamp(field: &str) -> Result<i64, String> {
    field.parse::<i64>().map_err(|_| format!("invalid timestamp `{field}`"))
}

fn parse_non_negative(name: &str, field: &str) -> Result<f64, String> {
    let value: f64 = field.parse().map_err(|_| format!("invalid {name} `{field}`"))?;
    if !value.is_finite() {
        return Err(format!("non-finite {name}"));
    }
    if value < 0.0 {
        return Err(format!("negative {name} {field}"));
    }
    Ok(value)
}

/// Parses `sensors.csv`. One record per data row, in file order.
pub fn parse_sensor_csv<R: Read>(
    source: R,
    options: &ParseOptions,
) -> Result<Vec<RawSensorRecord>, IngestError> {
    let mut required = vec!["timestamp", "sensor_id"];
    required.extend(TRAFFIC_COLUMNS);
    let mut table = Table::open(source, &required)?;
    let mut out = Vec::new();
    table.for_each(|_, fields| {
        let timestamp = parse_timestamp(fields[0])?;
        if let Some((lo, hi)) = options.study_range {
            if timestamp < lo || timestamp >= hi {
                return Err(format!("timestamp {timestamp} outside study range"));
            }
        }
        if fields[1].is_empty() {
            return Err("empty sensor_id".to_string());
        }
        let mut traffic = [0.0; TRAFFIC_COUNT];
        for (slot, (name, field)) in traffic.iter_mut().zip(TRAFFIC_COLUMNS.iter().zip(&fields[2..])) {
            *slot = parse_non_negative(name, field)?;
        }
        out.push(RawSensorRecord { timestamp, sensor_id: fields[1].to_string(), traffic });
        Ok(())
    })?;
    Ok(out)
}

/// Parses `weather.csv`. Dates must be unique.
pub fn parse_weather_csv<R: Read>(source: R) -> Result<Vec<WeatherRecord>, IngestError> {
    let mut table = Table::open(source, &["date", "temperature", "precipitation"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    table.for_each(|_, fields| {
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
            .map_err(|_| format!("invalid date `{}`", fields[0]))?;
        let temperature: f64 = fields[1]
            .parse()
            .map_err(|_| format!("invalid temperature `{}`", fields[1]))?;
        if !temperature.is_finite() {
            return Err("non-finite temperature".to_string());
        }
        let precipitation: f64 = fields[2]
            .parse()
            .map_err(|_| format!("invalid precipitation `{}`", fields[2]))?;
        if precipitation != 0.0 && precipitation != 1.0 {
            return Err(format!("precipitation must be 0 or 1, got `{}`", fields[2]));
        }
        if !seen.insert(date) {
            return Err(format!("duplicate date {date}"));
        }
        out.push(WeatherRecord { date, temperature, precipitation });
        Ok(())
    })?;
    Ok(out)
}

/// Parses `crashes.csv`.
pub fn parse_crash_csv<R: Read>(source: R) -> Result<Vec<CrashEvent>, IngestError> {
    let mut table = Table::open(source, &["timestamp", "sensor_id"])?;
    let mut out = Vec::new();
    table.for_each(|_, fields| {
        let timestamp = parse_timestamp(fields[0])?;
        if fields[1].is_empty() {
            return Err("empty sensor_id".to_string());
        }
        out.push(CrashEvent { timestamp, sensor_id: fields[1].to_string() });
        Ok(())
    })?;
    Ok(out)
}

/// Checks crash events against the interval data: the sensor must exist and no
/// two crashes may share a `(sensor_id, interval)`.
pub fn validate_crash_events(
    crashes: &[CrashEvent],
    intervals: &[IntervalRecord],
) -> Result<(), IngestError> {
    let sensors: HashSet<&str> = intervals.iter().map(|r| r.sensor_id.as_str()).collect();
    let mut seen = HashSet::new();
    for crash in crashes {
        if !sensors.contains(crash.sensor_id.as_str()) {
            return Err(IngestError::UnknownSensor {
                sensor_id: crash.sensor_id.clone(),
                timestamp: crash.timestamp,
            });
        }
        let key = (crash.sensor_id.as_str(), bucket_start(crash.timestamp));
        if !seen.insert(key) {
            return Err(IngestError::DuplicateCrash {
                sensor_id: crash.sensor_id.clone(),
                interval_start: key.1,
            });
        }
    }
    Ok(())
}

pub struct SensorCsvWriter<W: Write> {
    out: W,
}

impl<W: Write> SensorCsvWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{SENSOR_HEADER}")?;
        Ok(SensorCsvWriter { out })
    }

    pub fn write(&mut self, record: &RawSensorRecord) -> std::io::Result<()> {
        write!(self.out, "{},{}", record.timestamp, record.sensor_id)?;
        for value in record.traffic {
            write!(self.out, ",{}", fmt_f64(value))?;
        }
        writeln!(self.out)
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Serializes readings in the `sensors.csv` wire format.
pub fn write_sensor_csv<W: Write>(records: &[RawSensorRecord], out: W) -> std::io::Result<W> {
    let mut writer = SensorCsvWriter::new(out)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()
}

pub fn write_weather_csv<W: Write>(records: &[WeatherRecord], mut out: W) -> std::io::Result<W> {
    writeln!(out, "{WEATHER_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            r.date.format("%Y-%m-%d"),
            fmt_f64(r.temperature),
            fmt_f64(r.precipitation)
        )?;
    }
    out.flush()?;
    Ok(out)
}

pub fn write_crash_csv<W: Write>(records: &[CrashEvent], mut out: W) -> std::io::Result<W> {
    writeln!(out, "{CRASH_HEADER}")?;
    for r in records {
        writeln!(out, "{},{}", r.timestamp, r.sensor_id)?;
    }
    out.flush()?;
    Ok(out)
}

fn total_order(a: &RawSensorRecord, b: &RawSensorRecord) -> std::cmp::Ordering {
    a.sensor_id
        .cmp(&b.sensor_id)
        .then(a.timestamp.cmp(&b.timestamp))
        .then_with(|| {
            a.traffic
                .iter()
                .zip(&b.traffic)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Averages readings into one record per `(sensor_id, bucket)` with at least
/// one reading, sorted by `(sensor_id, interval_start)`.
///
/// Readings are summed in a canonical order so the result does not depend on
/// input order, bit for bit.
pub fn aggregate_intervals(records: &[RawSensorRecord]) -> Vec<IntervalRecord> {
    let mut sorted: Vec<&RawSensorRecord> = records.iter().collect();
    sorted.sort_by(|a, b| total_order(a, b));

    let mut out: Vec<IntervalRecord> = Vec::new();
    let mut sums = [0.0; TRAFFIC_COUNT];
    let mut count = 0u32;
    let mut current: Option<(&str, i64)> = None;

    let flush = |out: &mut Vec<IntervalRecord>, key: (&str, i64), sums: &[f64; TRAFFIC_COUNT], count: u32| {
        let mut features = [0.0; FEATURE_COUNT];
        for (slot, sum) in features.iter_mut().zip(sums) {
            *slot = sum / f64::from(count);
        }
        out.push(IntervalRecord {
            sensor_id: key.0.to_string(),
            interval_start: key.1,
            features,
            sample_count: count,
        });
    };

    for record in sorted {
        let key = (record.sensor_id.as_str(), bucket_start(record.timestamp));
        if current != Some(key) {
            if let Some(prev) = current {
                flush(&mut out, prev, &sums, count);
            }
            current = Some(key);
            sums = [0.0; TRAFFIC_COUNT];
            count = 0;
        }
        for (sum, value) in sums.iter_mut().zip(record.traffic) {
            *sum += value;
        }
        count += 1;
    }
    if let Some(prev) = current {
        flush(&mut out, prev, &sums, count);
    }
    out
}

/// Fills the temperature and precipitation slots from the record for each
/// interval's UTC date.
pub fn join_weather(
    mut intervals: Vec<IntervalRecord>,
    weather: &[WeatherRecord],
) -> Result<Vec<IntervalRecord>, IngestError> {
    let by_date: HashMap<NaiveDate, &WeatherRecord> = weather.iter().map(|w| (w.date, w)).collect();
    for interval in &mut intervals {
        let date = utc_date(interval.interval_start);
        let day = by_date.get(&date).ok_or(IngestError::MissingWeather(date))?;
        interval.features[TEMPERATURE] = day.temperature;
        interval.features[PRECIPITATION] = day.precipitation;
    }
    Ok(intervals)
}
