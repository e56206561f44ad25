//! Seeded synthetic study year: sensor readings, daily weather and a crash
//! log, with a planted precursor before every crash.
//!
//! Traffic values are clipped Gaussians around the recorded-data statistics,
//! scaled by a two-peak rush-hour profile. Entry lanes 1, 4, 7 and 8 are
//! generated as noisy copies of lanes 2, 3, 5 and 6 so that correlation
//! pruning has something to find; only the source lanes carry the precursor.
//!
//! By default only "sessions" are covered: a short span around each crash at
//! the crash sensor, plus the same time of day on a few other days. That is
//! all the labeling stage reads, and it keeps a year of 36 sensors small.
//! [`Coverage::Full`] emits every interval of every sensor instead.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use chrono::{DateTime, Days, NaiveDate};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ingest::{CrashEvent, RawSensorRecord, WeatherRecord, TRAFFIC_COUNT};
use crate::label::MATCH_BUFFER_SECS;
use crate::{fmt_f64, rng, INTERVAL_SECS, TIMESTEPS};

const DAY_SECS: i64 = 86_400;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("spec infeasible: {0}")]
    SpecInfeasible(String),
    #[error("{feature} value {value} outside [{min}, {max}]")]
    BoundViolation { feature: String, value: f64, min: f64, max: f64 },
    #[error("no readings to verify")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureSpec {
    fn new(name: &str, mean: f64, std: f64, min: f64, max: f64) -> Self {
        FeatureSpec { name: name.to_string(), mean, std, min, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Crash sessions plus `control_days` same-time-of-day sessions each.
    Sessions { control_days: usize },
    /// Every interval of every sensor for the whole study period.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// The 12 traffic columns in wire order.
    pub traffic: Vec<FeatureSpec>,
    pub temperature: FeatureSpec,
    pub precipitation_rate: f64,
    pub sensor_count: usize,
    pub crash_count: usize,
    pub days: u32,
    /// UTC epoch seconds of the first covered moment; must be midnight UTC.
    pub start: i64,
    /// Offset of local time from UTC, used by the rush-hour profile.
    pub utc_offset_secs: i64,
    pub speed_drop_fraction: f64,
    pub volume_surge_fraction: f64,
    pub onset_minutes: u32,
    /// Precursor noise as a fraction of each feature's std.
    pub noise_scale: f64,
    /// Rush-hour peak height relative to the daily mean.
    pub diurnal_amplitude: f64,
    /// Correlation of each shadow entry lane with its source lane.
    pub shadow_correlation: f64,
    pub readings_per_interval: u32,
    pub coverage: Coverage,
    /// Permits zero standard deviations.
    pub allow_degenerate: bool,
}

/// Shadow lane ← source lane, as traffic column indices.
pub const SHADOW_LANES: [(usize, usize); 4] = [(4, 5), (7, 6), (10, 8), (11, 9)];

const SPEEDS: [usize; 2] = [0, 1];
/// Columns that receive the precursor volume surge.
const SURGE_COLUMNS: [usize; 6] = [2, 3, 5, 6, 8, 9];

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            traffic: vec![
                FeatureSpec::new("up_speed", 75.06, 26.23, 3.0, 123.0),
                FeatureSpec::new("down_speed", 72.49, 29.50, 4.0, 247.0),
                FeatureSpec::new("up_volume", 176.52, 57.40, 1.0, 314.0),
                FeatureSpec::new("down_volume", 113.78, 61.95, 0.0, 296.0),
                FeatureSpec::new("vl1", 12.63, 16.50, 0.0, 246.0),
                FeatureSpec::new("vl2", 16.19, 19.84, 0.0, 207.0),
                FeatureSpec::new("vl3", 16.41, 23.34, 0.0, 93.0),
                FeatureSpec::new("vl4", 14.42, 20.88, 0.0, 88.0),
                FeatureSpec::new("vl5", 13.70, 18.02, 0.0, 105.0),
                FeatureSpec::new("vl6", 11.16, 12.08, 0.0, 68.0),
                FeatureSpec::new("vl7", 2.35, 5.43, 0.0, 61.0),
                // Printed as "(55 0)"; read as min 0, max 55.
                FeatureSpec::new("vl8", 2.40, 5.11, 0.0, 55.0),
            ],
            temperature: FeatureSpec::new("temperature", 17.71, 7.00, 0.0, 29.0),
            precipitation_rate: 0.17,
            sensor_count: 36,
            crash_count: 1293,
            days: 365,
            start: 1_546_300_800, // 2019-01-01T00:00:00Z
            utc_offset_secs: 3 * 3600,
            speed_drop_fraction: 0.3,
            volume_surge_fraction: 0.3,
            onset_minutes: 12,
            noise_scale: 0.05,
            diurnal_amplitude: 0.2,
            shadow_correlation: 0.8,
            readings_per_interval: 1,
            coverage: Coverage::Sessions { control_days: 8 },
            allow_degenerate: false,
        }
    }
}

impl SynthSpec {
    pub fn end(&self) -> i64 {
        self.start + i64::from(self.days) * DAY_SECS
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        let width = self.sensor_count.to_string().len().max(2);
        (1..=self.sensor_count).map(|i| format!("S{i:0width$}")).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.traffic.len() != TRAFFIC_COUNT {
            return bad(format!("expected {TRAFFIC_COUNT} traffic features, got {}", self.traffic.len()));
        }
        for f in self.traffic.iter().chain([&self.temperature]) {
            if !(f.min <= f.mean && f.mean <= f.max) {
                return bad(format!("{}: need min <= mean <= max", f.name));
            }
            if f.std < 0.0 || (f.std == 0.0 && !self.allow_degenerate) {
                return bad(format!("{}: std must be positive", f.name));
            }
        }
        if !(0.0..=1.0).contains(&self.precipitation_rate) {
            return bad("precipitation rate must lie in [0, 1]".into());
        }
        if self.start.rem_euclid(DAY_SECS) != 0 {
            return bad("start must be midnight UTC".into());
        }
        if self.sensor_count == 0 || self.days == 0 {
            return bad("need at least one sensor and one day".into());
        }
        if !(0.0..=1.0).contains(&self.speed_drop_fraction) || self.volume_surge_fraction < 0.0 {
            return bad("speed drop must lie in [0, 1] and surge must be non-negative".into());
        }
        if self.onset_minutes == 0 || self.noise_scale < 0.0 || !(0.0..1.0).contains(&self.diurnal_amplitude) {
            return bad("onset must be positive, noise non-negative, amplitude in [0, 1)".into());
        }
        if !(-1.0..=1.0).contains(&self.shadow_correlation) {
            return bad("shadow correlation must lie in [-1, 1]".into());
        }
        if self.readings_per_interval == 0 || i64::from(self.readings_per_interval) > INTERVAL_SECS {
            return bad("readings per interval must lie in 1..=240".into());
        }
        Ok(())
    }

    /// Rush-hour multiplier for a UTC moment: mean 1 over the day, peaking
    /// at `1 + amplitude` at 08:00 and 18:00 local time.
    pub fn diurnal(&self, timestamp: i64) -> f64 {
        let hour = (timestamp + self.utc_offset_secs).rem_euclid(DAY_SECS) as f64 / 3600.0;
        1.0 + self.diurnal_amplitude * diurnal_shape(hour)
    }
}

const PEAK_SHARPNESS: f64 = 4.0;

fn raw_bumps(hour: f64) -> f64 {
    [8.0, 18.0]
        .iter()
        .map(|p: &f64| (PEAK_SHARPNESS * ((hour - p) * std::f64::consts::TAU / 24.0).cos()).exp())
        .sum()
}

/// Two periodic bumps, shifted to zero daily mean and scaled to peak at 1.
fn diurnal_shape(hour: f64) -> f64 {
    use std::sync::OnceLock;
    static NORM: OnceLock<(f64, f64)> = OnceLock::new();
    let (mean, peak) = *NORM.get_or_init(|| {
        let n = 24 * 60;
        let mean = (0..n).map(|m| raw_bumps(m as f64 / 60.0)).sum::<f64>() / n as f64;
        let peak = (0..n).map(|m| raw_bumps(m as f64 / 60.0)).fold(f64::NEG_INFINITY, f64::max);
        (mean, peak)
    });
    (raw_bumps(hour) - mean) / (peak - mean)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Draws from `N(mean, std)` clipped to `[min, max]`, given a standard normal.
pub fn clipped_gaussian(f: &FeatureSpec, z: f64) -> f64 {
    (f.mean + f.std * z).clamp(f.min, f.max)
}

/// Everything `generate` produces except the (possibly streamed) readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLogs {
    pub weather: Vec<WeatherRecord>,
    pub crashes: Vec<CrashEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub readings: Vec<RawSensorRecord>,
    pub weather: Vec<WeatherRecord>,
    pub crashes: Vec<CrashEvent>,
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SyntheticData, SynthError> {
    let mut readings = Vec::new();
    let logs = generate_with(spec, seed, |r| readings.push(r.clone()))?;
    Ok(SyntheticData { readings, weather: logs.weather, crashes: logs.crashes })
}

/// Streams readings to `sink` in `(sensor, timestamp)` order and returns the
/// weather and crash logs.
pub fn generate_with(
    spec: &SynthSpec,
    seed: u64,
    mut sink: impl FnMut(&RawSensorRecord),
) -> Result<SynthLogs, SynthError> {
    spec.validate()?;
    let sensors = spec.sensor_ids();
    let weather = draw_weather(spec, seed);
    let crashes = draw_crashes(spec, seed, &sensors)?;

    let mut crash_times: HashMap<&str, Vec<i64>> = HashMap::new();
    for c in &crashes {
        crash_times.entry(c.sensor_id.as_str()).or_default().push(c.timestamp);
    }
    for v in crash_times.values_mut() {
        v.sort_unstable();
    }
    let buckets = covered_buckets(spec, seed, &sensors, &crashes, &crash_times);

    let onset = i64::from(spec.onset_minutes) * 60;
    let in_onset = |sensor: &str, t: i64| {
        crash_times.get(sensor).is_some_and(|times| {
            let k = times.partition_point(|&c| c <= t);
            times.get(k).is_some_and(|&c| c - onset <= t)
        })
    };
    let mut base_rng = rng::stream(seed, "synth-readings");
    let mut noise_rng = rng::stream(seed, "synth-precursor");
    let spacing = INTERVAL_SECS / i64::from(spec.readings_per_interval);
    let rho = spec.shadow_correlation;
    let rho_c = (1.0 - rho * rho).max(0.0).sqrt();

    let mut emit = |sensor: &str, bucket: i64| {
        for r in 0..i64::from(spec.readings_per_interval) {
            let t = bucket + r * spacing + spacing / 2;
            let mut z = [0.0; TRAFFIC_COUNT];
            for v in z.iter_mut() {
                *v = base_rng.sample(StandardNormal);
            }
            let mut eps = [0.0; TRAFFIC_COUNT];
            for v in eps.iter_mut() {
                *v = noise_rng.sample(StandardNormal);
            }
            for (shadow, source) in SHADOW_LANES {
                z[shadow] = rho * z[source] + rho_c * z[shadow];
            }
            let m = spec.diurnal(t);
            let distorted = in_onset(sensor, t);
            let mut traffic = [0.0; TRAFFIC_COUNT];
            for (j, f) in spec.traffic.iter().enumerate() {
                let is_speed = SPEEDS.contains(&j);
                let mut v = (f.mean + f.std * z[j]) * if is_speed { 2.0 - m } else { m };
                if distorted {
                    if is_speed {
                        v = v * (1.0 - spec.speed_drop_fraction) + spec.noise_scale * f.std * eps[j];
                    } else if SURGE_COLUMNS.contains(&j) {
                        v = v * (1.0 + spec.volume_surge_fraction) + spec.noise_scale * f.std * eps[j];
                    }
                }
                traffic[j] = round2(v.clamp(f.min, f.max));
            }
            sink(&RawSensorRecord { timestamp: t, sensor_id: sensor.to_string(), traffic });
        }
    };
    match spec.coverage {
        Coverage::Full => {
            let n = i64::from(spec.days) * DAY_SECS / INTERVAL_SECS;
            for sensor in &sensors {
                for b in 0..n {
                    emit(sensor, spec.start + b * INTERVAL_SECS);
                }
            }
        }
        Coverage::Sessions { .. } => {
            for (s, bucket) in buckets {
                emit(&sensors[s], bucket);
            }
        }
    }
    Ok(SynthLogs { weather, crashes })
}

fn draw_weather(spec: &SynthSpec, seed: u64) -> Vec<WeatherRecord> {
    let mut rng = rng::stream(seed, "synth-weather");
    let first: NaiveDate = DateTime::from_timestamp(spec.start, 0).expect("valid start").date_naive();
    (0..spec.days)
        .map(|d| {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            WeatherRecord {
                date: first + Days::new(u64::from(d)),
                temperature: round2(clipped_gaussian(&spec.temperature, z)),
                precipitation: if u < spec.precipitation_rate { 1.0 } else { 0.0 },
            }
        })
        .collect()
}

/// Crash moments uniform over the study period after its first 24 minutes,
/// never two within ±30 minutes at one sensor.
fn draw_crashes(spec: &SynthSpec, seed: u64, sensors: &[String]) -> Result<Vec<CrashEvent>, SynthError> {
    let lead = 2 * TIMESTEPS as i64 * INTERVAL_SECS;
    let (lo, hi) = (spec.start + lead, spec.end());
    if hi <= lo {
        return if spec.crash_count == 0 {
            Ok(Vec::new())
        } else {
            Err(SynthError::SpecInfeasible("study period shorter than the 24-minute lead".into()))
        };
    }
    // Each crash blocks at least 30 minutes of its sensor's timeline.
    let capacity = sensors.len() as i64 * ((hi - lo) / MATCH_BUFFER_SECS + 1);
    if spec.crash_count as i64 > capacity {
        return Err(SynthError::SpecInfeasible(format!(
            "{} crashes cannot be spaced 30 minutes apart on {} sensors over {} days",
            spec.crash_count,
            sensors.len(),
            spec.days
        )));
    }
    let mut rng = rng::stream(seed, "synth-crashes");
    let mut per_sensor: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); sensors.len()];
    let mut placed = 0;
    let mut attempts = 0usize;
    let max_attempts = 1000 + 200 * spec.crash_count;
    while placed < spec.crash_count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SynthError::SpecInfeasible(format!(
                "placed only {placed} of {} crashes with 30-minute spacing",
                spec.crash_count
            )));
        }
        let t = rng.random_range(lo..hi);
        let s = rng.random_range(0..sensors.len());
        let clash = per_sensor[s].range(t - MATCH_BUFFER_SECS..=t + MATCH_BUFFER_SECS).next().is_some();
        if !clash {
            per_sensor[s].insert(t);
            placed += 1;
        }
    }
    let mut crashes: Vec<CrashEvent> = per_sensor
        .iter()
        .enumerate()
        .flat_map(|(s, times)| times.iter().map(move |&t| CrashEvent { timestamp: t, sensor_id: sensors[s].clone() }))
        .collect();
    crashes.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.sensor_id.cmp(&b.sensor_id)));
    Ok(crashes)
}

/// `(sensor index, bucket start)` pairs covered in session mode.
fn covered_buckets(
    spec: &SynthSpec,
    seed: u64,
    sensors: &[String],
    crashes: &[CrashEvent],
    crash_times: &HashMap<&str, Vec<i64>>,
) -> BTreeSet<(usize, i64)> {
    let mut out = BTreeSet::new();
    let Coverage::Sessions { control_days } = spec.coverage else {
        return out;
    };
    let position: HashMap<&str, usize> = sensors.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let before = 2 * TIMESTEPS as i64;
    let (start, end) = (spec.start, spec.end());
    let session = |out: &mut BTreeSet<(usize, i64)>, s: usize, bucket: i64| {
        for k in -before..=1 {
            let b = bucket + k * INTERVAL_SECS;
            if b >= start && b < end {
                out.insert((s, b));
            }
        }
    };
    let near_crash = |sensor: &str, moment: i64| {
        crash_times.get(sensor).is_some_and(|times| {
            let k = times.partition_point(|&t| t < moment - MATCH_BUFFER_SECS);
            times.get(k).is_some_and(|&t| t <= moment + MATCH_BUFFER_SECS)
        })
    };
    let mut rng = rng::stream(seed, "synth-controls");
    for crash in crashes {
        let s = position[crash.sensor_id.as_str()];
        let bucket = crate::ingest::bucket_start(crash.timestamp);
        session(&mut out, s, bucket);
        let day = (crash.timestamp - start).div_euclid(DAY_SECS);
        let candidates: Vec<i64> = (0..i64::from(spec.days))
            .filter(|&d| d != day)
            .filter(|&d| {
                let shift = (d - day) * DAY_SECS;
                let b = bucket + shift;
                b - before * INTERVAL_SECS >= start
                    && b + 2 * INTERVAL_SECS <= end
                    && !near_crash(&crash.sensor_id, crash.timestamp + shift)
            })
            .collect();
        let take = control_days.min(candidates.len());
        let mut chosen = index::sample(&mut rng, candidates.len(), take).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            session(&mut out, s, bucket + (candidates[i] - day) * DAY_SECS);
        }
    }
    out
}

/// Achieved statistics of one generated column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub target: FeatureSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecReport {
    pub features: Vec<FeatureStats>,
    pub days: usize,
    pub precipitation_rate: f64,
    pub target_precipitation_rate: f64,
}

/// Streaming bounds check and moment accumulator for generated readings.
#[derive(Debug, Clone)]
pub struct SpecAccumulator {
    spec: SynthSpec,
    count: usize,
    sums: [f64; TRAFFIC_COUNT],
    squares: [f64; TRAFFIC_COUNT],
    mins: [f64; TRAFFIC_COUNT],
    maxs: [f64; TRAFFIC_COUNT],
}

fn check_bound(f: &FeatureSpec, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v >= f.min && v <= f.max {
        Ok(())
    } else {
        Err(SynthError::BoundViolation { feature: f.name.clone(), value: v, min: f.min, max: f.max })
    }
}

fn finish_stats(f: &FeatureSpec, count: usize, sum: f64, squares: f64, min: f64, max: f64) -> Result<FeatureStats, SynthError> {
    if count == 0 {
        return Err(SynthError::Empty);
    }
    let n = count as f64;
    let mean = sum / n;
    let std = (squares / n - mean * mean).max(0.0).sqrt();
    Ok(FeatureStats { name: f.name.clone(), count, mean, std, min, max, target: f.clone() })
}

impl SpecAccumulator {
    pub fn new(spec: &SynthSpec) -> Self {
        SpecAccumulator {
            spec: spec.clone(),
            count: 0,
            sums: [0.0; TRAFFIC_COUNT],
            squares: [0.0; TRAFFIC_COUNT],
            mins: [f64::INFINITY; TRAFFIC_COUNT],
            maxs: [f64::NEG_INFINITY; TRAFFIC_COUNT],
        }
    }

    pub fn push(&mut self, reading: &RawSensorRecord) -> Result<(), SynthError> {
        for (j, (f, &v)) in self.spec.traffic.iter().zip(&reading.traffic).enumerate() {
            check_bound(f, v)?;
            self.sums[j] += v;
            self.squares[j] += v * v;
            self.mins[j] = self.mins[j].min(v);
            self.maxs[j] = self.maxs[j].max(v);
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(&self, weather: &[WeatherRecord]) -> Result<SpecReport, SynthError> {
        let mut features = Vec::new();
        for (j, f) in self.spec.traffic.iter().enumerate() {
            features.push(finish_stats(f, self.count, self.sums[j], self.squares[j], self.mins[j], self.maxs[j])?);
        }
        let temp = &self.spec.temperature;
        let (mut sum, mut sq, mut lo, mut hi, mut rain) = (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for w in weather {
            check_bound(temp, w.temperature)?;
            if w.precipitation != 0.0 && w.precipitation != 1.0 {
                return Err(SynthError::BoundViolation {
                    feature: "precipitation".into(),
                    value: w.precipitation,
                    min: 0.0,
                    max: 1.0,
                });
            }
            sum += w.temperature;
            sq += w.temperature * w.temperature;
            lo = lo.min(w.temperature);
            hi = hi.max(w.temperature);
            rain += w.precipitation;
        }
        features.push(finish_stats(temp, weather.len(), sum, sq, lo, hi)?);
        Ok(SpecReport {
            features,
            days: weather.len(),
            precipitation_rate: rain / weather.len() as f64,
            target_precipitation_rate: self.spec.precipitation_rate,
        })
    }
}

/// Checks every value against its bounds and measures the achieved moments.
pub fn verify_spec(
    readings: &[RawSensorRecord],
    weather: &[WeatherRecord],
    spec: &SynthSpec,
) -> Result<SpecReport, SynthError> {
    let mut acc = SpecAccumulator::new(spec);
    for r in readings {
        acc.push(r)?;
    }
    acc.finish(weather)
}

pub fn write_spec_report<W: Write>(report: &SpecReport, mut out: W) -> std::io::Result<W> {
    writeln!(out, "feature,count,mean,std,min,max,target_mean,target_std,target_min,target_max")?;
    for f in &report.features {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            f.name,
            f.count,
            fmt_f64(f.mean),
            fmt_f64(f.std),
            fmt_f64(f.min),
            fmt_f64(f.max),
            fmt_f64(f.target.mean),
            fmt_f64(f.target.std),
            fmt_f64(f.target.min),
            fmt_f64(f.target.max)
        )?;
    }
    writeln!(
        out,
        "precipitation,{},{},,0,1,{},,0,1",
        report.days,
        fmt_f64(report.precipitation_rate),
        fmt_f64(report.target_precipitation_rate)
    )?;
    Ok(out)
}
