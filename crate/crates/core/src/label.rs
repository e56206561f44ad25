//! Window extraction, risk labeling, matched non-crash sampling and the
//! stratified train/test split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use thiserror::Error;

use crate::dataset::{CrashRisk, Dataset, Provenance, Window};
use crate::ingest::{bucket_start, CrashEvent, IntervalRecord, FEATURE_NAMES};
use crate::{rng, INTERVAL_SECS, TIMESTEPS};

const DAY_SECS: i64 = 86_400;

/// No crash at the sensor may lie within this distance of a matched moment.
pub const MATCH_BUFFER_SECS: i64 = 30 * 60;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("class {0} has fewer than 2 windows")]
    ClassTooSmall(CrashRisk),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("ratio must be at least 1")]
    BadRatio,
    #[error("unknown label policy `{0}` (expected near-far or single-window)")]
    UnknownPolicy(String),
}

/// Which windows a crash produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// 0–12 min before the crash is high risk, 12–24 min is low risk.
    #[default]
    NearFar,
    /// Only the 0–12 min window, labeled high risk.
    SingleWindow,
}

impl FromStr for LabelPolicy {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "near-far" => Ok(LabelPolicy::NearFar),
            "single-window" => Ok(LabelPolicy::SingleWindow),
            other => Err(LabelError::UnknownPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for LabelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelPolicy::NearFar => "near-far",
            LabelPolicy::SingleWindow => "single-window",
        })
    }
}

/// Where a window sits relative to a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowOrigin {
    /// Ends at the start of the crash interval (0–12 min before).
    Near,
    /// Ends 12 minutes earlier (12–24 min before).
    Far,
    MatchedNonCrash,
}

pub fn assign_risk_label(origin: WindowOrigin) -> CrashRisk {
    match origin {
        WindowOrigin::Near => CrashRisk::High,
        WindowOrigin::Far => CrashRisk::Low,
        WindowOrigin::MatchedNonCrash => CrashRisk::None,
    }
}

/// `(sensor_id, interval_start)` lookup over aggregated intervals.
pub struct IntervalIndex<'a> {
    by_key: HashMap<(&'a str, i64), &'a IntervalRecord>,
    range: Option<(i64, i64)>,
}

impl<'a> IntervalIndex<'a> {
    pub fn new(intervals: &'a [IntervalRecord]) -> Self {
        let by_key = intervals
            .iter()
            .map(|r| ((r.sensor_id.as_str(), r.interval_start), r))
            .collect();
        let range = intervals
            .iter()
            .map(|r| r.interval_start)
            .fold(None, |acc: Option<(i64, i64)>, s| match acc {
                None => Some((s, s)),
                Some((lo, hi)) => Some((lo.min(s), hi.max(s))),
            });
        IntervalIndex { by_key, range }
    }

    /// First and last interval start over all sensors.
    pub fn range(&self) -> Option<(i64, i64)> {
        self.range
    }

    /// Values of the `TIMESTEPS` consecutive intervals ending just before
    /// `end_time`, oldest first, or `None` if any is missing.
    pub fn window_values(&self, sensor_id: &str, end_time: i64) -> Option<Vec<f64>> {
        let mut values = Vec::with_capacity(TIMESTEPS * FEATURE_NAMES.len());
        for step in (1..=TIMESTEPS as i64).rev() {
            let record = self.by_key.get(&(sensor_id, end_time - step * INTERVAL_SECS))?;
            values.extend_from_slice(&record.features);
        }
        Some(values)
    }
}

fn window_end(origin: WindowOrigin, crash_time: i64) -> i64 {
    let crash_bucket = bucket_start(crash_time);
    match origin {
        WindowOrigin::Near | WindowOrigin::MatchedNonCrash => crash_bucket,
        WindowOrigin::Far => crash_bucket - TIMESTEPS as i64 * INTERVAL_SECS,
    }
}

#[derive(Debug, Clone, Default)]
pub struct CrashWindows {
    pub windows: Vec<Window>,
    /// Events that produced a high-risk window, sorted.
    pub used_events: Vec<CrashEvent>,
    /// Events skipped for lack of 3 intervals right before the crash.
    pub skipped: usize,
    /// Near-far only: events whose 12–24 min window was incomplete.
    pub far_missing: usize,
}

/// Cuts the window(s) each crash produces under `policy`. Crashes without the
/// three intervals immediately preceding the crash interval are skipped.
pub fn extract_crash_windows(
    intervals: &[IntervalRecord],
    crash_events: &[CrashEvent],
    policy: LabelPolicy,
) -> CrashWindows {
    let index = IntervalIndex::new(intervals);
    let mut events: Vec<&CrashEvent> = crash_events.iter().collect();
    events.sort();
    let mut out = CrashWindows::default();
    for event in events {
        let end = window_end(WindowOrigin::Near, event.timestamp);
        let Some(values) = index.window_values(&event.sensor_id, end) else {
            out.skipped += 1;
            continue;
        };
        out.windows.push(Window {
            sensor_id: event.sensor_id.clone(),
            end_time: end,
            values,
            label: assign_risk_label(WindowOrigin::Near),
            provenance: Provenance::CrashDerived,
        });
        out.used_events.push(event.clone());
        if policy == LabelPolicy::NearFar {
            let far_end = window_end(WindowOrigin::Far, event.timestamp);
            match index.window_values(&event.sensor_id, far_end) {
                Some(values) => out.windows.push(Window {
                    sensor_id: event.sensor_id.clone(),
                    end_time: far_end,
                    values,
                    label: assign_risk_label(WindowOrigin::Far),
                    provenance: Provenance::CrashDerived,
                }),
                None => out.far_missing += 1,
            }
        }
    }
    out
}

/// A crash for which fewer than `ratio` valid candidate days existed.
#[derive(Debug, Clone, PartialEq)]
pub struct Shortfall {
    pub event: CrashEvent,
    pub found: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MatchedWindows {
    pub windows: Vec<Window>,
    pub shortfalls: Vec<Shortfall>,
}

/// Draws up to `ratio` non-crash windows per crash: same sensor, same local
/// time of day, different day, no crash at that sensor within ±30 minutes,
/// days drawn uniformly without replacement over the covered study period.
pub fn sample_matched_noncrash(
    intervals: &[IntervalRecord],
    crash_events: &[CrashEvent],
    ratio: usize,
    rng_seed: u64,
) -> Result<MatchedWindows, LabelError> {
    sample_matched(intervals, crash_events, crash_events, ratio, rng_seed)
}

fn sample_matched(
    intervals: &[IntervalRecord],
    targets: &[CrashEvent],
    blockers: &[CrashEvent],
    ratio: usize,
    rng_seed: u64,
) -> Result<MatchedWindows, LabelError> {
    if ratio == 0 {
        return Err(LabelError::BadRatio);
    }
    let index = IntervalIndex::new(intervals);
    let Some((first, last)) = index.range() else {
        return Ok(MatchedWindows::default());
    };

    let mut crash_times: HashMap<&str, Vec<i64>> = HashMap::new();
    for e in blockers {
        crash_times.entry(e.sensor_id.as_str()).or_default().push(e.timestamp);
    }
    for times in crash_times.values_mut() {
        times.sort_unstable();
    }
    let near_crash = |sensor: &str, moment: i64| -> bool {
        crash_times.get(sensor).is_some_and(|times| {
            let lo = times.partition_point(|&t| t < moment - MATCH_BUFFER_SECS);
            times.get(lo).is_some_and(|&t| t <= moment + MATCH_BUFFER_SECS)
        })
    };

    let mut events: Vec<&CrashEvent> = targets.iter().collect();
    events.sort();
    let mut rng = rng::stream(rng_seed, "matched-sampling");
    let mut used: HashSet<(String, i64)> = HashSet::new();
    let mut out = MatchedWindows::default();

    for event in events {
        // Day shifts keeping the matched window inside the covered range.
        let earliest_end = first + TIMESTEPS as i64 * INTERVAL_SECS;
        let latest_end = last + INTERVAL_SECS;
        let end0 = window_end(WindowOrigin::MatchedNonCrash, event.timestamp);
        let k_min = (earliest_end - end0).div_euclid(DAY_SECS) - 1;
        let k_max = (latest_end - end0).div_euclid(DAY_SECS) + 1;

        let mut candidates: Vec<(i64, Vec<f64>)> = Vec::new();
        for k in k_min..=k_max {
            if k == 0 {
                continue;
            }
            let moment = event.timestamp + k * DAY_SECS;
            let end = end0 + k * DAY_SECS;
            if near_crash(&event.sensor_id, moment) || used.contains(&(event.sensor_id.clone(), end)) {
                continue;
            }
            if let Some(values) = index.window_values(&event.sensor_id, end) {
                candidates.push((end, values));
            }
        }

        let take = ratio.min(candidates.len());
        if take < ratio {
            out.shortfalls.push(Shortfall { event: event.clone(), found: candidates.len() });
        }
        let mut chosen = index::sample(&mut rng, candidates.len(), take).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let (end, values) = std::mem::take(&mut candidates[i]);
            used.insert((event.sensor_id.clone(), end));
            out.windows.push(Window {
                sensor_id: event.sensor_id.clone(),
                end_time: end,
                values,
                label: assign_risk_label(WindowOrigin::MatchedNonCrash),
                provenance: Provenance::MatchedNonCrash,
            });
        }
    }
    Ok(out)
}

/// Labeled windows plus the bookkeeping the `prepare` summary reports.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub dataset: Dataset,
    pub crash_events: usize,
    pub skipped: usize,
    pub far_missing: usize,
    pub shortfalls: Vec<Shortfall>,
}

impl LabeledData {
    /// Non-crash windows per high-risk window.
    pub fn achieved_ratio(&self) -> f64 {
        let counts = self.dataset.class_counts();
        counts.get(CrashRisk::None) as f64 / counts.get(CrashRisk::High) as f64
    }
}

/// Crash windows followed by their matched non-crash windows.
pub fn build_labeled_dataset(
    intervals: &[IntervalRecord],
    crash_events: &[CrashEvent],
    policy: LabelPolicy,
    ratio: usize,
    rng_seed: u64,
) -> Result<LabeledData, LabelError> {
    let crashes = extract_crash_windows(intervals, crash_events, policy);
    // Only crashes that produced a window get partners; every crash blocks.
    let mut matched = sample_matched(intervals, &crashes.used_events, crash_events, ratio, rng_seed)?;
    let mut windows = crashes.windows;
    windows.append(&mut matched.windows);
    let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(LabeledData {
        dataset: Dataset::new(names, windows),
        crash_events: crash_events.len(),
        skipped: crashes.skipped,
        far_missing: crashes.far_missing,
        shortfalls: matched.shortfalls,
    })
}

/// Stratified split: each class is shuffled under its own seeded stream and
/// the first `floor(n · train_fraction)` windows go to training. Both outputs
/// keep the input order.
pub fn split_train_test(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), LabelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(LabelError::BadFraction(train_fraction));
    }
    let mut in_train = vec![false; dataset.len()];
    for class in CrashRisk::ALL {
        let mut members: Vec<usize> = dataset
            .windows
            .iter()
            .enumerate()
            .filter(|(_, w)| w.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(LabelError::ClassTooSmall(class));
        }
        let mut rng = rng::stream(seed, &format!("split-{}", class.label()));
        members.shuffle(&mut rng);
        let n_train = (members.len() as f64 * train_fraction).floor() as usize;
        for &i in &members[..n_train] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (w, t) in dataset.windows.iter().zip(in_train) {
        if t {
            train.push(w.clone());
        } else {
            test.push(w.clone());
        }
    }
    let part = |windows| Dataset {
        windows,
        feature_names: dataset.feature_names.clone(),
        normalization: dataset.normalization.clone(),
    };
    Ok((part(train), part(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FEATURE_COUNT;
    use proptest::prelude::*;

    const DAY0: i64 = 1_546_300_800;

    fn interval(sensor: &str, start: i64, marker: f64) -> IntervalRecord {
        let mut features = [0.0; FEATURE_COUNT];
        features[0] = marker;
        IntervalRecord { sensor_id: sensor.to_string(), interval_start: start, features, sample_count: 1 }
    }

    /// Every interval of `sensor` over `days` days starting at DAY0 with the
    /// interval start as marker.
    fn full_days(sensor: &str, days: i64) -> Vec<IntervalRecord> {
        (0..days * 360).map(|i| interval(sensor, DAY0 + i * INTERVAL_SECS, (DAY0 + i * INTERVAL_SECS) as f64)).collect()
    }

    fn crash(sensor: &str, ts: i64) -> CrashEvent {
        CrashEvent { timestamp: ts, sensor_id: sensor.to_string() }
    }

    #[test]
    fn high_window_strictly_precedes_crash() {
        let t = DAY0 + 100 * INTERVAL_SECS;
        let intervals: Vec<_> = (1..=3).rev().map(|k| interval("S1", t - k * INTERVAL_SECS, k as f64)).collect();
        let out = extract_crash_windows(&intervals, &[crash("S1", t + 17)], LabelPolicy::SingleWindow);
        assert_eq!(out.windows.len(), 1);
        let w = &out.windows[0];
        assert_eq!(w.label, CrashRisk::High);
        assert_eq!(w.end_time, t);
        // rows t-3, t-2, t-1 oldest first
        assert_eq!([w.row(0)[0], w.row(1)[0], w.row(2)[0]], [3.0, 2.0, 1.0]);
    }

    #[test]
    fn missing_interval_skips_event() {
        let t = DAY0 + 100 * INTERVAL_SECS;
        let intervals = vec![interval("S1", t - 3 * INTERVAL_SECS, 0.0), interval("S1", t - INTERVAL_SECS, 0.0)];
        let out = extract_crash_windows(&intervals, &[crash("S1", t)], LabelPolicy::NearFar);
        assert!(out.windows.is_empty());
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn near_far_emits_low_risk_window() {
        let intervals = full_days("S1", 1);
        let t = DAY0 + 200 * INTERVAL_SECS + 30;
        let out = extract_crash_windows(&intervals, &[crash("S1", t)], LabelPolicy::NearFar);
        assert_eq!(out.windows.len(), 2);
        assert_eq!(out.windows[1].label, CrashRisk::Low);
        assert_eq!(out.windows[1].end_time, bucket_start(t) - 720);
        let early = DAY0 + 4 * INTERVAL_SECS;
        let out = extract_crash_windows(&intervals, &[crash("S1", early)], LabelPolicy::NearFar);
        assert_eq!(out.windows.len(), 1);
        assert_eq!(out.far_missing, 1);
    }

    #[test]
    fn crash_stream_of_1293_gives_1293_high_windows() {
        let mut intervals = Vec::new();
        let mut crashes = Vec::new();
        for i in 0..1293i64 {
            let sensor = format!("S{:02}", i % 36);
            let t = DAY0 + (i / 36) * 86_400 + 3600;
            for k in 1..=3 {
                intervals.push(interval(&sensor, t - k * INTERVAL_SECS, 1.0));
            }
            crashes.push(crash(&sensor, t + 60));
        }
        let out = extract_crash_windows(&intervals, &crashes, LabelPolicy::SingleWindow);
        assert_eq!(out.windows.len(), 1293);
        assert!(out.windows.iter().all(|w| w.label == CrashRisk::High));
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn risk_label_assignment() {
        assert_eq!(assign_risk_label(WindowOrigin::Near).value(), 1.0);
        assert_eq!(assign_risk_label(WindowOrigin::Far).value(), 0.5);
        assert_eq!(assign_risk_label(WindowOrigin::MatchedNonCrash).value(), 0.0);
    }

    #[test]
    fn matched_sampling_ratio_and_constraints() {
        let intervals = full_days("S1", 30);
        let crashes = vec![crash("S1", DAY0 + 3 * 86_400 + 36_000), crash("S1", DAY0 + 5 * 86_400 + 36_000 + 600)];
        let out = sample_matched_noncrash(&intervals, &crashes, 5, 9).unwrap();
        assert_eq!(out.windows.len(), 10);
        assert!(out.shortfalls.is_empty());
        for w in &out.windows {
            assert_eq!(w.label, CrashRisk::None);
            let tod = (w.end_time - DAY0).rem_euclid(86_400);
            assert!(tod == 36_000 || tod == 36_480, "time of day {tod}");
            let moment_day = (w.end_time - DAY0).div_euclid(86_400);
            assert!(moment_day != 3 || tod != 36_000);
            for c in &crashes {
                // matched moment lies in the interval ending at end_time + 240
                assert!((w.end_time - bucket_start(c.timestamp)).abs() > MATCH_BUFFER_SECS - INTERVAL_SECS);
            }
        }
        let again = sample_matched_noncrash(&intervals, &crashes, 5, 9).unwrap();
        assert_eq!(out.windows, again.windows);
    }

    #[test]
    fn single_candidate_day() {
        let intervals = full_days("S1", 2);
        let c = crash("S1", DAY0 + 36_000);
        let out = sample_matched_noncrash(&intervals, &[c.clone()], 1, 1).unwrap();
        assert_eq!(out.windows.len(), 1);
        assert_eq!(out.windows[0].end_time, DAY0 + 86_400 + 36_000);
        let short = sample_matched_noncrash(&intervals, &[c], 3, 1).unwrap();
        assert_eq!(short.windows.len(), 1);
        assert_eq!(short.shortfalls.len(), 1);
        assert_eq!(short.shortfalls[0].found, 1);
    }

    #[test]
    fn buffer_excludes_days_with_nearby_crash() {
        let intervals = full_days("S1", 3);
        let target = crash("S1", DAY0 + 36_000);
        // a crash 20 minutes off the matched moment on day 1 blocks that day
        let blocker = crash("S1", DAY0 + 86_400 + 36_000 + 1200);
        let out = sample_matched_noncrash(&intervals, &[target.clone(), blocker], 5, 3).unwrap();
        let target_partners: Vec<_> = out
            .windows
            .iter()
            .filter(|w| (w.end_time - DAY0).rem_euclid(86_400) == 36_000)
            .collect();
        assert!(target_partners.iter().all(|w| w.end_time != DAY0 + 86_400 + 36_000));
    }

    #[test]
    fn dataset_builder_reports_ratio() {
        let mut intervals = full_days("S1", 20);
        intervals.extend(full_days("S2", 20));
        let crashes = vec![crash("S1", DAY0 + 2 * 86_400 + 50_000), crash("S2", DAY0 + 7 * 86_400 + 20_000)];
        let data = build_labeled_dataset(&intervals, &crashes, LabelPolicy::SingleWindow, 5, 4).unwrap();
        assert_eq!(data.dataset.class_counts().0, [10, 0, 2]);
        assert_eq!(data.achieved_ratio(), 5.0);
        let data = build_labeled_dataset(&intervals, &crashes, LabelPolicy::NearFar, 1, 4).unwrap();
        assert_eq!(data.dataset.class_counts().0, [2, 2, 2]);
    }

    fn labeled(counts: [usize; 3]) -> Dataset {
        let mut windows = Vec::new();
        for class in CrashRisk::ALL {
            for i in 0..counts[class.index()] {
                windows.push(Window {
                    sensor_id: "S".into(),
                    end_time: (windows.len() * 240 + i) as i64,
                    values: vec![0.0; 3],
                    label: class,
                    provenance: Provenance::CrashDerived,
                });
            }
        }
        Dataset::new(vec!["x".into()], windows)
    }

    #[test]
    fn stratified_split_exact_division() {
        let ds = labeled([10, 10, 10]);
        let (train, test) = split_train_test(&ds, 0.8, 1).unwrap();
        assert_eq!(train.class_counts().0, [8, 8, 8]);
        assert_eq!(test.class_counts().0, [2, 2, 2]);
        let (train2, _) = split_train_test(&ds, 0.8, 1).unwrap();
        assert_eq!(train, train2);
    }

    #[test]
    fn full_year_sized_split() {
        let ds = labeled([6465, 0, 1293]);
        let (train, test) = split_train_test(&ds, 0.8, 5).unwrap();
        assert_eq!(train.len(), 5172 + 1034);
        assert_eq!(train.len(), 6206);
        assert_eq!(test.len(), 7758 - 6206);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_train_test(&labeled([5, 1, 5]), 0.8, 0), Err(LabelError::ClassTooSmall(CrashRisk::Low))));
        assert!(matches!(split_train_test(&labeled([5, 5, 5]), 1.0, 0), Err(LabelError::BadFraction(_))));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("near-far".parse::<LabelPolicy>().unwrap(), LabelPolicy::NearFar);
        assert_eq!(LabelPolicy::SingleWindow.to_string(), "single-window");
        assert!("both".parse::<LabelPolicy>().is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_input(a in 2usize..40, b in 2usize..40, c in 2usize..40, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let ds = labeled([a, b, c]);
            let (train, test) = split_train_test(&ds, frac, seed).unwrap();
            let mut keys: Vec<i64> = train.windows.iter().chain(&test.windows).map(|w| w.end_time).collect();
            keys.sort_unstable();
            let mut expected: Vec<i64> = ds.windows.iter().map(|w| w.end_time).collect();
            expected.sort_unstable();
            prop_assert_eq!(keys, expected);
            for (class, n) in [a, b, c].into_iter().enumerate() {
                prop_assert_eq!(train.class_counts().0[class], (n as f64 * frac).floor() as usize);
            }
        }

        #[test]
        fn crash_windows_never_see_crash_time(offsets in prop::collection::vec(2000i64..80_000, 1..8)) {
            let intervals = full_days("S1", 1);
            let crashes: Vec<_> = offsets.iter().map(|o| crash("S1", DAY0 + o)).collect();
            let out = extract_crash_windows(&intervals, &crashes, LabelPolicy::NearFar);
            for w in &out.windows {
                let last_start = w.row(TIMESTEPS - 1)[0] as i64;
                prop_assert_eq!(last_start + INTERVAL_SECS, w.end_time);
                prop_assert!(out.used_events.iter().any(|c| c.sensor_id == w.sensor_id && w.end_time <= c.timestamp));
            }
        }

        #[test]
        fn unlimited_candidates_hit_ratio_exactly(ratio in 1usize..6, seed in any::<u64>()) {
            let intervals = full_days("S1", 40);
            let crashes = vec![crash("S1", DAY0 + 10 * 86_400 + 30_000), crash("S1", DAY0 + 20 * 86_400 + 60_000)];
            let out = sample_matched_noncrash(&intervals, &crashes, ratio, seed).unwrap();
            prop_assert_eq!(out.windows.len(), ratio * crashes.len());
            for w in &out.windows {
                for c in &crashes {
                    let moment = w.end_time + (c.timestamp - bucket_start(c.timestamp));
                    let same_tod = (w.end_time - bucket_start(c.timestamp)).rem_euclid(86_400) == 0;
                    if same_tod {
                        prop_assert!((moment - c.timestamp).abs() > MATCH_BUFFER_SECS);
                    }
                }
            }
        }
    }
}
