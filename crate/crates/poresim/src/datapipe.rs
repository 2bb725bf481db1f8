//! Clinical-style index series handling: per-subject normalization, daily
//! aggregation, n-day sliding-window outlier removal, time-window
//! assignment, and linear trend analysis.
//!
//! Values are treated as positive ratios throughout. Normalization divides
//! by the subject's baseline-day mean, so a normalized value of 0.9 reads
//! directly as "90% of the baseline index" — the form the warp stage
//! consumes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Capture session within a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Session {
    MorningWake,
    MorningWash,
    EveningWash,
}

/// One measured index value for one subject, day, and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSample {
    pub subject_id: String,
    pub day: u32,
    pub session: Session,
    pub index_name: String,
    pub value: f64,
}

/// Sliding-window cleaning parameters.
///
/// The default `k_sigma` is 1.0 on purpose: in a 3-sample window the largest
/// attainable z-score is (n-1)/sqrt(n) ~= 1.155, so the conventional k = 2
/// would make the n = 3 cleaner a no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub window_days: usize,
    pub k_sigma: f64,
}

impl Default for CleanConfig {
    fn default() -> CleanConfig {
        CleanConfig {
            window_days: 3,
            k_sigma: 1.0,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_days < 2 {
            return Err(Error::InvalidParameter(format!(
                "window_days must be >= 2, got {}",
                self.window_days
            )));
        }
        if !(self.k_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "k_sigma must be > 0, got {}",
                self.k_sigma
            )));
        }
        Ok(())
    }
}

/// The three post-baseline observation windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeWindow {
    Tw10,
    Tw20,
    Tw30,
}

impl TimeWindow {
    pub const ALL: [TimeWindow; 3] = [TimeWindow::Tw10, TimeWindow::Tw20, TimeWindow::Tw30];

    pub fn label(self) -> &'static str {
        match self {
            TimeWindow::Tw10 => "TW10",
            TimeWindow::Tw20 => "TW20",
            TimeWindow::Tw30 => "TW30",
        }
    }

    /// 1, 2, or 3; the regression feature encoding.
    pub fn ordinal(self) -> u32 {
        match self {
            TimeWindow::Tw10 => 1,
            TimeWindow::Tw20 => 2,
            TimeWindow::Tw30 => 3,
        }
    }

    pub fn day_range(self) -> std::ops::RangeInclusive<u32> {
        match self {
            TimeWindow::Tw10 => 1..=10,
            TimeWindow::Tw20 => 11..=20,
            TimeWindow::Tw30 => 21..=30,
        }
    }

    pub fn parse(s: &str) -> Result<TimeWindow> {
        match s.to_ascii_uppercase().as_str() {
            "TW10" => Ok(TimeWindow::Tw10),
            "TW20" => Ok(TimeWindow::Tw20),
            "TW30" => Ok(TimeWindow::Tw30),
            other => Err(Error::InvalidInput(format!(
                "unknown time window {other:?}; expected TW10, TW20, or TW30"
            ))),
        }
    }
}

impl std::fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a study day falls: the baseline day or one of the three windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayWindow {
    Baseline,
    Window(TimeWindow),
}

/// Day 0 is baseline; 1-10 TW10, 11-20 TW20, 21-30 TW30.
pub fn assign_time_window(day: u32) -> Result<DayWindow> {
    match day {
        0 => Ok(DayWindow::Baseline),
        1..=10 => Ok(DayWindow::Window(TimeWindow::Tw10)),
        11..=20 => Ok(DayWindow::Window(TimeWindow::Tw20)),
        21..=30 => Ok(DayWindow::Window(TimeWindow::Tw30)),
        d => Err(Error::DayOutOfRange(d)),
    }
}

/// A per-subject per-day aggregated value of one index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyValue {
    pub subject_id: String,
    pub day: u32,
    pub index_name: String,
    pub value: f64,
}

/// Normalize one subject's series by its day-0 mean per index; the baseline
/// day mean becomes exactly 1.0.
pub fn normalize_subject(series: &[IndexSample], subject: &str) -> Result<Vec<IndexSample>> {
    let own: Vec<&IndexSample> = series.iter().filter(|s| s.subject_id == subject).collect();
    if own.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no samples for subject {subject}"
        )));
    }
    let mut baselines: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for s in &own {
        if s.day == 0 {
            let e = baselines.entry(s.index_name.as_str()).or_insert((0.0, 0));
            e.0 += s.value;
            e.1 += 1;
        }
    }
    let mut out = Vec::with_capacity(own.len());
    for s in own {
        match baselines.get(s.index_name.as_str()) {
            Some(&(sum, n)) => {
                let mut normalized = s.clone();
                normalized.value = s.value / (sum / n as f64);
                out.push(normalized);
            }
            None => return Err(Error::MissingBaseline(subject.to_string())),
        }
    }
    Ok(out)
}

/// Normalize every subject; reports all subjects missing a baseline at once.
pub fn normalize_cohort(series: &[IndexSample]) -> Result<Vec<IndexSample>> {
    let subjects: BTreeSet<&str> = series.iter().map(|s| s.subject_id.as_str()).collect();
    let mut out = Vec::with_capacity(series.len());
    let mut missing = Vec::new();
    for subject in subjects {
        match normalize_subject(series, subject) {
            Ok(mut v) => out.append(&mut v),
            Err(Error::MissingBaseline(s)) => missing.push(s),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingBaseline(missing.join(", ")));
    }
    Ok(out)
}

/// Mean over available sessions for each (subject, day, index). Missing
/// sessions are tolerated; output is sorted by (subject, index, day).
pub fn daily_mean(series: &[IndexSample]) -> Vec<DailyValue> {
    let mut groups: BTreeMap<(&str, &str, u32), (f64, usize)> = BTreeMap::new();
    for s in series {
        let e = groups
            .entry((s.subject_id.as_str(), s.index_name.as_str(), s.day))
            .or_insert((0.0, 0));
        e.0 += s.value;
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|((subject, index, day), (sum, n))| DailyValue {
            subject_id: subject.to_string(),
            day,
            index_name: index.to_string(),
            value: sum / n as f64,
        })
        .collect()
}

/// Result of sliding-window cleaning: a partition of the input plus any
/// warnings (e.g. a window longer than a series).
#[derive(Debug, Clone, Default)]
pub struct CleanOutcome {
    pub kept: Vec<DailyValue>,
    pub removed: Vec<DailyValue>,
    pub warnings: Vec<String>,
}

fn sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per (subject, index), slide a centered `n`-day window one day at a time
/// and remove a day iff its value deviates from the window mean by more than
/// `k_sigma` window standard deviations (sample std, sigma > 0 guard). Days
/// with an incomplete window (series edges, gaps) are kept. All windows are
/// evaluated against the original series, so removals do not cascade.
pub fn sliding_window_clean(daily: &[DailyValue], cfg: &CleanConfig) -> Result<CleanOutcome> {
    cfg.validate()?;
    let n = cfg.window_days;
    // For odd n this is the symmetric window d-(n-1)/2 ..= d+(n-1)/2; even n
    // leans one day to the right.
    let lo = (n - 1) / 2;
    let hi = n / 2;

    let mut groups: BTreeMap<(&str, &str), BTreeMap<u32, f64>> = BTreeMap::new();
    for d in daily {
        groups
            .entry((d.subject_id.as_str(), d.index_name.as_str()))
            .or_default()
            .insert(d.day, d.value);
    }

    let mut outcome = CleanOutcome::default();
    for ((subject, index), days) in &groups {
        if n > days.len() {
            outcome.warnings.push(format!(
                "window of {n} days exceeds the {len}-day series for subject {subject}, \
                 index {index}; nothing removed",
                len = days.len()
            ));
        }
        for (&day, &value) in days {
            let remove = if n <= days.len() {
                let start = day.checked_sub(lo as u32);
                let window: Option<Vec<f64>> = start.and_then(|s| {
                    (s..=day + hi as u32)
                        .map(|d| days.get(&d).copied())
                        .collect()
                });
                match window {
                    Some(w) if w.len() == n => {
                        let (mean, std) = sample_std(&w);
                        std > 0.0 && (value - mean).abs() > cfg.k_sigma * std
                    }
                    _ => false,
                }
            } else {
                false
            };
            let dv = DailyValue {
                subject_id: subject.to_string(),
                day,
                index_name: index.to_string(),
                value,
            };
            if remove {
                outcome.removed.push(dv);
            } else {
                outcome.kept.push(dv);
            }
        }
    }
    Ok(outcome)
}

/// Ordinary least squares of value against day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// OLS fit; needs at least two distinct day values. A perfectly constant
/// series fits exactly (slope 0, r2 = 1).
pub fn trend_fit(points: &[(f64, f64)]) -> Result<TrendFit> {
    let distinct: BTreeSet<u64> = points.iter().map(|&(x, _)| x.to_bits()).collect();
    if distinct.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "trend fit needs >= 2 distinct days, got {}",
            distinct.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        let fit = slope * x + intercept;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(TrendFit {
        slope,
        intercept,
        r2,
    })
}

/// Mean over subjects of the per-day values of one index, sorted by day.
pub fn cohort_daily_mean(daily: &[DailyValue], index_name: &str) -> Vec<(u32, f64)> {
    let mut groups: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for d in daily.iter().filter(|d| d.index_name == index_name) {
        let e = groups.entry(d.day).or_insert((0.0, 0));
        e.0 += d.value;
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|(day, (sum, n))| (day, sum / n as f64))
        .collect()
}

/// Per-window cohort means of one index; `None` when a window has no data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMeans {
    pub baseline: Option<f64>,
    pub tw10: Option<f64>,
    pub tw20: Option<f64>,
    pub tw30: Option<f64>,
}

/// One index's trend summary in the selection report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTrend {
    pub index_name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Trend strength |slope| * r2; the ranking key.
    pub score: f64,
    pub window_means: WindowMeans,
}

/// Indexes ranked by trend strength, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub ranking: Vec<IndexTrend>,
}

/// Rank indexes by |slope| * r2 of the cohort-mean trend on cleaned data.
/// Ties break by index name; indexes with fewer than two distinct days score
/// zero.
pub fn select_representative_index(daily: &[DailyValue]) -> IndexReport {
    let names: BTreeSet<&str> = daily.iter().map(|d| d.index_name.as_str()).collect();
    let mut ranking = Vec::new();
    for name in names {
        let cohort = cohort_daily_mean(daily, name);
        let points: Vec<(f64, f64)> = cohort.iter().map(|&(d, v)| (d as f64, v)).collect();
        let fit = trend_fit(&points).unwrap_or(TrendFit {
            slope: 0.0,
            intercept: points.first().map_or(0.0, |p| p.1),
            r2: 0.0,
        });
        let window_mean = |range: std::ops::RangeInclusive<u32>| {
            let vals: Vec<f64> = cohort
                .iter()
                .filter(|(d, _)| range.contains(d))
                .map(|&(_, v)| v)
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        ranking.push(IndexTrend {
            index_name: name.to_string(),
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            score: fit.slope.abs() * fit.r2,
            window_means: WindowMeans {
                baseline: window_mean(0..=0),
                tw10: window_mean(TimeWindow::Tw10.day_range()),
                tw20: window_mean(TimeWindow::Tw20.day_range()),
                tw30: window_mean(TimeWindow::Tw30.day_range()),
            },
        });
    }
    ranking.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.index_name.cmp(&b.index_name))
    });
    IndexReport { ranking }
}

/// Read index samples from CSV with header
/// `subject_id,day,session,index_name,value`.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<IndexSample>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let sample: IndexSample = row?;
        if !sample.value.is_finite() || sample.value <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "index value must be finite and > 0, got {} (subject {}, day {})",
                sample.value, sample.subject_id, sample.day
            )));
        }
        out.push(sample);
    }
    Ok(out)
}

/// Write index samples as CSV with the standard header.
pub fn write_samples_csv<W: Write>(writer: W, samples: &[IndexSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(subject: &str, day: u32, session: Session, value: f64) -> IndexSample {
        IndexSample {
            subject_id: subject.to_string(),
            day,
            session,
            index_name: "Pore_Area_total".to_string(),
            value,
        }
    }

    fn daily(subject: &str, day: u32, value: f64) -> DailyValue {
        DailyValue {
            subject_id: subject.to_string(),
            day,
            index_name: "Pore_Area_total".to_string(),
            value,
        }
    }

    #[test]
    fn normalize_constant_subject_is_all_ones() {
        let series: Vec<IndexSample> = (0..5)
            .map(|d| sample("s1", d, Session::MorningWake, 8.0))
            .collect();
        let out = normalize_subject(&series, "s1").unwrap();
        assert!(out.iter().all(|s| (s.value - 1.0).abs() < 1e-12));
    }

    #[test]
    fn normalize_divides_by_baseline_mean() {
        let series = vec![
            sample("s1", 0, Session::MorningWake, 3.0),
            sample("s1", 0, Session::EveningWash, 5.0),
            sample("s1", 7, Session::MorningWake, 3.0),
        ];
        let out = normalize_subject(&series, "s1").unwrap();
        // Baseline mean 4; later value 3 -> 0.75.
        assert!((out[2].value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn normalize_missing_baseline_lists_subject() {
        let series = vec![sample("s2", 3, Session::MorningWake, 1.0)];
        match normalize_subject(&series, "s2") {
            Err(Error::MissingBaseline(msg)) => assert!(msg.contains("s2")),
            other => panic!("expected MissingBaseline, got {other:?}"),
        }
    }

    #[test]
    fn normalize_is_scale_invariant_and_trajectories_collapse() {
        let trajectory: Vec<f64> = (0..10).map(|d| 1.0 - 0.01 * d as f64).collect();
        let mut series = Vec::new();
        for (i, baseline) in [2.0, 4.0, 6.0, 8.0, 10.0].iter().enumerate() {
            for (d, t) in trajectory.iter().enumerate() {
                series.push(sample(
                    &format!("s{i}"),
                    d as u32,
                    Session::MorningWake,
                    baseline * t,
                ));
            }
        }
        let out = normalize_cohort(&series).unwrap();
        for chunk in out.chunks(trajectory.len()) {
            for (s, t) in chunk.iter().zip(&trajectory) {
                assert!((s.value - t).abs() < 1e-12);
            }
        }

        // Scaling a subject's raw series by c > 0 leaves output unchanged.
        let scaled: Vec<IndexSample> = series
            .iter()
            .map(|s| IndexSample {
                value: s.value * 17.5,
                ..s.clone()
            })
            .collect();
        let out2 = normalize_cohort(&scaled).unwrap();
        for (a, b) in out.iter().zip(&out2) {
            assert!((a.value - b.value).abs() < 1e-12);
        }
    }

    #[test]
    fn daily_mean_averages_sessions() {
        let series = vec![
            sample("s1", 4, Session::MorningWake, 0.9),
            sample("s1", 4, Session::MorningWash, 1.0),
            sample("s1", 4, Session::EveningWash, 1.1),
            sample("s1", 5, Session::MorningWake, 0.7),
        ];
        let out = daily_mean(&series);
        assert_eq!(out.len(), 2);
        assert!((out[0].value - 1.0).abs() < 1e-12);
        assert!((out[1].value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn daily_mean_matches_independent_reaggregation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let sessions = [
            Session::MorningWake,
            Session::MorningWash,
            Session::EveningWash,
        ];
        let mut series = Vec::new();
        for d in 0..30u32 {
            for s in sessions.iter().take(rng.gen_range(1..=3)) {
                series.push(sample("s1", d, *s, rng.gen_range(0.5..1.5)));
            }
        }
        let fast = daily_mean(&series);

        // Second implementation: accumulate per day in input order.
        let mut sums: std::collections::HashMap<u32, (f64, usize)> = Default::default();
        for s in &series {
            let e = sums.entry(s.day).or_insert((0.0, 0));
            e.0 += s.value;
            e.1 += 1;
        }
        for dv in &fast {
            let (sum, n) = sums[&dv.day];
            assert_eq!(dv.value, sum / n as f64);
        }
    }

    #[test]
    fn clean_keeps_constant_series() {
        let series: Vec<DailyValue> = (0..10).map(|d| daily("s1", d, 1.0)).collect();
        let out = sliding_window_clean(&series, &CleanConfig::default()).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.kept.len(), 10);
    }

    #[test]
    fn clean_removes_a_spike_at_k1_but_not_k2() {
        let mut series: Vec<DailyValue> = (0..9).map(|d| daily("s1", d, 1.0)).collect();
        series[4].value = 2.0;

        // Window {1, 2, 1}: mean 4/3, sample std 1/sqrt(3); the spike's
        // z-score is 2/sqrt(3) ~= 1.155 > 1.0.
        let out = sliding_window_clean(&series, &CleanConfig::default()).unwrap();
        assert_eq!(out.removed.len(), 1);
        assert_eq!(out.removed[0].day, 4);

        // Max attainable z in a 3-sample window is (n-1)/sqrt(n) < 2.
        let cfg = CleanConfig {
            window_days: 3,
            k_sigma: 2.0,
        };
        let out = sliding_window_clean(&series, &cfg).unwrap();
        assert!(out.removed.is_empty());
    }

    #[test]
    fn clean_never_removes_when_k_exceeds_max_z_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let cfg = CleanConfig {
            window_days: 3,
            k_sigma: 1.16,
        };
        for _ in 0..100 {
            let series: Vec<DailyValue> = (0..12)
                .map(|d| daily("s1", d, rng.gen_range(0.1..10.0)))
                .collect();
            let out = sliding_window_clean(&series, &cfg).unwrap();
            assert!(out.removed.is_empty(), "removed {:?}", out.removed);
        }
    }

    #[test]
    fn clean_partitions_input_and_removed_violate_rule() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let series: Vec<DailyValue> = (0..25)
            .map(|d| daily("s1", d, rng.gen_range(0.5..2.0)))
            .collect();
        let by_day: BTreeMap<u32, f64> = series.iter().map(|d| (d.day, d.value)).collect();
        let out = sliding_window_clean(&series, &CleanConfig::default()).unwrap();
        assert_eq!(out.kept.len() + out.removed.len(), series.len());
        for r in &out.removed {
            let w = [
                by_day[&(r.day - 1)],
                by_day[&r.day],
                by_day[&(r.day + 1)],
            ];
            let mean = w.iter().sum::<f64>() / 3.0;
            let std = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0).sqrt();
            assert!(std > 0.0 && (r.value - mean).abs() > std);
        }
        // Edge days are never removed.
        assert!(out.kept.iter().any(|d| d.day == 0));
        assert!(out.kept.iter().any(|d| d.day == 24));
    }

    #[test]
    fn clean_warns_when_window_exceeds_series() {
        let series: Vec<DailyValue> = (0..2).map(|d| daily("s1", d, 1.0 + d as f64)).collect();
        let cfg = CleanConfig {
            window_days: 5,
            k_sigma: 1.0,
        };
        let out = sliding_window_clean(&series, &cfg).unwrap();
        assert!(out.removed.is_empty());
        assert_eq!(out.kept.len(), 2);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("exceeds"));
    }

    #[test]
    fn window_assignment_boundaries() {
        assert_eq!(assign_time_window(0).unwrap(), DayWindow::Baseline);
        assert_eq!(
            assign_time_window(10).unwrap(),
            DayWindow::Window(TimeWindow::Tw10)
        );
        assert_eq!(
            assign_time_window(11).unwrap(),
            DayWindow::Window(TimeWindow::Tw20)
        );
        assert_eq!(
            assign_time_window(25).unwrap(),
            DayWindow::Window(TimeWindow::Tw30)
        );
        assert!(matches!(
            assign_time_window(31),
            Err(Error::DayOutOfRange(31))
        ));

        // Total and monotone over 0..=30.
        let mut last = 0;
        for day in 0..=30 {
            let ord = match assign_time_window(day).unwrap() {
                DayWindow::Baseline => 0,
                DayWindow::Window(w) => w.ordinal(),
            };
            assert!(ord >= last);
            last = ord;
        }
    }

    #[test]
    fn trend_fit_exact_line_and_constant() {
        let pts: Vec<(f64, f64)> = (0..20).map(|t| (t as f64, 1.0 - 0.01 * t as f64)).collect();
        let fit = trend_fit(&pts).unwrap();
        assert!((fit.slope + 0.01).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);

        let flat: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 0.8)).collect();
        let fit = trend_fit(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        assert!(trend_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn trend_fit_matches_normal_equations_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<(f64, f64)> = (0..=30)
            .map(|t| {
                (
                    t as f64,
                    1.0 - 0.005 * t as f64 + rng.gen_range(-0.02..0.02),
                )
            })
            .collect();
        let fit = trend_fit(&pts).unwrap();
        assert!(fit.slope < 0.0);

        // Oracle: solve [sxx sx; sx n] [m; b] = [sxy; sy] by 2x2 inversion.
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = sxx * n - sx * sx;
        let slope = (sxy * n - sx * sy) / det;
        let intercept = (sxx * sy - sx * sxy) / det;
        assert!((fit.slope - slope).abs() < 1e-9);
        assert!((fit.intercept - intercept).abs() < 1e-9);
    }

    #[test]
    fn representative_index_ranking() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut values = Vec::new();
        for d in 0..=30u32 {
            values.push(DailyValue {
                subject_id: "s1".into(),
                day: d,
                index_name: "Pore_Area_total".into(),
                value: 1.0 - 0.008 * d as f64,
            });
            values.push(DailyValue {
                subject_id: "s1".into(),
                day: d,
                index_name: "Pore_Count".into(),
                value: rng.gen_range(0.95..1.05),
            });
        }
        let report = select_representative_index(&values);
        assert_eq!(report.ranking[0].index_name, "Pore_Area_total");
        assert!(report.ranking[0].score > report.ranking[1].score);
        assert!(report.ranking[0].window_means.tw10.unwrap() > report.ranking[0].window_means.tw30.unwrap());

        // Single index ranks first trivially.
        let single: Vec<DailyValue> = values
            .iter()
            .filter(|v| v.index_name == "Pore_Area_total")
            .cloned()
            .collect();
        let report = select_representative_index(&single);
        assert_eq!(report.ranking.len(), 1);

        // Identical indexes tie and break by name order.
        let mut twin = single.clone();
        twin.extend(single.iter().map(|v| DailyValue {
            index_name: "A_copy".into(),
            ..v.clone()
        }));
        let report = select_representative_index(&twin);
        assert_eq!(report.ranking[0].score, report.ranking[1].score);
        assert_eq!(report.ranking[0].index_name, "A_copy");
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let rows = vec![
            sample("s1", 0, Session::MorningWake, 2.5),
            sample("s1", 1, Session::EveningWash, 2.25),
        ];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject_id,day,session,index_name,value"));
        assert!(text.contains("morning_wake"));
        let back = read_samples_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);

        let bad = "subject_id,day,session,index_name,value\ns1,0,morning_wake,X,-1.0\n";
        assert!(read_samples_csv(bad.as_bytes()).is_err());
    }
}
