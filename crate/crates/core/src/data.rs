//! Censored lifetime data: ingestion, validation, and the nonparametric
//! estimators used for probability plots and starting values.
//!
//! The on-disk format is a UTF-8 CSV with mandatory header
//! `time,kind,t_lower,t_upper,count`. `kind` is one of `exact`, `right`,
//! `left`, `interval`; unused cells stay empty. `count` collapses repeated
//! observations into one row.
//!
//! Two estimators are provided:
//!
//! * Kaplan-Meier product-limit for exact/right-censored data, and
//! * the pool-adjacent-violators NPMLE for current-status data (each unit
//!   inspected once and classified failed/surviving, i.e. only left- and
//!   right-censored observations).

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Read;

/// A single (possibly aggregated) observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    /// Failure observed at `t`.
    Exact { t: f64, count: u64 },
    /// Unit still alive when last seen at `t`.
    Right { t: f64, count: u64 },
    /// Failure known to have occurred by `t_upper`.
    Left { t_upper: f64, count: u64 },
    /// Failure inside `(t_lower, t_upper)`.
    Interval { t_lower: f64, t_upper: f64, count: u64 },
}

impl Observation {
    /// Multiplicity of the observation.
    pub fn count(&self) -> u64 {
        match *self {
            Observation::Exact { count, .. }
            | Observation::Right { count, .. }
            | Observation::Left { count, .. }
            | Observation::Interval { count, .. } => count,
        }
    }

    /// True when the unit is known to have failed (anything but right
    /// censoring).
    pub fn is_failure(&self) -> bool {
        !matches!(self, Observation::Right { .. })
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let check_time = |t: f64, what: &str| {
            if t > 0.0 && t.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} must be positive and finite, got {t}"))
            }
        };
        if self.count() == 0 {
            return Err("count must be at least 1".to_string());
        }
        match *self {
            Observation::Exact { t, .. } => check_time(t, "exact time"),
            Observation::Right { t, .. } => check_time(t, "censoring time"),
            Observation::Left { t_upper, .. } => check_time(t_upper, "upper bound"),
            Observation::Interval { t_lower, t_upper, .. } => {
                check_time(t_lower, "lower bound")?;
                check_time(t_upper, "upper bound")?;
                if t_lower >= t_upper {
                    return Err(format!(
                        "interval bounds must satisfy t_lower < t_upper, got [{t_lower}, {t_upper}]"
                    ));
                }
                Ok(())
            }
        }
    }
}

/// An immutable collection of observations sharing one time unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    observations: Vec<Observation>,
    time_unit: String,
}

impl Dataset {
    /// Builds a dataset, validating every observation.
    pub fn new(observations: Vec<Observation>, time_unit: impl Into<String>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Data("dataset must contain at least one observation".into()));
        }
        for (i, obs) in observations.iter().enumerate() {
            obs.validate()
                .map_err(|msg| Error::Data(format!("observation {i}: {msg}")))?;
        }
        Ok(Dataset {
            observations,
            time_unit: time_unit.into(),
        })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    /// Total number of units, counting multiplicities.
    pub fn total_units(&self) -> u64 {
        self.observations.iter().map(Observation::count).sum()
    }

    /// Number of units known to have failed (exact, left, or interval).
    pub fn failure_units(&self) -> u64 {
        self.observations
            .iter()
            .filter(|o| o.is_failure())
            .map(Observation::count)
            .sum()
    }

    /// True when every observation is exact or right-censored.
    pub fn is_exact_right(&self) -> bool {
        self.observations
            .iter()
            .all(|o| matches!(o, Observation::Exact { .. } | Observation::Right { .. }))
    }

    /// True when the data are current-status: each unit inspected once
    /// and recorded as failed by then (left) or still running (right).
    pub fn is_current_status(&self) -> bool {
        self.observations
            .iter()
            .all(|o| matches!(o, Observation::Left { .. } | Observation::Right { .. }))
    }

    /// Largest right-censoring time, if any right-censored units exist.
    pub fn max_censoring_time(&self) -> Option<f64> {
        self.observations
            .iter()
            .filter_map(|o| match *o {
                Observation::Right { t, .. } => Some(t),
                _ => None,
            })
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.max(t))))
    }
}

/// A nondecreasing step estimate of the failure probability, with the
/// plotting positions conventionally used on probability paper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    /// Strictly increasing times at which the estimate jumps.
    pub jump_times: Vec<f64>,
    /// Estimate immediately after each jump; nondecreasing in [0, 1].
    pub levels: Vec<f64>,
    /// One point per jump at the jump's vertical midpoint.
    pub plot_points: Vec<(f64, f64)>,
}

impl StepEstimate {
    /// Final (largest) level, or 0 when the estimate never jumps.
    pub fn max_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(0.0)
    }
}

const CSV_HEADER: [&str; 5] = ["time", "kind", "t_lower", "t_upper", "count"];

/// Parses the CSV format described in the module docs.
///
/// All row-level problems are collected and reported together, each
/// prefixed with its 1-based line number.
pub fn parse_csv<R: Read>(stream: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(stream);
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::Data(format!(
                "expected header {}, got {}",
                CSV_HEADER.join(","),
                got.join(",")
            )));
        }
    }
    let mut observations = Vec::new();
    let mut problems = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: malformed row: {e}"));
                continue;
            }
        };
        match parse_record(&record) {
            Ok(obs) => match obs.validate() {
                Ok(()) => observations.push(obs),
                Err(msg) => problems.push(format!("line {line}: {msg}")),
            },
            Err(msg) => problems.push(format!("line {line}: {msg}")),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Data(problems.join("; ")));
    }
    Dataset::new(observations, "unspecified")
}

fn parse_record(record: &csv::StringRecord) -> std::result::Result<Observation, String> {
    if record.len() != 5 {
        return Err(format!("expected 5 fields, got {}", record.len()));
    }
    let cell = |i: usize| record.get(i).unwrap_or("");
    let num = |i: usize, what: &str| -> std::result::Result<f64, String> {
        cell(i)
            .parse::<f64>()
            .map_err(|_| format!("cannot parse {what} '{}'", cell(i)))
    };
    let count = cell(4)
        .parse::<u64>()
        .map_err(|_| format!("cannot parse count '{}'", cell(4)))?;
    match cell(1) {
        "exact" => Ok(Observation::Exact { t: num(0, "time")?, count }),
        "right" => Ok(Observation::Right { t: num(0, "time")?, count }),
        "left" => Ok(Observation::Left { t_upper: num(3, "t_upper")?, count }),
        "interval" => Ok(Observation::Interval {
            t_lower: num(2, "t_lower")?,
            t_upper: num(3, "t_upper")?,
            count,
        }),
        other => Err(format!("unknown kind token '{other}'")),
    }
}

/// Writes a dataset in the same CSV format [`parse_csv`] reads, so
/// `parse_csv(write_csv(d)) == d` for any valid dataset.
pub fn write_csv(d: &Dataset) -> String {
    let mut out = String::from("time,kind,t_lower,t_upper,count\n");
    for obs in d.observations() {
        let row = match *obs {
            Observation::Exact { t, count } => format!("{t},exact,,,{count}"),
            Observation::Right { t, count } => format!("{t},right,,,{count}"),
            Observation::Left { t_upper, count } => format!(",left,,{t_upper},{count}"),
            Observation::Interval { t_lower, t_upper, count } => {
                format!(",interval,{t_lower},{t_upper},{count}")
            }
        };
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Kaplan-Meier product-limit estimate of `F(t) = 1 - S(t)` for datasets
/// of exact failures and right-censored units.
///
/// Ties between a failure and a censoring at the same time are resolved
/// by processing the failure first (the censored unit stays in the risk
/// set for that failure). Each failure time contributes one plot point at
/// the vertical midpoint of its jump; on complete data this reduces to
/// the classical `(i - 0.5) / n` positions.
pub fn kaplan_meier(d: &Dataset) -> Result<StepEstimate> {
    if !d.is_exact_right() {
        return Err(Error::Data(
            "product-limit estimate needs exact/right-censored data only".into(),
        ));
    }
    // Aggregate failures and censorings per distinct time.
    let mut events: Vec<(f64, u64, u64)> = Vec::new(); // (time, failures, censored)
    for obs in d.observations() {
        let (t, fail, cens) = match *obs {
            Observation::Exact { t, count } => (t, count, 0),
            Observation::Right { t, count } => (t, 0, count),
            _ => unreachable!("checked by is_exact_right"),
        };
        match events.binary_search_by(|probe| probe.0.total_cmp(&t)) {
            Ok(i) => {
                events[i].1 += fail;
                events[i].2 += cens;
            }
            Err(i) => events.insert(i, (t, fail, cens)),
        }
    }
    let mut at_risk = d.total_units();
    let mut survival = 1.0_f64;
    let mut jump_times = Vec::new();
    let mut levels = Vec::new();
    let mut plot_points = Vec::new();
    for (t, fail, cens) in events {
        if fail > 0 {
            let prev_f = 1.0 - survival;
            survival *= 1.0 - fail as f64 / at_risk as f64;
            let new_f = 1.0 - survival;
            jump_times.push(t);
            levels.push(new_f);
            plot_points.push((t, 0.5 * (prev_f + new_f)));
        }
        at_risk -= fail + cens;
    }
    Ok(StepEstimate { jump_times, levels, plot_points })
}

/// Weighted pool-adjacent-violators fit: given `(value, weight)` pairs in
/// order, returns the nondecreasing sequence minimizing the weighted
/// squared error.
pub fn isotonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // Each block: (weight sum, weighted value sum, member count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        blocks.push((w, w * y, 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.1 / prev.0 <= last.1 / last.0 {
                break;
            }
            blocks.pop();
            let top = blocks.last_mut().expect("prev block exists");
            top.0 += last.0;
            top.1 += last.1;
            top.2 += last.2;
        }
    }
    let mut fitted = Vec::with_capacity(values.len());
    for (w, wy, n) in blocks {
        let level = wy / w;
        fitted.extend(std::iter::repeat(level).take(n));
    }
    fitted
}

/// NPMLE of the failure probability for current-status data.
///
/// Units inspected at time `s` are either failed by `s` (left-censored)
/// or surviving at `s` (right-censored); the observed failing fractions
/// per inspection time are isotonized with weights equal to the number
/// inspected. Plot points sit at half the jump height.
pub fn pav_npmle(d: &Dataset) -> Result<StepEstimate> {
    if !d.is_current_status() {
        return Err(Error::Data(
            "current-status estimate needs left/right-censored data only".into(),
        ));
    }
    // (inspection time, failed count, inspected count), time-sorted.
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for obs in d.observations() {
        let (s, fail, total) = match *obs {
            Observation::Left { t_upper, count } => (t_upper, count, count),
            Observation::Right { t, count } => (t, 0, count),
            _ => unreachable!("checked by is_current_status"),
        };
        match groups.binary_search_by(|probe| probe.0.total_cmp(&s)) {
            Ok(i) => {
                groups[i].1 += fail;
                groups[i].2 += total;
            }
            Err(i) => groups.insert(i, (s, fail, total)),
        }
    }
    let fractions: Vec<f64> = groups.iter().map(|g| g.1 as f64 / g.2 as f64).collect();
    let weights: Vec<f64> = groups.iter().map(|g| g.2 as f64).collect();
    let fitted = isotonic_fit(&fractions, &weights);
    let mut jump_times = Vec::new();
    let mut levels = Vec::new();
    let mut plot_points = Vec::new();
    let mut prev = 0.0_f64;
    for (g, &level) in groups.iter().zip(&fitted) {
        if level > prev {
            jump_times.push(g.0);
            levels.push(level);
            plot_points.push((g.0, 0.5 * (prev + level)));
            prev = level;
        }
    }
    Ok(StepEstimate { jump_times, levels, plot_points })
}

/// Largest level of the applicable nonparametric estimate.
///
/// Exact/right data use the product-limit estimate, current-status data
/// the PAV NPMLE. Mixed censoring falls back to the empirical failing
/// fraction (failures over total units), which is what both estimators
/// reduce to when censoring happens after every failure.
pub fn max_nonparametric_p(d: &Dataset) -> Result<f64> {
    if d.is_exact_right() {
        Ok(kaplan_meier(d)?.max_level())
    } else if d.is_current_status() {
        Ok(pav_npmle(d)?.max_level())
    } else {
        Ok(d.failure_units() as f64 / d.total_units() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(t: f64) -> Observation {
        Observation::Exact { t, count: 1 }
    }

    fn right(t: f64, count: u64) -> Observation {
        Observation::Right { t, count }
    }

    #[test]
    fn parse_csv_reads_every_kind() {
        let src = "time,kind,t_lower,t_upper,count\n\
                   1510,exact,,,1\n\
                   100,right,,,288\n\
                   8.5,left,,8.5,1\n\
                   ,interval,2,3.5,4\n";
        let d = parse_csv(src.as_bytes()).expect("valid file");
        assert_eq!(d.observations().len(), 4);
        assert_eq!(d.total_units(), 294);
        assert_eq!(d.failure_units(), 6);
        assert_eq!(
            d.observations()[2],
            Observation::Left { t_upper: 8.5, count: 1 }
        );
        assert_eq!(
            d.observations()[3],
            Observation::Interval { t_lower: 2.0, t_upper: 3.5, count: 4 }
        );
    }

    #[test]
    fn parse_csv_reports_every_bad_row_with_line_numbers() {
        let src = "time,kind,t_lower,t_upper,count\n\
                   -5,exact,,,1\n\
                   10,exact,,,1\n\
                   7,sideways,,,1\n\
                   ,interval,5,2,1\n";
        let err = parse_csv(src.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "missing line 2 in: {msg}");
        assert!(msg.contains("line 4"), "missing line 4 in: {msg}");
        assert!(msg.contains("line 5"), "missing line 5 in: {msg}");
        assert!(msg.contains("sideways"), "missing kind token in: {msg}");
        assert!(!msg.contains("line 3"), "valid row flagged in: {msg}");
    }

    #[test]
    fn parse_csv_rejects_wrong_header() {
        let err = parse_csv("t,kind,lo,hi,n\n1,exact,,,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("expected header"));
    }

    #[test]
    fn csv_roundtrip_is_identity() {
        let d = Dataset::new(
            vec![
                exact(1510.0),
                right(100.0, 288),
                Observation::Left { t_upper: 8.5, count: 3 },
                Observation::Interval { t_lower: 2.0, t_upper: 3.5, count: 4 },
            ],
            "unspecified",
        )
        .unwrap();
        let text = write_csv(&d);
        let back = parse_csv(text.as_bytes()).expect("roundtrip parses");
        assert_eq!(back, d);
    }

    #[test]
    fn kaplan_meier_on_complete_data_is_empirical_cdf() {
        let d = Dataset::new(vec![exact(3.0), exact(1.0), exact(2.0), exact(4.0)], "h").unwrap();
        let km = kaplan_meier(&d).unwrap();
        assert_eq!(km.jump_times, vec![1.0, 2.0, 3.0, 4.0]);
        for (i, &level) in km.levels.iter().enumerate() {
            let want = (i + 1) as f64 / 4.0;
            assert!((level - want).abs() < 1e-15, "level {i}: {level} vs {want}");
            let want_pp = (i as f64 + 0.5) / 4.0;
            assert!(
                (km.plot_points[i].1 - want_pp).abs() < 1e-15,
                "plot point {i}: {} vs {want_pp}",
                km.plot_points[i].1
            );
        }
    }

    #[test]
    fn kaplan_meier_single_failure_among_two() {
        let d = Dataset::new(vec![exact(1.0), right(5.0, 1)], "h").unwrap();
        let km = kaplan_meier(&d).unwrap();
        assert_eq!(km.jump_times, vec![1.0]);
        assert!((km.levels[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kaplan_meier_processes_tied_failures_before_censorings() {
        // Failure and censoring both at t=2: the censored unit must still
        // be in the risk set, so the jump is 1/3 of the remaining mass.
        let d = Dataset::new(vec![exact(1.0), exact(2.0), right(2.0, 1)], "h").unwrap();
        let km = kaplan_meier(&d).unwrap();
        // F(1) = 1/3; S after t=2: (2/3)(1 - 1/2) = 1/3 -> F = 2/3.
        assert!((km.levels[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((km.levels[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kaplan_meier_matches_brute_force_on_random_small_datasets() {
        // Independent oracle: direct risk-set enumeration of the
        // product-limit formula, one unit at a time.
        let mut rng = crate::rng::CounterRng::new(555, 0);
        for case in 0..200 {
            let n = 1 + (rng.below(6)) as usize;
            let mut obs = Vec::new();
            let mut units: Vec<(f64, bool)> = Vec::new(); // (time, failed)
            for _ in 0..n {
                let t = (rng.uniform() * 10.0).ceil(); // integers force ties
                let failed = rng.uniform() < 0.6;
                units.push((t, failed));
                obs.push(if failed { exact(t) } else { right(t, 1) });
            }
            if !units.iter().any(|u| u.1) {
                continue; // no failures: nothing to compare
            }
            let d = Dataset::new(obs, "h").unwrap();
            let km = kaplan_meier(&d).unwrap();
            // Oracle: walk distinct failure times in order.
            let mut fail_times: Vec<f64> = units
                .iter()
                .filter(|u| u.1)
                .map(|u| u.0)
                .collect();
            fail_times.sort_by(f64::total_cmp);
            fail_times.dedup();
            let mut s = 1.0;
            for (i, &ft) in fail_times.iter().enumerate() {
                let d_j = units.iter().filter(|u| u.1 && u.0 == ft).count() as f64;
                let n_j = units
                    .iter()
                    .filter(|u| u.0 > ft || (u.0 == ft && u.1) || (u.0 == ft && !u.1))
                    .count() as f64;
                s *= 1.0 - d_j / n_j;
                let got = km.levels[i];
                assert!(
                    (got - (1.0 - s)).abs() < 1e-12,
                    "case {case}: level at {ft}: got {got}, want {}",
                    1.0 - s
                );
            }
            assert_eq!(km.jump_times.len(), fail_times.len(), "case {case}");
        }
    }

    #[test]
    fn isotonic_fit_leaves_monotone_data_unchanged() {
        let y = [0.1, 0.2, 0.5, 0.9];
        let w = [1.0, 2.0, 1.0, 3.0];
        assert_eq!(isotonic_fit(&y, &w), y.to_vec());
    }

    #[test]
    fn isotonic_fit_pools_two_violating_blocks() {
        let fitted = isotonic_fit(&[0.5, 0.2], &[1.0, 1.0]);
        assert!((fitted[0] - 0.35).abs() < 1e-15);
        assert!((fitted[1] - 0.35).abs() < 1e-15);
        // Weighted variant: (1*0.5 + 3*0.1) / 4 = 0.2.
        let fitted = isotonic_fit(&[0.5, 0.1], &[1.0, 3.0]);
        assert!((fitted[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pav_npmle_on_current_status_data() {
        // Inspections at 1, 2, 3: fractions 0.5, 0.2, 1.0 with weights
        // 2, 5, 1. First two violate: pooled to (1 + 1) / (2 + 5) = 2/7.
        let d = Dataset::new(
            vec![
                Observation::Left { t_upper: 1.0, count: 1 },
                right(1.0, 1),
                Observation::Left { t_upper: 2.0, count: 1 },
                right(2.0, 4),
                Observation::Left { t_upper: 3.0, count: 1 },
            ],
            "h",
        )
        .unwrap();
        let est = pav_npmle(&d).unwrap();
        assert_eq!(est.jump_times, vec![1.0, 3.0]);
        assert!((est.levels[0] - 2.0 / 7.0).abs() < 1e-15, "{:?}", est.levels);
        assert!((est.levels[1] - 1.0).abs() < 1e-15);
        // Plot points at half the jump heights.
        assert!((est.plot_points[0].1 - 1.0 / 7.0).abs() < 1e-15);
        assert!((est.plot_points[1].1 - 0.5 * (2.0 / 7.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn isotonic_fit_matches_exhaustive_pooling_search() {
        // Oracle: enumerate every partition of the points into contiguous
        // blocks, fit each block at its weighted mean, keep partitions
        // whose block means are nondecreasing, and take the weighted-SSE
        // minimizer. With squared error the minimizer is unique in fitted
        // values, so PAV must reproduce it exactly.
        let sse = |y: &[f64], w: &[f64], fit: &[f64]| -> f64 {
            y.iter()
                .zip(w)
                .zip(fit)
                .map(|((&yi, &wi), &fi)| wi * (yi - fi) * (yi - fi))
                .sum()
        };
        let mut rng = crate::rng::CounterRng::new(777, 0);
        for case in 0..300 {
            let n = 2 + (rng.below(4)) as usize; // 2..=5 points
            let y: Vec<f64> = (0..n).map(|_| (rng.below(11)) as f64 / 10.0).collect();
            let w: Vec<f64> = (0..n).map(|_| 1.0 + (rng.below(4)) as f64).collect();
            let pav = isotonic_fit(&y, &w);
            // Each bit of `mask` decides whether a block boundary sits
            // after point i.
            let mut best: Option<(f64, Vec<f64>)> = None;
            for mask in 0..(1u32 << (n - 1)) {
                let mut fit = vec![0.0; n];
                let mut start = 0;
                let mut means = Vec::new();
                for end in 0..n {
                    let boundary = end == n - 1 || mask & (1 << end) != 0;
                    if boundary {
                        let wsum: f64 = w[start..=end].iter().sum();
                        let wysum: f64 =
                            y[start..=end].iter().zip(&w[start..=end]).map(|(a, b)| a * b).sum();
                        let m = wysum / wsum;
                        means.push(m);
                        for f in &mut fit[start..=end] {
                            *f = m;
                        }
                        start = end + 1;
                    }
                }
                if means.windows(2).any(|p| p[0] > p[1] + 1e-12) {
                    continue;
                }
                let e = sse(&y, &w, &fit);
                if best.as_ref().map_or(true, |(be, _)| e < *be - 0.0) {
                    best = Some((e, fit));
                }
            }
            let (best_err, best_fit) = best.expect("trivial partition is feasible");
            let pav_err = sse(&y, &w, &pav);
            assert!(
                (pav_err - best_err).abs() < 1e-10,
                "case {case}: PAV SSE {pav_err} vs exhaustive {best_err} (y={y:?}, w={w:?})"
            );
            for (a, b) in pav.iter().zip(&best_fit) {
                assert!((a - b).abs() < 1e-10, "case {case}: fits differ: {pav:?} vs {best_fit:?}");
            }
        }
    }

    #[test]
    fn max_nonparametric_p_covers_the_three_regimes() {
        // Complete sample: 1.0.
        let complete = Dataset::new(vec![exact(1.0), exact(2.0)], "h").unwrap();
        assert_eq!(max_nonparametric_p(&complete).unwrap(), 1.0);
        // 3 failures among 20, censored afterwards: 0.15.
        let mut obs = vec![exact(1.0), exact(2.0), exact(3.0)];
        obs.push(right(10.0, 17));
        let censored = Dataset::new(obs, "h").unwrap();
        assert!((max_nonparametric_p(&censored).unwrap() - 0.15).abs() < 1e-15);
        // Mixed censoring falls back to the empirical fraction.
        let mixed = Dataset::new(
            vec![
                Observation::Interval { t_lower: 1.0, t_upper: 2.0, count: 1 },
                right(5.0, 3),
            ],
            "h",
        )
        .unwrap();
        assert!((max_nonparametric_p(&mixed).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn estimator_preconditions_are_enforced() {
        let cs = Dataset::new(
            vec![Observation::Left { t_upper: 1.0, count: 1 }, right(2.0, 1)],
            "h",
        )
        .unwrap();
        assert!(kaplan_meier(&cs).is_err());
        let er = Dataset::new(vec![exact(1.0)], "h").unwrap();
        assert!(pav_npmle(&er).is_err());
    }

    #[test]
    fn dataset_validation_rejects_bad_observations() {
        assert!(Dataset::new(vec![], "h").is_err());
        assert!(Dataset::new(vec![Observation::Exact { t: 0.0, count: 1 }], "h").is_err());
        assert!(Dataset::new(vec![Observation::Exact { t: 1.0, count: 0 }], "h").is_err());
        assert!(Dataset::new(
            vec![Observation::Interval { t_lower: 3.0, t_upper: 2.0, count: 1 }],
            "h"
        )
        .is_err());
    }
}
