//! Campaign metrics computed from transcripts.
//!
//! Error counts are diagnostic instances: a program reporting E0308 three
//! times contributes three.

mod csv;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buildcheck::{CodeTally, ErrorCatalogue, ErrorCode};
use crate::pipeline::{CompileRecord, Outcome, Transcript};
use crate::prompt::GUIDED_CODES;

pub use self::csv::write_csv;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no complete transcripts")]
    Empty,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn complete(transcripts: &[Transcript]) -> impl Iterator<Item = (&Transcript, Outcome)> {
    transcripts
        .iter()
        .filter_map(|t| t.outcome_kind().map(|o| (t, o)))
}

/// Share of complete transcripts whose outcome is success.
pub fn computational_accuracy(transcripts: &[Transcript]) -> Result<f64, ReportError> {
    let (mut n, mut ok) = (0u64, 0u64);
    for (_, o) in complete(transcripts) {
        n += 1;
        ok += u64::from(o == Outcome::Success);
    }
    ratio(ok, n).ok_or(ReportError::Empty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairRates {
    pub initial_failures: u64,
    pub repaired: u64,
    pub repaired_and_passed: u64,
    /// repaired / initial_failures; absent when nothing failed initially.
    pub repair_rate: Option<f64>,
    /// repaired_and_passed / repaired; absent when nothing was repaired.
    pub pass_rate: Option<f64>,
}

impl RepairRates {
    pub fn from_counts(initial_failures: u64, repaired: u64, repaired_and_passed: u64) -> Self {
        RepairRates {
            initial_failures,
            repaired,
            repaired_and_passed,
            repair_rate: ratio(repaired, initial_failures),
            pass_rate: ratio(repaired_and_passed, repaired),
        }
    }
}

pub fn repair_and_pass_rates(transcripts: &[Transcript]) -> RepairRates {
    let (mut failed, mut repaired, mut passed) = (0, 0, 0);
    for (t, o) in complete(transcripts) {
        if t.initially_failed_to_compile() {
            failed += 1;
            if t.repaired() {
                repaired += 1;
                passed += u64::from(o == Outcome::Success);
            }
        }
    }
    RepairRates::from_counts(failed, repaired, passed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub initial: u64,
    pub remaining: u64,
    /// 1 - remaining / initial, or 0 when there was nothing to resolve.
    pub rr: f64,
}

impl Resolution {
    pub fn from_counts(initial: u64, remaining: u64) -> Self {
        Resolution {
            initial,
            remaining,
            rr: ratio(remaining, initial).map_or(0.0, |r| 1.0 - r),
        }
    }
}

fn count_code(record: &CompileRecord, code: &ErrorCode) -> u64 {
    record.error_codes().filter(|c| *c == code).count() as u64
}

/// Instances of `code` at guided-phase entry and after guided repair,
/// summed over programs that entered the guided phase. Per program the
/// remaining count is capped at the entry count, so instances introduced
/// during guided repair are not charged against resolution.
pub fn resolution_rate(code: &ErrorCode, transcripts: &[Transcript]) -> Resolution {
    let (mut initial, mut remaining) = (0, 0);
    for (t, _) in complete(transcripts) {
        if let Some((entry, exit)) = t.guided_span() {
            let before = count_code(entry, code);
            initial += before;
            remaining += count_code(exit, code).min(before);
        }
    }
    Resolution::from_counts(initial, remaining)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionPoint {
    /// Errors of the base translations.
    Base,
    /// Errors left when basic repair gave up.
    PostBasicRepair,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub counts: BTreeMap<ErrorCode, u64>,
    /// counts normalized over all coded errors.
    pub shares: BTreeMap<ErrorCode, f64>,
    /// Coded errors whose code is not in the catalogue (included above).
    pub outside_catalogue: u64,
    /// Errors without a code (syntax errors, synthesized records).
    pub uncoded: u64,
}

pub fn error_distribution(transcripts: &[Transcript], at: DistributionPoint) -> ErrorDistribution {
    let catalogue = ErrorCatalogue::default();
    let mut tally = CodeTally::default();
    for (t, _) in complete(transcripts) {
        let record = match at {
            DistributionPoint::Base => t.base_compile().filter(|c| !c.succeeded()),
            DistributionPoint::PostBasicRepair => t.after_basic_repair(),
        };
        if let Some(r) = record {
            let part = catalogue.tally(&r.diagnostics);
            for (c, n) in part.known {
                *tally.known.entry(c).or_default() += n;
            }
            for (c, n) in part.unknown {
                *tally.unknown.entry(c).or_default() += n;
            }
            tally.uncoded += part.uncoded;
        }
    }
    let total = tally.coded_total();
    let outside_catalogue = tally.unknown.values().sum();
    let counts: BTreeMap<ErrorCode, u64> = tally.known.into_iter().chain(tally.unknown).collect();
    let shares = counts
        .iter()
        .map(|(c, &n)| (c.clone(), n as f64 / total as f64))
        .collect();
    ErrorDistribution {
        counts,
        shares,
        outside_catalogue,
        uncoded: tally.uncoded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Loc,
    Pointers,
    Functions,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Loc, Metric::Pointers, Metric::Functions];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Loc => "loc",
            Metric::Pointers => "pointers",
            Metric::Functions => "functions",
        }
    }

    fn of(self, t: &Transcript) -> u64 {
        match self {
            Metric::Loc => t.metrics.loc,
            Metric::Pointers => t.metrics.pointers,
            Metric::Functions => t.metrics.functions,
        }
    }
}

/// Cumulative outcome curves over one metric. `curves[k][i]` is the share
/// of all programs with outcome `k` and metric value at most `values[i]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CdfSet {
    pub values: Vec<u64>,
    pub curves: BTreeMap<Outcome, Vec<f64>>,
}

/// Builds the CDF set from the metrics recorded in each transcript. The
/// denominator is the number of complete transcripts, so the curves sum to
/// 1 at the largest value.
pub fn cdf_by_metric(transcripts: &[Transcript], metric: Metric) -> CdfSet {
    let points: Vec<(u64, Outcome)> = complete(transcripts)
        .map(|(t, o)| (metric.of(t), o))
        .collect();
    let mut values: Vec<u64> = points.iter().map(|p| p.0).collect();
    values.sort_unstable();
    values.dedup();
    let n = points.len() as f64;
    let curves = Outcome::ALL
        .iter()
        .map(|&kind| {
            let mut mine: Vec<u64> = points.iter().filter(|p| p.1 == kind).map(|p| p.0).collect();
            mine.sort_unstable();
            let curve = values
                .iter()
                .map(|v| mine.partition_point(|x| x <= v) as f64 / n)
                .collect();
            (kind, curve)
        })
        .collect();
    CdfSet { values, curves }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnsafeUsage {
    pub successful: u64,
    pub with_unsafe: u64,
    pub ratio: Option<f64>,
}

/// Share of successful translations containing `unsafe`.
pub fn unsafe_usage(transcripts: &[Transcript]) -> UnsafeUsage {
    let (mut ok, mut with_unsafe) = (0, 0);
    for (t, o) in complete(transcripts) {
        if o != Outcome::Success {
            continue;
        }
        ok += 1;
        let decided = t
            .outcome
            .as_ref()
            .and_then(|r| r.decided_by)
            .and_then(|i| t.attempts.get(i))
            .and_then(|a| a.compile.as_ref());
        if decided.is_some_and(|c| c.unsafe_blocks > 0) {
            with_unsafe += 1;
        }
    }
    UnsafeUsage {
        successful: ok,
        with_unsafe,
        ratio: ratio(with_unsafe, ok),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub programs: u64,
    /// Transcripts without an outcome, left out of every metric.
    pub incomplete: u64,
    pub ca: f64,
    pub outcome_counts: BTreeMap<Outcome, u64>,
    pub outcome_breakdown: BTreeMap<Outcome, f64>,
    pub rates: RepairRates,
    pub resolution: BTreeMap<ErrorCode, Resolution>,
    pub error_distribution: BTreeMap<DistributionPoint, ErrorDistribution>,
    pub cdf: BTreeMap<Metric, CdfSet>,
    pub unsafe_usage: UnsafeUsage,
}

impl CampaignReport {
    pub fn from_transcripts(transcripts: &[Transcript]) -> Result<Self, ReportError> {
        let ca = computational_accuracy(transcripts)?;
        let mut outcome_counts: BTreeMap<Outcome, u64> =
            Outcome::ALL.iter().map(|&o| (o, 0)).collect();
        for (_, o) in complete(transcripts) {
            *outcome_counts.entry(o).or_default() += 1;
        }
        let programs: u64 = outcome_counts.values().sum();
        let outcome_breakdown = outcome_counts
            .iter()
            .map(|(&o, &n)| (o, n as f64 / programs as f64))
            .collect();

        let mut codes: Vec<ErrorCode> = GUIDED_CODES
            .iter()
            .map(|c| ErrorCode::new(c).expect("guided codes are valid"))
            .collect();
        for (t, _) in complete(transcripts) {
            if let Some((entry, _)) = t.guided_span() {
                codes.extend(entry.error_codes().cloned());
            }
        }
        let resolution = codes
            .into_iter()
            .map(|c| {
                let r = resolution_rate(&c, transcripts);
                (c, r)
            })
            .collect();

        Ok(CampaignReport {
            programs,
            incomplete: transcripts.len() as u64 - programs,
            ca,
            outcome_counts,
            outcome_breakdown,
            rates: repair_and_pass_rates(transcripts),
            resolution,
            error_distribution: [DistributionPoint::Base, DistributionPoint::PostBasicRepair]
                .into_iter()
                .map(|p| (p, error_distribution(transcripts, p)))
                .collect(),
            cdf: Metric::ALL
                .into_iter()
                .map(|m| (m, cdf_by_metric(transcripts, m)))
                .collect(),
            unsafe_usage: unsafe_usage(transcripts),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
