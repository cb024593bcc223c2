//! Corpus-wide scanning and replay, with their on-disk layout.
//!
//! Scan directory: `<scan>/<id>/main.c`, `<scan>/<id>/scan.json` and
//! `<scan>/summary.json`. Replay writes its C builds and report under
//! `<run>/mitigation/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{
    build_c, checker_available, io_err, replay_mitigation, verify_c_program, CheckerConfig,
    MitigationConfig, MitigationKind, MitigationVerdict, VerificationKind, VerificationOutcome,
    VulnError, VulnType,
};
use crate::buildcheck::BINARY_NAME;
use crate::corpus::{SourceProgram, SOURCE_FILE};
use crate::pipeline::{load_transcripts, Outcome};

pub const SCAN_FILE: &str = "scan.json";
pub const SCAN_SUMMARY: &str = "summary.json";
pub const MITIGATION_DIR: &str = "mitigation";
pub const MITIGATION_REPORT: &str = "report.json";
/// User-supplied triggers live at `<dir>/<id>.txt` and take precedence over
/// counterexample-derived ones.
pub const TRIGGER_EXT: &str = "txt";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), VulnError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub outcomes: BTreeMap<String, VerificationOutcome>,
    /// Programs per verification outcome.
    pub by_kind: BTreeMap<VerificationKind, u64>,
    /// Findings per category key.
    pub by_type: BTreeMap<String, u64>,
}

impl ScanSummary {
    pub fn from_outcomes(outcomes: BTreeMap<String, VerificationOutcome>) -> Self {
        let mut by_kind: BTreeMap<VerificationKind, u64> =
            VerificationKind::ALL.iter().map(|&k| (k, 0)).collect();
        let mut by_type: BTreeMap<String, u64> = BTreeMap::new();
        for o in outcomes.values() {
            *by_kind.entry(o.kind).or_default() += 1;
            for f in &o.findings {
                *by_type.entry(f.vuln_type.key().to_owned()).or_default() += 1;
            }
        }
        ScanSummary {
            outcomes,
            by_kind,
            by_type,
        }
    }
}

/// Runs the checker over every program. Refuses to start when the checker
/// is not installed.
pub fn scan_corpus(
    programs: &[SourceProgram],
    config: &CheckerConfig,
    out: &Path,
    workers: usize,
) -> Result<ScanSummary, VulnError> {
    let exe = config.command.first().ok_or(VulnError::EmptyCommand)?;
    if !checker_available(config) {
        return Err(VulnError::CheckerMissing(exe.clone()));
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let results = Mutex::new(BTreeMap::new());
    let failure: Mutex<Option<VulnError>> = Mutex::new(None);
    thread::scope(|scope| {
        for _ in 0..workers.max(1).min(programs.len().max(1)) {
            scope.spawn(|| {
                while !abort.load(Ordering::SeqCst) {
                    let Some(p) = programs.get(next.fetch_add(1, Ordering::SeqCst)) else {
                        break;
                    };
                    let dir = out.join(&p.id);
                    let result = verify_c_program(p, config, &dir).and_then(|o| {
                        write_json(&dir.join(SCAN_FILE), &o)?;
                        Ok(o)
                    });
                    match result {
                        Ok(o) => {
                            results.lock().expect("results poisoned").insert(p.id.clone(), o);
                        }
                        Err(e) => {
                            abort.store(true, Ordering::SeqCst);
                            failure.lock().expect("failure poisoned").get_or_insert(e);
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure poisoned") {
        return Err(e);
    }
    let summary = ScanSummary::from_outcomes(results.into_inner().expect("results poisoned"));
    write_json(&out.join(SCAN_SUMMARY), &summary)?;
    Ok(summary)
}

/// Reads the per-program scan results of a scan directory.
pub fn load_scan(dir: &Path) -> Result<BTreeMap<String, VerificationOutcome>, VulnError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path().join(SCAN_FILE);
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let outcome: VerificationOutcome =
            serde_json::from_str(&text).map_err(|e| VulnError::Malformed {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        out.insert(entry.file_name().to_string_lossy().into_owned(), outcome);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSource {
    User,
    Checker,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationEntry {
    pub program: String,
    /// Index into the program's findings.
    pub finding: usize,
    pub vuln_type: VulnType,
    pub trigger_source: TriggerSource,
    pub verdict: MitigationVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyRow {
    pub vuln_type: String,
    pub counts: BTreeMap<MitigationKind, u64>,
    pub total: u64,
}

/// Findings per category and verdict. Each row total is the number of
/// replayed findings of that category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<ContingencyRow>,
}

impl ContingencyTable {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a VulnType, MitigationKind)>) -> Self {
        let mut rows: BTreeMap<&'static str, BTreeMap<MitigationKind, u64>> = BTreeMap::new();
        for (t, k) in entries {
            let row = rows
                .entry(t.key())
                .or_insert_with(|| MitigationKind::ALL.iter().map(|&k| (k, 0)).collect());
            *row.entry(k).or_default() += 1;
        }
        ContingencyTable {
            rows: rows
                .into_iter()
                .map(|(t, counts)| ContingencyRow {
                    vuln_type: t.to_owned(),
                    total: counts.values().sum(),
                    counts,
                })
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.total).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub entries: Vec<MitigationEntry>,
    pub contingency: ContingencyTable,
    /// Programs with findings that were not replayed, with the reason.
    pub skipped: BTreeMap<String, String>,
}

/// Replays every finding of every program whose translation succeeded.
pub fn mitigate_run(
    run_dir: &Path,
    scan_dir: &Path,
    triggers: Option<&Path>,
    config: &MitigationConfig,
) -> Result<MitigationReport, VulnError> {
    let scans = load_scan(scan_dir)?;
    let transcripts = load_transcripts(run_dir).map_err(|e| VulnError::Run(e.to_string()))?;
    let by_id: BTreeMap<&str, _> = transcripts.iter().map(|t| (t.program_id.as_str(), t)).collect();
    let work = run_dir.join(MITIGATION_DIR);
    let mut entries = Vec::new();
    let mut skipped = BTreeMap::new();

    for (id, scan) in &scans {
        if scan.kind != VerificationKind::Failed {
            continue;
        }
        let Some(t) = by_id.get(id.as_str()) else {
            skipped.insert(id.clone(), "not part of the run".into());
            continue;
        };
        if t.outcome_kind() != Some(Outcome::Success) {
            let why = t.outcome_kind().map_or("unfinished", |o| o.as_str());
            skipped.insert(id.clone(), format!("translation outcome is {why}"));
            continue;
        }
        let decided = t
            .outcome
            .as_ref()
            .and_then(|o| o.decided_by)
            .and_then(|i| t.attempts.get(i))
            .and_then(|a| a.compile.as_ref());
        let Some(compile) = decided else {
            skipped.insert(id.clone(), "no compiled translation recorded".into());
            continue;
        };
        let translated = run_dir.join(id).join(&compile.workdir).join(BINARY_NAME);
        if !translated.is_file() {
            skipped.insert(id.clone(), format!("{} is missing", translated.display()));
            continue;
        }
        let source_path = scan_dir.join(id).join(SOURCE_FILE);
        let source = fs::read_to_string(&source_path).map_err(io_err(&source_path))?;
        let build_dir = work.join(id);
        if build_dir.exists() {
            fs::remove_dir_all(&build_dir).map_err(io_err(&build_dir))?;
        }
        let c = build_c(id, &source, &build_dir, &config.c_compiler)?;
        let user = match triggers {
            Some(dir) => {
                let p = dir.join(format!("{id}.{TRIGGER_EXT}"));
                if p.is_file() {
                    Some(fs::read_to_string(&p).map_err(io_err(&p))?)
                } else {
                    None
                }
            }
            None => None,
        };
        for (i, f) in scan.findings.iter().enumerate() {
            let (trigger, trigger_source) = match (&user, &f.trigger_input) {
                (Some(u), _) => (Some(u.as_str()), TriggerSource::User),
                (None, Some(c)) => (Some(c.as_str()), TriggerSource::Checker),
                (None, None) => (None, TriggerSource::Missing),
            };
            let verdict = replay_mitigation(&c, &translated, trigger, config)?;
            entries.push(MitigationEntry {
                program: id.clone(),
                finding: i,
                vuln_type: f.vuln_type.clone(),
                trigger_source,
                verdict,
            });
        }
    }

    let contingency =
        ContingencyTable::from_entries(entries.iter().map(|e| (&e.vuln_type, e.verdict.kind)));
    let report = MitigationReport {
        entries,
        contingency,
        skipped,
    };
    fs::create_dir_all(&work).map_err(io_err(&work))?;
    write_json(&work.join(MITIGATION_REPORT), &report)?;
    Ok(report)
}
