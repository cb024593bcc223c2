//! One CSV file per table. Fields are numbers, codes and fixed names, so no
//! quoting is ever needed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{CampaignReport, DistributionPoint};
use crate::pipeline::Outcome;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn point_name(p: DistributionPoint) -> &'static str {
    match p {
        DistributionPoint::Base => "base",
        DistributionPoint::PostBasicRepair => "post_basic_repair",
    }
}

/// Writes the report tables into `dir` and returns the files written.
pub fn write_csv(report: &CampaignReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files: Vec<(String, String)> = Vec::new();

    let mut ca = String::from("programs,incomplete,successes,ca\n");
    let _ = writeln!(
        ca,
        "{},{},{},{}",
        report.programs,
        report.incomplete,
        report.outcome_counts.get(&Outcome::Success).copied().unwrap_or(0),
        report.ca
    );
    files.push(("ca.csv".into(), ca));

    let mut outcomes = String::from("outcome,count,share\n");
    for (o, n) in &report.outcome_counts {
        let _ = writeln!(outcomes, "{o},{n},{}", report.outcome_breakdown[o]);
    }
    files.push(("outcomes.csv".into(), outcomes));

    let r = &report.rates;
    files.push((
        "rates.csv".into(),
        format!(
            "initial_failures,repaired,repaired_and_passed,repair_rate,pass_rate\n{},{},{},{},{}\n",
            r.initial_failures,
            r.repaired,
            r.repaired_and_passed,
            opt(r.repair_rate),
            opt(r.pass_rate)
        ),
    ));

    let mut resolution = String::from("code,initial,remaining,rr\n");
    for (code, r) in &report.resolution {
        let _ = writeln!(resolution, "{code},{},{},{}", r.initial, r.remaining, r.rr);
    }
    files.push(("resolution.csv".into(), resolution));

    let mut distribution = String::from("point,code,count,share\n");
    for (point, d) in &report.error_distribution {
        for (code, n) in &d.counts {
            let _ = writeln!(distribution, "{},{code},{n},{}", point_name(*point), d.shares[code]);
        }
    }
    files.push(("distribution.csv".into(), distribution));

    for (metric, set) in &report.cdf {
        let mut text = String::from("value");
        for o in set.curves.keys() {
            let _ = write!(text, ",{o}");
        }
        text.push('\n');
        for (i, v) in set.values.iter().enumerate() {
            let _ = write!(text, "{v}");
            for curve in set.curves.values() {
                let _ = write!(text, ",{}", curve[i]);
            }
            text.push('\n');
        }
        files.push((format!("cdf_{}.csv", metric.as_str()), text));
    }

    let u = &report.unsafe_usage;
    files.push((
        "unsafe.csv".into(),
        format!(
            "successful,with_unsafe,ratio\n{},{},{}\n",
            u.successful,
            u.with_unsafe,
            opt(u.ratio)
        ),
    ));

    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
