use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rustport_core::corpus::{load_corpus, LoadOptions, SourceProgram};
use rustport_core::llm::Gateway;
use rustport_core::pipeline::{
    load_transcripts, run_campaign, translate_program, CampaignOptions, PipelineContext, RunConfig,
};
use rustport_core::process::set_max_concurrent_processes;
use rustport_core::report::{write_csv, CampaignReport};
use rustport_core::vuln::{
    checker_available, mitigate_run, scan_corpus, MitigationKind, VerificationKind,
    MITIGATION_DIR, MITIGATION_REPORT, SCAN_SUMMARY,
};

/// Exit status of a campaign that stopped with programs still pending.
const EXIT_INCOMPLETE: u8 = 3;
/// Exit status when the model checker is not installed.
const EXIT_CHECKER_MISSING: u8 = 4;

#[derive(Parser)]
#[command(name = "rustport", version, about = "Translate C programs to safe Rust with LLM backends and compiler-guided repair")]
struct Cli {
    /// TOML run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate every program of a corpus into a run directory.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        /// Backend name from the config, or `scripted:<dir>`.
        #[arg(long)]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Continue a run directory, skipping completed programs.
        #[arg(long)]
        resume: bool,
        /// Translate at most this many pending programs, then stop.
        #[arg(long)]
        limit: Option<usize>,
        /// Keep functions unreachable from main.
        #[arg(long)]
        keep_dead_code: bool,
    },
    /// Translate a single program into `<out>/<id>`.
    TranslateOne {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        program: String,
        #[arg(long)]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        keep_dead_code: bool,
    },
    /// Compute campaign metrics from a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// JSON file or CSV directory; JSON goes to stdout when omitted,
        /// CSV to `<run>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bounded model checker over the C corpus.
    Vulnscan {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Checker program, overriding the config.
        #[arg(long)]
        checker: Option<String>,
        /// Checker timeout in seconds, overriding the config.
        #[arg(long)]
        checker_timeout: Option<u64>,
        #[arg(long)]
        keep_dead_code: bool,
    },
    /// Replay checker findings against the successful translations of a run.
    Mitigate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        scan: PathBuf,
        /// Directory of `<id>.txt` trigger inputs that override the
        /// counterexample-derived ones.
        #[arg(long)]
        triggers: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn load_programs(corpus: &Path, keep_dead_code: bool) -> Result<Vec<SourceProgram>> {
    let options = LoadOptions {
        strip_dead_functions: !keep_dead_code,
    };
    let corpus = load_corpus(corpus, options)
        .with_context(|| format!("cannot load corpus {}", corpus.display()))?;
    for w in &corpus.warnings {
        tracing::warn!("{}: {}", w.program, w.message);
    }
    Ok(corpus.programs)
}

fn gateway(config: &RunConfig, backend: &str) -> Result<Gateway> {
    let spec = config.backend(backend)?;
    Ok(Gateway::from_spec(spec)?)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let mut config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run {
            corpus,
            backend,
            out,
            workers,
            resume,
            limit,
            keep_dead_code,
        } => {
            if let Some(w) = workers {
                config.pipeline.workers = *w;
            }
            config.validate()?;
            set_max_concurrent_processes(config.pipeline.workers);
            let programs = load_programs(corpus, *keep_dead_code)?;
            let gateway = gateway(&config, backend)?;
            let options = CampaignOptions {
                resume: *resume,
                workers: config.pipeline.workers,
                limit: *limit,
                ..CampaignOptions::default()
            };
            let summary = run_campaign(&programs, &gateway, &config, out, &options)?;
            println!(
                "translated {}, skipped {} already complete, {} pending",
                summary.ran.len(),
                summary.skipped.len(),
                summary.pending.len()
            );
            if !summary.transcripts.is_empty() {
                let report = CampaignReport::from_transcripts(&summary.transcripts)?;
                println!("computational accuracy {:.4} over {} programs", report.ca, report.programs);
            }
            if summary.is_complete() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("campaign incomplete; rerun with --resume to continue");
                Ok(ExitCode::from(EXIT_INCOMPLETE))
            }
        }
        Command::TranslateOne {
            corpus,
            program,
            backend,
            out,
            keep_dead_code,
        } => {
            config.validate()?;
            let programs = load_programs(corpus, *keep_dead_code)?;
            let Some(p) = programs.iter().find(|p| &p.id == program) else {
                bail!("no program {program:?} in {}", corpus.display());
            };
            let dir = out.join(&p.id);
            if dir.exists() {
                bail!("{} already exists", dir.display());
            }
            let gateway = gateway(&config, backend)?;
            let kit = config.prompt_kit()?;
            let digest = config.digest(gateway.spec(), &kit);
            let ctx = PipelineContext {
                gateway: &gateway,
                kit: &kit,
                config: &config,
                config_digest: &digest,
            };
            let t = translate_program(p, &ctx, &dir)?;
            let outcome = t.outcome_kind().map_or("unfinished", |o| o.as_str());
            println!("{}: {outcome} after {} attempts", p.id, t.attempts.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { run, format, out } => {
            let transcripts = load_transcripts(run)?;
            let report = CampaignReport::from_transcripts(&transcripts)
                .with_context(|| format!("{} holds no complete transcripts", run.display()))?;
            match format {
                Format::Json => match out {
                    Some(path) => fs::write(path, report.to_json() + "\n")
                        .with_context(|| format!("cannot write {}", path.display()))?,
                    None => println!("{}", report.to_json()),
                },
                Format::Csv => {
                    let dir = out.clone().unwrap_or_else(|| run.join("report"));
                    for f in write_csv(&report, &dir)? {
                        println!("{}", f.display());
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Vulnscan {
            corpus,
            out,
            workers,
            checker,
            checker_timeout,
            keep_dead_code,
        } => {
            if let Some(c) = checker {
                config.checker.command = vec![c.clone()];
            }
            if let Some(t) = checker_timeout {
                config.checker.timeout_secs = *t;
            }
            if !checker_available(&config.checker) {
                eprintln!(
                    "notice: model checker `{}` not found; vulnerability scanning is disabled",
                    config.checker.command.join(" ")
                );
                return Ok(ExitCode::from(EXIT_CHECKER_MISSING));
            }
            set_max_concurrent_processes(*workers);
            let programs = load_programs(corpus, *keep_dead_code)?;
            let summary = scan_corpus(&programs, &config.checker, out, *workers)?;
            for kind in VerificationKind::ALL {
                println!("{:<12} {}", kind.as_str(), summary.by_kind[&kind]);
            }
            for (t, n) in &summary.by_type {
                println!("  {t:<20} {n}");
            }
            println!("summary written to {}", out.join(SCAN_SUMMARY).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Mitigate { run, scan, triggers } => {
            let report = mitigate_run(run, scan, triggers.as_deref(), &config.mitigation)?;
            print!("{:<20}", "vuln_type");
            for k in MitigationKind::ALL {
                print!(" {:>18}", k.as_str());
            }
            println!(" {:>6}", "total");
            for row in &report.contingency.rows {
                print!("{:<20}", row.vuln_type);
                for k in MitigationKind::ALL {
                    print!(" {:>18}", row.counts[&k]);
                }
                println!(" {:>6}", row.total);
            }
            for (id, why) in &report.skipped {
                eprintln!("skipped {id}: {why}");
            }
            println!(
                "report written to {}",
                run.join(MITIGATION_DIR).join(MITIGATION_REPORT).display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// The error chain joined by `: `. Library errors already quote their
/// source, so causes whose text is already present are skipped.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
