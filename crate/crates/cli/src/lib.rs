//! Command implementations and the HTTP service behind the `dyadsim` binary.

pub mod run;
pub mod service;

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use dyadsim::assessment::{AssessmentSession, ScenarioPool};
use dyadsim::config::RunConfig;
use dyadsim::metrics::{report, ChangeMode};
use dyadsim::provider::TextProvider;
use dyadsim::simulation::EventResult;

pub use run::CommandError;
use run::{runtime, validation};

pub struct SimulateArgs<'a> {
    pub config: &'a Path,
    pub participants: &'a Path,
    pub mapping: Option<&'a Path>,
    pub out: &'a Path,
}

/// Ingest participants, run one event, write exports.
pub fn simulate(args: SimulateArgs<'_>) -> Result<EventResult, CommandError> {
    let cfg = run::load_config(args.config)?;
    let mapping = run::load_mapping(args.mapping)?;
    let report = run::ingest(args.participants, &mapping)?;
    for r in &report.rejections {
        tracing::warn!(row = r.row, reason = %r.reason, "participant row rejected");
    }
    if report.records.is_empty() {
        return Err(validation(anyhow::anyhow!("no valid participants in {}", args.participants.display())));
    }
    let mut agents = run::agents_from(&report.records, &cfg);
    let result = run::simulate(&cfg, &mut agents, |p| {
        tracing::info!(batch = p.batch, batches = p.batches, done = p.completed, total = p.total, "progress");
    })?;
    run::write_exports(&result, args.out).map_err(runtime)?;
    Ok(result)
}

/// Validate a dataset; any rejected row is a validation failure.
pub fn ingest(csv: &Path, mapping: Option<&Path>, full_report: bool, mut out: impl Write) -> Result<(), CommandError> {
    let mapping = run::load_mapping(mapping)?;
    let report = run::ingest(csv, &mapping)?;
    let body = if full_report {
        serde_json::to_string_pretty(&json!({
            "rows_read": report.rows_read,
            "participants": report.records.len(),
            "rejections": report.rejections,
        }))
        .map_err(runtime)?
    } else {
        let mut s = format!(
            "{} rows, {} participants, {} rejected",
            report.rows_read,
            report.records.len(),
            report.rejections.len()
        );
        for r in &report.rejections {
            s.push_str(&format!("\nrow {}: {}", r.row, r.reason));
        }
        s
    };
    writeln!(out, "{body}").map_err(runtime)?;
    if report.rejections.is_empty() {
        Ok(())
    } else {
        Err(validation(anyhow::anyhow!("{} of {} rows rejected", report.rejections.len(), report.rows_read)))
    }
}

pub struct MetricsArgs<'a> {
    pub results: &'a Path,
    pub out: &'a Path,
    pub csv: Option<&'a Path>,
    pub participants: Option<&'a Path>,
    pub mapping: Option<&'a Path>,
    pub per_agent: bool,
}

pub fn metrics(args: MetricsArgs<'_>) -> Result<(), CommandError> {
    let text = fs::read_to_string(args.results)
        .with_context(|| format!("reading {}", args.results.display()))
        .map_err(runtime)?;
    let result = EventResult::from_json(&text).map_err(validation)?;
    let humans = match args.participants {
        Some(p) => Some(run::ingest(p, &run::load_mapping(args.mapping)?)?.records),
        None => None,
    };
    let mode = if args.per_agent { ChangeMode::PerAgent } else { ChangeMode::Population };
    let rep = report(&result, humans.as_deref(), mode);
    let json = serde_json::to_string_pretty(&rep).map_err(runtime)?;
    fs::write(args.out, json + "\n")
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(runtime)?;
    if let Some(csv) = args.csv {
        let file = fs::File::create(csv).map_err(runtime)?;
        rep.write_csv(file).map_err(runtime)?;
    }
    Ok(())
}

/// Terminal assessment: option numbers and follow-up answers from `input`.
pub fn assess_interactive(
    cfg: &RunConfig,
    pool: ScenarioPool,
    provider: &dyn TextProvider,
    log: Option<&PathBuf>,
    mut input: impl BufRead,
    mut out: impl Write,
) -> Result<AssessmentSession, CommandError> {
    let io = |e: std::io::Error| runtime(e);
    let mut session = AssessmentSession::start("terminal", pool, cfg.assessment).map_err(validation)?;
    let mut line = String::new();
    while let Some(scenario) = session.current_scenario().cloned() {
        writeln!(out, "\n{}\n{}", scenario.title, scenario.prompt).map_err(io)?;
        for (i, o) in scenario.options.iter().enumerate() {
            writeln!(out, "  {}. {o}", i + 1).map_err(io)?;
        }
        let index = loop {
            write!(out, "choice> ").map_err(io)?;
            out.flush().map_err(io)?;
            line.clear();
            if input.read_line(&mut line).map_err(io)? == 0 {
                return Err(validation(anyhow::anyhow!("input ended before the assessment finished")));
            }
            match line.trim().parse::<usize>() {
                Ok(n) if (1..=scenario.options.len()).contains(&n) => break n - 1,
                _ => writeln!(out, "enter a number from 1 to {}", scenario.options.len()).map_err(io)?,
            }
        };
        writeln!(out, "{}", scenario.follow_up(index)).map_err(io)?;
        write!(out, "answer (blank to skip)> ").map_err(io)?;
        out.flush().map_err(io)?;
        line.clear();
        input.read_line(&mut line).map_err(io)?;
        let text = line.trim().to_string();
        session
            .submit(index, (!text.is_empty()).then_some(text.as_str()), provider)
            .map_err(runtime)?;
    }
    let fin = session.finalize().map_err(runtime)?;
    writeln!(out, "\nFinal profile{}:", if session.low_confidence() { " (low confidence)" } else { "" }).map_err(io)?;
    for (t, e) in fin.display.iter() {
        writeln!(out, "  {t}: {:.0} (confidence: {:.1})", e.value, e.confidence).map_err(io)?;
    }
    if let Some(path) = log {
        let file = fs::File::create(path).map_err(runtime)?;
        session.write_log(file).map_err(runtime)?;
    }
    Ok(session)
}
