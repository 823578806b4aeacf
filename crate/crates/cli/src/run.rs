//! File-level plumbing shared by the commands and the service.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};

use dyadsim::cognitive::{AgentState, Cognition};
use dyadsim::config::RunConfig;
use dyadsim::dataset::{parse_csv, ColumnMapping, IngestReport, ParticipantRecord};
use dyadsim::simulation::{run_event, EventProgress, EventResult};

/// Validation failures map to exit code 1, everything else to 2.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0:#}")]
    Validation(anyhow::Error),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Validation(_) => 1,
            CommandError::Runtime(_) => 2,
        }
    }
}

pub fn validation(e: impl Into<anyhow::Error>) -> CommandError {
    CommandError::Validation(e.into())
}

pub fn runtime(e: impl Into<anyhow::Error>) -> CommandError {
    CommandError::Runtime(e.into())
}

pub fn load_config(path: &Path) -> Result<RunConfig, CommandError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(runtime)?;
    let cfg: RunConfig = toml::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(validation)?;
    cfg.validate().map_err(validation)?;
    Ok(cfg)
}

pub fn load_mapping(path: Option<&Path>) -> Result<ColumnMapping, CommandError> {
    match path {
        Some(p) => ColumnMapping::from_file(p).map_err(validation),
        None => Ok(ColumnMapping::default()),
    }
}

pub fn ingest(csv: &Path, mapping: &ColumnMapping) -> Result<IngestReport, CommandError> {
    parse_csv(csv, mapping).map_err(|e| match e {
        dyadsim::dataset::DatasetError::Io { .. } => runtime(e),
        other => validation(other),
    })
}

pub fn agents_from(records: &[ParticipantRecord], cfg: &RunConfig) -> Vec<AgentState> {
    records.iter().map(|r| r.to_agent(cfg.cognitive.memory)).collect()
}

/// Run one event to completion.
pub fn simulate(cfg: &RunConfig, agents: &mut [AgentState], progress: impl FnMut(EventProgress)) -> Result<EventResult, CommandError> {
    let event = cfg.event_config().map_err(validation)?;
    let provider = cfg.build_provider().map_err(validation)?;
    if !provider.is_available() {
        return Err(runtime(anyhow::anyhow!("provider {} is not available", provider.name())));
    }
    let cognition = Cognition::new(provider, cfg.cognitive.clone());
    run_event(agents, &cognition, &event, progress).map_err(runtime)
}

/// `results.json`, `summary.csv` and `traces.jsonl` under `dir`.
pub fn write_exports(result: &EventResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("results.json"), result.to_json()?)?;
    result.write_summary_csv(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
    let mut traces = Vec::new();
    result.write_traces(&mut traces)?;
    fs::write(dir.join("traces.jsonl"), traces)?;
    Ok(())
}
