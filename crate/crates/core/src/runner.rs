//! Experiment grid execution with an append-only, resumable session log,
//! plus the noise-augmented neutral baseline.
//!
//! Sessions are enumerated in a fixed canonical order (cell, then the neutral
//! agent, then each profile; headline; repeat), rated in parallel batches and
//! written back in that order, one JSON record per line. Each batch is
//! flushed and synced before the next starts, so after a crash the log is a
//! prefix of the canonical order, possibly ending in a torn line.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendConfig, BackendKind, ParseStatus, RatingBackend, RatingResponse};
use crate::corpus::{Corpus, Headline, Veracity};
use crate::error::{Error, Result};
use crate::inventory::{Inventory, InventoryKind, ItemResponse, ScaleFormat};
use crate::persona::{AgentSpec, ParticipantProfile, PromptBuilder};

pub const SESSION_SCHEMA_VERSION: u32 = 1;

/// Reserved participant id for the unconditioned agent of each cell.
pub const NEUTRAL_PARTICIPANT: &str = "neutral";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    /// 30-item short form, one agent per human respondent.
    CalvilloStyle,
    /// Full 60-item form.
    HuangStyle,
}

impl ProfileSource {
    pub fn inventory_kind(self) -> InventoryKind {
        match self {
            ProfileSource::CalvilloStyle => InventoryKind::Bfi2S,
            ProfileSource::HuangStyle => InventoryKind::Bfi2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub profile_source: ProfileSource,
    pub scale_formats: Vec<ScaleFormat>,
    pub backends: Vec<BackendConfig>,
    pub corpus_name: String,
}

/// One (backend, format) combination of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_id: String,
    pub backend: BackendConfig,
    pub scale_format: ScaleFormat,
    pub inventory_kind: InventoryKind,
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ExperimentGrid = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("grid: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    /// The bundled replication grid on the synthetic backend.
    pub fn replication_synthetic() -> Self {
        Self::from_json(include_str!("../data/grids/replication_synthetic.json")).expect("bundled grid is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_formats.is_empty() {
            return Err(Error::Config("grid has no scale formats".into()));
        }
        if self.backends.is_empty() {
            return Err(Error::Config("grid has no backends".into()));
        }
        if self.corpus_name.trim().is_empty() {
            return Err(Error::Config("grid corpus_name is empty".into()));
        }
        for b in &self.backends {
            b.validate()?;
        }
        let cells = self.cells();
        let mut ids = HashSet::new();
        for c in &cells {
            if !ids.insert(c.cell_id.as_str()) {
                return Err(Error::Config(format!("grid repeats cell {}", c.cell_id)));
            }
        }
        Ok(())
    }

    /// Cells in canonical order: backends as listed, formats as listed.
    pub fn cells(&self) -> Vec<GridCell> {
        let kind = self.profile_source.inventory_kind();
        self.backends
            .iter()
            .flat_map(|b| {
                self.scale_formats.iter().map(move |&f| GridCell {
                    cell_id: format!("{}/{}/{}", b.model_name, b.temperature, f.to_string().to_lowercase()),
                    backend: b.clone(),
                    scale_format: f,
                    inventory_kind: kind,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Persona,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub cell_id: String,
    pub condition: Condition,
    pub participant_id: String,
    pub headline_id: String,
    pub veracity: Veracity,
    pub repeat: u32,
    pub rating: Option<u8>,
    pub parse_status: ParseStatus,
    pub raw_text: String,
    /// Backend failure message when no reply could be obtained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub scale_format: ScaleFormat,
    pub inventory_kind: InventoryKind,
    /// Item answers in bank order, one digit per item; absent for neutral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_values: Option<String>,
    pub backend_kind: BackendKind,
    pub model_name: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub prompt_template_hash: String,
    /// Wall-clock milliseconds; only recorded for live backends.
    #[serde(default)]
    pub timestamp_ms: Option<u64>,
}

/// Uniqueness key of a session within a log.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionKey {
    pub run_id: String,
    pub cell_id: String,
    pub participant_id: String,
    pub headline_id: String,
    pub repeat: u32,
}

impl SessionRecord {
    pub fn key(&self) -> SessionKey {
        SessionKey {
            run_id: self.run_id.clone(),
            cell_id: self.cell_id.clone(),
            participant_id: self.participant_id.clone(),
            headline_id: self.headline_id.clone(),
            repeat: self.repeat,
        }
    }

    /// Recovers the item responses carried in `item_values`.
    pub fn responses(&self) -> Result<Option<Vec<ItemResponse>>> {
        let Some(values) = &self.item_values else {
            return Ok(None);
        };
        let bank = Inventory::bundled(self.inventory_kind);
        if values.len() != bank.items().len() {
            return Err(Error::Validation(format!(
                "record {}/{}: {} item values for a {}-item bank",
                self.participant_id,
                self.headline_id,
                values.len(),
                bank.items().len()
            )));
        }
        bank.items()
            .iter()
            .zip(values.bytes())
            .map(|(item, b)| ItemResponse::new(item.item_id, b.wrapping_sub(b'0')))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Rebuilds the exact prompt this session was rated under.
    pub fn prompt(&self, builder: &PromptBuilder) -> Result<String> {
        if builder.template_hash() != self.prompt_template_hash {
            return Err(Error::Config(format!(
                "record was produced with template {} but the builder has {}",
                self.prompt_template_hash,
                builder.template_hash()
            )));
        }
        match (self.condition, self.responses()?) {
            (Condition::Neutral, _) => Ok(builder.build_neutral_prompt()),
            (Condition::Persona, Some(responses)) => builder.build_persona_prompt(
                &ParticipantProfile {
                    participant_id: self.participant_id.clone(),
                    inventory_kind: self.inventory_kind,
                    responses,
                    demographics: Default::default(),
                },
                &AgentSpec {
                    participant_id: self.participant_id.clone(),
                    scale_format: self.scale_format,
                    inventory_kind: self.inventory_kind,
                },
            ),
            (Condition::Persona, None) => Err(Error::Validation(format!(
                "persona record {} has no item values",
                self.participant_id
            ))),
        }
    }
}

fn item_values(bank: &Inventory, responses: &[ItemResponse]) -> Result<String> {
    Ok(bank
        .complete_responses(responses)?
        .iter()
        .map(|r| char::from(b'0' + r.value))
        .collect())
}

/// Everything that defines a run.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    pub grid: &'a ExperimentGrid,
    pub profiles: &'a [ParticipantProfile],
    pub corpus: &'a Corpus,
    pub builder: &'a PromptBuilder,
    /// Default seed for synthetic backends that do not set their own.
    pub seed: u64,
    pub repeats: u32,
}

impl Experiment<'_> {
    /// Content-derived id: identical inputs give the same run id.
    pub fn derived_run_id(&self) -> String {
        let mut material = serde_json::to_string(self.grid).expect("grid serializes");
        material.push('\n');
        material.push_str(&self.corpus.content_hash());
        material.push('\n');
        material.push_str(&self.profiles_hash());
        material.push_str(&format!("\n{}\n{}\n{}", self.seed, self.repeats, self.builder.template_hash()));
        let h = crate::rng::content_hash(material.as_bytes());
        format!("run-{}", &h[..16])
    }

    pub fn profiles_hash(&self) -> String {
        let text = serde_json::to_string(self.profiles).expect("profiles serialize");
        crate::rng::content_hash(text.as_bytes())
    }

    /// Number of sessions the run attempts, neutral agents included.
    pub fn expected_sessions(&self) -> usize {
        self.grid.cells().len() * (self.profiles.len() + 1) * self.corpus.len() * self.repeats as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.corpus.is_empty() {
            return Err(Error::Config("corpus is empty".into()));
        }
        let kind = self.grid.profile_source.inventory_kind();
        let bank = self.builder.inventory(kind);
        let mut ids = HashSet::new();
        for p in self.profiles {
            if p.participant_id == NEUTRAL_PARTICIPANT {
                return Err(Error::Config(format!(
                    "participant id {NEUTRAL_PARTICIPANT:?} is reserved"
                )));
            }
            if !ids.insert(p.participant_id.as_str()) {
                return Err(Error::Config(format!("duplicate participant {}", p.participant_id)));
            }
            if p.inventory_kind != kind {
                return Err(Error::Config(format!(
                    "profile {} is {} but the grid's profile source needs {kind}",
                    p.participant_id, p.inventory_kind
                )));
            }
            bank.complete_responses(&p.responses)
                .map_err(|e| Error::Config(format!("profile {}: {e}", p.participant_id)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema_version: u32,
    pub run_id: String,
    pub grid: ExperimentGrid,
    pub cells: Vec<String>,
    pub seed: u64,
    pub repeats: u32,
    pub prompt_template_hash: String,
    pub corpus_name: String,
    pub corpus_hash: String,
    pub profiles_hash: String,
    pub profile_count: usize,
    pub expected_sessions: usize,
}

impl RunManifest {
    pub fn new(exp: &Experiment<'_>, run_id: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SESSION_SCHEMA_VERSION,
            run_id: run_id.to_string(),
            grid: exp.grid.clone(),
            cells: exp.grid.cells().into_iter().map(|c| c.cell_id).collect(),
            seed: exp.seed,
            repeats: exp.repeats,
            prompt_template_hash: exp.builder.template_hash().to_string(),
            corpus_name: exp.corpus.name.clone(),
            corpus_hash: exp.corpus.content_hash(),
            profiles_hash: exp.profiles_hash(),
            profile_count: exp.profiles.len(),
            expected_sessions: exp.expected_sessions(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub run_id: Option<String>,
    /// Continue an existing log instead of refusing to touch it.
    pub resume: bool,
    pub workers: usize,
    pub batch_size: usize,
    /// Stop after writing this many new records (used to simulate crashes).
    pub stop_after: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            run_id: None,
            resume: false,
            workers: 0,
            batch_size: 2048,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub run_id: String,
    pub expected: usize,
    /// Already present in the log when the run started.
    pub skipped: usize,
    pub written: usize,
    pub failed_sessions: usize,
    pub unparseable: usize,
    pub truncated_bytes: u64,
}

struct Task {
    cell: usize,
    /// `None` for the neutral agent.
    profile: Option<usize>,
    headline: usize,
    repeat: u32,
}

/// State recovered from an existing log.
#[derive(Debug, Default)]
pub struct LogScan {
    pub completed: HashSet<SessionKey>,
    pub run_ids: Vec<String>,
    pub durable_offset: u64,
    pub total_len: u64,
    pub records: usize,
}

/// Reads a session log, stopping at the first torn or unparseable line.
pub fn scan_log(path: &Path) -> Result<LogScan> {
    let mut scan = LogScan::default();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(scan),
        Err(e) => return Err(e.into()),
    };
    scan.total_len = file.metadata()?.len();
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 || line.last() != Some(&b'\n') {
            break;
        }
        let Ok(rec) = serde_json::from_slice::<SessionRecord>(&line) else {
            break;
        };
        if !scan.run_ids.contains(&rec.run_id) {
            scan.run_ids.push(rec.run_id.clone());
        }
        scan.completed.insert(rec.key());
        scan.records += 1;
        scan.durable_offset += n as u64;
    }
    Ok(scan)
}

/// Reads every record of a complete log. A torn tail is an error here.
pub fn read_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    let file = File::open(path).map_err(|e| Error::load(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SessionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::load(path, format!("line {}: {e}", i + 1)))?;
        if rec.schema_version != SESSION_SCHEMA_VERSION {
            return Err(Error::load(
                path,
                format!("line {}: unsupported schema_version {}", i + 1, rec.schema_version),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Executes every session of `exp`, appending to `log_path`.
///
/// `backends` holds one backend per entry of `exp.grid.backends`. Backend
/// failures are recorded on the session and never stop the run; log I/O
/// failures stop it with the last durable offset.
pub fn run_experiment(
    exp: &Experiment<'_>,
    backends: &[&dyn RatingBackend],
    log_path: &Path,
    options: &RunOptions,
) -> Result<RunSummary> {
    exp.validate()?;
    if backends.len() != exp.grid.backends.len() {
        return Err(Error::Config(format!(
            "{} backends supplied for {} grid entries",
            backends.len(),
            exp.grid.backends.len()
        )));
    }
    let run_id = options.run_id.clone().unwrap_or_else(|| exp.derived_run_id());
    let cells = exp.grid.cells();
    let expected = exp.expected_sessions();

    let scan = scan_log(log_path)?;
    if scan.total_len > 0 && !options.resume {
        return Err(Error::Config(format!(
            "{} already exists; pass resume to continue it",
            log_path.display()
        )));
    }
    if let Some(other) = scan.run_ids.iter().find(|r| **r != run_id) {
        return Err(Error::Config(format!(
            "{} belongs to run {other}, not {run_id}",
            log_path.display()
        )));
    }

    let mut file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(log_path)
        .map_err(|e| session_io(0, e))?;
    let truncated_bytes = scan.total_len - scan.durable_offset;
    if truncated_bytes > 0 {
        file.set_len(scan.durable_offset).map_err(|e| session_io(scan.durable_offset, e))?;
    }
    file.seek(SeekFrom::Start(scan.durable_offset))
        .map_err(|e| session_io(scan.durable_offset, e))?;
    let mut durable = scan.durable_offset;

    // canonical order; keys already in the log are skipped
    let mut tasks = Vec::new();
    let mut skipped = 0;
    for (ci, cell) in cells.iter().enumerate() {
        let agents = std::iter::once(None).chain((0..exp.profiles.len()).map(Some));
        for profile in agents {
            let pid = profile.map_or(NEUTRAL_PARTICIPANT, |i| exp.profiles[i].participant_id.as_str());
            for (hi, h) in exp.corpus.headlines.iter().enumerate() {
                for repeat in 0..exp.repeats {
                    let key = SessionKey {
                        run_id: run_id.clone(),
                        cell_id: cell.cell_id.clone(),
                        participant_id: pid.to_string(),
                        headline_id: h.headline_id.clone(),
                        repeat,
                    };
                    if scan.completed.contains(&key) {
                        skipped += 1;
                    } else {
                        tasks.push(Task {
                            cell: ci,
                            profile,
                            headline: hi,
                            repeat,
                        });
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let mut summary = RunSummary {
        run_id: run_id.clone(),
        expected,
        skipped,
        written: 0,
        failed_sessions: 0,
        unparseable: 0,
        truncated_bytes,
    };
    let limit = options.stop_after.unwrap_or(usize::MAX).min(tasks.len());
    let batch = options.batch_size.max(1);
    let mut start = 0;
    while start < limit {
        let end = (start + batch).min(limit);
        let records: Vec<Result<SessionRecord>> = pool.install(|| {
            tasks[start..end]
                .par_iter()
                .map(|t| execute(exp, &cells, backends, &run_id, t))
                .collect()
        });
        let mut buf = Vec::with_capacity((end - start) * 512);
        for rec in records {
            let rec = rec?;
            if rec.error.is_some() {
                summary.failed_sessions += 1;
            }
            if rec.parse_status == ParseStatus::Unparseable {
                summary.unparseable += 1;
            }
            serde_json::to_writer(&mut buf, &rec)?;
            buf.push(b'\n');
        }
        file.write_all(&buf).map_err(|e| session_io(durable, e))?;
        file.sync_data().map_err(|e| session_io(durable, e))?;
        durable += buf.len() as u64;
        summary.written += end - start;
        start = end;
    }
    Ok(summary)
}

fn session_io(durable_offset: u64, source: std::io::Error) -> Error {
    Error::SessionLog {
        durable_offset,
        source,
    }
}

fn execute(
    exp: &Experiment<'_>,
    cells: &[GridCell],
    backends: &[&dyn RatingBackend],
    run_id: &str,
    task: &Task,
) -> Result<SessionRecord> {
    let cell = &cells[task.cell];
    let backend = backends[task.cell / exp.grid.scale_formats.len()];
    let headline: &Headline = &exp.corpus.headlines[task.headline];
    let (condition, participant_id, prompt, values) = match task.profile {
        None => (
            Condition::Neutral,
            NEUTRAL_PARTICIPANT.to_string(),
            exp.builder.build_neutral_prompt(),
            None,
        ),
        Some(i) => {
            let profile = &exp.profiles[i];
            let spec = AgentSpec {
                participant_id: profile.participant_id.clone(),
                scale_format: cell.scale_format,
                inventory_kind: cell.inventory_kind,
            };
            let prompt = exp.builder.build_persona_prompt(profile, &spec)?;
            let values = item_values(exp.builder.inventory(cell.inventory_kind), &profile.responses)?;
            (Condition::Persona, profile.participant_id.clone(), prompt, Some(values))
        }
    };
    let (response, error) = match backend.rate_headline(&prompt, headline, task.repeat) {
        Ok(r) => (r, None),
        Err(Error::RetriesExhausted { last_raw_text, .. }) => {
            (RatingResponse::from_raw(last_raw_text), Some("retries exhausted".to_string()))
        }
        Err(e) => (RatingResponse::from_raw(String::new()), Some(e.to_string())),
    };
    let timestamp_ms = (cell.backend.backend_kind == BackendKind::Live).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    });
    let seed = match cell.backend.backend_kind {
        BackendKind::Synthetic => Some(cell.backend.seed.unwrap_or(exp.seed)),
        BackendKind::Live => None,
    };
    Ok(SessionRecord {
        schema_version: SESSION_SCHEMA_VERSION,
        run_id: run_id.to_string(),
        cell_id: cell.cell_id.clone(),
        condition,
        participant_id,
        headline_id: headline.headline_id.clone(),
        veracity: headline.veracity,
        repeat: task.repeat,
        rating: response.rating,
        parse_status: response.parse_status,
        raw_text: response.raw_text,
        error,
        scale_format: cell.scale_format,
        inventory_kind: cell.inventory_kind,
        item_values: values,
        backend_kind: cell.backend.backend_kind,
        model_name: cell.backend.model_name.clone(),
        temperature: cell.backend.temperature,
        seed,
        prompt_template_hash: exp.builder.template_hash().to_string(),
        timestamp_ms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralBaseline {
    pub headline_id: String,
    pub base_rating: f64,
    pub sigma: f64,
    pub n: usize,
    pub samples: Vec<f64>,
}

/// `n` draws of `rating + sigma * Z`, from a stream keyed by seed and headline.
pub fn build_neutral_baseline(
    headline_id: &str,
    rating: f64,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<NeutralBaseline> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Validation(format!("baseline sigma must be > 0, got {sigma}")));
    }
    if n < 2 {
        return Err(Error::Validation(format!("baseline needs n >= 2, got {n}")));
    }
    if !rating.is_finite() {
        return Err(Error::Validation("baseline rating is not finite".into()));
    }
    let mut rng = crate::rng::keyed_rng(seed, &[b"neutral-baseline", headline_id.as_bytes()]);
    let samples = (0..n)
        .map(|_| rating + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(NeutralBaseline {
        headline_id: headline_id.to_string(),
        base_rating: rating,
        sigma,
        n,
        samples,
    })
}
