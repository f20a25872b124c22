//! `newsdisc`: score inventories, run persona rating experiments, and
//! analyze session logs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use newsdisc_core::backend::{connect, BackendKind, LiveBackend, RatingBackend};
use newsdisc_core::corpus::{load_corpus, validate_balance, BalanceSpec, Corpus};
use newsdisc_core::inventory::InventoryKind;
use newsdisc_core::persona::PromptBuilder;
use newsdisc_core::profiles::{
    generate_profiles, load_profiles, load_trait_scores, score_profiles, write_profiles, write_trait_scores,
};
use newsdisc_core::report::{analyze, write_report, AnalysisOptions, OutputFormats, ReferenceFixtures};
use newsdisc_core::runner::{
    build_neutral_baseline, read_sessions, run_experiment, Experiment, ExperimentGrid, RunManifest, RunOptions,
};

#[derive(Parser)]
#[command(name = "newsdisc", version, about = "Persona-conditioned news discernment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score item responses into Big-Five domain scores.
    Score(ScoreArgs),
    /// Rate every headline for every agent and grid cell.
    Run(RunArgs),
    /// Build the report tables from a session log.
    Analyze(AnalyzeArgs),
    /// Draw a noise-augmented neutral baseline for one rating.
    Baseline(BaselineArgs),
    /// Check a corpus file for schema errors and balance.
    ValidateCorpus(ValidateArgs),
    /// Write synthetic respondents as a response CSV.
    GenerateProfiles(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InventoryArg {
    Auto,
    Bfi2,
    Bfi2s,
}

impl InventoryArg {
    fn kind(self) -> Option<InventoryKind> {
        match self {
            InventoryArg::Auto => None,
            InventoryArg::Bfi2 => Some(InventoryKind::Bfi2),
            InventoryArg::Bfi2s => Some(InventoryKind::Bfi2S),
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Inventory of the response file; inferred from the column count by default.
    #[arg(long, value_enum, default_value = "auto")]
    inventory: InventoryArg,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum BackendArg {
    Synthetic,
    Live,
}

#[derive(Args)]
struct RunArgs {
    /// Grid JSON; the bundled synthetic replication grid when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    profiles: PathBuf,
    /// Corpus JSON; the bundled 24-headline fixture when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Force every grid entry onto this backend.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Endpoint for live backends that do not name one.
    #[arg(long)]
    endpoint_url: Option<String>,
    /// Seed for every synthetic backend (overrides the grid).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Continue an interrupted run in out-dir.
    #[arg(long)]
    resume: bool,
    /// Ratings per (agent, headline); repeats are averaged in analysis.
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    /// Log live request and response bodies to this file (token redacted).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Both,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    sessions: PathBuf,
    #[arg(long)]
    trait_scores: PathBuf,
    /// Reference fixture JSON, or `bundled` for the shipped human reference.
    #[arg(long)]
    reference_fixtures: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Neutral-baseline noise SD on the 4-point scale.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Baseline sample count; defaults to the persona agent count.
    #[arg(long)]
    baseline_n: Option<usize>,
    #[arg(long)]
    baseline_seed: Option<u64>,
    /// Report raw rather than standardized regression coefficients.
    #[arg(long)]
    raw_beta: bool,
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    rating: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "H01")]
    headline: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Skip the 24-headline balance check.
    #[arg(long)]
    no_balance: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    inventory: InventoryArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::ValidateCorpus(a) => cmd_validate(a),
        Command::GenerateProfiles(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn corpus_or_fixture(path: Option<&Path>) -> Result<Corpus> {
    Ok(match path {
        Some(p) => load_corpus(p)?,
        None => Corpus::fixture(),
    })
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let profiles = load_profiles(&a.responses, a.inventory.kind())?;
    let scores = score_profiles(&profiles)?;
    let mut out = create(&a.out)?;
    write_trait_scores(&mut out, &scores)?;
    out.flush()?;
    eprintln!("scored {} participants -> {}", scores.len(), a.out.display());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let Some(kind) = a.inventory.kind() else {
        bail!("--inventory must be bfi2 or bfi2s");
    };
    let profiles = generate_profiles(kind, a.n, a.seed);
    let mut out = create(&a.out)?;
    write_profiles(&mut out, &profiles)?;
    out.flush()?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut grid = match &a.grid {
        Some(p) => ExperimentGrid::load(p)?,
        None => ExperimentGrid::replication_synthetic(),
    };
    if let Some(kind) = a.backend {
        for b in &mut grid.backends {
            b.backend_kind = match kind {
                BackendArg::Synthetic => BackendKind::Synthetic,
                BackendArg::Live => BackendKind::Live,
            };
        }
    }
    for b in &mut grid.backends {
        if b.backend_kind == BackendKind::Live && b.endpoint_url.is_none() {
            b.endpoint_url = a.endpoint_url.clone();
        }
        if b.backend_kind == BackendKind::Synthetic {
            if let Some(seed) = a.seed {
                b.seed = Some(seed);
            }
        }
    }
    grid.validate()?;
    let corpus = corpus_or_fixture(a.corpus.as_deref())?;
    if corpus.name != grid.corpus_name {
        eprintln!(
            "warning: grid names corpus {:?} but {:?} was loaded",
            grid.corpus_name, corpus.name
        );
    }
    let profiles = load_profiles(&a.profiles, Some(grid.profile_source.inventory_kind()))?;
    let builder = PromptBuilder::default();

    let trace: Option<std::sync::Arc<std::sync::Mutex<BufWriter<File>>>> = match &a.trace {
        Some(p) => Some(std::sync::Arc::new(std::sync::Mutex::new(create(p)?))),
        None => None,
    };
    let mut backends: Vec<Box<dyn RatingBackend>> = Vec::new();
    for b in &grid.backends {
        let backend: Box<dyn RatingBackend> = match (b.backend_kind, &trace) {
            (BackendKind::Live, Some(sink)) => {
                Box::new(LiveBackend::from_env(b)?.with_trace(Box::new(SharedSink(sink.clone()))))
            }
            _ => connect(b, &builder, a.seed.unwrap_or(0))?,
        };
        backends.push(backend);
    }
    let refs: Vec<&dyn RatingBackend> = backends.iter().map(|b| b.as_ref()).collect();

    let exp = Experiment {
        grid: &grid,
        profiles: &profiles,
        corpus: &corpus,
        builder: &builder,
        seed: a.seed.unwrap_or(0),
        repeats: a.repeats,
    };
    let run_id = a.run_id.clone().unwrap_or_else(|| exp.derived_run_id());
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let manifest = RunManifest::new(&exp, &run_id);
    let manifest_path = a.out_dir.join("manifest.json");
    if a.resume && manifest_path.exists() {
        let old: RunManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)
            .with_context(|| format!("reading {}", manifest_path.display()))?;
        if old != manifest {
            bail!(
                "{} describes a different run ({}); refusing to resume with changed inputs",
                manifest_path.display(),
                old.run_id
            );
        }
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;

    let options = RunOptions {
        run_id: Some(run_id),
        resume: a.resume,
        workers: a.workers,
        ..RunOptions::default()
    };
    let summary = run_experiment(&exp, &refs, &a.out_dir.join("sessions.jsonl"), &options)?;
    if let Some(sink) = &trace {
        sink.lock().expect("trace lock").flush()?;
    }
    eprintln!(
        "run {}: {} written, {} already present, {} expected; {} unparseable, {} backend failures",
        summary.run_id, summary.written, summary.skipped, summary.expected, summary.unparseable, summary.failed_sessions
    );
    if summary.truncated_bytes > 0 {
        eprintln!("discarded a torn final record ({} bytes)", summary.truncated_bytes);
    }
    Ok(())
}

struct SharedSink(std::sync::Arc<std::sync::Mutex<BufWriter<File>>>);

impl Write for SharedSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().expect("trace lock").write(buf)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.0.lock().expect("trace lock").flush()
    }
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let records = read_sessions(&a.sessions)?;
    let traits = load_trait_scores(&a.trait_scores)?;
    let corpus = corpus_or_fixture(a.corpus.as_deref())?;
    let reference = match a.reference_fixtures.as_deref() {
        None => None,
        Some("bundled") => Some(ReferenceFixtures::bundled()),
        Some(path) => Some(ReferenceFixtures::load(Path::new(path))?),
    };
    let options = AnalysisOptions {
        baseline_sigma: a.sigma,
        baseline_n: a.baseline_n,
        baseline_seed: a.baseline_seed,
        standardized: !a.raw_beta,
        ..AnalysisOptions::default()
    };
    let report = analyze(&records, &traits, &corpus, reference.as_ref(), &options)?;
    let formats = match a.format {
        FormatArg::Csv => OutputFormats {
            csv: true,
            markdown: false,
        },
        FormatArg::Md => OutputFormats {
            csv: false,
            markdown: true,
        },
        FormatArg::Both => OutputFormats::default(),
    };
    let files = write_report(&report, &a.out_dir, formats)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {} files to {}", files.len(), a.out_dir.display());
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let b = build_neutral_baseline(&a.headline, a.rating, a.sigma, a.n, a.seed)?;
    let mut out = create(&a.out)?;
    writeln!(out, "# headline_id={}", b.headline_id)?;
    writeln!(out, "# base_rating={}", b.base_rating)?;
    writeln!(out, "# sigma={}", b.sigma)?;
    writeln!(out, "# seed={}", a.seed)?;
    writeln!(out, "sample")?;
    for s in &b.samples {
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let spec = if a.no_balance {
        BalanceSpec::disabled()
    } else {
        BalanceSpec::calvillo()
    };
    let report = validate_balance(&corpus, &spec);
    eprintln!(
        "{}: {} headlines ({} true / {} false, {} pro-liberal / {} pro-conservative)",
        corpus.name,
        report.total,
        report.true_count,
        report.false_count,
        report.liberal_count,
        report.conservative_count
    );
    for p in &report.problems {
        eprintln!("  {p}");
    }
    if !report.pass {
        bail!("corpus {} failed balance checks", corpus.name);
    }
    Ok(())
}
