//! Analysis of a session log into comparison, correlation, regression and
//! similarity tables, and their CSV / Markdown serialization.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::inventory::{Domain, InventoryKind, ScaleFormat, TraitScores};
use crate::metrics::{summarize_ratings, AgentSummary, DiscernmentSummary};
use crate::runner::{build_neutral_baseline, Condition, SessionRecord};
use crate::stats::{
    cohens_d, cosine_similarity, ks_two_sample, mann_whitney_u, ols_regression, pearson, significance_stars,
    EffectBin, Outcome, SimilarityMask, ALPHA,
};

/// One published trait cell. `p` is absent when only the significance band
/// was published; `stars` then carries that band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    #[serde(rename = "trait")]
    pub domain: Domain,
    pub value: f64,
    pub p: Option<f64>,
    pub stars: String,
    #[serde(default)]
    pub p_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedConfiguration {
    pub label: String,
    pub outcome: Outcome,
    pub values: [f64; 5],
}

/// Published human reference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFixtures {
    pub label: String,
    pub n: usize,
    pub correlations: BTreeMap<Outcome, Vec<ReferenceCell>>,
    #[serde(default)]
    pub regressions: BTreeMap<Outcome, Vec<ReferenceCell>>,
    #[serde(default)]
    pub published_configurations: Vec<PublishedConfiguration>,
}

impl ReferenceFixtures {
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/reference/calvillo_reference.json"))
            .expect("bundled reference fixtures are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ReferenceFixtures = serde_json::from_str(text)?;
        for (kind, table) in [("correlations", &r.correlations), ("regressions", &r.regressions)] {
            for (outcome, cells) in table {
                let order: Vec<Domain> = cells.iter().map(|c| c.domain).collect();
                if order != Domain::ALL {
                    return Err(Error::Validation(format!(
                        "{kind}.{}: traits must be E, A, C, N, O in order",
                        outcome.code()
                    )));
                }
                for c in cells {
                    if let Some(p) = c.p {
                        if significance_stars(p) != c.stars {
                            return Err(Error::Validation(format!(
                                "{kind}.{}.{}: stars {:?} disagree with p = {p}",
                                outcome.code(),
                                c.domain.code(),
                                c.stars
                            )));
                        }
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    /// Values and p-values of the reference correlation vector for `outcome`.
    pub fn correlation(&self, outcome: Outcome) -> Option<([f64; 5], [Option<f64>; 5])> {
        let cells = self.correlations.get(&outcome)?;
        Some((
            std::array::from_fn(|i| cells[i].value),
            std::array::from_fn(|i| cells[i].p),
        ))
    }

    fn row(&self, cells: &[ReferenceCell], outcome: Outcome) -> TraitTableRow {
        TraitTableRow {
            setting: self.label.clone(),
            source: RowSource::Reference,
            outcome,
            n: self.n,
            cells: std::array::from_fn(|i| TraitCell {
                value: Some(cells[i].value),
                p: cells[i].p,
                stars: cells[i].stars.clone(),
            }),
            r_squared: None,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSource {
    Run,
    Reference,
    Published,
}

impl RowSource {
    fn label(self) -> &'static str {
        match self {
            RowSource::Run => "run",
            RowSource::Reference => "reference",
            RowSource::Published => "published",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitCell {
    /// `None` when the statistic is undefined.
    pub value: Option<f64>,
    pub p: Option<f64>,
    pub stars: String,
}

impl TraitCell {
    fn undefined() -> Self {
        TraitCell {
            value: None,
            p: None,
            stars: String::new(),
        }
    }

    fn from_value_p(value: f64, p: f64) -> Self {
        TraitCell {
            value: Some(value),
            p: Some(p),
            stars: significance_stars(p).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitTableRow {
    pub setting: String,
    pub source: RowSource,
    pub outcome: Outcome,
    pub n: usize,
    pub cells: [TraitCell; 5],
    /// Regression rows only.
    pub r_squared: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTableRow {
    pub setting: String,
    pub model_name: String,
    pub temperature: f64,
    pub scale_format: ScaleFormat,
    pub headline_count: usize,
    pub ks_sig_count: usize,
    pub mw_sig_count: usize,
    /// Headlines per |d| bin, in bin order.
    pub bin_counts: [usize; 4],
    /// Headlines without a usable baseline or persona distribution.
    pub excluded_headlines: Vec<String>,
}

/// Persona and baseline samples for one headline.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadlineSamples {
    pub headline_id: String,
    pub persona: Vec<f64>,
    pub baseline: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub setting: String,
    pub source: RowSource,
    pub cos_all: Option<f64>,
    pub cos_significant: Option<f64>,
    pub flag: String,
}

/// Per-headline KS, MWU and Cohen's d between persona and baseline samples.
pub fn build_comparison_row(
    setting: &str,
    model_name: &str,
    temperature: f64,
    scale_format: ScaleFormat,
    headlines: &[HeadlineSamples],
    alpha: f64,
) -> Result<ComparisonTableRow> {
    let mut row = ComparisonTableRow {
        setting: setting.to_string(),
        model_name: model_name.to_string(),
        temperature,
        scale_format,
        headline_count: headlines.len(),
        ks_sig_count: 0,
        mw_sig_count: 0,
        bin_counts: [0; 4],
        excluded_headlines: Vec::new(),
    };
    for h in headlines {
        let Some(baseline) = h.baseline.as_deref().filter(|b| b.len() >= 2) else {
            row.excluded_headlines.push(h.headline_id.clone());
            continue;
        };
        if h.persona.len() < 2 {
            row.excluded_headlines.push(h.headline_id.clone());
            continue;
        }
        if ks_two_sample(&h.persona, baseline)?.p_two_tailed < alpha {
            row.ks_sig_count += 1;
        }
        match mann_whitney_u(&h.persona, baseline) {
            Ok(t) if t.p_two_tailed < alpha => row.mw_sig_count += 1,
            Ok(_) | Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
        let bin = match cohens_d(&h.persona, baseline) {
            Ok(es) => es.bin,
            // both samples constant: no spread to scale by
            Err(Error::Degenerate(_)) => {
                if crate::stats::mean(&h.persona) == crate::stats::mean(baseline) {
                    EffectBin::Negligible
                } else {
                    EffectBin::Large
                }
            }
            Err(e) => return Err(e),
        };
        row.bin_counts[bin.index()] += 1;
    }
    Ok(row)
}

/// Included agents paired with their trait scores, in participant order.
fn paired<'a>(
    summaries: &'a [DiscernmentSummary],
    traits: &BTreeMap<String, TraitScores>,
) -> Result<Vec<(&'a DiscernmentSummary, TraitScores)>> {
    let missing: Vec<&str> = summaries
        .iter()
        .filter(|s| !traits.contains_key(&s.participant_id))
        .map(|s| s.participant_id.as_str())
        .collect();
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        return Err(Error::Config(format!(
            "{} participants have no trait scores (e.g. {})",
            missing.len(),
            shown.join(", ")
        )));
    }
    Ok(summaries.iter().map(|s| (s, traits[&s.participant_id])).collect())
}

fn outcome_values(rows: &[(&DiscernmentSummary, TraitScores)], outcome: Outcome) -> Vec<f64> {
    rows.iter()
        .map(|(s, _)| match outcome {
            Outcome::Discernment => s.nd,
            Outcome::RealAccuracy => s.ar,
            Outcome::FalseAccuracy => s.af,
        })
        .collect()
}

fn trait_columns(rows: &[(&DiscernmentSummary, TraitScores)]) -> [Vec<f64>; 5] {
    std::array::from_fn(|k| rows.iter().map(|(_, t)| t.as_array()[k]).collect())
}

/// Pearson trait correlations for ND, AR and AF. Fewer than three agents
/// gives no rows and a warning.
pub fn build_correlation_table(
    setting: &str,
    summaries: &[DiscernmentSummary],
    traits: &BTreeMap<String, TraitScores>,
    warnings: &mut Vec<String>,
) -> Result<Vec<TraitTableRow>> {
    let rows = paired(summaries, traits)?;
    if rows.len() < 3 {
        warnings.push(format!("{setting}: {} agents; correlation rows omitted", rows.len()));
        return Ok(Vec::new());
    }
    let columns = trait_columns(&rows);
    Ok(Outcome::ALL
        .iter()
        .map(|&outcome| {
            let y = outcome_values(&rows, outcome);
            let cells = std::array::from_fn(|k| match pearson(&columns[k], &y) {
                Ok(r) => TraitCell::from_value_p(r.r, r.p_two_tailed),
                Err(_) => TraitCell::undefined(),
            });
            TraitTableRow {
                setting: setting.to_string(),
                source: RowSource::Run,
                outcome,
                n: rows.len(),
                cells,
                r_squared: None,
                note: String::new(),
            }
        })
        .collect())
}

/// Multiple regressions of ND, AR and AF on all five traits at once.
pub fn build_regression_table(
    setting: &str,
    summaries: &[DiscernmentSummary],
    traits: &BTreeMap<String, TraitScores>,
    standardized: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<TraitTableRow>> {
    let rows = paired(summaries, traits)?;
    if rows.len() < 7 {
        warnings.push(format!("{setting}: {} agents; regression rows omitted", rows.len()));
        return Ok(Vec::new());
    }
    let columns = trait_columns(&rows);
    let predictors: Vec<(&str, &[f64])> = Domain::ALL
        .iter()
        .zip(&columns)
        .map(|(d, c)| (d.code(), c.as_slice()))
        .collect();
    Outcome::ALL
        .iter()
        .map(|&outcome| {
            let y = outcome_values(&rows, outcome);
            let mut row = TraitTableRow {
                setting: setting.to_string(),
                source: RowSource::Run,
                outcome,
                n: rows.len(),
                cells: std::array::from_fn(|_| TraitCell::undefined()),
                r_squared: None,
                note: String::new(),
            };
            match ols_regression(&predictors, &y, standardized) {
                Ok(fit) => {
                    for (cell, c) in row.cells.iter_mut().zip(&fit.coefficients) {
                        *cell = TraitCell::from_value_p(c.beta, c.p_two_tailed);
                    }
                    row.r_squared = Some(fit.r_squared);
                }
                Err(e @ (Error::SingularDesign { .. } | Error::Degenerate(_))) => row.note = e.to_string(),
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect()
}

/// Cosine similarity of each configuration vector with the reference, over
/// all traits and over the traits significant in the reference.
pub fn build_similarity_data(
    configurations: &[(String, RowSource, [f64; 5])],
    reference: &[f64; 5],
    reference_p: &[Option<f64>; 5],
    alpha: f64,
) -> Vec<SimilarityRow> {
    let sig: [bool; 5] = std::array::from_fn(|i| reference_p[i].is_some_and(|p| p < alpha));
    let mask = SimilarityMask::Entries(sig);
    configurations
        .iter()
        .map(|(label, source, v)| {
            let all = cosine_similarity(v, reference, &SimilarityMask::All);
            let significant = cosine_similarity(v, reference, &mask);
            let mut flags = Vec::new();
            if all.is_err() {
                flags.push("zero-norm (all traits)");
            }
            if significant.is_err() {
                flags.push("zero-norm (significant traits)");
            }
            SimilarityRow {
                setting: label.clone(),
                source: *source,
                cos_all: all.ok(),
                cos_significant: significant.ok(),
                flag: flags.join("; "),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub alpha: f64,
    pub baseline_sigma: f64,
    /// Baseline sample count; defaults to the number of persona agents rated
    /// on the headline.
    pub baseline_n: Option<usize>,
    /// Defaults to the seed recorded on the sessions (0 for live runs).
    pub baseline_seed: Option<u64>,
    pub standardized: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            alpha: ALPHA,
            baseline_sigma: 0.5,
            baseline_n: None,
            baseline_seed: None,
            standardized: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool_version: String,
    pub run_id: String,
    pub seeds: Vec<u64>,
    pub baseline_seed: u64,
    pub prompt_template_hashes: Vec<String>,
    pub corpus_name: String,
    pub corpus_hash: String,
    pub alpha: f64,
    pub baseline_sigma: f64,
    pub baseline_n: String,
    pub standardized: bool,
}

impl ReportHeader {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: Vec<String>| if v.is_empty() { "none".to_string() } else { v.join(";") };
        vec![
            ("tool_version", self.tool_version.clone()),
            ("run_id", self.run_id.clone()),
            ("seeds", join(self.seeds.iter().map(u64::to_string).collect())),
            ("baseline_seed", self.baseline_seed.to_string()),
            ("prompt_template_hash", join(self.prompt_template_hashes.clone())),
            ("corpus", format!("{} ({})", self.corpus_name, self.corpus_hash)),
            ("alpha", self.alpha.to_string()),
            ("baseline_sigma", self.baseline_sigma.to_string()),
            ("baseline_n", self.baseline_n.clone()),
            ("beta", if self.standardized { "standardized" } else { "raw" }.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummaries {
    pub setting: String,
    pub agents: Vec<AgentSummary>,
    /// Included agents dropped from correlations for rating fewer than half
    /// the corpus.
    pub sparse: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: ReportHeader,
    pub comparison: Vec<ComparisonTableRow>,
    pub correlations: Vec<TraitTableRow>,
    pub regressions: Vec<TraitTableRow>,
    pub similarity: Vec<SimilarityRow>,
    pub summaries: Vec<CellSummaries>,
    pub warnings: Vec<String>,
}

struct CellMeta {
    model_name: String,
    temperature: f64,
    scale_format: ScaleFormat,
    inventory_kind: InventoryKind,
}

/// Full analysis of one run's sessions.
pub fn analyze(
    records: &[SessionRecord],
    traits: &BTreeMap<String, TraitScores>,
    corpus: &Corpus,
    reference: Option<&ReferenceFixtures>,
    options: &AnalysisOptions,
) -> Result<Report> {
    if !(options.baseline_sigma > 0.0) {
        return Err(Error::Config("baseline sigma must be > 0".into()));
    }
    let Some(first) = records.first() else {
        return Err(Error::Validation("session log is empty".into()));
    };
    if let Some(other) = records.iter().find(|r| r.run_id != first.run_id) {
        return Err(Error::Validation(format!(
            "sessions come from more than one run ({} and {}); analyze one run at a time",
            first.run_id, other.run_id
        )));
    }
    let mut seeds: Vec<u64> = records.iter().filter_map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut hashes: Vec<String> = records.iter().map(|r| r.prompt_template_hash.clone()).collect();
    hashes.sort();
    hashes.dedup();
    let baseline_seed = options.baseline_seed.unwrap_or_else(|| seeds.first().copied().unwrap_or(0));

    // cells in order of first appearance
    let mut order: Vec<&str> = Vec::new();
    let mut by_cell: HashMap<&str, Vec<&SessionRecord>> = HashMap::new();
    let mut meta: HashMap<&str, CellMeta> = HashMap::new();
    for r in records {
        let entry = by_cell.entry(&r.cell_id).or_insert_with(|| {
            order.push(&r.cell_id);
            Vec::new()
        });
        entry.push(r);
        meta.entry(&r.cell_id).or_insert_with(|| CellMeta {
            model_name: r.model_name.clone(),
            temperature: r.temperature,
            scale_format: r.scale_format,
            inventory_kind: r.inventory_kind,
        });
    }

    let mut warnings = Vec::new();
    let mut comparison = Vec::new();
    let mut correlations = Vec::new();
    let mut regressions = Vec::new();
    let mut summaries = Vec::new();
    let mut nd_vectors: Vec<(String, RowSource, [f64; 5])> = Vec::new();

    for cell_id in order {
        let recs = &by_cell[cell_id];
        let m = &meta[cell_id];
        let setting = format!(
            "{} / {} / {} / {}",
            m.model_name,
            m.temperature,
            m.scale_format,
            m.inventory_kind
        );

        // per agent, per headline: repeats averaged
        let mut persona: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
        let mut neutral: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut persona_pairs: BTreeMap<&str, Vec<(&str, Option<f64>)>> = BTreeMap::new();
        for r in recs {
            let rating = r.rating.map(f64::from);
            match r.condition {
                Condition::Neutral => {
                    let e = neutral.entry(&r.headline_id).or_default();
                    if let Some(v) = rating {
                        e.push(v);
                    }
                }
                Condition::Persona => {
                    persona_pairs
                        .entry(&r.participant_id)
                        .or_default()
                        .push((&r.headline_id, rating));
                    if let Some(v) = rating {
                        persona
                            .entry(&r.participant_id)
                            .or_default()
                            .entry(&r.headline_id)
                            .or_default()
                            .push(v);
                    }
                }
            }
        }

        let agents = persona_pairs
            .iter()
            .map(|(pid, pairs)| summarize_ratings(pid, pairs.iter().copied(), corpus))
            .collect::<Result<Vec<_>>>()?;
        let excluded = agents.iter().filter(|a| a.included().is_none()).count();
        let mut sparse = Vec::new();
        let usable: Vec<DiscernmentSummary> = agents
            .iter()
            .filter_map(AgentSummary::included)
            .filter(|s| {
                let ok = s.has_enough_ratings(corpus.len());
                if !ok {
                    sparse.push(s.participant_id.clone());
                }
                ok
            })
            .cloned()
            .collect();
        if excluded > 0 || !sparse.is_empty() {
            warnings.push(format!(
                "{setting}: {excluded} agents excluded (empty veracity class), {} dropped (fewer than half rated)",
                sparse.len()
            ));
        }

        let cell_key = crate::rng::derive_key(baseline_seed, &[b"baseline-cell", cell_id.as_bytes()]);
        let cell_seed = u64::from_le_bytes(cell_key[..8].try_into().expect("8 bytes"));
        let mut headline_samples = Vec::with_capacity(corpus.len());
        for h in &corpus.headlines {
            let persona_samples: Vec<f64> = persona
                .values()
                .filter_map(|per| per.get(h.headline_id.as_str()))
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let n = options.baseline_n.unwrap_or(persona_samples.len());
            let baseline = match neutral.get(h.headline_id.as_str()) {
                Some(v) if !v.is_empty() && n >= 2 => {
                    let base = v.iter().sum::<f64>() / v.len() as f64;
                    Some(build_neutral_baseline(&h.headline_id, base, options.baseline_sigma, n, cell_seed)?.samples)
                }
                _ => None,
            };
            headline_samples.push(HeadlineSamples {
                headline_id: h.headline_id.clone(),
                persona: persona_samples,
                baseline,
            });
        }
        let row = build_comparison_row(
            &setting,
            &m.model_name,
            m.temperature,
            m.scale_format,
            &headline_samples,
            options.alpha,
        )?;
        if !row.excluded_headlines.is_empty() {
            warnings.push(format!(
                "{setting}: no baseline comparison for {}",
                row.excluded_headlines.join(", ")
            ));
        }
        comparison.push(row);

        let corr = build_correlation_table(&setting, &usable, traits, &mut warnings)?;
        if let Some(nd) = corr.iter().find(|r| r.outcome == Outcome::Discernment) {
            if nd.cells.iter().all(|c| c.value.is_some()) {
                nd_vectors.push((
                    setting.clone(),
                    RowSource::Run,
                    std::array::from_fn(|i| nd.cells[i].value.expect("checked")),
                ));
            } else {
                warnings.push(format!("{setting}: ND vector has undefined entries; no similarity row"));
            }
        }
        correlations.extend(corr);
        regressions.extend(build_regression_table(
            &setting,
            &usable,
            traits,
            options.standardized,
            &mut warnings,
        )?);
        summaries.push(CellSummaries {
            setting,
            agents,
            sparse,
        });
    }

    let mut similarity = Vec::new();
    if let Some(reference) = reference {
        if let Some(cells) = reference.correlations.get(&Outcome::Discernment) {
            correlations.push(reference.row(cells, Outcome::Discernment));
        }
        for outcome in Outcome::ALL {
            if let Some(cells) = reference.regressions.get(&outcome) {
                regressions.push(reference.row(cells, outcome));
            }
        }
        if let Some((ref_values, ref_p)) = reference.correlation(Outcome::Discernment) {
            for pc in reference.published_configurations.iter().filter(|p| p.outcome == Outcome::Discernment) {
                nd_vectors.push((pc.label.clone(), RowSource::Published, pc.values));
            }
            similarity = build_similarity_data(&nd_vectors, &ref_values, &ref_p, options.alpha);
        }
    }

    Ok(Report {
        header: ReportHeader {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            run_id: first.run_id.clone(),
            seeds,
            baseline_seed,
            prompt_template_hashes: hashes,
            corpus_name: corpus.name.clone(),
            corpus_hash: corpus.content_hash(),
            alpha: options.alpha,
            baseline_sigma: options.baseline_sigma,
            baseline_n: options
                .baseline_n
                .map_or_else(|| "persona agents per headline".to_string(), |n| n.to_string()),
            standardized: options.standardized,
        },
        comparison,
        correlations,
        regressions,
        similarity,
        summaries,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub markdown: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        OutputFormats {
            csv: true,
            markdown: true,
        }
    }
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn num2(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"))
}

fn csv_with_header(header: &ReportHeader, columns: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in header.pairs() {
        writeln!(out, "# {k}={v}").expect("string write");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

fn markdown_table(title: &str, header: &ReportHeader, columns: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = format!("# {title}\n\n");
    for (k, v) in header.pairs() {
        writeln!(out, "- {k}: {v}").expect("string write");
    }
    out.push('\n');
    out.push_str(&line(columns));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w.max(3))).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

struct Table {
    name: &'static str,
    title: &'static str,
    columns: Vec<String>,
    md_columns: Vec<String>,
    csv_rows: Vec<Vec<String>>,
    md_rows: Vec<Vec<String>>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn comparison_table(report: &Report) -> Table {
    let mut columns = strings(&["setting", "model", "temperature", "format", "headlines", "KS", "MW"]);
    columns.extend(EffectBin::ALL.iter().map(|b| format!("d {}", b.label())));
    columns.push("excluded".into());
    let rows: Vec<Vec<String>> = report
        .comparison
        .iter()
        .map(|r| {
            let mut v = vec![
                r.setting.clone(),
                r.model_name.clone(),
                r.temperature.to_string(),
                r.scale_format.to_string(),
                r.headline_count.to_string(),
                r.ks_sig_count.to_string(),
                r.mw_sig_count.to_string(),
            ];
            v.extend(r.bin_counts.iter().map(usize::to_string));
            v.push(r.excluded_headlines.join(";"));
            v
        })
        .collect();
    Table {
        name: "comparison",
        title: "Persona vs neutral baseline",
        md_columns: columns.clone(),
        columns,
        csv_rows: rows.clone(),
        md_rows: rows,
    }
}

fn trait_table(rows: &[TraitTableRow], name: &'static str, title: &'static str, with_r2: bool) -> Table {
    let mut csv_cols = strings(&["setting", "source", "outcome", "n"]);
    for d in Domain::ALL {
        csv_cols.push(d.code().to_string());
        csv_cols.push(format!("{}_p", d.code()));
        csv_cols.push(format!("{}_stars", d.code()));
    }
    if with_r2 {
        csv_cols.push("r_squared".into());
    }
    csv_cols.push("note".into());
    let csv_rows = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.setting.clone(),
                r.source.label().to_string(),
                r.outcome.code().to_string(),
                r.n.to_string(),
            ];
            for c in &r.cells {
                v.push(num(c.value));
                v.push(num(c.p));
                v.push(c.stars.clone());
            }
            if with_r2 {
                v.push(num(r.r_squared));
            }
            v.push(r.note.clone());
            v
        })
        .collect();
    let mut md_cols = strings(&["setting", "outcome", "n"]);
    md_cols.extend(Domain::ALL.iter().map(|d| d.code().to_string()));
    if with_r2 {
        md_cols.push("R²".into());
    }
    let md_rows = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.setting.clone(), r.outcome.code().to_string(), r.n.to_string()];
            v.extend(r.cells.iter().map(|c| format!("{}{}", num2(c.value), c.stars)));
            if with_r2 {
                v.push(num2(r.r_squared));
            }
            v
        })
        .collect();
    Table {
        name,
        title,
        columns: csv_cols,
        md_columns: md_cols,
        csv_rows,
        md_rows,
    }
}

fn similarity_table(report: &Report) -> Table {
    let columns = strings(&["setting", "source", "cos_all", "cos_significant", "flag"]);
    let csv_rows = report
        .similarity
        .iter()
        .map(|r| {
            vec![
                r.setting.clone(),
                r.source.label().to_string(),
                num(r.cos_all),
                num(r.cos_significant),
                r.flag.clone(),
            ]
        })
        .collect();
    let md_rows = report
        .similarity
        .iter()
        .map(|r| {
            vec![
                r.setting.clone(),
                r.source.label().to_string(),
                num2(r.cos_all),
                num2(r.cos_significant),
                r.flag.clone(),
            ]
        })
        .collect();
    Table {
        name: "similarity",
        title: "Cosine similarity with the human ND correlation vector",
        md_columns: columns.clone(),
        columns,
        csv_rows,
        md_rows,
    }
}

fn summaries_csv(report: &Report) -> Result<String> {
    let columns = strings(&[
        "setting",
        "participant_id",
        "status",
        "ar",
        "af",
        "nd",
        "n_true_rated",
        "n_false_rated",
    ]);
    let mut rows = Vec::new();
    for cell in &report.summaries {
        for a in &cell.agents {
            rows.push(match a {
                AgentSummary::Included(s) => vec![
                    cell.setting.clone(),
                    s.participant_id.clone(),
                    if cell.sparse.contains(&s.participant_id) { "sparse" } else { "included" }.into(),
                    s.ar.to_string(),
                    s.af.to_string(),
                    s.nd.to_string(),
                    s.n_true_rated.to_string(),
                    s.n_false_rated.to_string(),
                ],
                AgentSummary::Excluded(e) => vec![
                    cell.setting.clone(),
                    e.participant_id.clone(),
                    format!("excluded: {}", e.reason),
                    "NA".into(),
                    "NA".into(),
                    "NA".into(),
                    e.n_true_rated.to_string(),
                    e.n_false_rated.to_string(),
                ],
            });
        }
    }
    csv_with_header(&report.header, &columns, &rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportManifest {
    pub header: ReportHeader,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Writes the report tables into `out_dir` and returns the written paths,
/// `manifest.json` last.
pub fn write_report(report: &Report, out_dir: &Path, formats: OutputFormats) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let tables = [
        comparison_table(report),
        trait_table(&report.correlations, "correlations", "Pearson correlations with traits", false),
        trait_table(&report.regressions, "regressions", "OLS coefficients on all five traits", true),
        similarity_table(report),
    ];
    let mut written = Vec::new();
    for t in &tables {
        if formats.csv {
            let path = out_dir.join(format!("{}.csv", t.name));
            std::fs::write(&path, csv_with_header(&report.header, &t.columns, &t.csv_rows)?)?;
            written.push(path);
        }
        if formats.markdown {
            let path = out_dir.join(format!("{}.md", t.name));
            std::fs::write(&path, markdown_table(t.title, &report.header, &t.md_columns, &t.md_rows))?;
            written.push(path);
        }
    }
    let path = out_dir.join("summaries.csv");
    std::fs::write(&path, summaries_csv(report)?)?;
    written.push(path);

    let manifest_path = out_dir.join("manifest.json");
    let manifest = ReportManifest {
        header: report.header.clone(),
        files: written
            .iter()
            .chain(std::iter::once(&manifest_path))
            .map(|p| p.file_name().expect("file name").to_string_lossy().into_owned())
            .collect(),
        warnings: report.warnings.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    written.push(manifest_path);
    Ok(written)
}
