//! Per-agent perceived-accuracy aggregates.
//!
//! AR is the mean rating over rated true headlines, AF the mean over rated
//! false headlines, and ND = AR − AF. Unparsed ratings are dropped pairwise.
//! Repeated ratings of one headline are averaged before the headline enters
//! AR or AF.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Veracity};
use crate::error::{Error, Result};
use crate::runner::SessionRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscernmentSummary {
    pub participant_id: String,
    pub ar: f64,
    pub af: f64,
    pub nd: f64,
    pub n_true_rated: usize,
    pub n_false_rated: usize,
}

impl DiscernmentSummary {
    pub fn n_rated(&self) -> usize {
        self.n_true_rated + self.n_false_rated
    }

    /// Agents with fewer than half the corpus rated are left out of
    /// correlations and regressions.
    pub fn has_enough_ratings(&self, corpus_len: usize) -> bool {
        2 * self.n_rated() >= corpus_len
    }
}

/// An agent without a rating in one of the veracity classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedAgent {
    pub participant_id: String,
    pub n_true_rated: usize,
    pub n_false_rated: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentSummary {
    Included(DiscernmentSummary),
    Excluded(ExcludedAgent),
}

impl AgentSummary {
    pub fn participant_id(&self) -> &str {
        match self {
            AgentSummary::Included(s) => &s.participant_id,
            AgentSummary::Excluded(e) => &e.participant_id,
        }
    }

    pub fn included(&self) -> Option<&DiscernmentSummary> {
        match self {
            AgentSummary::Included(s) => Some(s),
            AgentSummary::Excluded(_) => None,
        }
    }
}

/// Core aggregation over `(headline_id, rating)` pairs. Ratings may be any
/// real value; `None` marks an unparsed reply.
pub fn summarize_ratings<'a, I>(participant_id: &str, ratings: I, corpus: &Corpus) -> Result<AgentSummary>
where
    I: IntoIterator<Item = (&'a str, Option<f64>)>,
{
    // headline -> ratings, ordered so the sums do not depend on input order
    let mut by_headline: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (hid, rating) in ratings {
        if corpus.get(hid).is_none() {
            return Err(Error::Validation(format!(
                "participant {participant_id}: headline {hid} is not in corpus {}",
                corpus.name
            )));
        }
        let entry = by_headline.entry(hid).or_default();
        if let Some(r) = rating {
            entry.push(r);
        }
    }
    let (mut sum_true, mut n_true, mut sum_false, mut n_false) = (0.0, 0usize, 0.0, 0usize);
    for (hid, values) in &mut by_headline {
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let m = values.iter().sum::<f64>() / values.len() as f64;
        match corpus.get(hid).expect("checked above").veracity {
            Veracity::TrueNews => {
                sum_true += m;
                n_true += 1;
            }
            Veracity::FalseNews => {
                sum_false += m;
                n_false += 1;
            }
        }
    }
    if n_true == 0 || n_false == 0 {
        let missing = if n_true == 0 { "true" } else { "false" };
        return Ok(AgentSummary::Excluded(ExcludedAgent {
            participant_id: participant_id.to_string(),
            n_true_rated: n_true,
            n_false_rated: n_false,
            reason: format!("no rated {missing} headlines"),
        }));
    }
    let ar = sum_true / n_true as f64;
    let af = sum_false / n_false as f64;
    Ok(AgentSummary::Included(DiscernmentSummary {
        participant_id: participant_id.to_string(),
        ar,
        af,
        nd: ar - af,
        n_true_rated: n_true,
        n_false_rated: n_false,
    }))
}

/// Summary for one agent's records. All records must share a participant.
pub fn compute_summary(records: &[SessionRecord], corpus: &Corpus) -> Result<AgentSummary> {
    let Some(first) = records.first() else {
        return Err(Error::Validation("no records for agent".into()));
    };
    let pid = first.participant_id.as_str();
    if let Some(other) = records.iter().find(|r| r.participant_id != pid) {
        return Err(Error::Validation(format!(
            "records mix participants {pid} and {}",
            other.participant_id
        )));
    }
    summarize_ratings(
        pid,
        records
            .iter()
            .map(|r| (r.headline_id.as_str(), r.rating.map(f64::from))),
        corpus,
    )
}

/// AF alone; `None` when the agent rated no false headline.
pub fn belief_in_misinformation(records: &[SessionRecord], corpus: &Corpus) -> Result<Option<f64>> {
    let only_false: Vec<SessionRecord> = records
        .iter()
        .filter(|r| corpus.get(&r.headline_id).map(|h| h.veracity) == Some(Veracity::FalseNews))
        .cloned()
        .collect();
    if only_false.is_empty() {
        return Ok(None);
    }
    let pid = &only_false[0].participant_id;
    let mut by_headline: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &only_false {
        if r.participant_id != *pid {
            return Err(Error::Validation(format!(
                "records mix participants {pid} and {}",
                r.participant_id
            )));
        }
        if let Some(v) = r.rating {
            by_headline.entry(&r.headline_id).or_default().push(f64::from(v));
        }
    }
    if by_headline.is_empty() {
        return Ok(None);
    }
    let total: f64 = by_headline
        .values()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .sum();
    Ok(Some(total / by_headline.len() as f64))
}

/// Summaries for every participant in `records`, ordered by participant id.
pub fn summarize_all(records: &[SessionRecord], corpus: &Corpus) -> Result<Vec<AgentSummary>> {
    let mut groups: BTreeMap<&str, Vec<(&str, Option<f64>)>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.participant_id.as_str())
            .or_default()
            .push((r.headline_id.as_str(), r.rating.map(f64::from)));
    }
    groups
        .into_iter()
        .map(|(pid, ratings)| summarize_ratings(pid, ratings, corpus))
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 6] = ["participant_id", "ar", "af", "nd", "n_true_rated", "n_false_rated"];

pub fn write_summaries<W: Write>(writer: W, summaries: &[DiscernmentSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_COLUMNS)?;
    for s in summaries {
        w.write_record([
            s.participant_id.clone(),
            s.ar.to_string(),
            s.af.to_string(),
            s.nd.to_string(),
            s.n_true_rated.to_string(),
            s.n_false_rated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
