//! Headline stimulus sets.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIXTURE_JSON: &str = include_str!("../data/corpus/synthetic-fixture-24.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Veracity {
    TrueNews,
    FalseNews,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lean {
    ProLiberal,
    ProConservative,
}

impl fmt::Display for Veracity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Veracity::TrueNews => "true_news",
            Veracity::FalseNews => "false_news",
        })
    }
}

impl fmt::Display for Lean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lean::ProLiberal => "pro_liberal",
            Lean::ProConservative => "pro_conservative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Headline {
    pub headline_id: String,
    pub text: String,
    pub veracity: Veracity,
    pub lean: Lean,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub headlines: Vec<Headline>,
}

impl Corpus {
    /// The bundled 24-headline synthetic fixture (12 true / 12 false,
    /// 12 pro-liberal / 12 pro-conservative).
    pub fn fixture() -> Self {
        Self::from_json("synthetic-fixture-24", FIXTURE_JSON).expect("bundled corpus is valid")
    }

    pub fn from_json(name: &str, text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Validation("corpus file is empty".into()));
        }
        let headlines: Vec<Headline> = serde_json::from_str(text).map_err(|e| {
            Error::Validation(format!(
                "schema violation at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        if headlines.is_empty() {
            return Err(Error::Validation("corpus has no headlines".into()));
        }
        let mut seen = HashSet::new();
        for (pos, h) in headlines.iter().enumerate() {
            if h.headline_id.trim().is_empty() {
                return Err(Error::Validation(format!("entry {} has an empty headline_id", pos + 1)));
            }
            if !seen.insert(h.headline_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate headline_id {:?} at entry {}",
                    h.headline_id,
                    pos + 1
                )));
            }
        }
        Ok(Corpus {
            name: name.to_string(),
            headlines,
        })
    }

    pub fn get(&self, headline_id: &str) -> Option<&Headline> {
        self.headlines.iter().find(|h| h.headline_id == headline_id)
    }

    pub fn len(&self) -> usize {
        self.headlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headlines.is_empty()
    }

    /// Serializes back to the on-disk format.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.headlines).expect("headlines serialize");
        out.push('\n');
        out
    }

    pub fn content_hash(&self) -> String {
        crate::rng::content_hash(self.to_json().as_bytes())
    }
}

/// Loads a corpus file; the corpus name is the file stem.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    Corpus::from_json(&name, &text).map_err(|e| match e {
        Error::Validation(msg) => Error::load(path, msg),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalanceSpec {
    pub enabled: bool,
    /// Required headline count, if any.
    pub expected_total: Option<usize>,
}

impl BalanceSpec {
    /// 24 headlines, equal veracity and lean split.
    pub fn calvillo() -> Self {
        BalanceSpec {
            enabled: true,
            expected_total: Some(24),
        }
    }

    pub fn disabled() -> Self {
        BalanceSpec {
            enabled: false,
            expected_total: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceReport {
    pub pass: bool,
    pub total: usize,
    pub true_count: usize,
    pub false_count: usize,
    pub liberal_count: usize,
    pub conservative_count: usize,
    /// Counts per (veracity, lean) cell: [true/lib, true/con, false/lib, false/con].
    pub cells: [usize; 4],
    pub problems: Vec<String>,
}

pub fn validate_balance(corpus: &Corpus, spec: &BalanceSpec) -> BalanceReport {
    let mut cells = [0usize; 4];
    for h in &corpus.headlines {
        let row = match h.veracity {
            Veracity::TrueNews => 0,
            Veracity::FalseNews => 2,
        };
        let col = match h.lean {
            Lean::ProLiberal => 0,
            Lean::ProConservative => 1,
        };
        cells[row + col] += 1;
    }
    let true_count = cells[0] + cells[1];
    let false_count = cells[2] + cells[3];
    let liberal_count = cells[0] + cells[2];
    let conservative_count = cells[1] + cells[3];
    let total = corpus.headlines.len();

    let mut problems = Vec::new();
    if spec.enabled {
        if let Some(expected) = spec.expected_total {
            if total != expected {
                problems.push(format!("expected {expected} headlines, found {total}"));
            }
        }
        if true_count != false_count {
            problems.push(format!("veracity imbalance: {true_count} true / {false_count} false"));
        }
        if liberal_count != conservative_count {
            problems.push(format!(
                "lean imbalance: {liberal_count} pro-liberal / {conservative_count} pro-conservative"
            ));
        }
    }
    BalanceReport {
        pass: problems.is_empty(),
        total,
        true_count,
        false_count,
        liberal_count,
        conservative_count,
        cells,
        problems,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn headline(id: &str, veracity: Veracity, lean: Lean) -> Headline {
        Headline {
            headline_id: id.into(),
            text: format!("headline {id}"),
            veracity,
            lean,
            source: "test".into(),
        }
    }

    #[test]
    fn fixture_is_balanced() {
        let corpus = Corpus::fixture();
        assert_eq!(corpus.len(), 24);
        let report = validate_balance(&corpus, &BalanceSpec::calvillo());
        assert!(report.pass, "{:?}", report.problems);
        assert_eq!(report.cells, [6, 6, 6, 6]);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stimuli.json");
        std::fs::write(&path, Corpus::fixture().to_json()).unwrap();
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 24);
        assert_eq!(corpus.name, "stimuli");
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_corpus(&path), Err(Error::Load { .. })));
        assert!(Corpus::from_json("x", "[]").is_err());
    }

    #[test]
    fn duplicate_ids_are_named() {
        let mut headlines = Corpus::fixture().headlines;
        headlines[5].headline_id = headlines[0].headline_id.clone();
        let text = serde_json::to_string(&headlines).unwrap();
        let err = Corpus::from_json("dup", &text).unwrap_err().to_string();
        assert!(err.contains("\"H01\""), "{err}");
    }

    #[test]
    fn schema_errors_carry_line_context() {
        let text = "[\n  {\"headline_id\": \"H1\", \"text\": \"x\"}\n]";
        let err = Corpus::from_json("bad", text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn imbalance_reported_with_counts() {
        let mut corpus = Corpus::fixture();
        let flip = corpus
            .headlines
            .iter_mut()
            .find(|h| h.veracity == Veracity::FalseNews)
            .unwrap();
        flip.veracity = Veracity::TrueNews;
        let report = validate_balance(&corpus, &BalanceSpec::calvillo());
        assert!(!report.pass);
        assert_eq!((report.true_count, report.false_count), (13, 11));
        assert!(report.problems[0].contains("13 true / 11 false"));

        let relaxed = validate_balance(&corpus, &BalanceSpec::disabled());
        assert!(relaxed.pass);
        assert_eq!(relaxed.true_count, 13);
    }

    #[test]
    fn small_balanced_corpus_without_total() {
        let corpus = Corpus {
            name: "tiny".into(),
            headlines: vec![
                headline("a", Veracity::TrueNews, Lean::ProLiberal),
                headline("b", Veracity::FalseNews, Lean::ProConservative),
            ],
        };
        let spec = BalanceSpec {
            enabled: true,
            expected_total: None,
        };
        assert!(validate_balance(&corpus, &spec).pass);
        assert!(!validate_balance(&corpus, &BalanceSpec::calvillo()).pass);
    }
}
