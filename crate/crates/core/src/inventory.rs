//! BFI-2 and BFI-2-S item banks, scoring, and rendering of item answers.
//!
//! The banks ship as JSON under `data/inventory/` and are validated when
//! loaded. Domain scores are unweighted means of keyed item values, so both
//! inventories report on the same 1..=5 scale.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BFI2_JSON: &str = include_str!("../data/inventory/bfi2.json");
const BFI2S_JSON: &str = include_str!("../data/inventory/bfi2s.json");
const LABELS_JSON: &str = include_str!("../data/inventory/labels.json");

/// Big-Five domains, in the fixed E, A, C, N, O order used in every table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "E")]
    Extraversion,
    #[serde(rename = "A")]
    Agreeableness,
    #[serde(rename = "C")]
    Conscientiousness,
    #[serde(rename = "N")]
    NegativeEmotionality,
    #[serde(rename = "O")]
    OpenMindedness,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Extraversion,
        Domain::Agreeableness,
        Domain::Conscientiousness,
        Domain::NegativeEmotionality,
        Domain::OpenMindedness,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Domain::Extraversion => "E",
            Domain::Agreeableness => "A",
            Domain::Conscientiousness => "C",
            Domain::NegativeEmotionality => "N",
            Domain::OpenMindedness => "O",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Extraversion => "Extraversion",
            Domain::Agreeableness => "Agreeableness",
            Domain::Conscientiousness => "Conscientiousness",
            Domain::NegativeEmotionality => "Negative Emotionality",
            Domain::OpenMindedness => "Open-Mindedness",
        }
    }

    /// Position in the E, A, C, N, O order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.code() == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InventoryKind {
    #[serde(rename = "BFI2")]
    Bfi2,
    #[serde(rename = "BFI2S")]
    Bfi2S,
}

impl InventoryKind {
    pub fn item_count(self) -> usize {
        match self {
            InventoryKind::Bfi2 => 60,
            InventoryKind::Bfi2S => 30,
        }
    }

    pub fn items_per_domain(self) -> usize {
        self.item_count() / 5
    }

    pub fn label(self) -> &'static str {
        match self {
            InventoryKind::Bfi2 => "BFI2",
            InventoryKind::Bfi2S => "BFI2S",
        }
    }
}

impl fmt::Display for InventoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How item answers are presented to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleFormat {
    Likert,
    Expanded,
}

impl ScaleFormat {
    pub fn label(self) -> &'static str {
        match self {
            ScaleFormat::Likert => "Likert",
            ScaleFormat::Expanded => "Expanded",
        }
    }
}

impl fmt::Display for ScaleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryItem {
    pub item_id: u32,
    pub text: String,
    pub domain: Domain,
    pub facet: String,
    pub reverse_keyed: bool,
    pub inventory_kind: InventoryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemResponse {
    pub item_id: u32,
    pub value: u8,
}

impl ItemResponse {
    pub fn new(item_id: u32, value: u8) -> Result<Self> {
        check_likert(value)?;
        Ok(ItemResponse { item_id, value })
    }
}

/// Domain scores on the 1..=5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitScores {
    pub e: f64,
    pub a: f64,
    pub c: f64,
    pub n: f64,
    pub o: f64,
}

impl TraitScores {
    pub fn from_array(values: [f64; 5]) -> Self {
        let [e, a, c, n, o] = values;
        TraitScores { e, a, c, n, o }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.e, self.a, self.c, self.n, self.o]
    }

    pub fn get(&self, domain: Domain) -> f64 {
        self.as_array()[domain.index()]
    }
}

fn check_likert(value: u8) -> Result<()> {
    if (1..=5).contains(&value) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "item value {value} is outside 1..=5"
        )))
    }
}

/// Maps a keyed answer to its scored value: `6 - value`.
pub fn reverse_key(value: u8) -> Result<u8> {
    check_likert(value)?;
    Ok(6 - value)
}

#[derive(Deserialize)]
struct BankFile {
    inventory_kind: InventoryKind,
    items: Vec<BankEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BankEntry {
    item_id: u32,
    text: String,
    domain: Domain,
    facet: String,
    reverse_keyed: bool,
}

/// A validated item bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    kind: InventoryKind,
    items: Vec<InventoryItem>,
    index: HashMap<u32, usize>,
}

impl Inventory {
    pub fn bfi2() -> Self {
        Self::from_json(BFI2_JSON).expect("bundled BFI-2 bank is valid")
    }

    pub fn bfi2s() -> Self {
        Self::from_json(BFI2S_JSON).expect("bundled BFI-2-S bank is valid")
    }

    pub fn bundled(kind: InventoryKind) -> Self {
        match kind {
            InventoryKind::Bfi2 => Self::bfi2(),
            InventoryKind::Bfi2S => Self::bfi2s(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BankFile = serde_json::from_str(text)?;
        let kind = file.inventory_kind;
        let items: Vec<InventoryItem> = file
            .items
            .into_iter()
            .map(|e| InventoryItem {
                item_id: e.item_id,
                text: e.text,
                domain: e.domain,
                facet: e.facet,
                reverse_keyed: e.reverse_keyed,
                inventory_kind: kind,
            })
            .collect();

        if items.len() != kind.item_count() {
            return Err(Error::Validation(format!(
                "{kind} bank must have {} items, found {}",
                kind.item_count(),
                items.len()
            )));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (pos, item) in items.iter().enumerate() {
            if item.item_id == 0 {
                return Err(Error::Validation("item_id must be positive".into()));
            }
            if item.text.trim().is_empty() {
                return Err(Error::Validation(format!("item {} has empty text", item.item_id)));
            }
            if index.insert(item.item_id, pos).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate item_id {} in {kind} bank",
                    item.item_id
                )));
            }
        }
        for domain in Domain::ALL {
            let count = items.iter().filter(|i| i.domain == domain).count();
            if count != kind.items_per_domain() {
                return Err(Error::Validation(format!(
                    "{kind} bank must have {} {} items, found {count}",
                    kind.items_per_domain(),
                    domain.code()
                )));
            }
        }
        Ok(Inventory { kind, items, index })
    }

    pub fn kind(&self) -> InventoryKind {
        self.kind
    }

    /// Items in bank order.
    pub fn items(&self) -> &[InventoryItem] {
        &self.items
    }

    pub fn item(&self, item_id: u32) -> Option<&InventoryItem> {
        self.index.get(&item_id).map(|&i| &self.items[i])
    }

    /// Checks that `responses` cover the bank exactly once and returns them
    /// re-ordered into bank order.
    pub fn complete_responses(&self, responses: &[ItemResponse]) -> Result<Vec<ItemResponse>> {
        let mut by_id: BTreeMap<u32, u8> = BTreeMap::new();
        let mut duplicates = BTreeSet::new();
        let mut unknown = BTreeSet::new();
        for r in responses {
            check_likert(r.value).map_err(|_| {
                Error::Validation(format!(
                    "item {} has value {} outside 1..=5",
                    r.item_id, r.value
                ))
            })?;
            if self.item(r.item_id).is_none() {
                unknown.insert(r.item_id);
            } else if by_id.insert(r.item_id, r.value).is_some() {
                duplicates.insert(r.item_id);
            }
        }
        let missing: BTreeSet<u32> = self
            .items
            .iter()
            .map(|i| i.item_id)
            .filter(|id| !by_id.contains_key(id))
            .collect();

        let mut problems = Vec::new();
        if !missing.is_empty() {
            problems.push(format!("missing items {}", join_ids(&missing)));
        }
        if !duplicates.is_empty() {
            problems.push(format!("duplicate items {}", join_ids(&duplicates)));
        }
        if !unknown.is_empty() {
            problems.push(format!("unknown item ids {}", join_ids(&unknown)));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(format!(
                "{} response set invalid: {}",
                self.kind,
                problems.join("; ")
            )));
        }
        Ok(self
            .items
            .iter()
            .map(|i| ItemResponse {
                item_id: i.item_id,
                value: by_id[&i.item_id],
            })
            .collect())
    }

    /// Per-domain mean of keyed item values.
    pub fn score(&self, responses: &[ItemResponse]) -> Result<TraitScores> {
        let complete = self.complete_responses(responses)?;
        let mut sums = [0u32; 5];
        let mut counts = [0u32; 5];
        for (item, resp) in self.items.iter().zip(&complete) {
            let keyed = if item.reverse_keyed {
                6 - resp.value
            } else {
                resp.value
            };
            sums[item.domain.index()] += u32::from(keyed);
            counts[item.domain.index()] += 1;
        }
        let mut means = [0.0; 5];
        for d in 0..5 {
            means[d] = f64::from(sums[d]) / f64::from(counts[d]);
        }
        Ok(TraitScores::from_array(means))
    }
}

fn join_ids(ids: &BTreeSet<u32>) -> String {
    ids.iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Scores a response set against the bundled bank for `kind`.
pub fn score_inventory(responses: &[ItemResponse], kind: InventoryKind) -> Result<TraitScores> {
    Inventory::bundled(kind).score(responses)
}

/// Option labels for the two response formats, rank-aligned 1..=5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLabels {
    pub likert: Vec<String>,
    pub expanded: Vec<String>,
}

impl Default for ScaleLabels {
    fn default() -> Self {
        Self::from_json(LABELS_JSON).expect("bundled label table is valid")
    }
}

impl ScaleLabels {
    pub fn from_json(text: &str) -> Result<Self> {
        let labels: ScaleLabels = serde_json::from_str(text)?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        for (name, table) in [("likert", &self.likert), ("expanded", &self.expanded)] {
            if table.len() != 5 {
                return Err(Error::Validation(format!(
                    "{name} label table needs 5 labels, found {}",
                    table.len()
                )));
            }
            let distinct: BTreeSet<&String> = table.iter().collect();
            if distinct.len() != 5 || table.iter().any(|l| l.trim().is_empty()) {
                return Err(Error::Validation(format!(
                    "{name} labels must be non-empty and distinct"
                )));
            }
        }
        Ok(())
    }

    pub fn likert_label(&self, value: u8) -> Result<&str> {
        check_likert(value)?;
        Ok(&self.likert[usize::from(value - 1)])
    }

    pub fn expanded_label(&self, value: u8) -> Result<&str> {
        check_likert(value)?;
        Ok(&self.expanded[usize::from(value - 1)])
    }

    /// Rank of an Expanded label, if it is one.
    pub fn expanded_rank(&self, label: &str) -> Option<u8> {
        self.expanded
            .iter()
            .position(|l| l == label)
            .map(|p| p as u8 + 1)
    }
}

const LINE_PREFIX: &str = "- \"";
const ANSWER_SEP: &str = "\" Answer: ";

/// One answer line, Likert format: `- "<text>" Answer: <n> (<anchor>)`.
pub fn render_likert(item: &InventoryItem, value: u8, labels: &ScaleLabels) -> Result<String> {
    let anchor = labels.likert_label(value)?;
    Ok(format!(
        "{LINE_PREFIX}{}{ANSWER_SEP}{value} ({anchor})",
        item.text
    ))
}

/// One answer line, Expanded format: `- "<text>" Answer: <descriptive label>`.
pub fn render_expanded(item: &InventoryItem, value: u8, labels: &ScaleLabels) -> Result<String> {
    let label = labels.expanded_label(value)?;
    Ok(format!("{LINE_PREFIX}{}{ANSWER_SEP}{label}", item.text))
}

pub fn render(
    format: ScaleFormat,
    item: &InventoryItem,
    value: u8,
    labels: &ScaleLabels,
) -> Result<String> {
    match format {
        ScaleFormat::Likert => render_likert(item, value, labels),
        ScaleFormat::Expanded => render_expanded(item, value, labels),
    }
}

/// Inverse of [`render`]: recovers `(statement text, rank)` from a rendered
/// answer line in either format.
pub fn parse_rendered_line<'a>(line: &'a str, labels: &ScaleLabels) -> Option<(&'a str, u8)> {
    let rest = line.trim_end().strip_prefix(LINE_PREFIX)?;
    let (text, answer) = rest.rsplit_once(ANSWER_SEP)?;
    if let Some(rank) = labels.expanded_rank(answer) {
        return Some((text, rank));
    }
    let (digit, anchor) = answer.split_once(' ')?;
    let rank: u8 = digit.parse().ok()?;
    let anchor = anchor.strip_prefix('(')?.strip_suffix(')')?;
    (labels.likert_label(rank).ok()? == anchor).then_some((text, rank))
}

/// Renders a complete BFI-2-S response set as Expanded statements, one per
/// item in bank order, keeping each answer's ordinal rank.
pub fn convert_s_to_expanded(
    bank: &Inventory,
    responses: &[ItemResponse],
    labels: &ScaleLabels,
) -> Result<Vec<String>> {
    if bank.kind() != InventoryKind::Bfi2S {
        return Err(Error::Validation(format!(
            "expected a BFI2S bank, got {}",
            bank.kind()
        )));
    }
    let complete = bank.complete_responses(responses)?;
    bank.items()
        .iter()
        .zip(&complete)
        .map(|(item, r)| render_expanded(item, r.value, labels))
        .collect()
}
