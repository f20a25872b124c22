//! Participant response files and trait-score tables.
//!
//! Response CSV: a `participant_id` column followed by one column per item id
//! (any order), one row per participant. Trait CSV: `participant_id,E,A,C,N,O`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::inventory::{Inventory, InventoryKind, ItemResponse, TraitScores};
use crate::persona::ParticipantProfile;

/// Parses a response CSV. The inventory is inferred from the number of item
/// columns unless `kind` is given.
pub fn read_profiles<R: Read>(reader: R, kind: Option<InventoryKind>) -> Result<Vec<ParticipantProfile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Validation("response file is empty".into()));
    }
    if headers.get(0) != Some("participant_id") {
        return Err(Error::Validation(format!(
            "line 1: first column must be participant_id, found {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    let mut item_ids = Vec::with_capacity(headers.len() - 1);
    for (col, name) in headers.iter().enumerate().skip(1) {
        let id: u32 = name.trim_start_matches(['i', 'I']).parse().map_err(|_| {
            Error::Validation(format!("line 1, column {}: {name:?} is not an item id", col + 1))
        })?;
        item_ids.push(id);
    }
    let kind = match kind {
        Some(k) => k,
        None => match item_ids.len() {
            30 => InventoryKind::Bfi2S,
            60 => InventoryKind::Bfi2,
            n => {
                return Err(Error::Validation(format!(
                    "line 1: {n} item columns; expected 30 (BFI2S) or 60 (BFI2)"
                )))
            }
        },
    };
    let bank = Inventory::bundled(kind);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(row as u64 + 2);
        let pid = record.get(0).unwrap_or("").to_string();
        if pid.is_empty() {
            return Err(Error::Validation(format!("line {line}: empty participant_id")));
        }
        if !seen.insert(pid.clone()) {
            return Err(Error::Validation(format!("line {line}: duplicate participant_id {pid:?}")));
        }
        let mut responses = Vec::with_capacity(item_ids.len());
        for (col, &item_id) in item_ids.iter().enumerate() {
            let cell = record.get(col + 1).unwrap_or("");
            let value = cell
                .parse::<u8>()
                .ok()
                .filter(|v| (1..=5).contains(v))
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "line {line}, column {} (item {item_id}): {cell:?} is not a value in 1..5",
                        col + 2
                    ))
                })?;
            responses.push(ItemResponse { item_id, value });
        }
        bank.complete_responses(&responses)
            .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        out.push(ParticipantProfile {
            participant_id: pid,
            inventory_kind: kind,
            responses,
            demographics: BTreeMap::new(),
        });
    }
    if out.is_empty() {
        return Err(Error::Validation("response file has no participant rows".into()));
    }
    Ok(out)
}

pub fn load_profiles(path: &Path, kind: Option<InventoryKind>) -> Result<Vec<ParticipantProfile>> {
    let file = std::fs::File::open(path).map_err(|e| Error::load(path, e.to_string()))?;
    read_profiles(file, kind).map_err(|e| match e {
        Error::Validation(m) | Error::Config(m) => Error::load(path, m),
        Error::Csv(c) => Error::load(path, c.to_string()),
        other => other,
    })
}

/// Writes profiles with item columns in bank order.
pub fn write_profiles<W: Write>(writer: W, profiles: &[ParticipantProfile]) -> Result<()> {
    let Some(first) = profiles.first() else {
        return Err(Error::Validation("no profiles to write".into()));
    };
    let kind = first.inventory_kind;
    let bank = Inventory::bundled(kind);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["participant_id".to_string()];
    header.extend(bank.items().iter().map(|i| i.item_id.to_string()));
    w.write_record(&header)?;
    for p in profiles {
        if p.inventory_kind != kind {
            return Err(Error::Validation(format!(
                "profile {} is {} but the file is {kind}",
                p.participant_id, p.inventory_kind
            )));
        }
        let complete = bank.complete_responses(&p.responses)?;
        let mut row = vec![p.participant_id.clone()];
        row.extend(complete.iter().map(|r| r.value.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Synthetic respondents: each has an independent standard-normal latent
/// level per domain, and each item answer is that level (sign-flipped for
/// reverse-keyed items) plus item noise, rounded onto 1..5.
pub fn generate_profiles(kind: InventoryKind, n: usize, seed: u64) -> Vec<ParticipantProfile> {
    let bank = Inventory::bundled(kind);
    let mut rng = crate::rng::keyed_rng(seed, &[b"profiles", kind.label().as_bytes()]);
    let width = n.to_string().len().max(4);
    (0..n)
        .map(|i| {
            let latent: [f64; 5] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal));
            let responses = bank
                .items()
                .iter()
                .map(|item| {
                    let sign = if item.reverse_keyed { -1.0 } else { 1.0 };
                    let noise: f64 = rng.sample(StandardNormal);
                    let raw = 3.0 + 1.1 * sign * latent[item.domain.index()] + 0.7 * noise;
                    let value = (raw + 0.5).floor().clamp(1.0, 5.0) as u8;
                    ItemResponse {
                        item_id: item.item_id,
                        value,
                    }
                })
                .collect();
            ParticipantProfile {
                participant_id: format!("P{:0width$}", i + 1),
                inventory_kind: kind,
                responses,
                demographics: BTreeMap::new(),
            }
        })
        .collect()
}

/// Scores every profile against its bank.
pub fn score_profiles(profiles: &[ParticipantProfile]) -> Result<Vec<(String, TraitScores)>> {
    profiles
        .iter()
        .map(|p| {
            let scores = Inventory::bundled(p.inventory_kind)
                .score(&p.responses)
                .map_err(|e| Error::Validation(format!("participant {}: {e}", p.participant_id)))?;
            Ok((p.participant_id.clone(), scores))
        })
        .collect()
}

pub const TRAIT_COLUMNS: [&str; 6] = ["participant_id", "E", "A", "C", "N", "O"];

pub fn write_trait_scores<W: Write>(writer: W, rows: &[(String, TraitScores)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAIT_COLUMNS)?;
    for (pid, s) in rows {
        let mut rec = vec![pid.clone()];
        rec.extend(s.as_array().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trait_scores<R: Read>(reader: R) -> Result<BTreeMap<String, TraitScores>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRAIT_COLUMNS {
        return Err(Error::Validation(format!(
            "line 1: expected columns {}, found {}",
            TRAIT_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let pid = record.get(0).unwrap_or("").to_string();
        let mut values = [0.0; 5];
        for (k, v) in values.iter_mut().enumerate() {
            let cell = record.get(k + 1).unwrap_or("");
            *v = cell
                .parse::<f64>()
                .ok()
                .filter(|x| (1.0..=5.0).contains(x))
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "line {line}, column {}: {cell:?} is not a score in [1, 5]",
                        TRAIT_COLUMNS[k + 1]
                    ))
                })?;
        }
        if out.insert(pid.clone(), TraitScores::from_array(values)).is_some() {
            return Err(Error::Validation(format!("line {line}: duplicate participant_id {pid:?}")));
        }
    }
    if out.is_empty() {
        return Err(Error::Validation("trait file has no rows".into()));
    }
    Ok(out)
}

pub fn load_trait_scores(path: &Path) -> Result<BTreeMap<String, TraitScores>> {
    let file = std::fs::File::open(path).map_err(|e| Error::load(path, e.to_string()))?;
    read_trait_scores(file).map_err(|e| match e {
        Error::Validation(m) => Error::load(path, m),
        Error::Csv(c) => Error::load(path, c.to_string()),
        other => other,
    })
}
