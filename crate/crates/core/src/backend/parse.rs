//! Free-text reply → 1..=4 rating.
//!
//! Grammar: scan number tokens left to right, where a token is a maximal run
//! of digits optionally joined by single `.` or `,` separators (`2020`, `2.5`,
//! `1,000`). The first token that is a plain integer in 1..=4 wins, provided
//! it is not glued to letters (`4th`, `x2`) and not negated (`-1`).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingResponse {
    pub raw_text: String,
    pub rating: Option<u8>,
    pub parse_status: ParseStatus,
}

impl RatingResponse {
    pub fn from_raw(raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let rating = parse_rating(&raw_text);
        RatingResponse {
            parse_status: if rating.is_some() {
                ParseStatus::Ok
            } else {
                ParseStatus::Unparseable
            },
            raw_text,
            rating,
        }
    }
}

pub fn parse_rating(raw_text: &str) -> Option<u8> {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        let mut plain = true;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
            if i + 1 < chars.len()
                && (chars[i] == '.' || chars[i] == ',')
                && chars[i + 1].is_ascii_digit()
            {
                plain = false;
                i += 1;
            }
        }
        let end = i;
        let before = start.checked_sub(1).map(|p| chars[p]);
        let after = chars.get(end).copied();
        let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        let negated = before == Some('-')
            && start
                .checked_sub(2)
                .map_or(true, |p| !chars[p].is_alphanumeric());
        if plain && !glued(before) && !glued(after) && !negated && end - start == 1 {
            let value = chars[start].to_digit(10).expect("ascii digit") as u8;
            if (1..=4).contains(&value) {
                return Some(value);
            }
        }
    }
    None
}
