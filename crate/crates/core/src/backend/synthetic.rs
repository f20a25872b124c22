//! Deterministic offline rater.
//!
//! The synthetic backend recovers the agent's trait scores from the persona
//! block in its prompt and rates with a linear model plus seeded Gaussian
//! noise:
//!
//! `rating = clamp(round_half_up(b0 + Σ_t w_t[veracity] · z_t + ε), 1, 4)`
//!
//! where `z_t = (score_t − center_t) / scale_t`. Each call draws from its own
//! keyed stream (see [`crate::rng`]), keyed by seed, model name, temperature,
//! prompt digest, headline id and repeat index.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::RatingResponse;
use super::RatingBackend;
use crate::corpus::{Headline, Veracity};
use crate::error::{Error, Result};
use crate::inventory::{parse_rendered_line, Inventory, InventoryKind, ItemResponse, ScaleLabels, TraitScores};
use crate::persona::PromptBuilder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub intercept: f64,
    /// Trait weights (E, A, C, N, O) applied to true headlines.
    pub weights_true: [f64; 5],
    /// Trait weights (E, A, C, N, O) applied to false headlines.
    pub weights_false: [f64; 5],
    pub noise_sd: f64,
    pub trait_center: [f64; 5],
    pub trait_scale: [f64; 5],
}

impl Default for SyntheticParams {
    /// Higher A and C lower false-headline ratings; higher O raises
    /// true-headline ratings.
    fn default() -> Self {
        SyntheticParams {
            intercept: 2.5,
            weights_true: [0.05, 0.0, 0.05, 0.0, 0.45],
            weights_false: [0.10, -0.45, -0.40, 0.10, -0.10],
            noise_sd: 0.6,
            trait_center: [3.0; 5],
            trait_scale: [0.75; 5],
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.weights_true)
            || !finite(&self.weights_false)
            || !finite(&self.trait_center)
            || !self.intercept.is_finite()
        {
            return Err(Error::Config("synthetic params must be finite".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("synthetic noise_sd must be >= 0".into()));
        }
        if self.trait_scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("synthetic trait_scale entries must be > 0".into()));
        }
        Ok(())
    }

    /// Deterministic part of the rating model, before noise and rounding.
    pub fn linear_predictor(&self, traits: Option<&TraitScores>, veracity: Veracity) -> f64 {
        let weights = match veracity {
            Veracity::TrueNews => &self.weights_true,
            Veracity::FalseNews => &self.weights_false,
        };
        let mut x = self.intercept;
        if let Some(t) = traits {
            for (d, score) in t.as_array().into_iter().enumerate() {
                let z = (score - self.trait_center[d]) / self.trait_scale[d];
                x += weights[d] * z;
            }
        }
        x
    }
}

/// Rounds half up and clamps onto the 1..=4 scale.
pub fn to_rating(x: f64) -> u8 {
    (x + 0.5).floor().clamp(1.0, 4.0) as u8
}

/// One synthetic rating. `traits = None` is an unconditioned (neutral) agent.
pub fn synthetic_rate<R: Rng + ?Sized>(
    traits: Option<&TraitScores>,
    headline: &Headline,
    params: &SyntheticParams,
    rng: &mut R,
) -> u8 {
    // always consume one draw so streams stay aligned across parameter sets
    let eps: f64 = rng.sample(StandardNormal);
    to_rating(params.linear_predictor(traits, headline.veracity) + params.noise_sd * eps)
}

/// Recovers trait scores from the answer lines of a persona prompt.
#[derive(Debug, Clone)]
pub struct PromptTraitReader {
    labels: ScaleLabels,
    banks: Vec<(Inventory, HashMap<String, u32>)>,
}

impl PromptTraitReader {
    pub fn new(builder: &PromptBuilder) -> Self {
        let banks = [InventoryKind::Bfi2S, InventoryKind::Bfi2]
            .into_iter()
            .map(|kind| {
                let bank = builder.inventory(kind).clone();
                let by_text = bank
                    .items()
                    .iter()
                    .map(|i| (i.text.clone(), i.item_id))
                    .collect();
                (bank, by_text)
            })
            .collect();
        PromptTraitReader {
            labels: builder.labels().clone(),
            banks,
        }
    }

    /// `Ok(None)` when the prompt carries no answer lines (neutral prompt).
    pub fn read(&self, prompt: &str) -> Result<Option<TraitScores>> {
        let answers: Vec<(&str, u8)> = prompt
            .lines()
            .filter_map(|l| parse_rendered_line(l, &self.labels))
            .collect();
        if answers.is_empty() {
            return Ok(None);
        }
        let (bank, by_text) = self
            .banks
            .iter()
            .find(|(bank, _)| bank.items().len() == answers.len())
            .ok_or_else(|| {
                Error::Validation(format!(
                    "persona block has {} answer lines; expected 30 or 60",
                    answers.len()
                ))
            })?;
        let responses = answers
            .iter()
            .map(|(text, rank)| {
                by_text
                    .get(*text)
                    .map(|&item_id| ItemResponse { item_id, value: *rank })
                    .ok_or_else(|| Error::Validation(format!("unknown statement {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        bank.score(&responses).map(Some)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    params: SyntheticParams,
    seed: u64,
    model_name: String,
    temperature: f64,
    reader: PromptTraitReader,
}

impl SyntheticBackend {
    pub fn new(
        params: SyntheticParams,
        seed: u64,
        model_name: &str,
        temperature: f64,
        builder: &PromptBuilder,
    ) -> Result<Self> {
        params.validate()?;
        Ok(SyntheticBackend {
            params,
            seed,
            model_name: model_name.to_string(),
            temperature,
            reader: PromptTraitReader::new(builder),
        })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    fn stream(&self, prompt: &str, headline: &Headline, repeat: u32) -> rand_chacha::ChaCha20Rng {
        let digest = Sha256::digest(prompt.as_bytes());
        crate::rng::keyed_rng(
            self.seed,
            &[
                b"synthetic-rating",
                self.model_name.as_bytes(),
                &self.temperature.to_bits().to_le_bytes(),
                &digest,
                headline.headline_id.as_bytes(),
                &repeat.to_le_bytes(),
            ],
        )
    }
}

impl RatingBackend for SyntheticBackend {
    fn rate_headline(&self, prompt: &str, headline: &Headline, repeat: u32) -> Result<RatingResponse> {
        if prompt.trim().is_empty() {
            return Err(Error::Validation("empty prompt".into()));
        }
        let traits = self.reader.read(prompt)?;
        let mut rng = self.stream(prompt, headline, repeat);
        let rating = synthetic_rate(traits.as_ref(), headline, &self.params, &mut rng);
        Ok(RatingResponse::from_raw(rating.to_string()))
    }
}
