//! Personality-conditioning prompts.
//!
//! A persona prompt is the persona template with `{persona_block}` replaced by
//! the participant's item answers (one rendered line per item, bank order) and
//! `{task_block}` replaced by the rating-task instruction. The neutral prompt
//! uses the same task instruction with no persona content.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inventory::{render, Inventory, InventoryKind, ItemResponse, ScaleFormat, ScaleLabels};

const PERSONA_TEMPLATE: &str = include_str!("../data/templates/persona_v1.txt");
const NEUTRAL_TEMPLATE: &str = include_str!("../data/templates/neutral_v1.txt");
const TASK_TEXT: &str = include_str!("../data/templates/task_v1.txt");

/// The perceived-accuracy question put to every agent.
pub const RATING_QUESTION: &str = "To the best of your knowledge, is this headline accurate?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub participant_id: String,
    pub inventory_kind: InventoryKind,
    pub responses: Vec<ItemResponse>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub demographics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub participant_id: String,
    pub scale_format: ScaleFormat,
    pub inventory_kind: InventoryKind,
}

/// Prompt templates plus the task instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub persona: String,
    pub neutral: String,
    pub task: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            persona: PERSONA_TEMPLATE.to_string(),
            neutral: NEUTRAL_TEMPLATE.to_string(),
            task: TASK_TEXT.trim_end().to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn new(persona: String, neutral: String, task: String) -> Result<Self> {
        for placeholder in ["{persona_block}", "{task_block}"] {
            if persona.matches(placeholder).count() != 1 {
                return Err(Error::Config(format!(
                    "persona template must contain {placeholder} exactly once"
                )));
            }
        }
        if neutral.contains("{persona_block}") || neutral.matches("{task_block}").count() != 1 {
            return Err(Error::Config(
                "neutral template must contain {task_block} once and no {persona_block}".into(),
            ));
        }
        if !task.contains(RATING_QUESTION) {
            return Err(Error::Config(format!(
                "task text must contain the rating question {RATING_QUESTION:?}"
            )));
        }
        Ok(PromptTemplate {
            persona,
            neutral,
            task: task.trim_end().to_string(),
        })
    }

    /// Reads a persona template file; the neutral template and task text stay bundled.
    pub fn load_persona(path: &Path) -> Result<Self> {
        let persona = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        let base = PromptTemplate::default();
        PromptTemplate::new(persona, base.neutral, base.task)
    }
}

/// Builds prompts for both inventories and both response formats.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    template: PromptTemplate,
    labels: ScaleLabels,
    bfi2: Inventory,
    bfi2s: Inventory,
    hash: String,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder::new(PromptTemplate::default(), ScaleLabels::default())
    }
}

impl PromptBuilder {
    pub fn new(template: PromptTemplate, labels: ScaleLabels) -> Self {
        let bfi2 = Inventory::bfi2();
        let bfi2s = Inventory::bfi2s();
        let hash = template_hash(&template, &labels, &[&bfi2, &bfi2s]);
        PromptBuilder {
            template,
            labels,
            bfi2,
            bfi2s,
            hash,
        }
    }

    /// Content hash over everything that shapes prompt bytes: templates, task
    /// text, label tables, and both item banks.
    pub fn template_hash(&self) -> &str {
        &self.hash
    }

    pub fn labels(&self) -> &ScaleLabels {
        &self.labels
    }

    pub fn inventory(&self, kind: InventoryKind) -> &Inventory {
        match kind {
            InventoryKind::Bfi2 => &self.bfi2,
            InventoryKind::Bfi2S => &self.bfi2s,
        }
    }

    pub fn task_block(&self) -> &str {
        &self.template.task
    }

    /// The item-answer block: one rendered line per item in bank order.
    pub fn persona_block(
        &self,
        kind: InventoryKind,
        responses: &[ItemResponse],
        format: ScaleFormat,
    ) -> Result<String> {
        let bank = self.inventory(kind);
        let complete = bank.complete_responses(responses)?;
        let lines = bank
            .items()
            .iter()
            .zip(&complete)
            .map(|(item, r)| render(format, item, r.value, &self.labels))
            .collect::<Result<Vec<_>>>()?;
        Ok(lines.join("\n"))
    }

    pub fn build_persona_prompt(
        &self,
        profile: &ParticipantProfile,
        spec: &AgentSpec,
    ) -> Result<String> {
        if profile.inventory_kind != spec.inventory_kind {
            return Err(Error::Config(format!(
                "profile {} uses {} but the agent spec expects {}",
                profile.participant_id, profile.inventory_kind, spec.inventory_kind
            )));
        }
        let block = self
            .persona_block(profile.inventory_kind, &profile.responses, spec.scale_format)
            .map_err(|e| Error::Config(format!("profile {}: {e}", profile.participant_id)))?;
        Ok(self
            .template
            .persona
            .replace("{persona_block}", &block)
            .replace("{task_block}", &self.template.task))
    }

    pub fn build_neutral_prompt(&self) -> String {
        self.template
            .neutral
            .replace("{task_block}", &self.template.task)
    }
}

fn template_hash(template: &PromptTemplate, labels: &ScaleLabels, banks: &[&Inventory]) -> String {
    let mut material = String::new();
    for part in [&template.persona, &template.neutral, &template.task] {
        material.push_str(&format!("{}\n{part}\n", part.len()));
    }
    material.push_str(&serde_json::to_string(labels).expect("labels serialize"));
    for bank in banks {
        material.push_str(&serde_json::to_string(bank.items()).expect("items serialize"));
    }
    crate::rng::content_hash(material.as_bytes())
}
