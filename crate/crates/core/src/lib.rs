//! Persona-prompted LLM news discernment: inventories, prompts, rating
//! backends, the experiment runner, metrics, statistics, and reports.

pub mod backend;
pub mod corpus;
pub mod error;
pub mod inventory;
pub mod metrics;
pub mod persona;
pub mod profiles;
pub mod report;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
