//! The statistics engine: correlation, regression, distribution tests,
//! effect sizes, and vector similarity. Special functions are implemented
//! here rather than pulled from a numerics crate so their precision is
//! auditable against the shipped probe table.

mod correlation;
mod effect;
mod nonparametric;
mod regression;
mod similarity;
pub mod special;

pub use correlation::{correlation_vector, pearson, CorrelationResult, CorrelationVector, Outcome};
pub use effect::{cohens_d, EffectBin, EffectSize};
pub use nonparametric::{
    ks_two_sample, mann_whitney_u, mann_whitney_u_exact, mann_whitney_u_normal, PValueMethod,
    TestKind, TwoSampleTestResult, MWU_EXACT_MAX_PAIRS,
};
pub use regression::{ols_regression, Coefficient, RegressionResult};
pub use similarity::{cosine_similarity, SimilarityMask};

use crate::error::{Error, Result};

/// Conventional significance threshold used throughout the reports.
pub const ALPHA: f64 = 0.05;

/// `***` for p < .001, `**` for p < .01, `*` for p < .05, empty otherwise.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n − 1) variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what}: non-finite value in input")))
    }
}
