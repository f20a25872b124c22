use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_finite, mean, sample_variance};
use crate::error::{Error, Result};

/// |d| ranges; upper edges are closed (0.2 falls in the first bin, 0.5 in
/// the second, 0.8 in the third).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EffectBin {
    #[serde(rename = "<=0.2")]
    Negligible,
    #[serde(rename = "0.21-0.5")]
    Small,
    #[serde(rename = "0.51-0.8")]
    Medium,
    #[serde(rename = ">0.8")]
    Large,
}

impl EffectBin {
    pub const ALL: [EffectBin; 4] = [
        EffectBin::Negligible,
        EffectBin::Small,
        EffectBin::Medium,
        EffectBin::Large,
    ];

    pub fn from_abs(abs_d: f64) -> EffectBin {
        if abs_d <= 0.2 {
            EffectBin::Negligible
        } else if abs_d <= 0.5 {
            EffectBin::Small
        } else if abs_d <= 0.8 {
            EffectBin::Medium
        } else {
            EffectBin::Large
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EffectBin::Negligible => "d<=.2",
            EffectBin::Small => ".21-.5",
            EffectBin::Medium => ".51-.8",
            EffectBin::Large => ">.8",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EffectBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
    pub bin: EffectBin,
}

/// Cohen's d with the pooled (n − 1 weighted) standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<EffectSize> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation(format!(
            "cohens_d: each sample needs at least 2 values (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    check_finite("cohens_d", a)?;
    check_finite("cohens_d", b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let pooled =
        ((n1 - 1.0) * sample_variance(a) + (n2 - 1.0) * sample_variance(b)) / (n1 + n2 - 2.0);
    if pooled <= 0.0 {
        return Err(Error::Degenerate("cohens_d: pooled variance is zero".into()));
    }
    let d = (mean(a) - mean(b)) / pooled.sqrt();
    Ok(EffectSize {
        d,
        bin: EffectBin::from_abs(d.abs()),
    })
}
