use serde::{Deserialize, Serialize};

use super::special::t_two_tailed;
use super::{check_finite, mean};
use crate::error::{Error, Result};
use crate::inventory::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_two_tailed: f64,
    pub n: usize,
}

/// Which per-agent outcome a trait vector was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "ND")]
    Discernment,
    #[serde(rename = "AR")]
    RealAccuracy,
    #[serde(rename = "AF")]
    FalseAccuracy,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Discernment, Outcome::RealAccuracy, Outcome::FalseAccuracy];

    pub fn code(self) -> &'static str {
        match self {
            Outcome::Discernment => "ND",
            Outcome::RealAccuracy => "AR",
            Outcome::FalseAccuracy => "AF",
        }
    }

    pub fn from_code(code: &str) -> Option<Outcome> {
        Outcome::ALL.into_iter().find(|o| o.code() == code)
    }
}

/// Five trait↔outcome correlations in E, A, C, N, O order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    pub outcome: Outcome,
    pub entries: [CorrelationResult; 5],
}

impl CorrelationVector {
    pub fn values(&self) -> [f64; 5] {
        self.entries.map(|e| e.r)
    }

    pub fn p_values(&self) -> [f64; 5] {
        self.entries.map(|e| e.p_two_tailed)
    }

    pub fn get(&self, domain: Domain) -> &CorrelationResult {
        &self.entries[domain.index()]
    }
}

/// Pearson product-moment correlation with a two-tailed t-test on n − 2 df.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "pearson: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Validation(format!("pearson: need n >= 3, got {n}")));
    }
    check_finite("pearson", x)?;
    check_finite("pearson", y)?;
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in at least one variable".into(),
        ));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        t_two_tailed(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationResult {
        r,
        p_two_tailed: p,
        n,
    })
}

/// Correlates each of the five trait columns with `outcome`.
pub fn correlation_vector(
    traits: &[[f64; 5]],
    outcome_values: &[f64],
    outcome: Outcome,
) -> Result<CorrelationVector> {
    let mut entries = [CorrelationResult {
        r: 0.0,
        p_two_tailed: 1.0,
        n: 0,
    }; 5];
    for d in 0..5 {
        let column: Vec<f64> = traits.iter().map(|t| t[d]).collect();
        entries[d] = pearson(&column, outcome_values)?;
    }
    Ok(CorrelationVector { outcome, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlation() {
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.r - 1.0).abs() < 1e-15);
        assert!(r.p_two_tailed < 1e-6);
    }

    #[test]
    fn hand_computed_point_eight() {
        // deviations dot product 8, both norms sqrt(10)
        let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.r - 0.8).abs() < 1e-15);
        // t = 0.8 * sqrt(3 / 0.36) = 2.3094; two-tailed p on 3 df
        assert!((r.p_two_tailed - 0.104_088_038_661_827_98).abs() < 1e-9, "{}", r.p_two_tailed);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Validation(_))));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Validation(_))));
        assert!(pearson(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn outcome_codes() {
        for o in Outcome::ALL {
            assert_eq!(Outcome::from_code(o.code()), Some(o));
        }
    }
}
