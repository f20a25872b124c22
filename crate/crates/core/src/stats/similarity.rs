use super::correlation::CorrelationVector;
use crate::error::{Error, Result};

/// Which trait entries enter a cosine comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMask {
    All,
    /// Only entries flagged `true` (E, A, C, N, O order).
    Entries([bool; 5]),
}

impl SimilarityMask {
    /// Entries whose reference p-value is below `alpha`.
    pub fn significant_only(reference: &CorrelationVector, alpha: f64) -> Self {
        Self::from_p_values(&reference.p_values(), alpha)
    }

    pub fn from_p_values(p_values: &[f64; 5], alpha: f64) -> Self {
        SimilarityMask::Entries(p_values.map(|p| p < alpha))
    }

    fn includes(&self, i: usize) -> bool {
        match self {
            SimilarityMask::All => true,
            SimilarityMask::Entries(m) => m[i],
        }
    }
}

/// Cosine of the angle between two trait vectors over the masked entries.
pub fn cosine_similarity(v1: &[f64; 5], v2: &[f64; 5], mask: &SimilarityMask) -> Result<f64> {
    let (mut dot, mut n1, mut n2) = (0.0, 0.0, 0.0);
    for i in (0..5).filter(|&i| mask.includes(i)) {
        dot += v1[i] * v2[i];
        n1 += v1[i] * v1[i];
        n2 += v2[i] * v2[i];
    }
    if n1 == 0.0 || n2 == 0.0 || !dot.is_finite() {
        return Err(Error::UndefinedSimilarity(
            "masked vector has zero norm".into(),
        ));
    }
    Ok((dot / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HUMAN_ND: [f64; 5] = [-0.06, 0.19, 0.12, -0.02, 0.35];

    #[test]
    fn self_similarity() {
        assert!((cosine_similarity(&HUMAN_ND, &HUMAN_ND, &SimilarityMask::All).unwrap() - 1.0).abs() < 1e-15);
        let neg = HUMAN_ND.map(|v| -v);
        assert!((cosine_similarity(&HUMAN_ND, &neg, &SimilarityMask::All).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_is_undefined() {
        let mask = SimilarityMask::Entries([false; 5]);
        assert!(matches!(
            cosine_similarity(&HUMAN_ND, &HUMAN_ND, &mask),
            Err(Error::UndefinedSimilarity(_))
        ));
        assert!(cosine_similarity(&[0.0; 5], &HUMAN_ND, &SimilarityMask::All).is_err());
    }

    #[test]
    fn mask_from_p_values_is_strict() {
        let mask = SimilarityMask::from_p_values(&[0.271, 0.0004, 0.026, 0.764, 0.05], 0.05);
        assert_eq!(mask, SimilarityMask::Entries([false, true, true, false, false]));
    }
}
