//! Normal-approximation vs exact Mann-Whitney p over random small designs
//! (n1, n2 ≥ 2, n1·n2 ≤ 400), seeded so the sample is reproducible.

use std::collections::BTreeMap;

use proptest::prelude::RngExt;
use proptest::test_runner::{RngAlgorithm, TestRng};

use newsdisc_core::stats::{mann_whitney_u_exact, mann_whitney_u_normal, MWU_EXACT_MAX_PAIRS};

pub const TOLERANCE: f64 = 0.01;

#[derive(Debug, Default)]
pub struct GapReport {
    pub cases: usize,
    pub over_tolerance: usize,
    pub max_gap: f64,
    pub worst_design: (usize, usize),
    /// min(n1, n2) -> (cases, cases over tolerance, largest gap)
    pub by_min_n: BTreeMap<usize, (usize, usize, f64)>,
}

impl GapReport {
    /// Smallest min(n1, n2) from which every sampled design is in tolerance.
    pub fn safe_from(&self) -> Option<usize> {
        let last_bad = self.by_min_n.iter().filter(|(_, v)| v.1 > 0).map(|(k, _)| *k).max();
        match last_bad {
            None => self.by_min_n.keys().next().copied(),
            Some(k) => self.by_min_n.keys().copied().find(|&m| m > k),
        }
    }
}

pub fn sample_gaps(cases: usize) -> GapReport {
    let designs: Vec<(usize, usize)> = (2..=MWU_EXACT_MAX_PAIRS / 2)
        .flat_map(|n1| (2..=MWU_EXACT_MAX_PAIRS / n1).map(move |n2| (n1, n2)))
        .collect();
    let mut rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut rep = GapReport::default();
    for _ in 0..cases {
        let (n1, n2) = designs[rng.random_range(0..designs.len())];
        let shift: f64 = rng.random_range(-1.5..1.5);
        let a: Vec<f64> = (0..n1).map(|_| rng.random::<f64>() + shift).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random::<f64>()).collect();
        let exact = mann_whitney_u_exact(&a, &b).expect("valid design").p_two_tailed;
        let approx = mann_whitney_u_normal(&a, &b).expect("valid design").p_two_tailed;
        let gap = (exact - approx).abs();
        rep.cases += 1;
        let bucket = rep.by_min_n.entry(n1.min(n2)).or_default();
        bucket.0 += 1;
        bucket.2 = bucket.2.max(gap);
        if gap > TOLERANCE {
            rep.over_tolerance += 1;
            bucket.1 += 1;
        }
        if gap > rep.max_gap {
            rep.max_gap = gap;
            rep.worst_design = (n1, n2);
        }
    }
    rep
}
