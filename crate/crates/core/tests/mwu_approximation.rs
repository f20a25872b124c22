mod common {
    pub mod mwu_gap;
}

use common::mwu_gap::{sample_gaps, TOLERANCE};

/// The normal approximation is not within 0.01 of the exact p for the
/// smallest designs; this records where it becomes safe.
#[test]
fn approximation_converges_with_sample_size() {
    let rep = sample_gaps(1000);
    let safe = rep.safe_from().expect("some designs are in tolerance");
    assert!(safe <= 12, "{rep:?}");
    for (&m, &(_, _, gap)) in rep.by_min_n.range(safe..) {
        assert!(gap <= TOLERANCE, "min n {m}: gap {gap}");
    }
}

/// The strict claim: every sampled design within 0.01. Fails; see the
/// acceptance output for the gap breakdown.
#[test]
#[ignore = "normal approximation misses the exact p by more than 0.01 when min(n1, n2) < 7"]
fn approximation_within_tolerance_everywhere() {
    let rep = sample_gaps(1000);
    assert_eq!(rep.over_tolerance, 0, "{rep:?}");
}
