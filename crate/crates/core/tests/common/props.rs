//! Randomized property suites for the stats, metrics and inventory modules.
//!
//! Shared between the core `properties` test target and the CLI acceptance
//! target, so each suite is a plain function returning `Err(message)` on the
//! first minimal counterexample. Runs are seeded, so failures reproduce.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use newsdisc_core::corpus::{Corpus, Veracity};
use newsdisc_core::inventory::{
    convert_s_to_expanded, parse_rendered_line, reverse_key, Inventory, InventoryKind, ItemResponse,
    ScaleLabels,
};
use newsdisc_core::metrics::{summarize_ratings, AgentSummary, DiscernmentSummary};
use newsdisc_core::stats::{
    cohens_d, cosine_similarity, ks_two_sample, mann_whitney_u, mann_whitney_u_exact,
    mann_whitney_u_normal, ols_regression, pearson, SimilarityMask,
};

pub const CASES: u32 = 1000;

pub type Suite = (&'static str, fn() -> Result<(), String>);

/// Every suite, in the order the acceptance target prints them.
pub const SUITES: &[Suite] = &[
    ("stats: pearson symmetric", pearson_symmetric),
    ("stats: pearson affine (anti)invariant", pearson_affine),
    ("stats: cohens_d antisymmetric", cohens_d_antisymmetric),
    ("stats: U_a + U_b = n1*n2 with ties", mwu_complementary),
    ("stats: KS D under increasing transform", ks_monotone_invariant),
    ("stats: cosine under positive scaling", cosine_scale_invariant),
    ("stats: p-values in [0, 1]", p_values_in_unit_interval),
    ("metrics: ND = AR - AF", nd_identity),
    ("metrics: AR, AF, ND ranges", summary_ranges),
    ("metrics: affine ratings scale ND", nd_affine),
    ("metrics: record order irrelevant", summary_permutation_invariant),
    ("inventory: reverse_key involution", reverse_key_involution),
    ("inventory: scoring ignores response order", score_permutation_invariant),
    ("inventory: 6 - v mirrors domain scores", score_key_symmetry),
    ("inventory: S to Expanded keeps ranks", expanded_rank_round_trip),
];

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, min..=max)
}

fn paired(min: usize, max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (min..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

/// Small-integer samples, so ties are common.
fn tied(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6i32..6).prop_map(f64::from), min..=max)
}

pub fn pearson_symmetric() -> Result<(), String> {
    run(paired(3, 40), |(x, y)| {
        let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) else {
            return Err(TestCaseError::reject("degenerate"));
        };
        prop_assert!(close(a.r, b.r, 1e-12), "{} vs {}", a.r, b.r);
        prop_assert!(close(a.p_two_tailed, b.p_two_tailed, 1e-12));
        Ok(())
    })
}

pub fn pearson_affine() -> Result<(), String> {
    let scale = prop_oneof![0.1f64..10.0, -10.0f64..-0.1];
    run((paired(3, 40), scale, -100.0f64..100.0), |((x, y), a, b)| {
        let Ok(base) = pearson(&x, &y) else {
            return Err(TestCaseError::reject("degenerate"));
        };
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r = pearson(&moved, &y).map_err(fail)?.r;
        let expected = if a > 0.0 { base.r } else { -base.r };
        prop_assert!(close(r, expected, 1e-12), "a={a} b={b}: {r} vs {expected}");
        Ok(())
    })
}

pub fn cohens_d_antisymmetric() -> Result<(), String> {
    run((sample(2, 30), sample(2, 30)), |(a, b)| {
        let (Ok(ab), Ok(ba)) = (cohens_d(&a, &b), cohens_d(&b, &a)) else {
            return Err(TestCaseError::reject("degenerate"));
        };
        prop_assert_eq!(ab.d, -ba.d);
        prop_assert_eq!(ab.bin, ba.bin);
        Ok(())
    })
}

pub fn mwu_complementary() -> Result<(), String> {
    run((tied(2, 40), tied(2, 40)), |(a, b)| {
        let n1n2 = (a.len() * b.len()) as f64;
        let ua = mann_whitney_u(&a, &b).map_err(fail)?.statistic;
        let ub = mann_whitney_u(&b, &a).map_err(fail)?.statistic;
        prop_assert_eq!(ua + ub, n1n2);
        Ok(())
    })
}

pub fn ks_monotone_invariant() -> Result<(), String> {
    // x³ + x is strictly increasing and exact on these integers.
    run((tied(2, 40), tied(2, 40)), |(a, b)| {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * x * x + x).collect::<Vec<f64>>();
        let d = ks_two_sample(&a, &b).map_err(fail)?.statistic;
        let dt = ks_two_sample(&f(&a), &f(&b)).map_err(fail)?.statistic;
        prop_assert_eq!(d, dt);
        let shifted = |v: &Vec<f64>| v.iter().map(|x| (x + 7.0).ln()).collect::<Vec<f64>>();
        prop_assert_eq!(d, ks_two_sample(&shifted(&a), &shifted(&b)).map_err(fail)?.statistic);
        Ok(())
    })
}

pub fn cosine_scale_invariant() -> Result<(), String> {
    let vec5 = prop::array::uniform5(-1.0f64..1.0);
    let mask = prop::array::uniform5(any::<bool>());
    run((vec5.clone(), vec5, mask, 1e-3f64..1e3), |(u, v, m, c)| {
        let mask = SimilarityMask::Entries(m);
        let Ok(base) = cosine_similarity(&u, &v, &mask) else {
            return Err(TestCaseError::reject("zero norm"));
        };
        let cu = u.map(|x| c * x);
        let cv = v.map(|x| c * x);
        prop_assert!(close(cosine_similarity(&cu, &v, &mask).map_err(fail)?, base, 1e-12));
        prop_assert!(close(cosine_similarity(&u, &cv, &mask).map_err(fail)?, base, 1e-12));
        Ok(())
    })
}

pub fn p_values_in_unit_interval() -> Result<(), String> {
    run((paired(10, 40), tied(2, 25), tied(2, 25)), |((x, y), a, b)| {
        let mut ps = vec![
            ks_two_sample(&a, &b).map_err(fail)?.p_two_tailed,
            mann_whitney_u(&a, &b).map_err(fail)?.p_two_tailed,
            mann_whitney_u_normal(&a, &b).map_err(fail)?.p_two_tailed,
        ];
        if a.len() * b.len() <= 400 {
            ps.push(mann_whitney_u_exact(&a, &b).map_err(fail)?.p_two_tailed);
        }
        if let Ok(c) = pearson(&x, &y) {
            ps.push(c.p_two_tailed);
        }
        let z: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u.sin() * v).collect();
        if let Ok(fit) = ols_regression(&[("x", &x), ("z", &z)], &y, true) {
            ps.extend(fit.coefficients.iter().map(|c| c.p_two_tailed));
        }
        for p in ps {
            prop_assert!((0.0..=1.0).contains(&p), "p = {p}");
        }
        Ok(())
    })
}

/// One to three ratings per fixture headline, some of them unparsed.
fn rating_sets() -> impl Strategy<Value = Vec<(String, Option<f64>)>> {
    let corpus = Corpus::fixture();
    let ids: Vec<String> = corpus.headlines.iter().map(|h| h.headline_id.clone()).collect();
    let per_headline = prop::collection::vec(
        prop::collection::vec(prop::option::weighted(0.9, (1u8..=4).prop_map(f64::from)), 1..=3),
        ids.len(),
    );
    per_headline.prop_map(move |sets| {
        ids.iter()
            .zip(sets)
            .flat_map(|(id, set)| set.into_iter().map(move |r| (id.clone(), r)))
            .collect()
    })
}

fn summarize(pairs: &[(String, Option<f64>)], corpus: &Corpus) -> Result<AgentSummary, TestCaseError> {
    summarize_ratings("p", pairs.iter().map(|(h, r)| (h.as_str(), *r)), corpus).map_err(fail)
}

fn included(s: &AgentSummary) -> Result<&DiscernmentSummary, TestCaseError> {
    s.included().ok_or_else(|| TestCaseError::reject("class without ratings"))
}

pub fn nd_identity() -> Result<(), String> {
    let corpus = Corpus::fixture();
    run(rating_sets(), |pairs| {
        let s = summarize(&pairs, &corpus)?;
        let s = included(&s)?;
        prop_assert_eq!(s.nd, s.ar - s.af);
        Ok(())
    })
}

pub fn summary_ranges() -> Result<(), String> {
    let corpus = Corpus::fixture();
    run(rating_sets(), |pairs| {
        let s = summarize(&pairs, &corpus)?;
        let s = included(&s)?;
        prop_assert!((1.0..=4.0).contains(&s.ar) && (1.0..=4.0).contains(&s.af), "{s:?}");
        prop_assert!((-3.0..=3.0).contains(&s.nd), "{s:?}");
        Ok(())
    })
}

pub fn nd_affine() -> Result<(), String> {
    let corpus = Corpus::fixture();
    run((rating_sets(), 0.01f64..100.0, -50.0f64..50.0), |(pairs, a, b)| {
        let base = summarize(&pairs, &corpus)?;
        let base = included(&base)?;
        let moved: Vec<(String, Option<f64>)> =
            pairs.iter().map(|(h, r)| (h.clone(), r.map(|v| a * v + b))).collect();
        let s = summarize(&moved, &corpus)?;
        let s = included(&s)?;
        let tol = 1e-12 * (1.0 + a.abs() * 4.0 + b.abs());
        prop_assert!(close(s.nd, a * base.nd, tol), "{} vs {}", s.nd, a * base.nd);
        Ok(())
    })
}

pub fn summary_permutation_invariant() -> Result<(), String> {
    let corpus = Corpus::fixture();
    let strategy = rating_sets().prop_flat_map(|pairs| {
        let shuffled = Just(pairs.clone()).prop_shuffle();
        (Just(pairs), shuffled)
    });
    run(strategy, |(pairs, shuffled)| {
        prop_assert_eq!(summarize(&pairs, &corpus)?, summarize(&shuffled, &corpus)?);
        Ok(())
    })
}

pub fn reverse_key_involution() -> Result<(), String> {
    run(1u8..=5, |v| {
        prop_assert_eq!(reverse_key(reverse_key(v).map_err(fail)?).map_err(fail)?, v);
        Ok(())
    })?;
    run(any::<u8>().prop_filter("outside 1..=5", |v| !(1..=5).contains(v)), |v| {
        prop_assert!(reverse_key(v).is_err());
        Ok(())
    })
}

fn responses(kind: InventoryKind) -> impl Strategy<Value = Vec<ItemResponse>> {
    let ids: Vec<u32> = Inventory::bundled(kind).items().iter().map(|i| i.item_id).collect();
    prop::collection::vec(1u8..=5, ids.len()).prop_map(move |values| {
        ids.iter()
            .zip(values)
            .map(|(&item_id, value)| ItemResponse { item_id, value })
            .collect()
    })
}

fn any_kind() -> impl Strategy<Value = InventoryKind> {
    prop_oneof![Just(InventoryKind::Bfi2), Just(InventoryKind::Bfi2S)]
}

pub fn score_permutation_invariant() -> Result<(), String> {
    let strategy = any_kind().prop_flat_map(|kind| {
        responses(kind).prop_flat_map(move |r| (Just(kind), Just(r.clone()), Just(r).prop_shuffle()))
    });
    run(strategy, |(kind, ordered, shuffled)| {
        let bank = Inventory::bundled(kind);
        prop_assert_eq!(bank.score(&ordered).map_err(fail)?, bank.score(&shuffled).map_err(fail)?);
        Ok(())
    })
}

pub fn score_key_symmetry() -> Result<(), String> {
    let strategy = any_kind().prop_flat_map(|kind| (Just(kind), responses(kind)));
    run(strategy, |(kind, r)| {
        let bank = Inventory::bundled(kind);
        let mirrored: Vec<ItemResponse> = r
            .iter()
            .map(|x| ItemResponse { item_id: x.item_id, value: 6 - x.value })
            .collect();
        let s = bank.score(&r).map_err(fail)?.as_array();
        let m = bank.score(&mirrored).map_err(fail)?.as_array();
        for (a, b) in s.iter().zip(m) {
            prop_assert!(close(b, 6.0 - a, 1e-12), "{a} mirrored to {b}");
        }
        Ok(())
    })
}

pub fn expanded_rank_round_trip() -> Result<(), String> {
    let bank = Inventory::bundled(InventoryKind::Bfi2S);
    let labels = ScaleLabels::default();
    let strategy = responses(InventoryKind::Bfi2S).prop_flat_map(|r| Just(r).prop_shuffle());
    run(strategy, |r| {
        let lines = convert_s_to_expanded(&bank, &r, &labels).map_err(fail)?;
        prop_assert_eq!(lines.len(), bank.items().len());
        for (item, line) in bank.items().iter().zip(&lines) {
            let (text, rank) = parse_rendered_line(line, &labels)
                .ok_or_else(|| fail(format!("unparseable line {line:?}")))?;
            let given = r.iter().find(|x| x.item_id == item.item_id).expect("complete set").value;
            prop_assert_eq!(text, item.text.as_str());
            prop_assert_eq!(rank, given);
        }
        Ok(())
    })
}

/// The metrics suites reject cases with an empty veracity class, so the
/// fixture has to contain both.
#[allow(dead_code)]
pub fn fixture_has_both_classes() -> bool {
    let c = Corpus::fixture();
    c.headlines.iter().any(|h| h.veracity == Veracity::TrueNews)
        && c.headlines.iter().any(|h| h.veracity == Veracity::FalseNews)
}
