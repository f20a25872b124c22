mod common {
    pub mod oracles;
}

use std::path::Path;

use common::oracles::{check_golden, check_probe_table};

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/data/fixtures"))
}

#[test]
fn golden_datasets_match_reference() {
    let rep = check_golden(&fixtures().join("golden")).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(rep.datasets, 5);
}

#[test]
fn probe_table_matches() {
    let (rows, worst) = check_probe_table(&fixtures().join("probe_table.csv")).unwrap_or_else(|e| panic!("{e}"));
    assert_eq!(rows, 20);
    assert!(worst <= 1e-8);
}
