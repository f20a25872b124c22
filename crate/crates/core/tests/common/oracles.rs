//! Checks against the frozen reference outputs in `data/fixtures`: five
//! golden datasets (n = 20) and the special-function probe table.

use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::Value;

use newsdisc_core::stats::special::{normal_cdf, t_cdf};
use newsdisc_core::stats::{ks_two_sample, mann_whitney_u, ols_regression, pearson, PValueMethod};

const TRAITS: [&str; 5] = ["E", "A", "C", "N", "O"];

/// Largest absolute deviation seen per quantity.
#[derive(Debug, Default)]
pub struct GoldenReport {
    pub datasets: usize,
    pub r: f64,
    pub beta: f64,
    pub p: f64,
    pub elapsed: Duration,
}

struct Dataset {
    traits: [Vec<f64>; 5],
    y: Vec<f64>,
    group_a: Vec<f64>,
    group_b: Vec<f64>,
}

fn read_dataset(path: &Path) -> Result<Dataset, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty dataset")?;
    if header != "e,a,c,n,o,y,group_a,group_b" {
        return Err(format!("{}: unexpected header {header}", path.display()));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 8];
    for line in lines.filter(|l| !l.trim().is_empty()) {
        for (col, cell) in cols.iter_mut().zip(line.split(',')) {
            col.push(cell.trim().parse().map_err(|_| format!("bad cell {cell:?}"))?);
        }
    }
    let mut it = cols.into_iter();
    let mut next = || it.next().expect("eight columns");
    Ok(Dataset {
        traits: [next(), next(), next(), next(), next()],
        y: next(),
        group_a: next(),
        group_b: next(),
    })
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("missing number {key}"))
}

fn within(what: String, got: f64, want: f64, tol: f64, worst: &mut f64) -> Result<(), String> {
    let err = (got - want).abs();
    *worst = worst.max(err);
    if err <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got:e}, expected {want:e} (|diff| {err:e} > {tol:e})"))
    }
}

/// Recomputes every golden statistic and compares with `expected.json`.
/// Tolerances: r, β, R², SE 1e-9; p 1e-6; D and U exact.
pub fn check_golden(golden_dir: &Path) -> Result<GoldenReport, String> {
    let text = std::fs::read_to_string(golden_dir.join("expected.json")).map_err(|e| e.to_string())?;
    let expected: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let entries = expected["datasets"].as_array().ok_or("no datasets")?;
    let datasets: Vec<(String, Dataset)> = entries
        .iter()
        .map(|e| {
            let name = e["dataset"].as_str().ok_or("no dataset name")?.to_string();
            read_dataset(&golden_dir.join(&name)).map(|d| (name, d))
        })
        .collect::<Result<_, String>>()?;

    let mut rep = GoldenReport::default();
    let start = Instant::now();
    for ((name, d), want) in datasets.iter().zip(entries) {
        for (k, entry) in want["pearson_vs_y"].as_array().ok_or("no pearson")?.iter().enumerate() {
            if entry["trait"] != TRAITS[k] {
                return Err(format!("{name}: pearson entries out of order"));
            }
            let c = pearson(&d.traits[k], &d.y).map_err(|e| e.to_string())?;
            within(format!("{name} r {}", TRAITS[k]), c.r, num(entry, "r")?, 1e-9, &mut rep.r)?;
            within(format!("{name} r p {}", TRAITS[k]), c.p_two_tailed, num(entry, "p")?, 1e-6, &mut rep.p)?;
        }

        let ols = &want["ols_standardized"];
        let predictors: Vec<(&str, &[f64])> =
            TRAITS.iter().zip(&d.traits).map(|(t, c)| (*t, c.as_slice())).collect();
        let fit = ols_regression(&predictors, &d.y, true).map_err(|e| e.to_string())?;
        let mut scratch = 0.0;
        within(format!("{name} intercept"), fit.intercept.beta, num(ols, "intercept")?, 1e-9, &mut rep.beta)?;
        within(format!("{name} R2"), fit.r_squared, num(ols, "r_squared")?, 1e-9, &mut scratch)?;
        for (c, entry) in fit.coefficients.iter().zip(ols["coefficients"].as_array().ok_or("no coefficients")?) {
            if entry["trait"] != c.name.as_str() {
                return Err(format!("{name}: coefficient order differs at {}", c.name));
            }
            within(format!("{name} beta {}", c.name), c.beta, num(entry, "beta")?, 1e-9, &mut rep.beta)?;
            within(format!("{name} se {}", c.name), c.std_error, num(entry, "std_error")?, 1e-9, &mut scratch)?;
            within(format!("{name} beta p {}", c.name), c.p_two_tailed, num(entry, "p")?, 1e-6, &mut rep.p)?;
        }

        let ks = ks_two_sample(&d.group_a, &d.group_b).map_err(|e| e.to_string())?;
        let (num_s, den_s) = want["ks"]["d_fraction"]
            .as_str()
            .and_then(|f| f.split_once('/'))
            .ok_or("bad d_fraction")?;
        let fraction = num_s.parse::<f64>().map_err(|e| e.to_string())? / den_s.parse::<f64>().map_err(|e| e.to_string())?;
        if ks.statistic != num(&want["ks"], "d")? || ks.statistic != fraction {
            return Err(format!("{name}: KS D {} differs from {}", ks.statistic, want["ks"]["d_fraction"]));
        }
        within(format!("{name} KS p"), ks.p_two_tailed, num(&want["ks"], "p")?, 1e-6, &mut rep.p)?;

        let mw = mann_whitney_u(&d.group_a, &d.group_b).map_err(|e| e.to_string())?;
        if mw.statistic != num(&want["mann_whitney"], "u")? {
            return Err(format!("{name}: U {} differs from {}", mw.statistic, want["mann_whitney"]["u"]));
        }
        if mw.method != PValueMethod::Exact {
            return Err(format!("{name}: n1*n2 = 400 should use the exact distribution"));
        }
        within(format!("{name} MW p"), mw.p_two_tailed, num(&want["mann_whitney"], "p_exact")?, 1e-6, &mut rep.p)?;
        rep.datasets += 1;
    }
    rep.elapsed = start.elapsed();
    Ok(rep)
}

/// Largest deviation from the probe table; errors past 1e-8.
pub fn check_probe_table(path: &Path) -> Result<(usize, f64), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some("x,df,t_cdf,normal_cdf") {
        return Err("unexpected probe table header".into());
    }
    let (mut rows, mut worst) = (0, 0.0f64);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| format!("{c:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let [x, df, t_want, n_want] = f[..] else {
            return Err(format!("row {line:?} needs 4 fields"));
        };
        within(format!("t_cdf({x}, {df})"), t_cdf(x, df), t_want, 1e-8, &mut worst)?;
        within(format!("normal_cdf({x})"), normal_cdf(x), n_want, 1e-8, &mut worst)?;
        rows += 1;
    }
    Ok((rows, worst))
}
