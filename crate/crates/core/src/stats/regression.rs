//! Ordinary least squares with an intercept, solved by Householder QR.
//!
//! Standard errors use the unbiased residual variance `RSS / (n - p - 1)`
//! and the diagonal of `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`; coefficients are tested with
//! two-tailed t-tests on `n - p - 1` degrees of freedom.

use serde::{Deserialize, Serialize};

use super::special::t_two_tailed;
use super::{check_finite, mean, sample_sd};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_two_tailed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub intercept: Coefficient,
    /// One entry per predictor, in input order.
    pub coefficients: Vec<Coefficient>,
    pub n: usize,
    pub r_squared: f64,
    pub standardized: bool,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn zscore(values: &[f64]) -> Option<Vec<f64>> {
    let m = mean(values);
    let sd = sample_sd(values);
    (sd > 0.0).then(|| values.iter().map(|v| (v - m) / sd).collect())
}

/// Regresses `outcome` on the named predictor columns.
///
/// With `standardized`, predictors and outcome are z-scored (sample SD)
/// first, so each β is in SD-per-SD units.
pub fn ols_regression(
    predictors: &[(&str, &[f64])],
    outcome: &[f64],
    standardized: bool,
) -> Result<RegressionResult> {
    let n = outcome.len();
    let p = predictors.len();
    if p == 0 {
        return Err(Error::Validation("regression needs at least one predictor".into()));
    }
    if n <= p + 1 {
        return Err(Error::Validation(format!(
            "regression needs n > {} observations, got {n}",
            p + 1
        )));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::Validation(format!(
                "predictor {name} has {} values, outcome has {n}",
                col.len()
            )));
        }
        check_finite(name, col)?;
    }
    check_finite("outcome", outcome)?;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut names: Vec<String> = Vec::with_capacity(p + 1);
    columns.push(vec![1.0; n]);
    names.push("intercept".into());
    let y: Vec<f64>;
    if standardized {
        for (name, col) in predictors {
            let z = zscore(col).ok_or_else(|| Error::SingularDesign {
                columns: vec![format!("{name} (constant)")],
            })?;
            columns.push(z);
            names.push((*name).to_string());
        }
        y = zscore(outcome)
            .ok_or_else(|| Error::Degenerate("outcome has zero variance".into()))?;
    } else {
        for (name, col) in predictors {
            columns.push(col.to_vec());
            names.push((*name).to_string());
        }
        y = outcome.to_vec();
    }

    let qr = householder_qr(columns, &names)?;
    let m = p + 1;

    // Qᵀy, then back-substitute R β = Qᵀy.
    let mut qty = y.clone();
    qr.apply_qt(&mut qty);
    let beta = qr.back_substitute(&qty[..m]);

    let rss: f64 = (m..n).map(|i| qty[i] * qty[i]).sum();
    let my = mean(&y);
    let tss: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let df = (n - m) as f64;
    let sigma2 = rss / df;

    let rinv = qr.r_inverse();
    let coefs: Vec<Coefficient> = (0..m)
        .map(|j| {
            let diag: f64 = (j..m).map(|k| rinv[j][k] * rinv[j][k]).sum();
            let se = (sigma2 * diag).sqrt();
            let t = beta[j] / se;
            let p_two = if se == 0.0 {
                if beta[j] == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                t_two_tailed(t, df)
            };
            Coefficient {
                name: names[j].clone(),
                beta: beta[j],
                std_error: se,
                t,
                p_two_tailed: p_two,
            }
        })
        .collect();

    let mut iter = coefs.into_iter();
    let intercept = iter.next().expect("intercept present");
    Ok(RegressionResult {
        intercept,
        coefficients: iter.collect(),
        n,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
        standardized,
    })
}

/// Column-major Householder factorization.
struct Qr {
    /// Householder vectors, one per column, stored over rows k..n.
    vs: Vec<Vec<f64>>,
    /// Upper triangle, r[i][j] for j >= i.
    r: Vec<Vec<f64>>,
}

fn householder_qr(mut cols: Vec<Vec<f64>>, names: &[String]) -> Result<Qr> {
    let m = cols.len();
    let scale = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(1.0);

    let mut vs = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for k in 0..m {
        let x = &cols[k][k..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tol {
            return Err(Error::SingularDesign {
                columns: collinear_set(&r, k, names),
            });
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        for col in cols.iter_mut().skip(k) {
            let seg = &mut col[k..];
            let dot: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (s, a) in seg.iter_mut().zip(&v) {
                *s -= f * a;
            }
        }
        for j in k..m {
            r[k][j] = cols[j][k];
        }
        // undo rounding on the reflected column: exact value is alpha
        r[k][k] = alpha;
        vs.push(v);
    }
    Ok(Qr { vs, r })
}

/// Names the deficient column `k` together with the earlier columns it is a
/// combination of.
fn collinear_set(r: &[Vec<f64>], k: usize, names: &[String]) -> Vec<String> {
    // Solve R[..k, ..k] c = R[..k, k]; non-zero c_j mark the participants.
    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = r[i][k];
        for j in i + 1..k {
            s -= r[i][j] * c[j];
        }
        c[i] = s / r[i][i];
    }
    let mut out: Vec<String> = (0..k)
        .filter(|&j| c[j].abs() > 1e-8)
        .map(|j| names[j].clone())
        .collect();
    out.push(names[k].clone());
    out
}

impl Qr {
    fn apply_qt(&self, y: &mut [f64]) {
        for (k, v) in self.vs.iter().enumerate() {
            let seg = &mut y[k..];
            let dot: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
            let vnorm2: f64 = v.iter().map(|a| a * a).sum();
            let f = 2.0 * dot / vnorm2;
            for (s, a) in seg.iter_mut().zip(v) {
                *s -= f * a;
            }
        }
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.r.len();
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for j in i + 1..m {
                s -= self.r[i][j] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        x
    }

    /// Upper-triangular R⁻¹.
    fn r_inverse(&self) -> Vec<Vec<f64>> {
        let m = self.r.len();
        let mut inv = vec![vec![0.0; m]; m];
        for col in 0..m {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for j in i + 1..=col {
                    s -= self.r[i][j] * inv[j][col];
                }
                inv[i][col] = s / self.r[i][i];
            }
        }
        inv
    }
}
