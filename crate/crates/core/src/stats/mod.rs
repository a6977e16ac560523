//! Pearson correlation with Student-t significance, correlation matrices
//! and threshold-based pruning of redundant columns.

pub mod special;

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance test of a product-moment correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_two_sided: f64,
    /// log10 of the p-value; stays finite after `p_two_sided` underflows.
    /// Negative infinity only for an exact fit.
    #[serde(with = "finite_or_null")]
    pub log10_p: f64,
    pub exact_fit: bool,
}

/// JSON has no infinities; an exact fit's log10 p is written as `null`.
pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample product-moment correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::usage(format!(
            "pearson_r: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::usage("pearson_r needs at least 3 observations"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson_r: zero variance input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under H0: ρ = 0, with n − 2 degrees of freedom.
///
/// Returns `(p, log10 p)`. The tail is I_{1−r²}((n−2)/2, 1/2), evaluated
/// in log space.
pub fn pearson_p(r: f64, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::usage("pearson_p needs n >= 3"));
    }
    if !(r.abs() <= 1.0) {
        return Err(Error::usage(format!("pearson_p: |r| = {} exceeds 1", r.abs())));
    }
    if r.abs() == 1.0 {
        return Ok((0.0, f64::NEG_INFINITY));
    }
    if r == 0.0 {
        return Ok((1.0, 0.0));
    }
    let df = (n - 2) as f64;
    let x = (1.0 - r) * (1.0 + r);
    let ln_p = special::ln_inc_beta(x, r * r, df / 2.0, 0.5).min(0.0);
    Ok((ln_p.exp(), ln_p / LN_10))
}

/// Correlation, t statistic and p-value for paired samples.
pub fn pearson_test(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    let r = pearson_r(x, y)?;
    let n = x.len();
    let (p, log10_p) = pearson_p(r, n)?;
    let exact_fit = r.abs() == 1.0;
    let t_statistic = if exact_fit {
        r.signum() * f64::MAX
    } else {
        r * ((n - 2) as f64 / ((1.0 - r) * (1.0 + r))).sqrt()
    };
    Ok(CorrelationResult {
        r,
        n,
        t_statistic,
        degrees_of_freedom: n - 2,
        p_two_sided: p,
        log10_p,
        exact_fit,
    })
}

/// Symmetric matrix of pairwise correlations over named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Restriction to the columns not in `drop`, order preserved.
    pub fn without(&self, drop: &[String]) -> CorrelationMatrix {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !drop.contains(&self.names[i]))
            .collect();
        CorrelationMatrix {
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            values: keep
                .iter()
                .map(|&i| keep.iter().map(|&j| self.values[i][j]).collect())
                .collect(),
        }
    }
}

/// Pairwise correlations of `columns` (parallel to `names`).
pub fn corr_matrix(names: &[String], columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    if names.len() != columns.len() {
        return Err(Error::usage("corr_matrix: names and columns differ in length"));
    }
    if columns.len() < 2 {
        return Err(Error::usage("corr_matrix needs at least two columns"));
    }
    for (name, col) in names.iter().zip(columns) {
        if col.len() >= 2 && col.iter().all(|&v| v == col[0]) {
            return Err(Error::Degenerate(format!("column `{name}` is constant")));
        }
    }
    let k = columns.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = pearson_r(&columns[i], &columns[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        values,
    })
}

/// Greedy scan over pairs (i, j), i < j, in column order: when both are
/// still retained and |r| exceeds `threshold`, drop j. Returns the dropped
/// names in scan order.
pub fn prune_correlated(matrix: &CorrelationMatrix, threshold: f64) -> Vec<String> {
    let k = matrix.len();
    let mut dropped = vec![false; k];
    let mut out = Vec::new();
    for i in 0..k {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..k {
            if !dropped[j] && matrix.get(i, j).abs() > threshold {
                dropped[j] = true;
                out.push(matrix.names[j].clone());
            }
        }
    }
    out
}

/// Two-column CSV of paired observations, for scatter plots.
pub fn scatter_csv(x_name: &str, x: &[f64], y_name: &str, y: &[f64]) -> Result<Vec<u8>> {
    if x.len() != y.len() {
        return Err(Error::usage("scatter_csv: length mismatch"));
    }
    let mut w = crate::io::csv_writer();
    w.write_record([x_name, y_name])?;
    for (a, b) in x.iter().zip(y) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    crate::io::csv_finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        // sxy = 11.5, sxx = 5, syy = 26.75
        let r = pearson_r(&x, &[2.0, 4.0, 6.0, 9.0]).unwrap();
        assert!((r - 11.5 / 133.75f64.sqrt()).abs() < 1e-15, "{r}");
        assert!((r - 0.994_376_712_684_369).abs() < 1e-14);
    }

    #[test]
    fn r_errors() {
        assert!(matches!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(matches!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn p_of_zero_correlation_is_one() {
        for n in [3, 10, 1000] {
            assert_eq!(pearson_p(0.0, n).unwrap().0, 1.0);
        }
    }

    #[test]
    fn exact_fit_has_zero_p() {
        let (p, lp) = pearson_p(1.0, 10).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(lp, f64::NEG_INFINITY);
        let t = pearson_test(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!(t.exact_fit);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"log10_p\":null"));
    }

    #[test]
    fn matrix_identities() {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let a = vec![1.0, 5.0, 2.0, 8.0];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let m = corr_matrix(&names, &[a.clone(), a.clone(), neg]).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((m.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(m.get(1, 2), m.get(2, 1));
    }

    #[test]
    fn constant_column_named_in_error() {
        let names = vec!["x".to_string(), "flat".to_string()];
        match corr_matrix(&names, &[vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0]]) {
            Err(Error::Degenerate(m)) => assert!(m.contains("flat")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prune_examples() {
        let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let c = vec![2.0, -1.0, 0.5, -1.0, 2.0];
        let m = corr_matrix(&names, &[a.clone(), a, c]).unwrap();
        assert_eq!(prune_correlated(&m, 0.7), vec!["B".to_string()]);
        assert!(prune_correlated(&m.without(&["B".to_string()]), 0.7).is_empty());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xs in prop::collection::vec(-100.0f64..100.0, 5..40),
            noise in prop::collection::vec(-10.0f64..10.0, 40),
            a in 0.1f64..50.0,
            b in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| 0.5 * x + e).collect();
            let base = match pearson_r(&xs, &ys) { Ok(r) => r, Err(_) => return Ok(()) };
            let up: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let down: Vec<f64> = xs.iter().map(|x| -a * x + b).collect();
            prop_assert!((pearson_r(&up, &ys).unwrap() - base).abs() < 1e-12);
            prop_assert!((pearson_r(&down, &ys).unwrap() + base).abs() < 1e-12);
        }

        #[test]
        fn p_monotone(r1 in 0.01f64..0.98, dr in 0.001f64..0.02, n in 5usize..500) {
            let r2 = (r1 + dr).min(0.999);
            let (p1, l1) = pearson_p(r1, n).unwrap();
            let (p2, l2) = pearson_p(r2, n).unwrap();
            prop_assert!(l2 < l1);
            prop_assert!(p2 <= p1);
            let (_, l3) = pearson_p(r1, n + 10).unwrap();
            prop_assert!(l3 < l1);
        }

        #[test]
        fn log10_agrees_with_p(r in -0.999f64..0.999, n in 3usize..3000) {
            let (p, lp) = pearson_p(r, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(lp <= 0.0);
            if p > 1e-300 {
                prop_assert!((p.log10() - lp).abs() < 1e-9);
            }
        }

        #[test]
        fn prune_is_fixed_point(cols in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 12), 2..6), t in 0.1f64..0.95) {
            let names: Vec<String> = (0..cols.len()).map(|i| format!("c{i}")).collect();
            let Ok(m) = corr_matrix(&names, &cols) else { return Ok(()) };
            let dropped = prune_correlated(&m, t);
            prop_assert!(prune_correlated(&m.without(&dropped), t).is_empty());
        }
    }
}
