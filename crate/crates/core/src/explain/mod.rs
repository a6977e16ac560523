//! Exact TreeSHAP attributions, impurity importances and feature rankings.

mod treeshap;

pub use treeshap::{brute_force_shapley, ensemble_shap, tree_shap, ShapExplanation, BRUTE_FORCE_MAX_FEATURES};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::preprocess::FeatureMatrix;

/// Indices of `values` by decreasing value; ties keep feature order.
pub fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Normalized impurity-decrease importance of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub model: String,
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    /// No split anywhere: the table is uniform and carries no ranking.
    pub degenerate: bool,
}

impl Importance {
    pub fn ranking(&self) -> Vec<String> {
        rank_desc(&self.values).into_iter().map(|i| self.feature_names[i].clone()).collect()
    }
}

/// Credit per split is cover·impurity minus the same for both children,
/// summed over all trees and normalized to one.
pub fn impurity_importance(model: &Ensemble) -> Result<Importance> {
    let p = model.n_features();
    let mut credit = vec![0.0; p];
    for tree in &model.trees {
        for n in &tree.nodes {
            if let (Some(f), Some(l), Some(r)) = (n.feature, n.left, n.right) {
                let (l, r) = (&tree.nodes[l], &tree.nodes[r]);
                let c = n.cover * n.impurity - l.cover * l.impurity - r.cover * r.impurity;
                if !c.is_finite() {
                    return Err(Error::CorruptModel("non-finite impurity in a split".into()));
                }
                credit[f] += c.max(0.0);
            }
        }
    }
    let total: f64 = credit.iter().sum();
    let degenerate = !(total > 0.0);
    let values = if degenerate {
        vec![1.0 / p as f64; p]
    } else {
        credit.iter().map(|c| c / total).collect()
    };
    Ok(Importance {
        model: model.kind.short_name().to_string(),
        feature_names: model.feature_names.clone(),
        values,
        degenerate,
    })
}

/// Attributions for every row of `data`, in row order.
pub fn explain_rows(model: &Ensemble, data: &FeatureMatrix) -> Result<Vec<ShapExplanation>> {
    if data.feature_names != model.feature_names {
        return Err(Error::usage("matrix features differ from the model's"));
    }
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut e = ensemble_shap(model, data.row(i))?;
            e.row = Some(i);
            Ok(e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub model: String,
    pub feature_names: Vec<String>,
    pub mean_abs_phi: Vec<f64>,
    /// Feature names by decreasing mean |phi|.
    pub ranking: Vec<String>,
    /// Every mean is zero, so the ranking means nothing.
    pub uninformative: bool,
    pub surrogate: bool,
    pub n_rows: usize,
}

pub fn summarize(model: &str, feature_names: &[String], explanations: &[ShapExplanation]) -> Result<ShapSummary> {
    if explanations.is_empty() {
        return Err(Error::usage("cannot summarize zero explanations"));
    }
    let p = feature_names.len();
    let mut mean = vec![0.0; p];
    for e in explanations {
        if e.phi.len() != p {
            return Err(Error::usage("explanation length differs from feature count"));
        }
        for (m, v) in mean.iter_mut().zip(&e.phi) {
            *m += v.abs();
        }
    }
    for m in &mut mean {
        *m /= explanations.len() as f64;
    }
    Ok(ShapSummary {
        model: model.to_string(),
        feature_names: feature_names.to_vec(),
        ranking: rank_desc(&mean).into_iter().map(|i| feature_names[i].clone()).collect(),
        uninformative: mean.iter().all(|&m| m == 0.0),
        surrogate: explanations.iter().any(|e| e.surrogate),
        mean_abs_phi: mean,
        n_rows: explanations.len(),
    })
}

pub fn shap_summary(model: &Ensemble, data: &FeatureMatrix) -> Result<ShapSummary> {
    if data.n_rows() == 0 {
        return Err(Error::usage("shap_summary needs at least one row"));
    }
    summarize(model.kind.short_name(), &model.feature_names, &explain_rows(model, data)?)
}

/// Long-format attributions: one `base` record with the base value, then
/// one record per (row, feature). `values` holds the feature values to
/// print next to each attribution, row-major.
pub fn shap_csv(feature_names: &[String], explanations: &[ShapExplanation], values: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = crate::io::csv_writer();
    w.write_record(["row_id", "feature", "value", "phi"])?;
    if let Some(first) = explanations.first() {
        w.write_record(["base", "base_value", "", &first.base_value.to_string()])?;
    }
    for (k, e) in explanations.iter().enumerate() {
        let row = e.row.unwrap_or(k);
        let x = values.row(row);
        for (j, name) in feature_names.iter().enumerate() {
            w.write_record([row.to_string(), name.clone(), x[j].to_string(), e.phi[j].to_string()])?;
        }
    }
    crate::io::csv_finish(w)
}

/// Rank annotation used in markdown tables.
fn rank_note(rank: usize, p: usize) -> String {
    if rank < 5 {
        format!("#{} top-5", rank + 1)
    } else if rank + 3 >= p {
        format!("#{} bottom-3", rank + 1)
    } else {
        format!("#{}", rank + 1)
    }
}

/// Features as rows, models as columns; each cell carries the value and
/// its rank within the model.
pub fn importance_markdown(tables: &[Importance]) -> String {
    let Some(first) = tables.first() else {
        return String::new();
    };
    let p = first.feature_names.len();
    let mut s = String::from("| feature |");
    for t in tables {
        s.push_str(&format!(" {}{} |", t.model, if t.degenerate { " (degenerate)" } else { "" }));
    }
    s.push_str(&format!("\n|---|{}\n", "---|".repeat(tables.len())));
    let ranks: Vec<Vec<usize>> = tables
        .iter()
        .map(|t| {
            let mut r = vec![0; p];
            for (pos, i) in rank_desc(&t.values).into_iter().enumerate() {
                r[i] = pos;
            }
            r
        })
        .collect();
    for (j, name) in first.feature_names.iter().enumerate() {
        s.push_str(&format!("| {name} |"));
        for (t, r) in tables.iter().zip(&ranks) {
            s.push_str(&format!(" {:.6} ({}) |", t.values[j], rank_note(r[j], p)));
        }
        s.push('\n');
    }
    s
}

pub fn shap_markdown(summaries: &[ShapSummary]) -> String {
    let mut s = String::from("| model | ranking by mean abs SHAP |\n|---|---|\n");
    for m in summaries {
        let mut label = m.model.clone();
        if m.surrogate {
            label.push_str(" (surrogate)");
        }
        if m.uninformative {
            label.push_str(" (uninformative)");
        }
        let ranked: Vec<String> = m
            .ranking
            .iter()
            .map(|f| {
                let j = m.feature_names.iter().position(|n| n == f).expect("ranked feature exists");
                format!("{f} ({:.4})", m.mean_abs_phi[j])
            })
            .collect();
        s.push_str(&format!("| {label} | {} |\n", ranked.join(", ")));
    }
    s
}
