//! Link perturbation of a reduced matrix and the resulting PageRank
//! sensitivities.
//!
//! Boosting link `j → i` by a relative fraction `δ` scales `G_R(i, j)` by
//! `1 + δ` and renormalizes column `j`. The sensitivity of node `a` is the
//! logarithmic derivative `D(a) = (P̃_a − P_a) / (δ P_a)`. Summing the two
//! directions of a pair gives the two-way sensitivity, and
//! `F(a, b) = D_{a↔b}(a) − D_{a↔b}(b)` measures the imbalance of the pair:
//! negative means `a` dominates `b`.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{stationary, DenseMatrix};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::reduced::write_matrix_csv;

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 100_000;

/// Boost of the link from column `j` to row `i`, in subset positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub i: usize,
    pub j: usize,
    pub delta: f64,
}

impl Perturbation {
    pub fn new(i: usize, j: usize, delta: f64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "cannot perturb the self-link of node {i}"
            )));
        }
        if !(delta.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "|delta| must be < 1, got {delta}"
            )));
        }
        Ok(Perturbation { i, j, delta })
    }
}

/// Which stationary vector the sensitivity is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranking {
    PageRank,
    /// Stationary vector of the column-renormalized transpose.
    CheiRank,
}

/// Returns `g_r` with entry `(i, j)` scaled by `1 + δ` and column `j`
/// renormalized to 1. All other columns are untouched.
pub fn perturb(g_r: &DenseMatrix, p: &Perturbation) -> Result<DenseMatrix> {
    let n = g_r.n();
    if p.i >= n || p.j >= n {
        return Err(Error::InvalidArgument(format!(
            "perturbation ({}, {}) out of range for {n} nodes",
            p.i, p.j
        )));
    }
    if !(p.delta.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "|delta| must be < 1, got {}",
            p.delta
        )));
    }
    let column_sum: f64 = (0..n).map(|k| g_r.get(k, p.j)).sum();
    if !((column_sum - 1.0).abs() <= 1e-10) {
        return Err(Error::InvalidArgument(format!(
            "column {} sums to {column_sum}, not 1",
            p.j
        )));
    }
    let base = g_r.get(p.i, p.j);
    let boosted = (1.0 + p.delta) * base;
    if boosted < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "boosted entry ({}, {}) would be negative ({boosted})",
            p.i, p.j
        )));
    }
    let mut out = g_r.clone();
    if base == 0.0 {
        return Ok(out);
    }
    out.set(p.i, p.j, boosted);
    let sum: f64 = (0..n).map(|k| out.get(k, p.j)).sum();
    for k in 0..n {
        out.set(k, p.j, out.get(k, p.j) / sum);
    }
    Ok(out)
}

fn transposed_stochastic(m: &DenseMatrix) -> DenseMatrix {
    let mut t = m.transpose();
    t.normalize_columns();
    t
}

/// Per-node logarithmic derivatives for one perturbed link.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub perturbation: Perturbation,
    pub ranking: Ranking,
    pub labels: Vec<String>,
    pub d: Vec<f64>,
    pub p_base: Vec<f64>,
    pub p_perturbed: Vec<f64>,
    /// The boosted entry was zero, so nothing changed.
    pub noop: bool,
    pub edition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub i_label: String,
    pub j_label: String,
    pub delta: f64,
    pub edition: Option<String>,
    pub ranking: Ranking,
    pub noop: bool,
}

impl SensitivityReport {
    pub fn with_labels(mut self, labels: &[String]) -> Result<Self> {
        if labels.len() != self.d.len() {
            return Err(Error::DimensionMismatch {
                expected: self.d.len(),
                got: labels.len(),
            });
        }
        self.labels = labels.to_vec();
        Ok(self)
    }

    pub fn with_edition(mut self, edition: Option<&str>) -> Self {
        self.edition = edition.map(str::to_owned);
        self
    }

    pub fn i_label(&self) -> &str {
        &self.labels[self.perturbation.i]
    }

    pub fn j_label(&self) -> &str {
        &self.labels[self.perturbation.j]
    }

    pub fn metadata(&self) -> ReportMetadata {
        ReportMetadata {
            i_label: self.i_label().to_owned(),
            j_label: self.j_label().to_owned(),
            delta: self.perturbation.delta,
            edition: self.edition.clone(),
            ranking: self.ranking,
            noop: self.noop,
        }
    }

    /// `label,d,p_base,p_perturbed`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "d", "p_base", "p_perturbed"])?;
        for (a, label) in self.labels.iter().enumerate() {
            out.write_record([
                label.clone(),
                fmt_f64(self.d[a]),
                fmt_f64(self.p_base[a]),
                fmt_f64(self.p_perturbed[a]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.metadata())?;
        writeln!(w)?;
        Ok(())
    }
}

fn log_derivative(base: &[f64], perturbed: &[f64], delta: f64) -> Result<Vec<f64>> {
    base.iter()
        .zip(perturbed)
        .enumerate()
        .map(|(a, (&p, &q))| {
            if p > 0.0 {
                Ok((q - p) / (delta * p))
            } else {
                Err(Error::Numerical(format!(
                    "node {a} has zero base probability"
                )))
            }
        })
        .collect()
}

fn one_way(
    base_matrix: &DenseMatrix,
    base_p: &[f64],
    pert: &Perturbation,
    ranking: Ranking,
    tol: f64,
) -> Result<SensitivityReport> {
    if pert.delta == 0.0 {
        return Err(Error::InvalidArgument(
            "sensitivity needs a nonzero delta".into(),
        ));
    }
    if pert.i == pert.j {
        return Err(Error::InvalidArgument(format!(
            "cannot perturb the self-link of node {}",
            pert.i
        )));
    }
    let perturbed = perturb(base_matrix, pert)?;
    let noop = base_matrix.get(pert.i, pert.j) == 0.0;
    let p_perturbed = if noop {
        base_p.to_vec()
    } else {
        match ranking {
            Ranking::PageRank => stationary(&perturbed, tol, MAX_ITER)?,
            Ranking::CheiRank => stationary(&transposed_stochastic(&perturbed), tol, MAX_ITER)?,
        }
    };
    Ok(SensitivityReport {
        perturbation: *pert,
        ranking,
        labels: (0..base_p.len()).map(|a| a.to_string()).collect(),
        d: log_derivative(base_p, &p_perturbed, pert.delta)?,
        p_base: base_p.to_vec(),
        p_perturbed,
        noop,
        edition: None,
    })
}

fn base_vector(g_r: &DenseMatrix, ranking: Ranking, tol: f64) -> Result<Vec<f64>> {
    match ranking {
        Ranking::PageRank => stationary(g_r, tol, MAX_ITER),
        Ranking::CheiRank => stationary(&transposed_stochastic(g_r), tol, MAX_ITER),
    }
}

/// PageRank sensitivity `D_{(j→i)}` of every node.
pub fn sensitivity(g_r: &DenseMatrix, p: &Perturbation, tol: f64) -> Result<SensitivityReport> {
    let base = base_vector(g_r, Ranking::PageRank, tol)?;
    one_way(g_r, &base, p, Ranking::PageRank, tol)
}

/// Same as [`sensitivity`], with both stationary vectors taken from the
/// column-renormalized transposes of the base and perturbed matrices.
pub fn cheirank_sensitivity(
    g_r: &DenseMatrix,
    p: &Perturbation,
    tol: f64,
) -> Result<SensitivityReport> {
    let base = base_vector(g_r, Ranking::CheiRank, tol)?;
    one_way(g_r, &base, p, Ranking::CheiRank, tol)
}

/// `D_{(a↔b)} = D_{(a→b)} + D_{(b→a)}`, both taken against the unperturbed
/// matrix.
pub fn two_way(g_r: &DenseMatrix, a: usize, b: usize, delta: f64, tol: f64) -> Result<Vec<f64>> {
    let base = base_vector(g_r, Ranking::PageRank, tol)?;
    two_way_with_base(g_r, &base, a, b, delta, tol)
}

fn two_way_with_base(
    g_r: &DenseMatrix,
    base: &[f64],
    a: usize,
    b: usize,
    delta: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let forward = one_way(
        g_r,
        base,
        &Perturbation::new(b, a, delta)?,
        Ranking::PageRank,
        tol,
    )?;
    let backward = one_way(
        g_r,
        base,
        &Perturbation::new(a, b, delta)?,
        Ranking::PageRank,
        tol,
    )?;
    Ok(forward
        .d
        .iter()
        .zip(&backward.d)
        .map(|(x, y)| x + y)
        .collect())
}

/// Pairwise imbalance `F`. Pairs whose computation failed hold NaN and are
/// listed in `missing`.
#[derive(Debug, Clone)]
pub struct ImbalanceMatrix {
    pub f: DenseMatrix,
    pub delta: f64,
    pub missing: Vec<(usize, usize, String)>,
}

impl ImbalanceMatrix {
    pub fn write_csv<W: Write>(&self, labels: &[String], w: W) -> Result<()> {
        write_matrix_csv(&self.f, labels, w)
    }
}

pub fn imbalance_matrix(g_r: &DenseMatrix, delta: f64, tol: f64) -> Result<ImbalanceMatrix> {
    let n = g_r.n();
    let base = base_vector(g_r, Ranking::PageRank, tol)?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(a, b)| two_way_with_base(g_r, &base, a, b, delta, tol).map(|d| d[a] - d[b]))
        .collect();
    let mut f = DenseMatrix::zeros(n);
    let mut missing = Vec::new();
    for (&(a, b), r) in pairs.iter().zip(results) {
        match r {
            Ok(v) => {
                f.set(a, b, v);
                f.set(b, a, -v);
            }
            Err(e) => {
                f.set(a, b, f64::NAN);
                f.set(b, a, f64::NAN);
                missing.push((a, b, e.to_string()));
            }
        }
    }
    Ok(ImbalanceMatrix { f, delta, missing })
}

/// Mean of vectors given over possibly differently ordered label sets,
/// returned in the order of the first set.
pub fn average_labeled(items: &[(&[String], &[f64])]) -> Result<Vec<f64>> {
    let (first_labels, _) = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
    let mut sum = vec![0.0; first_labels.len()];
    for (labels, values) in items {
        if labels.len() != first_labels.len() || values.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "label sets differ between editions".into(),
            ));
        }
        let position: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(k, l)| (l.as_str(), k))
            .collect();
        for (s, label) in sum.iter_mut().zip(first_labels.iter()) {
            let k = position.get(label.as_str()).ok_or_else(|| {
                Error::InvalidArgument(format!("label {label:?} missing from an edition"))
            })?;
            *s += values[*k];
        }
    }
    let m = items.len() as f64;
    Ok(sum.into_iter().map(|s| s / m).collect())
}

/// Elementwise mean of sensitivity vectors across editions, matched by label.
pub fn average_reports(reports: &[SensitivityReport]) -> Result<Vec<f64>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
    for r in reports {
        if r.i_label() != first.i_label()
            || r.j_label() != first.j_label()
            || r.perturbation.delta != first.perturbation.delta
            || r.ranking != first.ranking
        {
            return Err(Error::InvalidArgument(format!(
                "perturbation {} -> {} (delta {}) does not match {} -> {} (delta {})",
                r.j_label(),
                r.i_label(),
                r.perturbation.delta,
                first.j_label(),
                first.i_label(),
                first.perturbation.delta
            )));
        }
    }
    let items: Vec<(&[String], &[f64])> =
        reports.iter().map(|r| (&r.labels[..], &r.d[..])).collect();
    average_labeled(&items)
}
