//! Reduced Google matrix of a node subset and its three components.
//!
//! With `r` the subset and `s` the scattering nodes,
//!
//! > G_R = G_rr + G_rs (1 − G_ss)⁻¹ G_sr.
//!
//! `G_ss` has an eigenvalue `λ_c` close to 1, so the plain Neumann series of
//! the inverse converges far too slowly. Writing `P_c = ψ_R ψ_Lᵀ` for the
//! spectral projector of `λ_c` and `Q_c = 1 − P_c`,
//!
//! > (1 − G_ss)⁻¹ = P_c / (1 − λ_c) + Q_c Σ_l (Q_c G_ss Q_c)^l
//!
//! and the remaining series decays like `|λ_{c,2}|^l`. This splits `G_R` into
//! `G_rr + G_pr + G_qr`: direct links, a rank-one projector part, and the
//! hidden-link part.
//!
//! All products with `G_rs`, `G_ss`, `G_sr` are masked products with the full
//! implicit Google matrix; nothing of size `N_s × N_s` is ever stored.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, dot, l1_norm, DenseMatrix, LinearOperator};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::google::GoogleMatrix;
use crate::graph::NodeSubset;

pub use crate::oracle::dense_oracle_reduce;

/// Column sums of `G_R` must be within this of 1.
pub const COLUMN_SUM_TOL: f64 = 1e-10;
/// Negative `G_R` entries above this are rounding noise and clamped to 0.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    /// Series truncation: stop once the running term has L1 norm ≤ `tol`.
    pub tol: f64,
    pub max_terms: usize,
    /// Residual bound for the scattering eigenpair.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            tol: 1e-12,
            max_terms: 10_000,
            eigen_tol: 1e-13,
            eigen_max_iter: 100_000,
        }
    }
}

/// `G_ss` as an operator on vectors indexed by scattering position.
pub struct Scattering<'a, 'g> {
    google: &'a GoogleMatrix<'g>,
    subset: &'a NodeSubset,
    nodes: Vec<usize>,
}

impl<'a, 'g> Scattering<'a, 'g> {
    pub fn new(google: &'a GoogleMatrix<'g>, subset: &'a NodeSubset) -> Self {
        let nodes = subset.complement(google.n());
        Scattering {
            google,
            subset,
            nodes,
        }
    }

    /// Global node index of each scattering position, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Restricts a full-length vector to the scattering positions.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| full[i]).collect()
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.google.n()];
        for (&i, &v) in self.nodes.iter().zip(x) {
            full[i] = v;
        }
        full
    }

    /// `G_rs x`, in subset order.
    pub fn to_subset(&self, x: &[f64]) -> Vec<f64> {
        let full = self.scatter(x);
        let mut out = vec![0.0; full.len()];
        self.google
            .apply(&full, &mut out)
            .expect("lengths fixed by construction");
        self.subset.indices().iter().map(|&i| out[i]).collect()
    }

    /// Column `j` of `G_sr`, `j` a subset position.
    pub fn from_subset(&self, j: usize) -> Vec<f64> {
        self.gather(&self.google.column(self.subset.indices()[j]))
    }
}

impl LinearOperator for Scattering<'_, '_> {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let full = self.scatter(x);
        let mut out = vec![0.0; full.len()];
        self.google
            .apply(&full, &mut out)
            .expect("lengths fixed by construction");
        for (yk, &i) in y.iter_mut().zip(&self.nodes) {
            *yk = out[i];
        }
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let full = self.scatter(x);
        let mut out = vec![0.0; full.len()];
        self.google
            .apply_transpose(&full, &mut out)
            .expect("lengths fixed by construction");
        for (yk, &i) in y.iter_mut().zip(&self.nodes) {
            *yk = out[i];
        }
    }
}

/// Leading eigenvalue with right and left eigenvectors, normalized so that
/// `Σ ψ_R = 1` and `ψ_Lᵀ ψ_R = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub iterations: usize,
    /// Larger of the right and left unit-mass residuals at exit.
    pub residual: f64,
}

impl Eigenpair {
    /// `P_c v = ψ_R (ψ_Lᵀ v)`
    pub fn project_p(&self, v: &[f64]) -> Vec<f64> {
        let c = dot(&self.left, v);
        self.right.iter().map(|r| r * c).collect()
    }

    /// `Q_c v = v − ψ_R (ψ_Lᵀ v)`
    pub fn project_q(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.remove_leading(&mut out);
        out
    }

    fn remove_leading(&self, v: &mut [f64]) {
        let c = dot(&self.left, v);
        for (x, r) in v.iter_mut().zip(&self.right) {
            *x -= r * c;
        }
    }
}

/// Power iteration for the dominant eigenpair of `op`.
///
/// Both iterates are kept at unit mass and stop once `‖A v − λ v‖₁ ≤ tol`.
/// An operator whose dominant eigenvalue is complex or not simple never
/// settles and is reported as non-convergence.
pub fn leading_eigenpair<A: LinearOperator>(
    op: &A,
    tol: f64,
    max_iter: usize,
) -> Result<Eigenpair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (lambda, right, it_r, res_r) = dominant(op, tol, max_iter, false)?;
    let (mu, mut left, it_l, res_l) = dominant(op, tol, max_iter, true)?;
    if (mu - lambda).abs() > 1e-8 * lambda.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "left and right iterations found different eigenvalues ({lambda} vs {mu})"
        )));
    }
    let overlap = dot(&left, &right);
    if !(overlap > 1e-14) {
        return Err(Error::Numerical(format!(
            "degenerate biorthogonalization: left·right = {overlap:e}"
        )));
    }
    left.iter_mut().for_each(|x| *x /= overlap);
    Ok(Eigenpair {
        lambda,
        right,
        left,
        iterations: it_r.max(it_l),
        residual: res_r.max(res_l),
    })
}

fn dominant<A: LinearOperator>(
    op: &A,
    tol: f64,
    max_iter: usize,
    transpose: bool,
) -> Result<(f64, Vec<f64>, usize, f64)> {
    let d = op.dim();
    let mut v = vec![1.0 / d as f64; d];
    let mut w = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        if transpose {
            op.apply_transpose(&v, &mut w);
        } else {
            op.apply(&v, &mut w);
        }
        // Σ v = 1, so the mass of A v is the Rayleigh-style estimate of λ.
        let lambda: f64 = w.iter().sum();
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Numerical(format!(
                "dominant eigenvalue estimate {lambda} is not positive"
            )));
        }
        residual = v.iter().zip(&w).map(|(a, b)| (b - lambda * a).abs()).sum();
        if residual <= tol {
            return Ok((lambda, v, it, residual));
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / lambda;
        }
    }
    Err(Error::NoConvergence {
        what: "leading eigenpair iteration (complex or degenerate leading eigenvalue?)",
        iterations: max_iter,
        residual,
    })
}

/// Leading eigenpair of `G_ss` for `subset`. Vectors are indexed by
/// scattering position (ascending global index).
pub fn leading_ss_eigenpair(
    google: &GoogleMatrix<'_>,
    subset: &NodeSubset,
    tol: f64,
    max_iter: usize,
) -> Result<Eigenpair> {
    let op = Scattering::new(google, subset);
    if op.dim() == 0 {
        return Err(Error::InvalidArgument("scattering set is empty".into()));
    }
    leading_eigenpair(&op, tol, max_iter)
}

/// Partial sum of `Q_c Σ_l (Q_c A Q_c)^l b`.
#[derive(Debug, Clone)]
pub struct HiddenSeries {
    pub sum: Vec<f64>,
    /// Number of terms accumulated (term 0 included).
    pub terms: usize,
    /// L1 norm of each accumulated term.
    pub norms: Vec<f64>,
}

impl HiddenSeries {
    pub fn residual(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }
}

/// Accumulates the projected series until the running term has L1 norm at
/// most `tol`.
pub fn hidden_series<A: LinearOperator>(
    op: &A,
    pair: &Eigenpair,
    b: &[f64],
    tol: f64,
    max_terms: usize,
) -> Result<HiddenSeries> {
    let mut term = pair.project_q(b);
    let mut sum = term.clone();
    let mut norms = vec![l1_norm(&term)];
    let mut next = vec![0.0; term.len()];
    while *norms.last().unwrap() > tol {
        if norms.len() >= max_terms {
            return Err(Error::NoConvergence {
                what: "hidden-link series",
                iterations: norms.len(),
                residual: *norms.last().unwrap(),
            });
        }
        op.apply(&term, &mut next);
        pair.remove_leading(&mut next);
        std::mem::swap(&mut term, &mut next);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        norms.push(l1_norm(&term));
    }
    Ok(HiddenSeries {
        sum,
        terms: norms.len(),
        norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_rr: f64,
    pub w_pr: f64,
    pub w_qr: f64,
}

impl Weights {
    pub fn sum(&self) -> f64 {
        self.w_rr + self.w_pr + self.w_qr
    }
}

/// Reduced Google matrix with its components. Rows and columns follow the
/// subset order.
#[derive(Debug, Clone)]
pub struct ReducedMatrices {
    pub subset: NodeSubset,
    pub alpha: f64,
    /// Node count of the full graph.
    pub n: usize,
    pub g_rr: DenseMatrix,
    pub g_pr: DenseMatrix,
    pub g_qr: DenseMatrix,
    pub g_qr_diag: DenseMatrix,
    pub g_qr_ndiag: DenseMatrix,
    pub g_r: DenseMatrix,
    /// 0 when the scattering set is empty.
    pub lambda_c: f64,
    pub psi_r: Vec<f64>,
    pub psi_l: Vec<f64>,
    pub weights: Weights,
    pub neg_weight: f64,
    /// Most terms used by any column of the hidden-link series.
    pub series_terms: usize,
    /// Largest final running-term norm over the columns.
    pub series_residual: f64,
}

struct ColumnParts {
    direct: Vec<f64>,
    projector: Vec<f64>,
    hidden: Vec<f64>,
    terms: usize,
    residual: f64,
}

/// Computes `G_R = G_rr + G_pr + G_qr` for `subset`.
pub fn reduce(
    google: &GoogleMatrix<'_>,
    subset: &NodeSubset,
    opts: &ReduceOptions,
) -> Result<ReducedMatrices> {
    let n = google.n();
    let nr = subset.len();
    if subset.indices().iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument(
            "subset does not belong to this graph".into(),
        ));
    }
    let op = Scattering::new(google, subset);

    let direct_column = |j: usize| -> Vec<f64> {
        let col = google.column(subset.indices()[j]);
        subset.indices().iter().map(|&i| col[i]).collect()
    };

    let (columns, lambda_c, psi_r, psi_l) = if op.dim() == 0 {
        let columns = (0..nr)
            .map(|j| ColumnParts {
                direct: direct_column(j),
                projector: vec![0.0; nr],
                hidden: vec![0.0; nr],
                terms: 0,
                residual: 0.0,
            })
            .collect::<Vec<_>>();
        (columns, 0.0, Vec::new(), Vec::new())
    } else {
        let pair = leading_eigenpair(&op, opts.eigen_tol, opts.eigen_max_iter)?;
        if !(pair.lambda < 1.0) {
            return Err(Error::Numerical(format!(
                "leading eigenvalue of the scattering block is {} (must be < 1)",
                pair.lambda
            )));
        }
        let rs_psi = op.to_subset(&pair.right);
        let gap = 1.0 - pair.lambda;
        let columns = (0..nr)
            .into_par_iter()
            .map(|j| -> Result<ColumnParts> {
                let b = op.from_subset(j);
                let coef = dot(&pair.left, &b) / gap;
                let series = hidden_series(&op, &pair, &b, opts.tol, opts.max_terms)?;
                Ok(ColumnParts {
                    direct: direct_column(j),
                    projector: rs_psi.iter().map(|x| x * coef).collect(),
                    hidden: op.to_subset(&series.sum),
                    terms: series.terms,
                    residual: series.residual(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (columns, pair.lambda, pair.right, pair.left)
    };

    let g_rr = DenseMatrix::from_columns(nr, |j| columns[j].direct.clone());
    let g_pr = DenseMatrix::from_columns(nr, |j| columns[j].projector.clone());
    let g_qr = DenseMatrix::from_columns(nr, |j| columns[j].hidden.clone());
    let mut g_r = g_rr.add(&g_pr).add(&g_qr);

    for (j, s) in g_r.column_sums().into_iter().enumerate() {
        if !((s - 1.0).abs() <= COLUMN_SUM_TOL) {
            return Err(Error::Numerical(format!(
                "column {} ({}) of the reduced matrix sums to {s}",
                j,
                subset.labels()[j]
            )));
        }
    }
    for i in 0..nr {
        for j in 0..nr {
            let v = g_r.get(i, j);
            if v < -NEGATIVE_CLAMP {
                return Err(Error::Numerical(format!(
                    "reduced matrix entry ({i}, {j}) is negative: {v:e}"
                )));
            }
            if v < 0.0 {
                g_r.set(i, j, 0.0);
            }
        }
    }

    let (g_qr_diag, g_qr_ndiag) = split_gqr(&g_qr);
    let scale = nr as f64;
    let weights = Weights {
        w_rr: g_rr.total() / scale,
        w_pr: g_pr.total() / scale,
        w_qr: g_qr.total() / scale,
    };
    Ok(ReducedMatrices {
        subset: subset.clone(),
        alpha: google.alpha(),
        n,
        neg_weight: negative_weight(&g_qr),
        g_rr,
        g_pr,
        g_qr,
        g_qr_diag,
        g_qr_ndiag,
        g_r,
        lambda_c,
        psi_r,
        psi_l,
        weights,
        series_terms: columns.iter().map(|c| c.terms).max().unwrap_or(0),
        series_residual: columns.iter().map(|c| c.residual).fold(0.0, f64::max),
    })
}

/// Diagonal and off-diagonal parts of a matrix; they sum back exactly.
pub fn split_gqr(g_qr: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let n = g_qr.n();
    let mut diag = DenseMatrix::zeros(n);
    let mut ndiag = g_qr.clone();
    for i in 0..n {
        diag.set(i, i, g_qr.get(i, i));
        ndiag.set(i, i, 0.0);
    }
    (diag, ndiag)
}

/// Total absolute value of the negative entries, divided by the dimension.
pub fn negative_weight(m: &DenseMatrix) -> f64 {
    if m.n() == 0 {
        return 0.0;
    }
    let neg: f64 = m.values().iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    neg / m.n() as f64
}

/// Stationary vector of `G_R`, normalized to unit mass.
pub fn reduced_pagerank(m: &ReducedMatrices, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    dense::stationary(&m.g_r, tol, max_iter)
}

/// Names of the matrix files in a reduced-matrix directory.
pub const COMPONENT_FILES: [&str; 6] = [
    "g_r.csv",
    "g_rr.csv",
    "g_pr.csv",
    "g_qr.csv",
    "g_qr_diag.csv",
    "g_qr_ndiag.csv",
];

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub lambda_c: f64,
    pub weights: Weights,
    pub neg_weight: f64,
    pub series_terms: usize,
    pub series_residual: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    pub edition: Option<String>,
    pub labels: Vec<String>,
}

impl ReducedMatrices {
    pub fn manifest(&self, edition: Option<&str>) -> Manifest {
        Manifest {
            lambda_c: self.lambda_c,
            weights: self.weights,
            neg_weight: self.neg_weight,
            series_terms: self.series_terms,
            series_residual: self.series_residual,
            alpha: self.alpha,
            n: self.n,
            n_r: self.subset.len(),
            edition: edition.map(str::to_owned),
            labels: self.subset.labels().to_vec(),
        }
    }

    fn components(&self) -> [&DenseMatrix; 6] {
        [
            &self.g_r,
            &self.g_rr,
            &self.g_pr,
            &self.g_qr,
            &self.g_qr_diag,
            &self.g_qr_ndiag,
        ]
    }

    /// Writes one CSV per component plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, edition: Option<&str>) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, m) in COMPONENT_FILES.iter().zip(self.components()) {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
            write_matrix_csv(m, self.subset.labels(), std::io::BufWriter::new(file))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&self.manifest(edition))?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::file(&path, e))?;
        Ok(())
    }
}

/// Square matrix as CSV with an empty corner cell and label headers on both
/// axes.
pub fn write_matrix_csv<W: Write>(m: &DenseMatrix, labels: &[String], w: W) -> Result<()> {
    if labels.len() != m.n() {
        return Err(Error::DimensionMismatch {
            expected: m.n(),
            got: labels.len(),
        });
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("").chain(labels.iter().map(String::as_str)))?;
    for (i, label) in labels.iter().enumerate() {
        out.write_record(
            std::iter::once(label.clone()).chain(m.row(i).iter().map(|&v| fmt_f64(v))),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_matrix_csv`]; row labels must repeat the header.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DenseMatrix)> {
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(std::io::BufReader::new(file));
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: format!("{}: empty matrix file", path.display()),
    })??;
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    for (row, rec) in records.enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != n + 1 || rec.get(0) != labels.get(row).map(String::as_str) {
            return Err(Error::Parse {
                line,
                msg: format!("{}: malformed matrix row", path.display()),
            });
        }
        for field in rec.iter().skip(1) {
            values.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("{}: invalid number {field:?}", path.display()),
            })?);
        }
    }
    if values.len() != n * n {
        return Err(Error::Parse {
            line: values.len() / n.max(1) + 2,
            msg: format!("{}: expected {n} rows", path.display()),
        });
    }
    Ok((labels, DenseMatrix::from_row_major(n, values)?))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
