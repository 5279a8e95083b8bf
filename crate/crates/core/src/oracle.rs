//! Dense reference implementations.
//!
//! Everything here is O(N³) and meant for graphs of at most
//! [`MAX_ORACLE_NODES`] nodes. These are the ground truth the sparse paths
//! are tested against, so they take the direct route: explicit matrices,
//! LU solves and a full Schur decomposition.

use nalgebra::DMatrix;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

pub const MAX_ORACLE_NODES: usize = 2000;

fn check_size(n: usize) -> Result<()> {
    if n > MAX_ORACLE_NODES {
        return Err(Error::InvalidArgument(format!(
            "{n} nodes exceed the dense oracle limit of {MAX_ORACLE_NODES}"
        )));
    }
    Ok(())
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n(), m.n(), m.values())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_columns(m.nrows(), |j| m.column(j).iter().copied().collect())
}

/// Explicit Google matrix: `α A_ij / k_out(j) + (1 − α)/N`, and `1/N` in
/// dangling columns.
pub fn dense_google(g: &DirectedGraph, alpha: f64) -> Result<DenseMatrix> {
    let n = g.node_count();
    check_size(n)?;
    let mut adjacency = vec![vec![0.0; n]; n];
    for (src, dst) in g.edges() {
        adjacency[dst][src] = 1.0;
    }
    let mut m = DenseMatrix::zeros(n);
    for j in 0..n {
        let k_out: f64 = (0..n).map(|i| adjacency[i][j]).sum();
        for i in 0..n {
            let s = if k_out == 0.0 {
                1.0 / n as f64
            } else {
                adjacency[i][j] / k_out
            };
            m.set(i, j, alpha * s + (1.0 - alpha) / n as f64);
        }
    }
    Ok(m)
}

/// Solves `(M − 1) p = 0` with `Σ p = 1` directly.
pub fn dense_stationary(m: &DenseMatrix) -> Result<Vec<f64>> {
    let n = m.n();
    check_size(n)?;
    let mut a = to_na(m) - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let p = a.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(p.iter().copied().collect())
}

fn block(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m.get(rows[a], cols[b]))
}

fn complement(n: usize, subset: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !subset.contains(i)).collect()
}

/// `G_rr + G_rs (1 − G_ss)⁻¹ G_sr` by a dense LU solve.
pub fn dense_oracle_reduce(g: &DenseMatrix, subset: &[usize]) -> Result<DenseMatrix> {
    let n = g.n();
    check_size(n)?;
    let s = complement(n, subset);
    let g_rr = block(g, subset, subset);
    if s.is_empty() {
        return Ok(from_na(&g_rr));
    }
    let a = DMatrix::identity(s.len(), s.len()) - block(g, &s, &s);
    let x = a.lu().solve(&block(g, &s, subset)).ok_or(Error::Singular)?;
    Ok(from_na(&(g_rr + block(g, subset, &s) * x)))
}

/// Truncated plain Neumann sum `G_rs Σ_{l=0}^{l_max} G_ssˡ G_sr`, without
/// any projector split.
pub fn dense_neumann_indirect(
    g: &DenseMatrix,
    subset: &[usize],
    l_max: usize,
) -> Result<DenseMatrix> {
    let n = g.n();
    check_size(n)?;
    let s = complement(n, subset);
    if s.is_empty() {
        return Ok(DenseMatrix::zeros(subset.len()));
    }
    let g_ss = block(g, &s, &s);
    let mut term = block(g, &s, subset);
    let mut sum = term.clone();
    for _ in 0..l_max {
        term = &g_ss * term;
        sum += &term;
    }
    Ok(from_na(&(block(g, subset, &s) * sum)))
}

/// Dense `G_ss` block; rows and columns are the complement of `subset`,
/// ascending.
pub fn dense_ss_block(g: &DenseMatrix, subset: &[usize]) -> DenseMatrix {
    let s = complement(g.n(), subset);
    from_na(&block(g, &s, &s))
}

/// Eigenvalue of largest modulus from a Schur decomposition, with right and
/// left null vectors of `M − λ` from an SVD. Normalized as `Σ right = 1`,
/// `left · right = 1`.
pub fn dense_leading_eigenpair(m: &DenseMatrix) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let n = m.n();
    check_size(n)?;
    let a = to_na(m);
    let eig = a.clone().complex_eigenvalues();
    let lead = eig
        .iter()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .ok_or_else(|| Error::InvalidArgument("empty matrix".into()))?;
    if lead.im.abs() > 1e-12 {
        return Err(Error::Numerical(format!(
            "leading eigenvalue {lead} is complex"
        )));
    }
    let lambda = lead.re;
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(true, true);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .unwrap();
    let v_t = svd.v_t.as_ref().unwrap();
    let u = svd.u.as_ref().unwrap();
    let mut right: Vec<f64> = v_t.row(k).iter().copied().collect();
    let mut left: Vec<f64> = u.column(k).iter().copied().collect();
    let mass: f64 = right.iter().sum();
    right.iter_mut().for_each(|x| *x /= mass);
    let overlap: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    left.iter_mut().for_each(|x| *x /= overlap);
    Ok((lambda, right, left))
}
