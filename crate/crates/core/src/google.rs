//! Implicit Google matrix `G = α S + (1 − α)/N` with uniform dangling
//! columns, and its PageRank/CheiRank vectors.
//!
//! `G` is never stored. A product `G v` is evaluated as
//!
//! > α · (S₀ v) + (α · Σ_{dangling j} v_j + (1 − α) · Σ_j v_j) / N
//!
//! where `S₀` holds only the link part of the transition matrix. The link
//! part is a gather over the incoming adjacency, so rows are independent and
//! large products run on the rayon pool without changing the result bits.

use std::io::Write;

use rayon::prelude::*;

use crate::dense::l1_dist;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::graph::{DirectedGraph, NodeSubset};

/// Below this size products run on the calling thread.
const PARALLEL_MIN_NODES: usize = 1 << 14;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Google matrix of a graph, represented implicitly.
#[derive(Debug, Clone)]
pub struct GoogleMatrix<'g> {
    graph: &'g DirectedGraph,
    alpha: f64,
    incoming: DirectedGraph,
    inv_out: Vec<f64>,
    dangling: Vec<usize>,
}

impl<'g> GoogleMatrix<'g> {
    pub fn new(graph: &'g DirectedGraph, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping factor must lie in (0, 1), got {alpha}"
            )));
        }
        if graph.node_count() == 0 {
            return Err(Error::InvalidArgument("graph has no nodes".into()));
        }
        let n = graph.node_count();
        let mut inv_out = vec![0.0; n];
        let mut dangling = Vec::new();
        for (j, w) in inv_out.iter_mut().enumerate() {
            match graph.out_degree(j) {
                0 => dangling.push(j),
                k => *w = 1.0 / k as f64,
            }
        }
        Ok(GoogleMatrix {
            graph,
            alpha,
            incoming: graph.invert(),
            inv_out,
            dangling,
        })
    }

    pub fn graph(&self) -> &'g DirectedGraph {
        self.graph
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.inv_out.len()
    }

    pub fn dangling_nodes(&self) -> &[usize] {
        &self.dangling
    }

    /// `y = G x`. Cost `O(edges + N)`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n();
        check_len(n, x.len())?;
        check_len(n, y.len())?;
        let total: f64 = x.iter().sum();
        let dangling: f64 = self.dangling.iter().map(|&j| x[j]).sum();
        let base = (self.alpha * dangling + (1.0 - self.alpha) * total) / n as f64;
        let scaled: Vec<f64> = x.iter().zip(&self.inv_out).map(|(v, w)| v * w).collect();
        let row = |(i, out): (usize, &mut f64)| {
            let s: f64 = self
                .incoming
                .raw_successors(i)
                .iter()
                .map(|&j| scaled[j as usize])
                .sum();
            *out = self.alpha * s + base;
        };
        if n >= PARALLEL_MIN_NODES {
            y.par_iter_mut().enumerate().for_each(row);
        } else {
            y.iter_mut().enumerate().for_each(row);
        }
        Ok(())
    }

    /// `y = Gᵀ x`. Dangling columns of `G` are uniform, so their entries are
    /// `Σ x / N`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n();
        check_len(n, x.len())?;
        check_len(n, y.len())?;
        let total: f64 = x.iter().sum();
        let teleport = (1.0 - self.alpha) * total / n as f64;
        let uniform = total / n as f64;
        let col = |(j, out): (usize, &mut f64)| {
            *out = if self.inv_out[j] == 0.0 {
                uniform
            } else {
                let s: f64 = self
                    .graph
                    .raw_successors(j)
                    .iter()
                    .map(|&i| x[i as usize])
                    .sum();
                self.alpha * self.inv_out[j] * s + teleport
            };
        };
        if n >= PARALLEL_MIN_NODES {
            y.par_iter_mut().enumerate().for_each(col);
        } else {
            y.iter_mut().enumerate().for_each(col);
        }
        Ok(())
    }

    /// Column `j` of `G`, in `O(N)`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let n = self.n();
        if self.inv_out[j] == 0.0 {
            return vec![1.0 / n as f64; n];
        }
        let mut col = vec![(1.0 - self.alpha) / n as f64; n];
        let link = self.alpha * self.inv_out[j];
        for &i in self.graph.raw_successors(j) {
            col[i as usize] += link;
        }
        col
    }

    /// Single entry `G_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.n() as f64;
        if self.inv_out[j] == 0.0 {
            1.0 / n
        } else if self
            .graph
            .raw_successors(j)
            .binary_search(&(i as u32))
            .is_ok()
        {
            self.alpha * self.inv_out[j] + (1.0 - self.alpha) / n
        } else {
            (1.0 - self.alpha) / n
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Stationary probabilities and the induced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub p: Vec<f64>,
    /// Nodes by decreasing probability; ties by ascending index.
    pub order: Vec<usize>,
    /// L1 distance between the last two iterates.
    pub residual: f64,
    pub iterations: usize,
}

impl RankVector {
    /// 1-based rank `K` of every node.
    pub fn ranks(&self) -> Vec<usize> {
        let mut k = vec![0; self.order.len()];
        for (pos, &node) in self.order.iter().enumerate() {
            k[node] = pos + 1;
        }
        k
    }

    /// `index,label,p,rank` in node-index order.
    pub fn write_csv<W: Write>(&self, graph: &DirectedGraph, w: W) -> Result<()> {
        let ranks = self.ranks();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "label", "p", "rank"])?;
        for (i, (&p, &k)) in self.p.iter().zip(&ranks).enumerate() {
            out.write_record([i.to_string(), graph.label(i), fmt_f64(p), k.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Node order by decreasing value, ties broken by ascending index.
pub fn rank_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    order
}

/// Local 1-based rank of each subset member (in subset order) that keeps the
/// members in their global order.
pub fn local_ranks(order: &[usize], subset: &NodeSubset) -> Vec<usize> {
    let mut position = vec![usize::MAX; order.len()];
    for (pos, &node) in order.iter().enumerate() {
        position[node] = pos;
    }
    let mut members: Vec<usize> = (0..subset.len()).collect();
    members.sort_by_key(|&m| position[subset.indices()[m]]);
    let mut local = vec![0; subset.len()];
    for (k, m) in members.into_iter().enumerate() {
        local[m] = k + 1;
    }
    local
}

/// PageRank by power iteration from the uniform vector.
pub fn pagerank(google: &GoogleMatrix<'_>, tol: f64, max_iter: usize) -> Result<RankVector> {
    power_iteration(google, tol, max_iter, |_| {})
}

/// PageRank of the link-inverted graph with the same damping factor.
pub fn cheirank(google: &GoogleMatrix<'_>, tol: f64, max_iter: usize) -> Result<RankVector> {
    let inverted = google.graph().invert();
    let g = GoogleMatrix::new(&inverted, google.alpha())?;
    pagerank(&g, tol, max_iter)
}

/// Power iteration; `on_step` sees the residual of every iteration.
pub(crate) fn power_iteration(
    google: &GoogleMatrix<'_>,
    tol: f64,
    max_iter: usize,
    mut on_step: impl FnMut(f64),
) -> Result<RankVector> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = google.n();
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        google.apply(&p, &mut next)?;
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= mass);
        residual = l1_dist(&next, &p);
        on_step(residual);
        std::mem::swap(&mut p, &mut next);
        if residual <= tol {
            let order = rank_order(&p);
            return Ok(RankVector {
                p,
                order,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "PageRank power iteration",
        iterations: max_iter,
        residual,
    })
}

/// `label,index,K,K_star,local_K,local_K_star` for each subset member.
pub fn write_subset_ranks<W: Write>(
    pagerank: &RankVector,
    cheirank: &RankVector,
    subset: &NodeSubset,
    w: W,
) -> Result<()> {
    let k = pagerank.ranks();
    let k_star = cheirank.ranks();
    let local_k = local_ranks(&pagerank.order, subset);
    let local_k_star = local_ranks(&cheirank.order, subset);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "index", "K", "K_star", "local_K", "local_K_star"])?;
    for (m, (&node, label)) in subset.indices().iter().zip(subset.labels()).enumerate() {
        out.write_record([
            label.clone(),
            node.to_string(),
            k[node].to_string(),
            k_star[node].to_string(),
            local_k[m].to_string(),
            local_k_star[m].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
