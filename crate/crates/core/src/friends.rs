//! Top-k friends and followers networks of a reduced-matrix component.
//!
//! The friends of node `j` are the `k` largest off-diagonal entries of
//! column `j` (where `j` links to); its followers are the `k` largest
//! off-diagonal entries of row `j` (who links to `j`). Starting from a set of
//! leaders, the network is closed by expanding every newly reached node with
//! the same `k` until no edge is added.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::io::Write;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::format::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Friends,
    Followers,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "friends" => Ok(Mode::Friends),
            "followers" => Ok(Mode::Followers),
            _ => Err(Error::InvalidArgument(format!(
                "mode must be \"friends\" or \"followers\", got {s:?}"
            ))),
        }
    }
}

fn top_k(values: impl Iterator<Item = (usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = values.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// `k` largest off-diagonal entries of column `j`, descending; ties go to
/// the lower index.
pub fn top_friends(m: &DenseMatrix, j: usize, k: usize) -> Vec<(usize, f64)> {
    top_k((0..m.n()).filter(|&i| i != j).map(|i| (i, m.get(i, j))), k)
}

/// `k` largest off-diagonal entries of row `j`.
pub fn top_followers(m: &DenseMatrix, j: usize, k: usize) -> Vec<(usize, f64)> {
    top_k((0..m.n()).filter(|&i| i != j).map(|i| (i, m.get(j, i))), k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub value: f64,
}

/// Nodes are subset positions; edges always point along the link
/// direction (leader → friend, follower → leader).
#[derive(Debug, Clone, PartialEq)]
pub struct FriendNetwork {
    pub labels: Vec<String>,
    pub nodes: BTreeSet<usize>,
    pub primary_edges: Vec<Edge>,
    pub closure_edges: Vec<Edge>,
    /// Weight of every node of the reduced network, indexed by position.
    pub node_weights: Vec<f64>,
}

/// Builds the closed top-`k` network grown from `leaders`.
pub fn build_network(
    m: &DenseMatrix,
    labels: &[String],
    leaders: &[usize],
    k: usize,
    mode: Mode,
    weights: &[f64],
) -> Result<FriendNetwork> {
    let n = m.n();
    if labels.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if labels.len() != n {
                labels.len()
            } else {
                weights.len()
            },
        });
    }
    if k >= n.max(1) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be below N_r = {n}"
        )));
    }
    let mut nodes = BTreeSet::new();
    for &l in leaders {
        if l >= n {
            return Err(Error::InvalidArgument(format!("leader {l} out of range")));
        }
        if !nodes.insert(l) {
            return Err(Error::InvalidArgument(format!(
                "leader {} given twice",
                labels[l]
            )));
        }
    }

    let neighbours = |j: usize| -> Vec<Edge> {
        match mode {
            Mode::Friends => top_friends(m, j, k)
                .into_iter()
                .map(|(i, value)| Edge {
                    src: j,
                    dst: i,
                    value,
                })
                .collect(),
            Mode::Followers => top_followers(m, j, k)
                .into_iter()
                .map(|(i, value)| Edge {
                    src: i,
                    dst: j,
                    value,
                })
                .collect(),
        }
    };
    let other_end = |e: &Edge, from: usize| if e.src == from { e.dst } else { e.src };

    let mut seen_edges = BTreeSet::new();
    let mut primary_edges = Vec::new();
    let mut queue = VecDeque::new();
    for &l in leaders {
        for e in neighbours(l) {
            let next = other_end(&e, l);
            if seen_edges.insert((e.src, e.dst)) {
                primary_edges.push(e);
            }
            if nodes.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let mut closure_edges = Vec::new();
    while let Some(j) = queue.pop_front() {
        for e in neighbours(j) {
            let next = other_end(&e, j);
            if seen_edges.insert((e.src, e.dst)) {
                closure_edges.push(e);
            }
            if nodes.insert(next) {
                queue.push_back(next);
            }
        }
    }
    Ok(FriendNetwork {
        labels: labels.to_vec(),
        nodes,
        primary_edges,
        closure_edges,
        node_weights: weights.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotStyle {
    /// Node width (inches) given to the heaviest node; others scale linearly.
    pub max_width: f64,
    pub primary: &'static str,
    pub closure: &'static str,
}

impl Default for DotStyle {
    fn default() -> Self {
        DotStyle {
            max_width: 1.5,
            primary: "style=bold, color=black",
            closure: "color=red",
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

impl FriendNetwork {
    fn sorted_edges(&self) -> Vec<(&Edge, bool)> {
        let mut edges: Vec<(&Edge, bool)> = self
            .primary_edges
            .iter()
            .map(|e| (e, true))
            .chain(self.closure_edges.iter().map(|e| (e, false)))
            .collect();
        edges.sort_by(|a, b| {
            (&self.labels[a.0.src], &self.labels[a.0.dst])
                .cmp(&(&self.labels[b.0.src], &self.labels[b.0.dst]))
        });
        edges
    }

    /// Graphviz digraph with nodes and edges sorted by label.
    pub fn to_dot(&self, style: &DotStyle) -> String {
        let mut out = String::from("digraph {\n");
        if self.nodes.is_empty() {
            out.push_str("}\n");
            return out;
        }
        let max_w = self
            .nodes
            .iter()
            .map(|&i| self.node_weights[i])
            .fold(0.0, f64::max);
        let mut nodes: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &self.nodes {
            nodes.insert(&self.labels[i], i);
        }
        out.push_str("  node [shape=circle, fixedsize=true];\n");
        for (label, i) in nodes {
            let w = self.node_weights[i];
            let width = if max_w > 0.0 {
                style.max_width * w / max_w
            } else {
                style.max_width
            };
            let _ = writeln!(
                out,
                "  {} [width={}, weight={}];",
                quote(label),
                fmt_f64(width),
                fmt_f64(w)
            );
        }
        for (e, primary) in self.sorted_edges() {
            let _ = writeln!(
                out,
                "  {} -> {} [{}];",
                quote(&self.labels[e.src]),
                quote(&self.labels[e.dst]),
                if primary {
                    style.primary
                } else {
                    style.closure
                }
            );
        }
        out.push_str("}\n");
        out
    }

    /// `src_label,dst_label,value,kind`
    pub fn write_edges_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["src_label", "dst_label", "value", "kind"])?;
        for (e, primary) in self.sorted_edges() {
            out.write_record([
                self.labels[e.src].as_str(),
                self.labels[e.dst].as_str(),
                &fmt_f64(e.value),
                if primary { "primary" } else { "closure" },
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
