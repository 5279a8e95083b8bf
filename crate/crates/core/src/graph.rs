//! Directed graphs in compressed out-adjacency form, with an optional label
//! sidecar.
//!
//! Edges are binary: duplicates collapse to a single edge and self-loops are
//! dropped at construction time; both are counted in [`LoadStats`].

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bidirectional node-index ↔ label map. Nodes may be unlabeled.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels {
    names: Vec<Option<String>>,
    index: HashMap<String, usize>,
}

impl Labels {
    /// Builds a map for `n` nodes from `(index, label)` pairs.
    pub fn from_pairs<I, S>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
        S: Into<String>,
    {
        let mut names = vec![None; n];
        let mut index = HashMap::new();
        for (i, label) in pairs {
            let label = label.into();
            if i >= n {
                return Err(Error::LabelOutOfRange { index: i, nodes: n });
            }
            if index.insert(label.clone(), i).is_some() || names[i].is_some() {
                return Err(Error::DuplicateLabel(label));
            }
            names[i] = Some(label);
        }
        Ok(Labels { names, index })
    }

    pub fn get(&self, node: usize) -> Option<&str> {
        self.names.get(node).and_then(|s| s.as_deref())
    }

    pub fn lookup(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Labeled nodes in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.names
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_deref().map(|s| (i, s)))
    }
}

/// Counters collected while building a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadStats {
    pub nodes: usize,
    pub edges: usize,
    pub duplicates: usize,
    pub self_loops: usize,
}

/// Immutable directed graph with dense 0-based node indices.
///
/// `targets[offsets[j]..offsets[j + 1]]` lists, in ascending order, the
/// nodes that `j` points to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    labels: Option<Labels>,
}

impl DirectedGraph {
    /// Builds a graph on `n` nodes from `(src, dst)` pairs.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, LoadStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "{n} nodes exceed u32 indexing"
            )));
        }
        let mut stats = LoadStats {
            nodes: n,
            ..LoadStats::default()
        };
        let mut pairs = Vec::new();
        for (src, dst) in edges {
            if src >= n || dst >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge {src} -> {dst} out of range for {n} nodes"
                )));
            }
            if src == dst {
                stats.self_loops += 1;
            } else {
                pairs.push((src as u32, dst as u32));
            }
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        stats.duplicates = before - pairs.len();
        stats.edges = pairs.len();

        let mut offsets = vec![0usize; n + 1];
        for &(src, _) in &pairs {
            offsets[src as usize + 1] += 1;
        }
        for j in 0..n {
            offsets[j + 1] += offsets[j];
        }
        let targets = pairs.into_iter().map(|(_, dst)| dst).collect();
        Ok((
            DirectedGraph {
                offsets,
                targets,
                labels: None,
            },
            stats,
        ))
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.names.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: labels.names.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Nodes that `node` points to, ascending.
    pub fn successors(&self, node: usize) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.targets[self.offsets[node]..self.offsets[node + 1]]
            .iter()
            .map(|&t| t as usize)
    }

    pub(crate) fn raw_successors(&self, node: usize) -> &[u32] {
        &self.targets[self.offsets[node]..self.offsets[node + 1]]
    }

    /// All edges as `(src, dst)`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |j| self.successors(j).map(move |i| (j, i)))
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Label of `node`, falling back to its decimal index.
    pub fn label(&self, node: usize) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(node))
            .map_or_else(|| node.to_string(), str::to_owned)
    }

    /// The same graph with every edge reversed. Labels are kept.
    pub fn invert(&self) -> DirectedGraph {
        let n = self.node_count();
        let mut offsets = vec![0usize; n + 1];
        for &t in &self.targets {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; self.targets.len()];
        // Sources are visited in ascending order, so each reversed list is sorted.
        for j in 0..n {
            for &i in self.raw_successors(j) {
                let slot = &mut cursor[i as usize];
                targets[*slot] = j as u32;
                *slot += 1;
            }
        }
        DirectedGraph {
            offsets,
            targets,
            labels: self.labels.clone(),
        }
    }

    /// Writes the edge list with a `# nodes: N` header so trailing isolated
    /// nodes survive a reload.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# nodes: {}", self.node_count())?;
        for (src, dst) in self.edges() {
            writeln!(w, "{src} {dst}")?;
        }
        Ok(())
    }

    pub fn write_label_map<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(labels) = &self.labels {
            for (i, label) in labels.iter() {
                writeln!(w, "{i}\t{label}")?;
            }
        }
        Ok(())
    }

    /// Ordered subset from labels. Every unknown label is reported at once.
    pub fn resolve_subset<S: AsRef<str>>(&self, labels: &[S]) -> Result<NodeSubset> {
        let map = self.labels.as_ref().ok_or(Error::NoLabels)?;
        let mut unknown = Vec::new();
        let mut indices = Vec::with_capacity(labels.len());
        for label in labels {
            match map.lookup(label.as_ref()) {
                Some(i) => indices.push(i),
                None => unknown.push(label.as_ref().to_owned()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownLabels(unknown));
        }
        NodeSubset::new(self, indices)
    }
}

/// Parses an edge list and an optional label map.
///
/// Edge lines hold `src dst`; blank lines and lines starting with `#` are
/// skipped, except the `# nodes: N` directive which sets a minimum node
/// count. Label lines hold `index<TAB>label`.
pub fn load_edge_list<R: BufRead, L: BufRead>(
    edges: R,
    labels: Option<L>,
) -> Result<(DirectedGraph, LoadStats)> {
    let mut declared = 0usize;
    let mut pairs = Vec::new();
    let mut max_node: Option<usize> = None;
    for (lineno, line) in edges.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(count) = comment.trim().strip_prefix("nodes:") {
                declared = count.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad node count directive {line:?}"),
                })?;
            }
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected \"src dst\", got {line:?}"),
            });
        };
        let parse = |tok: &str| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid node index {tok:?}"),
            })
        };
        let (src, dst) = (parse(a)?, parse(b)?);
        max_node = Some(max_node.unwrap_or(0).max(src).max(dst));
        pairs.push((src, dst));
    }
    let n = declared.max(max_node.map_or(0, |m| m + 1));
    let (graph, stats) = DirectedGraph::from_edges(n, pairs)?;

    let graph = match labels {
        None => graph,
        Some(reader) => {
            let mut entries = Vec::new();
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                let line = line.trim_end_matches(['\r', '\n']);
                if line.trim().is_empty() {
                    continue;
                }
                let Some((idx, label)) = line.split_once('\t') else {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected \"index<TAB>label\", got {line:?}"),
                    });
                };
                let idx = idx.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("invalid node index {idx:?}"),
                })?;
                entries.push((idx, label.to_owned()));
            }
            let labels = Labels::from_pairs(n, entries)?;
            graph.with_labels(labels)?
        }
    };
    Ok((graph, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Uniformly random distinct pairs.
    Uniform,
    /// Destinations drawn proportionally to current in-degree (plus a
    /// uniform component), giving a heavy-tailed in-degree distribution.
    Preferential,
}

/// Deterministic random graph with exactly `m` distinct non-loop edges.
pub fn generate_synthetic(n: usize, m: usize, seed: u64, model: Model) -> Result<DirectedGraph> {
    let capacity = n.saturating_mul(n.saturating_sub(1));
    if m > capacity {
        return Err(Error::InvalidArgument(format!(
            "{m} edges do not fit in a simple digraph on {n} nodes (max {capacity})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(usize, usize)> = if m == 0 {
        Vec::new()
    } else if model == Model::Uniform && 2 * m > capacity {
        // Dense request: sample without replacement from all pairs.
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        let (chosen, _) = all.partial_shuffle(&mut rng, m);
        chosen.to_vec()
    } else {
        let mut seen = HashSet::with_capacity(m);
        let mut out = Vec::with_capacity(m);
        // Every accepted destination is appended, so sampling from this pool
        // is sampling proportionally to in-degree.
        let mut pool: Vec<usize> = Vec::with_capacity(m);
        while out.len() < m {
            let src = rng.gen_range(0..n);
            let dst = match model {
                Model::Preferential if !pool.is_empty() && rng.gen_bool(0.5) => {
                    pool[rng.gen_range(0..pool.len())]
                }
                _ => rng.gen_range(0..n),
            };
            if src != dst && seen.insert((src, dst)) {
                out.push((src, dst));
                pool.push(dst);
            }
        }
        out
    };
    Ok(DirectedGraph::from_edges(n, edges)?.0)
}

/// Ordered, duplicate-free selection of nodes. Its order defines the row and
/// column order of every reduced matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSubset {
    indices: Vec<usize>,
    labels: Vec<String>,
}

impl NodeSubset {
    /// Validates `indices` against `graph`. The full node set is accepted and
    /// yields an empty scattering set.
    pub fn new(graph: &DirectedGraph, indices: Vec<usize>) -> Result<Self> {
        let n = graph.node_count();
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty node subset".into()));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "node {i} out of range for {n} nodes"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateLabel(graph.label(i)));
            }
        }
        let labels = indices.iter().map(|&i| graph.label(i)).collect();
        Ok(NodeSubset { indices, labels })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Nodes outside the subset, ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        let mut inside = vec![false; n];
        for &i in &self.indices {
            inside[i] = true;
        }
        (0..n).filter(|&i| !inside[i]).collect()
    }
}
