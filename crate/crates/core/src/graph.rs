//! Graphs for walker dynamics: line/ring, complete, star and custom
//! edge-list graphs, with the Laplacian convention `L_jk = A_jk` off the
//! diagonal and `L_jj = -d_j`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are unordered pairs stored with the smaller index first, kept in
/// construction order; for line and ring graphs that order runs along the
/// chain, which is what the correlation-domain machinery expects. The graph
/// is immutable after construction and safe to share across worker threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Build a graph from an explicit edge list.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 1 {
            return Err(Error::GraphTooSmall { min: 1, got: n });
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::new();
        for (j, k) in edges {
            if j == k {
                return Err(Error::SelfLoop(j));
            }
            let node = j.max(k);
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
            let pair = (j.min(k), j.max(k));
            if !seen.insert(pair) {
                return Err(Error::DuplicateEdge(pair.0, pair.1));
            }
            normalized.push(pair);
        }
        Ok(Self {
            n,
            edges: normalized,
            labels: None,
        })
    }

    /// Attach node names; `labels.len()` must equal the node count.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidParam {
                name: "labels",
                msg: format!("expected {} labels, got {}", self.n, labels.len()),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Path graph `0 - 1 - ... - (n-1)`, closed into a ring when `periodic`.
    pub fn line(n: usize, periodic: bool) -> Result<Self> {
        let min = if periodic { 3 } else { 2 };
        if n < min {
            return Err(Error::GraphTooSmall { min, got: n });
        }
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|j| (j, j + 1)).collect();
        if periodic {
            edges.push((n - 1, 0));
        }
        Self::new(n, edges)
    }

    /// Complete graph: every pair of nodes connected.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall { min: 2, got: n });
        }
        let edges = (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k)));
        Self::new(n, edges)
    }

    /// Star graph: node 0 is the center, connected to all others.
    pub fn star(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GraphTooSmall { min: 2, got: n });
        }
        Self::new(n, (1..n).map(|k| (0, k)))
    }

    /// Parse the edge-list format: a header line `n=<count>` followed by one
    /// `j k` pair per line. Blank lines and `#` comments are ignored;
    /// isolated nodes are allowed.
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if n.is_none() {
                let rest = line.strip_prefix("n=").ok_or_else(|| Error::EdgeListParse {
                    line: idx + 1,
                    msg: "expected header `n=<count>`".into(),
                })?;
                let count = rest.trim().parse::<usize>().map_err(|e| Error::EdgeListParse {
                    line: idx + 1,
                    msg: format!("bad node count: {e}"),
                })?;
                n = Some(count);
                continue;
            }
            let mut parts = line.split_whitespace();
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::EdgeListParse {
                        line: idx + 1,
                        msg: "expected exactly two node indices".into(),
                    })
                }
            };
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::EdgeListParse {
                    line: idx + 1,
                    msg: format!("bad node index `{s}`: {e}"),
                })
            };
            edges.push((parse(a)?, parse(b)?));
        }
        let n = n.ok_or_else(|| Error::EdgeListParse {
            line: 0,
            msg: "missing header `n=<count>`".into(),
        })?;
        Self::new(n, edges)
    }

    /// Load the edge-list format from a file.
    pub fn from_edge_list_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_edge_list_str(&std::fs::read_to_string(path)?)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as normalized `(j, k)` pairs with `j < k`, in construction order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(j, k)| j == node || k == node)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(j, k) in &self.edges {
            d[j] += 1;
            d[k] += 1;
        }
        d
    }

    /// True when every node has degree at most 2, i.e. the edge sequence runs
    /// along a chain or ring. Correlation domains are only defined there.
    pub fn is_chain_like(&self) -> bool {
        self.degrees().iter().all(|&d| d <= 2)
    }

    /// Adjacency matrix `A` with `A_jk = 1` on edges.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(j, k) in &self.edges {
            a[[j, k]] = 1.0;
            a[[k, j]] = 1.0;
        }
        a
    }

    /// Graph Laplacian with `L_jk = A_jk` for `j != k` and `L_jj = -d_j`.
    /// Rows sum to zero; the walk generator is `H = -J0 L`.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = self.adjacency();
        for (j, &d) in self.degrees().iter().enumerate() {
            l[[j, j]] = -(d as f64);
        }
        l
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph(n={}, edges={})", self.n, self.edges.len())
    }
}
