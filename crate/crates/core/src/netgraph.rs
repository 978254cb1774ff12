//! Undirected, unweighted, connected communication graphs.
//!
//! Nodes are numbered from 1. Construction validates the edge list and
//! rejects disconnected graphs, so every `NetworkGraph` in circulation has a
//! Laplacian with a one-dimensional kernel.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::densela::{sym_eig_desc, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl NetworkGraph {
    /// Validate an edge list on nodes `1..=n`.
    ///
    /// Pairs are unordered; `(2, 1)` and `(1, 2)` name the same edge and may
    /// not both appear. A single node with no edges is accepted as the
    /// trivial connected graph.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("a graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::Graph(format!("edge ({i},{j}) outside nodes 1..={n}")));
            }
            if i == j {
                return Err(Error::Graph(format!("self-loop at node {i}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::Graph(format!("duplicate edge ({i},{j})")));
            }
        }
        let g = Self { node_count: n, edges: set };
        let components = g.component_count();
        if components != 1 {
            return Err(Error::Disconnected { nodes: n, components });
        }
        Ok(g)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            // C2 would need a double edge; fall back to the path.
            return Self::path(n);
        }
        let edges: Vec<_> = (1..=n).map(|i| (i, i % n + 1)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        Self::from_edges(n, &edges)
    }

    /// The one-node graph. Its Laplacian is `[0]`.
    pub fn single() -> Self {
        Self { node_count: 1, edges: BTreeSet::new() }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// 1-based neighbour lists, indexed by `node - 1`.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            adj[i - 1].push(j);
            adj[j - 1].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// `L = D − A_G`.
    pub fn laplacian(&self) -> Matrix {
        let n = self.node_count;
        let mut l = Matrix::zeros(n, n);
        for &(i, j) in &self.edges {
            let (a, b) = (i - 1, j - 1);
            l[(a, b)] -= 1.0;
            l[(b, a)] -= 1.0;
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
        }
        l
    }

    /// `(λ₁(L), λ_{n−1}(L))`: the largest and the second smallest Laplacian
    /// eigenvalue. The second entry is 0 for the single-node graph.
    pub fn spectrum_extremes(&self) -> (f64, f64) {
        let ev = sym_eig_desc(&self.laplacian()).expect("laplacian is symmetric");
        let n = ev.len();
        let fiedler = if n >= 2 { ev[n - 2] } else { 0.0 };
        (ev[0], fiedler)
    }

    /// `λ_{n−1}(L)`, the algebraic connectivity.
    pub fn algebraic_connectivity(&self) -> f64 {
        self.spectrum_extremes().1
    }

    /// `λ₁(L)`.
    pub fn largest_laplacian_eigenvalue(&self) -> f64 {
        self.spectrum_extremes().0
    }

    fn component_count(&self) -> usize {
        let n = self.node_count;
        let adj = self.neighbors();
        let mut seen = vec![false; n];
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w - 1] {
                        seen[w - 1] = true;
                        stack.push(w - 1);
                    }
                }
            }
        }
        components
    }
}

/// Outer graph over clusters plus one inner graph per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleLayerNetwork {
    pub outer: NetworkGraph,
    pub inner: Vec<NetworkGraph>,
}

impl DoubleLayerNetwork {
    pub fn new(outer: NetworkGraph, inner: Vec<NetworkGraph>) -> Result<Self> {
        let n = outer.node_count();
        if inner.len() != n {
            return Err(Error::Graph(format!(
                "{} inner graphs for {n} clusters",
                inner.len()
            )));
        }
        if let Some((i, g)) = inner.iter().enumerate().find(|(_, g)| g.node_count() != n) {
            return Err(Error::Graph(format!(
                "inner graph of cluster {} has {} nodes, expected {n}",
                i + 1,
                g.node_count()
            )));
        }
        Ok(Self { outer, inner })
    }

    pub fn clusters(&self) -> usize {
        self.outer.node_count()
    }
}

/// Graph description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Cycle,
    Complete,
    Path,
    Custom,
}

impl GraphSpec {
    pub fn build(&self) -> Result<NetworkGraph> {
        if self.kind != GraphKind::Custom && !self.edges.is_empty() {
            return Err(Error::Graph("edges are only accepted for kind \"custom\"".into()));
        }
        if self.n == 1 {
            return match self.edges.is_empty() {
                true => Ok(NetworkGraph::single()),
                false => Err(Error::Graph("a one-node graph has no edges".into())),
            };
        }
        match self.kind {
            GraphKind::Cycle => NetworkGraph::cycle(self.n),
            GraphKind::Complete => NetworkGraph::complete(self.n),
            GraphKind::Path => NetworkGraph::path(self.n),
            GraphKind::Custom => {
                let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
                NetworkGraph::from_edges(self.n, &edges)
            }
        }
    }
}
