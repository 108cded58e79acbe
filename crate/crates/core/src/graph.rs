//! Immutable undirected graph in CSR form.
//!
//! Every graph is stored symmetrized, deduplicated and with sorted rows.
//! Self-loops are either absent everywhere or present exactly once in
//! every row, depending on [`SparseGraph::has_self_loops`].

use std::collections::BTreeSet;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    has_self_loops: bool,
}

/// The neighbor list of one node under the graph's self-loop policy.
#[derive(Debug, Clone, Copy)]
pub struct NeighborView<'a> {
    pub node: usize,
    pub neighbors: &'a [usize],
}

impl NeighborView<'_> {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// Builds a graph from an arbitrary edge list.
///
/// Input edges may be listed in one or both directions and may repeat.
/// Self-loops in the input are dropped; when `add_self_loops` is set a
/// single self-loop is added to every node.
pub fn build_graph(edges: &[(usize, usize)], n_nodes: usize, add_self_loops: bool) -> Result<SparseGraph> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_nodes];
    for &(a, b) in edges {
        for endpoint in [a, b] {
            if endpoint >= n_nodes {
                return Err(Error::IndexOutOfRange {
                    what: "edge endpoint",
                    index: endpoint,
                    len: n_nodes,
                });
            }
        }
        if a == b {
            continue;
        }
        adj[a].insert(b);
        adj[b].insert(a);
    }
    if add_self_loops {
        for (i, row) in adj.iter_mut().enumerate() {
            row.insert(i);
        }
    }

    let mut row_offsets = Vec::with_capacity(n_nodes + 1);
    let mut col_indices = Vec::with_capacity(adj.iter().map(BTreeSet::len).sum());
    row_offsets.push(0);
    for row in adj {
        col_indices.extend(row);
        row_offsets.push(col_indices.len());
    }
    Ok(SparseGraph {
        n_nodes,
        row_offsets,
        col_indices,
        has_self_loops: add_self_loops,
    })
}

impl SparseGraph {
    /// Assembles a graph from raw CSR arrays, checking every structural invariant.
    pub fn from_csr(
        n_nodes: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        has_self_loops: bool,
    ) -> Result<Self> {
        let g = SparseGraph {
            n_nodes,
            row_offsets,
            col_indices,
            has_self_loops,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn has_self_loops(&self) -> bool {
        self.has_self_loops
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Number of stored (directed) entries, including self-loops.
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Number of undirected edges, not counting self-loops.
    pub fn n_undirected_edges(&self) -> usize {
        let loops = if self.has_self_loops { self.n_nodes } else { 0 };
        (self.nnz() - loops) / 2
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_node(i)?;
        Ok(self.row_offsets[i + 1] - self.row_offsets[i])
    }

    pub fn neighbors(&self, i: usize) -> Result<NeighborView<'_>> {
        self.check_node(i)?;
        Ok(NeighborView {
            node: i,
            neighbors: self.row(i),
        })
    }

    /// Unchecked row slice; callers index with `i < n_nodes`.
    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    #[inline]
    pub(crate) fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Row index of every stored entry, aligned with `col_indices`.
    pub fn entry_rows(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.nnz());
        for i in 0..self.n_nodes {
            rows.extend(std::iter::repeat(i).take(self.row_range(i).len()));
        }
        rows
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edge_dump(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_undirected_edges());
        for i in 0..self.n_nodes {
            out.extend(self.row(i).iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// The same graph under a different self-loop policy.
    pub fn with_self_loops(&self, on: bool) -> SparseGraph {
        if on == self.has_self_loops {
            return self.clone();
        }
        build_graph(&self.edge_dump(), self.n_nodes, on).expect("edges of a valid graph are in range")
    }

    /// Nodes with no neighbors under the current policy.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes).filter(|&i| self.row_range(i).is_empty()).collect()
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        i < self.n_nodes && self.row(i).binary_search(&j).is_ok()
    }

    /// Checks all structural invariants, naming the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes;
        if self.row_offsets.len() != n + 1 {
            return Err(Error::Invariant(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                n + 1
            )));
        }
        if self.row_offsets[0] != 0 || self.row_offsets[n] != self.col_indices.len() {
            return Err(Error::Invariant("row_offsets must start at 0 and end at nnz".into()));
        }
        if self.row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Invariant("row_offsets must be non-decreasing".into()));
        }
        for i in 0..n {
            let row = self.row(i);
            if let Some(&j) = row.iter().find(|&&j| j >= n) {
                return Err(Error::Invariant(format!("row {i} references node {j} >= {n}")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invariant(format!("row {i} is unsorted or has duplicates")));
            }
            let has_loop = row.binary_search(&i).is_ok();
            if has_loop != self.has_self_loops {
                return Err(Error::Invariant(format!(
                    "row {i} self-loop presence {has_loop} disagrees with graph policy {}",
                    self.has_self_loops
                )));
            }
            for &j in row {
                if !self.row(j).binary_search(&i).is_ok() {
                    return Err(Error::Invariant(format!("edge ({i},{j}) has no reverse ({j},{i})")));
                }
            }
        }
        Ok(())
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n_nodes {
            return Err(Error::IndexOutOfRange {
                what: "node",
                index: i,
                len: self.n_nodes,
            });
        }
        Ok(())
    }
}
