//! Labeled undirected graphs with node features.
//!
//! Neighborhoods are stored as compressed sparse rows in which every row is
//! sorted and contains the node itself, so `neighborhood(i)` is exactly the
//! self-inclusive set `N_i` that attention and convolution sum over. The
//! adjacency matrix itself has a zero diagonal; `degree(i)` counts only the
//! off-diagonal entries.

use crate::error::{Error, Result};
use crate::numerics::dot;

/// Row-major `n × d` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::domain("feature matrix needs at least one row and one column"));
        }
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::domain(format!(
                    "feature row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { n, d, data })
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || data.len() != n * d {
            return Err(Error::domain(format!(
                "flat feature buffer of length {} does not match {n} x {d}",
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// `w^T X_i` for every node.
    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.d {
            return Err(Error::domain(format!(
                "projection vector has dimension {}, features have {}",
                w.len(),
                self.d
            )));
        }
        Ok(self.rows().map(|x| dot(x, w)).collect())
    }
}

/// Undirected simple graph with self-inclusive sorted neighborhoods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds the graph from adjacency rows that exclude the node itself.
    /// Rows must be symmetric and duplicate free.
    pub(crate) fn from_adjacency_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let total: usize = rows.iter().map(|r| r.len() + 1).sum();
        let mut neighbors = Vec::with_capacity(total);
        offsets.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    /// Builds the graph from an undirected edge list. Self-loops and
    /// duplicate edges (in either orientation) are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Index {
                    index: u.max(v),
                    len: n,
                });
            }
            if u == v {
                return Err(Error::domain(format!("self-loop on node {u}")));
            }
            rows[u].push(v);
            rows[v].push(u);
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::domain(format!("duplicate edge at node {i}")));
            }
        }
        Ok(Self::from_adjacency_rows(rows))
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `N_i`, sorted, always containing `i`.
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn checked_neighborhood(&self, i: usize) -> Result<&[usize]> {
        if i >= self.n() {
            return Err(Error::Index {
                index: i,
                len: self.n(),
            });
        }
        Ok(self.neighborhood(i))
    }

    /// Number of adjacent nodes, `D_ii` (self not counted).
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i] - 1
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    /// Offsets into the flat neighborhood storage; row `i` spans
    /// `offsets[i]..offsets[i + 1]`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_edges(&self) -> usize {
        (self.neighbors.len() - self.n()) / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.neighborhood(i).binary_search(&j).is_ok()
    }

    /// Every undirected edge once, as `(i, j)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |i| {
            self.neighborhood(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Sparse product `A x` with the zero-diagonal adjacency matrix.
    pub fn adjacency_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .neighborhood(i)
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| x[j])
                .sum();
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); self.n()];
        for (i, j) in self.edges() {
            rows[perm[i]].push(perm[j]);
            rows[perm[j]].push(perm[i]);
        }
        Self::from_adjacency_rows(rows)
    }
}

/// Node features, binary class labels and the graph they live on.
///
/// Synthetic samples and binarized external datasets share this type so that
/// every attention model, classifier and metric runs on both.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub labels: Vec<u8>,
    pub features: Features,
    pub graph: Graph,
}

impl LabeledGraph {
    pub fn new(labels: Vec<u8>, features: Features, graph: Graph) -> Result<Self> {
        if labels.len() != graph.n() || features.n() != graph.n() {
            return Err(Error::domain(format!(
                "labels ({}), features ({}) and graph ({}) disagree on node count",
                labels.len(),
                features.n(),
                graph.n()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::domain("labels must be 0 or 1"));
        }
        Ok(Self {
            labels,
            features,
            graph,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn same_class(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// `N_i`, with bounds checking.
    pub fn neighborhood(&self, i: usize) -> Result<&[usize]> {
        self.graph.checked_neighborhood(i)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.graph.degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighborhoods_include_self_and_are_sorted() {
        let g = Graph::from_edges(4, &[(2, 0), (1, 2)]).unwrap();
        assert_eq!(g.neighborhood(0), &[0, 2]);
        assert_eq!(g.neighborhood(2), &[0, 1, 2]);
        assert_eq!(g.neighborhood(3), &[3]);
        assert_eq!(g.degrees(), vec![1, 1, 2, 0]);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn rejects_self_loops_duplicates_and_bad_ids() {
        assert!(Graph::from_edges(3, &[(1, 1)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(matches!(
            Graph::from_edges(3, &[(0, 3)]),
            Err(Error::Index { index: 3, len: 3 })
        ));
    }

    #[test]
    fn out_of_range_neighborhood_is_an_index_error() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(g.checked_neighborhood(2), Err(Error::Index { .. })));
    }

    #[test]
    fn adjacency_product_ignores_self() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut out = vec![0.0; 3];
        g.adjacency_mul(&[1.0, 10.0, 100.0], &mut out);
        assert_eq!(out, vec![10.0, 101.0, 10.0]);
    }

    #[test]
    fn projection_checks_dimension() {
        let f = Features::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(f.project(&[1.0, 0.5]).unwrap(), vec![2.0, 5.0]);
        assert!(f.project(&[1.0]).is_err());
    }
}
