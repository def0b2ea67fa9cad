//! Undirected, unweighted communication topology.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a graph needs at least one agent")]
    Empty,
    #[error("edge ({0}, {1}) has an endpoint outside 1..={2}")]
    EndpointOutOfRange(usize, usize, usize),
    #[error("self-loop at agent {0}")]
    SelfLoop(usize),
    #[error("orthonormal complement needs n >= 2, got {0}")]
    ComplementDomain(usize),
}

/// Communication graph with unit edge weights.
///
/// Agents are numbered `1..=n` at the API boundary (edges, messages) and
/// `0..n` internally (neighbor lists, matrix indices).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Matrix,
    laplacian: Matrix,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkGraph {
    /// Builds the graph from 1-based edge pairs. Duplicates and reversed
    /// duplicates collapse into one edge.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut unique = BTreeSet::new();
        for &(i, j) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(GraphError::EndpointOutOfRange(i, j, n));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            unique.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = unique.into_iter().collect();

        let mut adjacency = Matrix::zeros(n, n);
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adjacency[(i - 1, j - 1)] = 1.0;
            adjacency[(j - 1, i - 1)] = 1.0;
            neighbors[i - 1].push(j - 1);
            neighbors[j - 1].push(i - 1);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let mut laplacian = adjacency.scaled(-1.0);
        for (i, list) in neighbors.iter().enumerate() {
            laplacian[(i, i)] = list.len() as f64;
        }
        // -0.0 entries from the scaling would break exact symmetry checks
        // against the adjacency's +0.0; normalize them.
        for r in 0..n {
            for c in 0..n {
                if laplacian[(r, c)] == 0.0 {
                    laplacian[(r, c)] = 0.0;
                }
            }
        }

        Ok(Self {
            n,
            edges,
            adjacency,
            laplacian,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Deduplicated 1-based edges with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// 0-based neighbor indices of 0-based agent `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// `(L v)_i = sum_{j in N_i} (v_i - v_j)`, reading `v` with a stride so a
    /// column of an agent-major `n x l` block can be used directly.
    #[inline]
    pub(crate) fn laplacian_entry(&self, i: usize, v: &[f64], stride: usize, offset: usize) -> f64 {
        let vi = v[i * stride + offset];
        self.neighbors[i]
            .iter()
            .map(|&j| vi - v[j * stride + offset])
            .sum()
    }

    pub fn apply_laplacian(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| self.laplacian_entry(i, v, 1, 0)).collect()
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.n
    }

    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        self.laplacian.symmetric_eigenvalues()
    }

    pub fn max_laplacian_eigenvalue(&self) -> f64 {
        self.laplacian_eigenvalues().last().copied().unwrap_or(0.0)
    }
}

/// Columns spanning the orthogonal complement of the all-ones vector.
///
/// Gram-Schmidt (two passes) on `e_1..e_{n-1}` against `1/sqrt(n)`, giving
/// an `n x (n-1)` matrix `U1` with `[U1 | 1/sqrt(n)]` orthogonal.
pub fn orthonormal_complement(n: usize) -> Result<Matrix, GraphError> {
    if n < 2 {
        return Err(GraphError::ComplementDomain(n));
    }
    let ones = vec![1.0 / libm::sqrt(n as f64); n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        for _pass in 0..2 {
            for q in core::iter::once(&ones).chain(basis.iter()) {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push(v);
    }
    let flat: Vec<f64> = basis.into_iter().flatten().collect();
    Ok(Matrix::from_column_major(n, n - 1, &flat))
}

/// Eight-agent topology used by the bundled energy scenarios.
pub fn eight_generator_topology() -> NetworkGraph {
    NetworkGraph::new(
        8,
        &[(1, 2), (2, 3), (2, 5), (4, 5), (5, 6), (5, 7), (6, 8), (7, 8)],
    )
    .expect("static topology is valid")
}
