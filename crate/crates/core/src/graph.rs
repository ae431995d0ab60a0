//! Simple undirected graphs on dense indices `0..n`, each index optionally
//! labelled with the hypercube vertex it stands for.

use crate::cube::{Dimension, VertexId, VertexSet};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<VertexId>,
    adj: Vec<Vec<u32>>,
    edges: usize,
}

impl Graph {
    /// Builds a graph from an edge list; duplicate edges are merged and
    /// neighbour lists are sorted.
    pub fn from_edges(
        labels: Vec<VertexId>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(LabError::param(format!("edge ({a}, {b}) outside 0..{n}")));
            }
            if a == b {
                return Err(LabError::param(format!("self-loop at {a}")));
            }
            adj[a].push(b as u32);
            adj[b].push(a as u32);
        }
        let mut edges = 0;
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            edges += list.len();
        }
        Ok(Self {
            labels,
            adj,
            edges: edges / 2,
        })
    }

    /// Graph on hypercube vertices given as labels; edges are label pairs.
    pub fn from_labelled_edges(
        labels: Vec<VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self> {
        let index: std::collections::HashMap<VertexId, usize> =
            labels.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            let a = *index.get(&u).ok_or(LabError::MissingVertex(u))?;
            let b = *index.get(&v).ok_or(LabError::MissingVertex(v))?;
            pairs.push((a, b));
        }
        Self::from_edges(labels, pairs)
    }

    pub fn hypercube(d: Dimension) -> Self {
        let n = d.vertex_count() as usize;
        let labels: Vec<VertexId> = (0..n as u64).collect();
        let edges = (0..n).flat_map(move |v| {
            (0..d.get())
                .map(move |i| (v, v ^ (1usize << i)))
                .filter(|(a, b)| a < b)
        });
        Self::from_edges(labels, edges).expect("hypercube edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::from_edges((0..n as u64).collect(), edges).expect("valid")
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    #[inline]
    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn label(&self, v: usize) -> VertexId {
        self.labels[v]
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, list)| {
            list.iter()
                .map(move |&b| (a, b as usize))
                .filter(|(a, b)| a < b)
        })
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for &w in &self.adj[v] {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        comp.push(w as usize);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Number of edges with exactly one endpoint in `s` (indices of `g`).
pub fn edge_boundary(g: &Graph, s: &VertexSet) -> u64 {
    s.iter()
        .filter(|&v| v < g.vertex_count())
        .map(|v| g.neighbours(v).iter().filter(|&&w| !s.contains(w as usize)).count() as u64)
        .sum()
}

/// `|N(S) \ S|`.
pub fn outer_neighbourhood(g: &Graph, s: &VertexSet) -> usize {
    let mut seen = VertexSet::new(g.vertex_count());
    for v in s.iter() {
        for &w in g.neighbours(v) {
            if !s.contains(w as usize) {
                seen.insert(w as usize);
            }
        }
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_shape() {
        let q3 = Graph::hypercube(Dimension::new(3).unwrap());
        assert_eq!(q3.vertex_count(), 8);
        assert_eq!(q3.edge_count(), 12);
        assert!((0..8).all(|v| q3.degree(v) == 3));
        assert!(q3.is_connected());
    }

    #[test]
    fn boundary_examples() {
        let q3 = Graph::hypercube(Dimension::new(3).unwrap());
        // facet x0 = 0
        let facet = VertexSet::from_indices(8, [0, 2, 4, 6]);
        assert_eq!(edge_boundary(&q3, &facet), 4);
        assert_eq!(edge_boundary(&q3, &VertexSet::new(8)), 0);
        assert_eq!(edge_boundary(&q3, &VertexSet::from_indices(8, [0])), 3);
        assert_eq!(outer_neighbourhood(&q3, &VertexSet::from_indices(8, [0])), 3);
        assert_eq!(outer_neighbourhood(&q3, &VertexSet::full(8)), 0);
    }

    #[test]
    fn components_of_two_edges() {
        let g = Graph::from_edges(vec![0, 1, 2, 3], [(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3]]);
        assert!(Graph::from_edges(vec![0], [(0, 0)]).is_err());
    }

    #[test]
    fn labelled_edges_resolve() {
        let g = Graph::from_labelled_edges(vec![5, 9], [(9, 5)]).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(Graph::from_labelled_edges(vec![5], [(5, 6)]).is_err());
    }
}
