//! Bipartite graphs `G = ((L, R), E)` with the degree bound tracked on `L`.
//!
//! Vertices are 0-based on each side separately; an edge is a `(left, right)`
//! pair. The text format is a header line `nL nR m` followed by `m` lines
//! `u v`; lines starting with `#` are ignored.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: malformed header, expected \"nL nR m\"")]
    MalformedHeader { line: usize },
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: malformed edge, expected \"u v\"")]
    MalformedEdge { line: usize },
    #[error("line {line}: edge ({u}, {v}) out of range for nL={n_left}, nR={n_right}")]
    OutOfRange {
        line: usize,
        u: usize,
        v: usize,
        n_left: usize,
        n_right: usize,
    },
    #[error("line {line}: duplicate edge ({u}, {v})")]
    DuplicateEdge { line: usize, u: usize, v: usize },
    #[error("header announces {expected} edges but {found} were given")]
    EdgeCount { expected: usize, found: usize },
    #[error("left degree {deg} exceeds n_right = {n_right}")]
    DegreeTooLarge { deg: usize, n_right: usize },
}

/// Two-sided adjacency of a bipartite graph.
///
/// Immutable once built: both adjacency directions are sorted and
/// symmetric, and `max_deg_left` is the maximum left degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipartiteGraph {
    n_left: usize,
    n_right: usize,
    adj_left: Vec<Vec<usize>>,
    adj_right: Vec<Vec<usize>>,
    max_deg_left: usize,
}

impl BipartiteGraph {
    /// Builds a graph from `(left, right)` pairs. The `line` field of an
    /// error is the 1-based position of the offending pair.
    pub fn from_edges(
        n_left: usize,
        n_right: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let mut b = Builder::new(n_left, n_right);
        for (i, &(u, v)) in edges.iter().enumerate() {
            b.add(u, v, i + 1)?;
        }
        Ok(b.finish())
    }

    pub fn empty(n_left: usize, n_right: usize) -> Self {
        Builder::new(n_left, n_right).finish()
    }

    /// `K_{1,k}` seen from the left: one left vertex with `k` right neighbours.
    pub fn star(k: usize) -> Self {
        let edges: Vec<_> = (0..k).map(|v| (0, v)).collect();
        Self::from_edges(1, k, &edges).expect("star edges are valid")
    }

    pub fn complete(n_left: usize, n_right: usize) -> Self {
        let edges: Vec<_> = (0..n_left)
            .flat_map(|u| (0..n_right).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n_left, n_right, &edges).expect("complete edges are valid")
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn max_deg_left(&self) -> usize {
        self.max_deg_left
    }

    pub fn max_deg_right(&self) -> usize {
        self.adj_right.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Right neighbours `Γ_u` of a left vertex, sorted.
    pub fn left_neighbors(&self, u: usize) -> &[usize] {
        &self.adj_left[u]
    }

    /// Left neighbours `Γ_v` of a right vertex, sorted.
    pub fn right_neighbors(&self, v: usize) -> &[usize] {
        &self.adj_right[v]
    }

    pub fn n_edges(&self) -> usize {
        self.adj_left.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj_left
            .get(u)
            .is_some_and(|nb| nb.binary_search(&v).is_ok())
    }

    /// Edges in lexicographic `(left, right)` order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj_left
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().map(move |&v| (u, v)))
            .collect()
    }

    /// True when the graph (both sides, isolated vertices included) is one
    /// connected component. The empty graph counts as connected.
    pub fn is_connected(&self) -> bool {
        let n = self.n_left + self.n_right;
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            let nbrs: Box<dyn Iterator<Item = usize>> = if x < self.n_left {
                Box::new(self.adj_left[x].iter().map(|&v| self.n_left + v))
            } else {
                Box::new(self.adj_right[x - self.n_left].iter().copied())
            };
            for y in nbrs {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == n
    }

    /// Canonical edge-list text: header, then edges sorted lexicographically.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_left, self.n_right, self.n_edges());
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }
}

impl fmt::Display for BipartiteGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_edge_list())
    }
}

struct Builder {
    n_left: usize,
    n_right: usize,
    adj_left: Vec<Vec<usize>>,
    adj_right: Vec<Vec<usize>>,
}

impl Builder {
    fn new(n_left: usize, n_right: usize) -> Self {
        Self {
            n_left,
            n_right,
            adj_left: vec![Vec::new(); n_left],
            adj_right: vec![Vec::new(); n_right],
        }
    }

    fn add(&mut self, u: usize, v: usize, line: usize) -> Result<(), GraphError> {
        if u >= self.n_left || v >= self.n_right {
            return Err(GraphError::OutOfRange {
                line,
                u,
                v,
                n_left: self.n_left,
                n_right: self.n_right,
            });
        }
        if self.adj_left[u].contains(&v) {
            return Err(GraphError::DuplicateEdge { line, u, v });
        }
        self.adj_left[u].push(v);
        self.adj_right[v].push(u);
        Ok(())
    }

    fn finish(mut self) -> BipartiteGraph {
        for nb in self.adj_left.iter_mut().chain(self.adj_right.iter_mut()) {
            nb.sort_unstable();
        }
        let max_deg_left = self.adj_left.iter().map(Vec::len).max().unwrap_or(0);
        BipartiteGraph {
            n_left: self.n_left,
            n_right: self.n_right,
            adj_left: self.adj_left,
            adj_right: self.adj_right,
            max_deg_left,
        }
    }
}

fn parse_usizes<const N: usize>(line: &str) -> Option<[usize; N]> {
    let mut out = [0usize; N];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        *slot = it.next()?.parse().ok()?;
    }
    it.next().is_none().then_some(out)
}

/// Parses the edge-list text format. Errors name the 1-based line.
pub fn parse_graph(text: &str) -> Result<BipartiteGraph, GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(GraphError::MissingHeader)?;
    let [n_left, n_right, m] =
        parse_usizes::<3>(header).ok_or(GraphError::MalformedHeader { line: hline })?;

    let mut b = Builder::new(n_left, n_right);
    let mut found = 0;
    for (line, l) in lines {
        let [u, v] = parse_usizes::<2>(l).ok_or(GraphError::MalformedEdge { line })?;
        b.add(u, v, line)?;
        found += 1;
    }
    if found != m {
        return Err(GraphError::EdgeCount { expected: m, found });
    }
    Ok(b.finish())
}

/// Every left vertex gets `deg` distinct right neighbours chosen uniformly.
pub fn random_left_regular(
    n_left: usize,
    n_right: usize,
    deg: usize,
    seed: u64,
) -> Result<BipartiteGraph, GraphError> {
    if deg > n_right {
        return Err(GraphError::DegreeTooLarge { deg, n_right });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new(n_left, n_right);
    for u in 0..n_left {
        for v in sample(&mut rng, n_right, deg) {
            b.add(u, v, 0)?;
        }
    }
    Ok(b.finish())
}

/// Left degrees drawn uniformly from `0..=max_deg` (capped by `n_right`),
/// neighbours uniform. Used for mixed-degree test ensembles.
pub fn random_left_bounded(
    n_left: usize,
    n_right: usize,
    max_deg: usize,
    seed: u64,
) -> BipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = max_deg.min(n_right);
    let mut b = Builder::new(n_left, n_right);
    for u in 0..n_left {
        let deg = rng.gen_range(0..=cap);
        for v in sample(&mut rng, n_right, deg) {
            b.add(u, v, 0).expect("sampled neighbours are distinct and in range");
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_star() {
        let g = parse_graph("1 2 2\n0 0\n0 1").unwrap();
        assert_eq!(g.n_left(), 1);
        assert_eq!(g.left_neighbors(0), &[0, 1]);
        assert_eq!(g.max_deg_left(), 2);
    }

    #[test]
    fn parses_empty() {
        let g = parse_graph("2 2 0").unwrap();
        assert_eq!(g.max_deg_left(), 0);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn distinct_errors_name_the_line() {
        assert_eq!(
            parse_graph("2 2 2\n0 0\n0 0"),
            Err(GraphError::DuplicateEdge { line: 3, u: 0, v: 0 })
        );
        assert_eq!(
            parse_graph("# c\n2 x 2"),
            Err(GraphError::MalformedHeader { line: 2 })
        );
        assert!(matches!(
            parse_graph("2 2 1\n\n0 5"),
            Err(GraphError::OutOfRange { line: 3, .. })
        ));
        assert!(matches!(
            parse_graph("2 2 1\n0"),
            Err(GraphError::MalformedEdge { line: 2 })
        ));
        assert!(matches!(
            parse_graph("2 2 2\n0 1"),
            Err(GraphError::EdgeCount { expected: 2, found: 1 })
        ));
        assert_eq!(parse_graph("# only\n"), Err(GraphError::MissingHeader));
    }

    #[test]
    fn full_degree_is_complete() {
        let g = random_left_regular(4, 4, 4, 99).unwrap();
        assert_eq!(g, BipartiteGraph::complete(4, 4));
        assert!(random_left_regular(2, 3, 4, 0).is_err());
    }

    #[test]
    fn connectivity() {
        assert!(BipartiteGraph::star(3).is_connected());
        assert!(!BipartiteGraph::empty(2, 0).is_connected());
        assert!(parse_graph("2 1 2\n0 0\n1 0").unwrap().is_connected());
    }
}
