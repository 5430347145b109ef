//! Bipartite graphs and their deterministic 2-coloring.
//!
//! Vertices are 1-indexed throughout the public API and in serialized form.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Color class index: `1` for `S1`, `2` for `S2`.
pub type ColorIndex = u8;

/// A simple graph together with a proper 2-coloring `(s1, s2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct ColoredGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    colors: Vec<ColorIndex>,
    s1: Vec<usize>,
    s2: Vec<usize>,
}

/// On-disk form: only `n` and the edge list. The coloring is always recomputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for ColoredGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        let edges: Vec<_> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        build_colored_graph(file.n, &edges)
    }
}

impl From<ColoredGraph> for GraphFile {
    fn from(g: ColoredGraph) -> Self {
        GraphFile {
            n: g.n,
            edges: g.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// Build a graph from 1-indexed edges and 2-color it by breadth-first search.
///
/// Components are visited in order of their lowest vertex. Within a component
/// the larger color class goes to `s1`; on a tie, the class holding the
/// component's lowest vertex goes to `s1`. Duplicate edges are merged.
pub fn build_colored_graph(n: usize, edges: &[(usize, usize)]) -> Result<ColoredGraph> {
    if n == 0 {
        return Err(Error::InvalidParams("graph needs at least one vertex".into()));
    }
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        if a == b || a == 0 || b == 0 || a > n || b > n {
            return Err(Error::InvalidEdge(a, b));
        }
        set.insert((a.min(b), a.max(b)));
    }
    let edges: Vec<(usize, usize)> = set.into_iter().collect();

    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adjacency[a - 1].push(b);
        adjacency[b - 1].push(a);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    let mut colors: Vec<ColorIndex> = vec![0; n];
    // BFS parity per vertex, relative to the component root.
    let mut parity = vec![u8::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if parity[root] != u8::MAX {
            continue;
        }
        parity[root] = 0;
        queue.push_back(root);
        let mut component = vec![root];
        while let Some(v) = queue.pop_front() {
            for &w1 in &adjacency[v] {
                let w = w1 - 1;
                if parity[w] == u8::MAX {
                    parity[w] = parity[v] ^ 1;
                    component.push(w);
                    queue.push_back(w);
                } else if parity[w] == parity[v] {
                    return Err(Error::NotTwoColorable { vertex: w1 });
                }
            }
        }
        let even = component.iter().filter(|&&v| parity[v] == 0).count();
        let odd = component.len() - even;
        // The root is the lowest vertex of its component and has parity 0.
        let even_class = if odd > even { 2 } else { 1 };
        for v in component {
            colors[v] = if parity[v] == 0 { even_class } else { 3 - even_class };
        }
    }

    let s1 = (1..=n).filter(|&v| colors[v - 1] == 1).collect();
    let s2 = (1..=n).filter(|&v| colors[v - 1] == 2).collect();
    Ok(ColoredGraph {
        n,
        edges,
        adjacency,
        colors,
        s1,
        s2,
    })
}

/// Canonical fixture families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StandardGraph {
    /// `1 - 2 - ... - n`
    Path { n: usize },
    /// `1 - 2 - ... - n - 1`, `n` even and at least 4.
    EvenCycle { n: usize },
    /// Row-major labelled `rows x cols` grid.
    Grid { rows: usize, cols: usize },
}

pub fn standard_graph(kind: StandardGraph) -> Result<ColoredGraph> {
    match kind {
        StandardGraph::Path { n } => {
            if n == 0 {
                return Err(Error::InvalidParams("path needs n >= 1".into()));
            }
            let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            build_colored_graph(n, &edges)
        }
        StandardGraph::EvenCycle { n } => {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidParams(format!(
                    "cycle length {n} is not an even number >= 4"
                )));
            }
            let mut edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
            edges.push((n, 1));
            build_colored_graph(n, &edges)
        }
        StandardGraph::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::InvalidParams("grid needs rows, cols >= 1".into()));
            }
            let id = |r: usize, c: usize| r * cols + c + 1;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((id(r, c), id(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((id(r, c), id(r + 1, c)));
                    }
                }
            }
            build_colored_graph(rows * cols, &edges)
        }
    }
}

impl ColoredGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as sorted `(lo, hi)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `N(i)`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check_vertex(i)?;
        Ok(&self.adjacency[i - 1])
    }

    pub fn color(&self, i: usize) -> Result<ColorIndex> {
        self.check_vertex(i)?;
        Ok(self.colors[i - 1])
    }

    pub fn s1(&self) -> &[usize] {
        &self.s1
    }

    pub fn s2(&self) -> &[usize] {
        &self.s2
    }

    /// `S_j` for `j` in `{1, 2}`.
    pub fn class(&self, j: ColorIndex) -> Result<&[usize]> {
        match j {
            1 => Ok(&self.s1),
            2 => Ok(&self.s2),
            _ => Err(Error::InvalidParams(format!("color index {j} not in {{1, 2}}"))),
        }
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    fn check_vertex(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            Err(Error::InvalidVertex { vertex: i, n: self.n })
        } else {
            Ok(())
        }
    }
}
