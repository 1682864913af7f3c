//! Simple connected graphs with the machinery the contraction criterion
//! needs: maximum degree, a greedy chromatic partition into independent
//! classes, the shortest-path metric, external boundaries, and metric shells.
//!
//! Vertex ids are opaque strings ordered lexicographically; every iteration
//! order in the crate derives from that ordering, which is what makes whole
//! runs bit-reproducible. Internally vertices are dense indices into the
//! sorted id list, and region-valued arguments and results use index sets.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::GraphError;

/// A simple connected undirected graph with bounded degree.
///
/// Construction via [`build_graph`] validates simplicity (no self-loops, no
/// parallel edges) and connectedness, and fixes the vertex order (ascending
/// id). The adjacency lists are sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<String>,
    index: BTreeMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Number of vertices.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Vertex ids in ascending (lexicographic) order.
    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    /// The id of vertex `i`. Panics if `i` is out of range.
    pub fn id_of(&self, i: usize) -> &str {
        &self.vertices[i]
    }

    /// The index of the vertex with the given id.
    pub fn index_of(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownVertex(id.to_owned()))
    }

    /// Sorted neighbor indices of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Degree of vertex `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Undirected edges as index pairs `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether `i` and `j` are adjacent.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }
}

/// A partition of the vertex set into independent classes.
///
/// Independence means no class contains two adjacent vertices, so the
/// single-site reconstruction operator can be applied across a class in any
/// order without one update feeding another within the same class. Produced
/// by [`greedy_color`]; the class count serves as the chi entering the
/// criterion formulas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorPartition {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl ColorPartition {
    /// The classes in order, each sorted ascending.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Number of classes.
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// The class index of vertex `i`.
    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    /// Checks that the classes partition the vertex set of `g` and that each
    /// class is independent. Returns the first offending pair, if any.
    pub fn independence_violation(&self, g: &Graph) -> Option<(usize, usize)> {
        for class in &self.classes {
            for (pos, &v) in class.iter().enumerate() {
                for &w in &class[pos + 1..] {
                    if g.has_edge(v, w) {
                        return Some((v, w));
                    }
                }
            }
        }
        None
    }
}

/// Builds a validated graph from an undirected edge list.
///
/// Vertex ids are taken from the edges; isolated vertices cannot be
/// expressed (and would be useless here, since the criterion concerns
/// interacting sites). Rejects self-loops, duplicate edges (in either
/// orientation) and disconnected inputs, naming the offending element.
pub fn build_graph<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Graph, GraphError> {
    if edges.is_empty() {
        return Err(GraphError::EmptyEdgeList);
    }
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for (a, b) in edges {
        let (a, b) = (a.as_ref(), b.as_ref());
        if a == b {
            return Err(GraphError::SelfLoop(a.to_owned()));
        }
        ids.insert(a);
        ids.insert(b);
    }
    let vertices: Vec<String> = ids.iter().map(|s| (*s).to_owned()).collect();
    let index: BTreeMap<String, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();

    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (a, b) in edges {
        let (a, b) = (a.as_ref(), b.as_ref());
        let (i, j) = (index[a], index[b]);
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(GraphError::DuplicateEdge(a.to_owned(), b.to_owned()));
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
    }

    let g = Graph {
        vertices,
        index,
        adjacency,
    };

    // Single BFS component check from the first vertex.
    let reached = bfs_distances(&g, 0);
    if let Some(far) = reached.iter().position(|d| d.is_none()) {
        return Err(GraphError::Disconnected(
            g.vertices[far].clone(),
            g.vertices[0].clone(),
        ));
    }
    Ok(g)
}

/// Maximum vertex degree of the graph.
pub fn max_degree(g: &Graph) -> usize {
    (0..g.vertex_count())
        .map(|i| g.degree(i))
        .max()
        .unwrap_or(0)
}

/// Greedy proper coloring in ascending vertex order.
///
/// Each vertex gets the smallest color absent among its already-colored
/// neighbors, so the class count never exceeds max degree + 1. The result is
/// a valid, possibly suboptimal chromatic partition; a non-minimal class
/// count only loosens the criterion's bounds, never falsifies them.
pub fn greedy_color(g: &Graph) -> ColorPartition {
    let n = g.vertex_count();
    let mut class_of = vec![usize::MAX; n];
    for v in 0..n {
        let used: BTreeSet<usize> = g
            .neighbors(v)
            .iter()
            .filter(|&&w| w < v)
            .map(|&w| class_of[w])
            .collect();
        let mut color = 0;
        while used.contains(&color) {
            color += 1;
        }
        class_of[v] = color;
    }
    let class_count = class_of.iter().max().map_or(0, |&c| c + 1);
    let mut classes = vec![Vec::new(); class_count];
    for (v, &c) in class_of.iter().enumerate() {
        classes[c].push(v);
    }
    ColorPartition { classes, class_of }
}

/// Shortest-path edge count between two vertices.
pub fn path_distance(g: &Graph, a: &str, b: &str) -> Result<usize, GraphError> {
    let i = g.index_of(a)?;
    let j = g.index_of(b)?;
    let dist = bfs_distances(g, i);
    // The graph is connected by construction, so every entry is Some.
    Ok(dist[j].expect("connected graph"))
}

/// The external boundary of a region: vertices outside the region adjacent
/// to at least one vertex inside it.
pub fn external_boundary(g: &Graph, region: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &v in region {
        assert!(v < g.vertex_count(), "region contains out-of-range vertex");
        for &w in g.neighbors(v) {
            if !region.contains(&w) {
                out.insert(w);
            }
        }
    }
    out
}

/// The first `n` metric shells around a center vertex.
///
/// Returns `[D_0, ..., D_{n-1}]` where `D_0 = {center}` and each following
/// shell adds the external boundary of the previous one; `D_k` is exactly the
/// closed ball of radius `k` around the center. Requires `n >= 1`.
pub fn shells(g: &Graph, center: &str, n: usize) -> Result<Vec<BTreeSet<usize>>, GraphError> {
    assert!(n >= 1, "shell count must be at least 1");
    let c = g.index_of(center)?;
    let mut out = Vec::with_capacity(n);
    let mut current = BTreeSet::from([c]);
    out.push(current.clone());
    for _ in 1..n {
        let boundary = external_boundary(g, &current);
        current.extend(boundary);
        out.push(current.clone());
    }
    Ok(out)
}

fn bfs_distances(g: &Graph, root: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.vertex_count()];
    dist[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &w in g.neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}
