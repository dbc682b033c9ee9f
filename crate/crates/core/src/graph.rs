//! Device graphs: construction, incidence algebra, components and the
//! characteristic-graph machinery used to reason about surrogate graphs.
//!
//! Node indices are 0-based here. The text format read and written by
//! [`DeviceGraph::read_text`] / [`DeviceGraph::write_text`] is 1-based.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::sym_eigenvalues;

/// An undirected edge stored with its orientation `plus > minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub plus: usize,
    pub minus: usize,
}

impl Edge {
    /// Orients an unordered pair; `None` for a self-loop.
    pub fn new(i: usize, j: usize) -> Option<Self> {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(Edge { plus: i, minus: j }),
            std::cmp::Ordering::Less => Some(Edge { plus: j, minus: i }),
        }
    }

    fn sort_key(&self) -> (usize, usize) {
        (self.minus, self.plus)
    }
}

/// Which end of an edge a device sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceGraph {
    num_nodes: usize,
    edges: Vec<Edge>,
    /// For each node, `(edge index, side of the node on that edge)`.
    incident: Vec<Vec<(usize, Side)>>,
}

impl DeviceGraph {
    /// Builds a graph from 0-based pairs, normalising each to `(max, min)` and
    /// sorting edges lexicographically by `(min, max)`.
    pub fn new(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        let mut edges = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            for idx in [i, j] {
                if idx >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        index: idx,
                        num_nodes,
                    });
                }
            }
            let e = Edge::new(i, j).ok_or(Error::SelfLoop(i))?;
            if !seen.insert(e) {
                return Err(Error::DuplicateEdge(e.plus, e.minus));
            }
            edges.push(e);
        }
        Ok(Self::from_unique_edges(num_nodes, edges))
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self::from_unique_edges(num_nodes, Vec::new())
    }

    fn from_unique_edges(num_nodes: usize, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(Edge::sort_key);
        let mut incident = vec![Vec::new(); num_nodes];
        for (k, e) in edges.iter().enumerate() {
            incident[e.plus].push((k, Side::Plus));
            incident[e.minus].push((k, Side::Minus));
        }
        Self {
            num_nodes,
            edges,
            incident,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incident(&self, node: usize) -> &[(usize, Side)] {
        &self.incident[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.incident[node].len()
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[node].iter().map(move |&(k, side)| {
            let e = self.edges[k];
            match side {
                Side::Plus => e.minus,
                Side::Minus => e.plus,
            }
        })
    }

    pub fn edge_set(&self) -> HashSet<Edge> {
        self.edges.iter().copied().collect()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        match Edge::new(i, j) {
            Some(e) => self.incident[e.minus]
                .iter()
                .any(|&(k, _)| self.edges[k] == e),
            None => false,
        }
    }

    /// Subgraph keeping the edges for which `keep` returns true.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, &Edge) -> bool) -> Self {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(k, e)| keep(*k, e))
            .map(|(_, e)| *e)
            .collect();
        Self::from_unique_edges(self.num_nodes, edges)
    }

    pub fn intersection(&self, other: &DeviceGraph) -> Result<Self> {
        check_same_nodes(self, other)?;
        let theirs = other.edge_set();
        Ok(self.filter_edges(|_, e| theirs.contains(e)))
    }

    /// `|E \ E_other|`
    pub fn difference_count(&self, other: &DeviceGraph) -> usize {
        let theirs = other.edge_set();
        self.edges.iter().filter(|e| !theirs.contains(e)).count()
    }

    pub fn complete(num_nodes: usize) -> Self {
        let mut edges = Vec::with_capacity(num_nodes * num_nodes.saturating_sub(1) / 2);
        for minus in 0..num_nodes {
            for plus in minus + 1..num_nodes {
                edges.push(Edge { plus, minus });
            }
        }
        Self::from_unique_edges(num_nodes, edges)
    }

    /// Subgraph on the nodes `keep` (in that order), relabelled `0..keep.len()`.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut new_index = vec![usize::MAX; self.num_nodes];
        for (i, &u) in keep.iter().enumerate() {
            if u >= self.num_nodes {
                return Err(Error::NodeOutOfRange {
                    index: u,
                    num_nodes: self.num_nodes,
                });
            }
            new_index[u] = i;
        }
        let pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|e| new_index[e.plus] != usize::MAX && new_index[e.minus] != usize::MAX)
            .map(|e| (new_index[e.plus], new_index[e.minus]))
            .collect();
        Self::new(keep.len(), &pairs)
    }

    /// Symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.num_nodes]; self.num_nodes];
        for e in &self.edges {
            a[e.plus][e.minus] = 1;
            a[e.minus][e.plus] = 1;
        }
        a
    }

    /// Signed incidence matrix: row `e` has `+1` at `e.plus` and `-1` at `e.minus`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.edges.len(), self.num_nodes);
        for (k, e) in self.edges.iter().enumerate() {
            d[(k, e.plus)] = 1.0;
            d[(k, e.minus)] = -1.0;
        }
        d
    }

    /// `D^T D`
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.num_nodes, self.num_nodes);
        for e in &self.edges {
            l[(e.plus, e.plus)] += 1.0;
            l[(e.minus, e.minus)] += 1.0;
            l[(e.plus, e.minus)] -= 1.0;
            l[(e.minus, e.plus)] -= 1.0;
        }
        l
    }

    pub fn connected_components(&self) -> Clustering {
        let mut uf = UnionFind::new(self.num_nodes);
        for e in &self.edges {
            uf.union(e.plus, e.minus);
        }
        let roots: Vec<usize> = (0..self.num_nodes).map(|i| uf.find(i)).collect();
        Clustering::from_raw_labels(&roots)
    }

    /// `K(E)`
    pub fn num_components(&self) -> usize {
        let mut uf = UnionFind::new(self.num_nodes);
        let mut count = self.num_nodes;
        for e in &self.edges {
            if uf.union(e.plus, e.minus) {
                count -= 1;
            }
        }
        count
    }

    /// Flips the membership of every unordered pair independently with
    /// probability `level`.
    pub fn corrupt<R: Rng + ?Sized>(&self, level: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::InvalidArgument(format!(
                "corruption level {level} outside [0, 1]"
            )));
        }
        let present = self.edge_set();
        let mut edges = Vec::new();
        for minus in 0..self.num_nodes {
            for plus in minus + 1..self.num_nodes {
                let e = Edge { plus, minus };
                let flip = rng.random::<f64>() < level;
                if flip != present.contains(&e) {
                    edges.push(e);
                }
            }
        }
        Ok(Self::from_unique_edges(self.num_nodes, edges))
    }

    /// Smallest nonzero eigenvalue of the Laplacian `D^T D`; `None` without edges.
    ///
    /// The kernel has dimension `K(E)`, so the first `K(E)` eigenvalues in
    /// ascending order are the zero modes.
    pub fn algebraic_connectivity_sq(&self) -> Option<f64> {
        if self.edges.is_empty() {
            return None;
        }
        let vals = sym_eigenvalues(&self.laplacian());
        vals.get(self.num_components()).copied()
    }

    /// Reads the text format: first non-comment line `|V|`, then `i j` per edge
    /// (1-based). `#` starts a comment.
    pub fn read_text<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut num_nodes = None;
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match num_nodes {
                None => {
                    if fields.len() != 1 {
                        return Err(parse_err(lineno + 1, "expected node count".into()));
                    }
                    num_nodes = Some(
                        fields[0]
                            .parse::<usize>()
                            .map_err(|e| parse_err(lineno + 1, e.to_string()))?,
                    );
                }
                Some(_) => {
                    if fields.len() != 2 {
                        return Err(parse_err(lineno + 1, "expected `i j`".into()));
                    }
                    let mut ends = [0usize; 2];
                    for (slot, f) in ends.iter_mut().zip(&fields) {
                        let v = f
                            .parse::<usize>()
                            .map_err(|e| parse_err(lineno + 1, e.to_string()))?;
                        if v == 0 {
                            return Err(parse_err(lineno + 1, "node indices are 1-based".into()));
                        }
                        *slot = v - 1;
                    }
                    pairs.push((ends[0], ends[1]));
                }
            }
        }
        let num_nodes = num_nodes.ok_or_else(|| parse_err(0, "missing node count".into()))?;
        Self::new(num_nodes, &pairs)
    }

    /// Writes the text format, one `e+ e-` line per edge, 1-based.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.num_nodes)?;
        for e in &self.edges {
            writeln!(w, "{} {}", e.plus + 1, e.minus + 1)?;
        }
        Ok(())
    }

    /// Reads a 0/1 adjacency matrix in CSV form (no header). Only the upper
    /// triangle is consulted; asymmetric input is rejected.
    pub fn read_adjacency_csv<R: std::io::Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (lineno, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| match f {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Parse {
                        source_name: source_name.to_string(),
                        line: lineno + 1,
                        message: format!("adjacency entry `{other}` is not 0/1"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        let mut pairs = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: i + 1,
                    message: format!("row has {} entries, expected {n}", row.len()),
                });
            }
            if row[i] != 0 {
                return Err(Error::SelfLoop(i));
            }
            for j in i + 1..n {
                if row[j] != rows[j][i] {
                    return Err(Error::Parse {
                        source_name: source_name.to_string(),
                        line: i + 1,
                        message: format!("adjacency is not symmetric at ({}, {})", i + 1, j + 1),
                    });
                }
                if row[j] == 1 {
                    pairs.push((i, j));
                }
            }
        }
        Self::new(n, &pairs)
    }
}

fn check_same_nodes(a: &DeviceGraph, b: &DeviceGraph) -> Result<()> {
    if a.num_nodes != b.num_nodes {
        return Err(Error::NodeCountMismatch(a.num_nodes, b.num_nodes));
    }
    Ok(())
}

/// Assignment of every node to one of `K` clusters, labels `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl Clustering {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let num_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; num_clusters];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!(
                "cluster labels are not contiguous: label {missing} unused"
            )));
        }
        Ok(Self {
            labels,
            num_clusters,
        })
    }

    /// Relabels arbitrary keys to `0..K` in order of first appearance.
    fn from_raw_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self {
            labels,
            num_clusters: map.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }

    /// Union of disjoint cliques, one per cluster.
    pub fn characteristic_graph(&self) -> DeviceGraph {
        let mut edges = Vec::new();
        for minus in 0..self.labels.len() {
            for plus in minus + 1..self.labels.len() {
                if self.labels[plus] == self.labels[minus] {
                    edges.push(Edge { plus, minus });
                }
            }
        }
        DeviceGraph::from_unique_edges(self.labels.len(), edges)
    }
}

/// `K(E0) / (K(E) + |E \ E0|)`
pub fn graph_fidelity(g: &DeviceGraph, g0: &DeviceGraph) -> Result<f64> {
    check_same_nodes(g, g0)?;
    let denom = g.num_components() + g.difference_count(g0);
    Ok(g0.num_components() as f64 / denom as f64)
}

/// Lower end of the fidelity range for `K(E0) >= 2`.
pub fn graph_fidelity_min(num_nodes: usize, k0: usize) -> f64 {
    let v = num_nodes as f64;
    let k = k0 as f64;
    2.0 * k / (v * v * (1.0 - 1.0 / k) + 2.0)
}

/// `K(E ∩ E0)`, the optimal value of the subgraph-selection problem.
pub fn optimal_subgraph_value(g: &DeviceGraph, g0: &DeviceGraph) -> Result<usize> {
    Ok(g.intersection(g0)?.num_components())
}

/// Largest edge count accepted by [`brute_force_min_partition`].
pub const BRUTE_FORCE_EDGE_LIMIT: usize = 20;

/// `min over subsets S of E of K(S) + |S \ E0|`, by enumeration of all `2^|E|` subsets.
pub fn brute_force_min_partition(g: &DeviceGraph, g0: &DeviceGraph) -> Result<usize> {
    check_same_nodes(g, g0)?;
    let m = g.num_edges();
    if m > BRUTE_FORCE_EDGE_LIMIT {
        return Err(Error::SearchTooLarge {
            edges: m,
            limit: BRUTE_FORCE_EDGE_LIMIT,
        });
    }
    let truth = g0.edge_set();
    let false_edge: Vec<bool> = g.edges.iter().map(|e| !truth.contains(e)).collect();
    let best = (0u32..(1u32 << m))
        .map(|mask| subset_value(g, &false_edge, |k| mask & (1 << k) != 0))
        .min()
        .unwrap_or(g.num_nodes);
    Ok(best)
}

/// `K(S) + |S \ E0|` for the subset `S` of `g`'s edges selected by `keep`.
pub fn subset_objective(
    g: &DeviceGraph,
    g0: &DeviceGraph,
    keep: impl Fn(usize) -> bool,
) -> Result<usize> {
    check_same_nodes(g, g0)?;
    let truth = g0.edge_set();
    let false_edge: Vec<bool> = g.edges.iter().map(|e| !truth.contains(e)).collect();
    Ok(subset_value(g, &false_edge, keep))
}

fn subset_value(g: &DeviceGraph, false_edge: &[bool], keep: impl Fn(usize) -> bool) -> usize {
    let mut uf = UnionFind::new(g.num_nodes);
    let mut components = g.num_nodes;
    let mut wrong = 0;
    for (k, e) in g.edges.iter().enumerate() {
        if keep(k) {
            if uf.union(e.plus, e.minus) {
                components -= 1;
            }
            wrong += usize::from(false_edge[k]);
        }
    }
    components + wrong
}

/// Degree lower bound on the compatibility factor: `1` for the empty set,
/// otherwise `1 / (2 min(sqrt d, sqrt |T|))`.
pub fn compat_factor_lower_bound(t_size: usize, max_degree: usize) -> f64 {
    if t_size == 0 {
        return 1.0;
    }
    let m = (max_degree as f64).sqrt().min((t_size as f64).sqrt());
    if m == 0.0 {
        // an edgeless graph: the bound is vacuous
        return f64::INFINITY;
    }
    1.0 / (2.0 * m)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if two distinct sets were merged.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
