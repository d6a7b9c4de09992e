//! Affinity graphs over class-center nodes and maximal clique enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, norm, FeatureMatrix, Space, UNIT_NORM_TOL};

/// Fixed-width bit set over node indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    pub fn new(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::new(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn union_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }
}

/// Symmetric boolean adjacency with an empty diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    rows: Vec<NodeSet>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            rows: (0..n).map(|_| NodeSet::new(n)).collect(),
        }
    }

    /// Builds an undirected graph; self-loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            a.add_edge(i, j);
        }
        a
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                a.add_edge(i, j);
            }
        }
        a
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.rows[i].insert(j);
            self.rows[j].insert(i);
        }
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i].contains(j)
    }

    pub fn neighbors(&self, i: usize) -> &NodeSet {
        &self.rows[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(NodeSet::len).sum::<usize>() / 2
    }

    /// Edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            out.extend(row.iter().filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    /// Keeps an edge only when it also closes a two-hop path, i.e. the
    /// boolean reading of `W ⊙ (W × W)`.
    pub fn second_order(&self) -> Adjacency {
        let n = self.node_count();
        let mut out = Adjacency::empty(n);
        for (i, j) in self.edges() {
            if self.rows[i].intersection_len(&self.rows[j]) > 0 {
                out.add_edge(i, j);
            }
        }
        out
    }

    pub fn is_subgraph_of(&self, other: &Adjacency) -> bool {
        self.node_count() == other.node_count()
            && self.edges().into_iter().all(|(i, j)| other.has_edge(i, j))
    }

    /// Smallest-last vertex ordering; ties go to the lower index.
    /// Returns the ordering and the graph degeneracy.
    pub fn degeneracy_order(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut degree: Vec<usize> = (0..n).map(|i| self.degree(i)).collect();
        let mut removed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut degeneracy = 0;
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !removed[v])
                .min_by_key(|&v| (degree[v], v))
                .expect("nodes remain");
            degeneracy = degeneracy.max(degree[v]);
            removed[v] = true;
            order.push(v);
            for u in self.rows[v].iter() {
                if !removed[u] {
                    degree[u] -= 1;
                }
            }
        }
        (order, degeneracy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphOrder {
    First,
    Second,
}

/// Class-center nodes together with their thresholded affinity edges.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    pub node_features: FeatureMatrix,
    pub adjacency: Adjacency,
    pub order: GraphOrder,
    pub threshold: f64,
}

impl AffinityGraph {
    pub fn space(&self) -> Space {
        self.node_features.space()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.node_count()
    }
}

/// First-order graph: `i ~ j` iff `cos(F_i, F_j) > threshold`.
pub fn build_fog(features: &FeatureMatrix, threshold: f64) -> Result<AffinityGraph> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::param(
            "threshold",
            format!("{threshold} outside [-1, 1]"),
        ));
    }
    for (index, row) in features.iter_rows().enumerate() {
        let n = norm(row);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NonUnitNode { index, norm: n });
        }
    }
    let n = features.rows();
    let mut adjacency = Adjacency::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if dot(features.row(i), features.row(j)) > threshold {
                adjacency.add_edge(i, j);
            }
        }
    }
    Ok(AffinityGraph {
        node_features: features.clone(),
        adjacency,
        order: GraphOrder::First,
        threshold,
    })
}

/// Second-order graph derived from a first-order one.
pub fn build_sog(fog: &AffinityGraph) -> Result<AffinityGraph> {
    if fog.order != GraphOrder::First {
        return Err(Error::WrongOrder);
    }
    Ok(AffinityGraph {
        node_features: fog.node_features.clone(),
        adjacency: fog.adjacency.second_order(),
        order: GraphOrder::Second,
        threshold: fog.threshold,
    })
}

/// Affinity threshold that grows linearly with the number of processed
/// samples and saturates at 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub t0: f64,
    pub growth: f64,
    pub tested: u64,
}

impl ThresholdSchedule {
    pub fn new(t0: f64, growth: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t0) {
            return Err(Error::param("t0", format!("{t0} outside [0, 1]")));
        }
        if !(growth >= 0.0) {
            return Err(Error::param("growth", format!("{growth} is negative")));
        }
        Ok(Self {
            t0,
            growth,
            tested: 0,
        })
    }

    pub fn current(&self) -> f64 {
        (self.t0 + self.growth * self.tested as f64).min(1.0)
    }

    /// Returns the threshold for the sample about to be processed and
    /// moves the counter forward.
    pub fn advance(&mut self) -> f64 {
        let t = self.current();
        self.tested += 1;
        t
    }
}

/// Maximal cliques of one graph, each sorted ascending, listed in
/// lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueSet {
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueSet {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.cliques.iter()
    }
}

/// Enumerates every maximal clique with Bron–Kerbosch, pivoting on the
/// vertex that covers most of the candidate set, and seeding the outer
/// loop in degeneracy order. Isolated nodes come out as singletons.
pub fn maximal_cliques(adj: &Adjacency) -> CliqueSet {
    let n = adj.node_count();
    let (order, _) = adj.degeneracy_order();
    let mut position = vec![0; n];
    for (pos, &v) in order.iter().enumerate() {
        position[v] = pos;
    }

    let mut found = Vec::new();
    let mut r = Vec::new();
    for &v in &order {
        let mut p = NodeSet::new(n);
        let mut x = NodeSet::new(n);
        for u in adj.neighbors(v).iter() {
            if position[u] > position[v] {
                p.insert(u);
            } else {
                x.insert(u);
            }
        }
        r.push(v);
        pivot_search(adj, &mut r, p, x, &mut found);
        r.pop();
    }

    for c in &mut found {
        c.sort_unstable();
    }
    found.sort();
    CliqueSet { cliques: found }
}

fn pivot_search(
    adj: &Adjacency,
    r: &mut Vec<usize>,
    mut p: NodeSet,
    mut x: NodeSet,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    // pivot maximizes |P ∩ N(u)| over P ∪ X, lowest index on ties
    let mut pivot = usize::MAX;
    let mut best = 0;
    for u in p.iter().chain(x.iter()) {
        let c = p.intersection_len(adj.neighbors(u));
        if pivot == usize::MAX || c > best || (c == best && u < pivot) {
            pivot = u;
            best = c;
        }
    }
    let candidates: Vec<usize> = p.difference(adj.neighbors(pivot)).iter().collect();
    for v in candidates {
        let nv = adj.neighbors(v);
        r.push(v);
        pivot_search(adj, r, p.intersection(nv), x.intersection(nv), out);
        r.pop();
        p.remove(v);
        x.insert(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::FeatureVector;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        let dim = rows[0].len();
        let vs: Vec<FeatureVector> = rows
            .iter()
            .map(|r| FeatureVector::unit(r.to_vec(), Space::Css).unwrap())
            .collect();
        FeatureMatrix::from_rows(dim, Space::Css, &vs).unwrap()
    }

    #[test]
    fn fog_threshold_one_is_empty() {
        let m = matrix(&[&[1.0, 0.2, 0.1], &[0.3, 1.0, 0.0], &[0.5, 0.5, 0.5]]);
        let g = build_fog(&m, 1.0).unwrap();
        assert_eq!(g.adjacency.edge_count(), 0);
    }

    #[test]
    fn fog_low_threshold_is_complete() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]);
        let g = build_fog(&m, -1.0).unwrap();
        // antipodal pairs sit exactly at -1 and drop out under '>'
        assert_eq!(g.adjacency.edge_count(), 4);
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, -0.5]]);
        let g = build_fog(&m, -1.0).unwrap();
        assert_eq!(g.adjacency, Adjacency::complete(4));
    }

    #[test]
    fn fog_example_edges() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let g = build_fog(&m, 0.5).unwrap();
        assert_eq!(g.adjacency.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(g.order, GraphOrder::First);
    }

    #[test]
    fn fog_strict_boundary() {
        let m = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let g = build_fog(&m, 0.0).unwrap();
        assert_eq!(g.adjacency.edge_count(), 0);
    }

    #[test]
    fn fog_rejects_non_unit_rows() {
        let m = FeatureMatrix::from_flat(2, Space::Css, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert!(matches!(
            build_fog(&m, 0.5),
            Err(Error::NonUnitNode { index: 1, .. })
        ));
    }

    fn graph_of(adj: Adjacency) -> AffinityGraph {
        let n = adj.node_count();
        let mut data = vec![0.0; n * n.max(1)];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        AffinityGraph {
            node_features: FeatureMatrix::from_flat(n.max(1), Space::Css, data).unwrap(),
            adjacency: adj,
            order: GraphOrder::First,
            threshold: 0.5,
        }
    }

    #[test]
    fn sog_examples() {
        let tri = build_sog(&graph_of(Adjacency::complete(3))).unwrap();
        assert_eq!(tri.adjacency, Adjacency::complete(3));
        assert_eq!(tri.order, GraphOrder::Second);

        let path = build_sog(&graph_of(Adjacency::from_edges(3, &[(0, 1), (1, 2)]))).unwrap();
        assert_eq!(path.adjacency.edge_count(), 0);

        let empty = build_sog(&graph_of(Adjacency::empty(4))).unwrap();
        assert_eq!(empty.adjacency.edge_count(), 0);
    }

    #[test]
    fn sog_requires_first_order() {
        let sog = build_sog(&graph_of(Adjacency::complete(3))).unwrap();
        assert!(matches!(build_sog(&sog), Err(Error::WrongOrder)));
    }

    #[test]
    fn threshold_examples() {
        let mut s = ThresholdSchedule::new(0.3, 0.0).unwrap();
        s.tested = 1234;
        assert_eq!(s.advance(), 0.3);

        let mut s = ThresholdSchedule::new(0.3, 0.001).unwrap();
        s.tested = 100;
        assert!((s.advance() - 0.4).abs() < 1e-12);
        assert_eq!(s.tested, 101);

        let mut s = ThresholdSchedule::new(0.9, 0.01).unwrap();
        s.tested = 50;
        assert_eq!(s.advance(), 1.0);
    }

    #[test]
    fn cliques_triangle_plus_isolated() {
        let adj = Adjacency::from_edges(4, &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(
            maximal_cliques(&adj).cliques,
            vec![vec![0, 1, 2], vec![3]]
        );
    }

    #[test]
    fn cliques_empty_graph() {
        assert_eq!(
            maximal_cliques(&Adjacency::empty(3)).cliques,
            vec![vec![0], vec![1], vec![2]]
        );
        assert!(maximal_cliques(&Adjacency::empty(0)).is_empty());
    }

    #[test]
    fn cliques_four_cycle() {
        let adj = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(
            maximal_cliques(&adj).cliques,
            vec![vec![0, 1], vec![0, 3], vec![1, 2], vec![2, 3]]
        );
    }

    #[test]
    fn degeneracy_of_known_graphs() {
        assert_eq!(Adjacency::complete(5).degeneracy_order().1, 4);
        let path = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(path.degeneracy_order().1, 1);
    }

    #[test]
    fn node_set_ops() {
        let mut a = NodeSet::new(130);
        a.insert(0);
        a.insert(64);
        a.insert(129);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 64, 129]);
        assert_eq!(a.len(), 3);
        a.remove(64);
        assert!(!a.contains(64));
        assert_eq!(NodeSet::full(70).len(), 70);
    }
}
