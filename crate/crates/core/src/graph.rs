//! Controller architectures: undirected simple graphs, their n-hop closures,
//! Laplacians, and seeded random generators.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maximum number of regeneration attempts for the random generators.
pub const MAX_GENERATION_ATTEMPTS: u64 = 1000;

/// Undirected simple graph on nodes `0..n_nodes`.
///
/// Edges are stored once as `(i, j)` with `i < j`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Topology {
    /// Builds a topology from unordered pairs. Self-loops, duplicate pairs and
    /// out-of-range indices are rejected.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidInput(
                "topology needs at least one node".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::NonSimple(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::NonSimple(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
        }
        Ok(Topology {
            n_nodes,
            edges: set.into_iter().collect(),
        })
    }

    fn from_set(n_nodes: usize, set: BTreeSet<(usize, usize)>) -> Self {
        Topology {
            n_nodes,
            edges: set.into_iter().collect(),
        }
    }

    pub fn path(n_nodes: usize) -> Result<Self> {
        Topology::new(n_nodes, (1..n_nodes).map(|i| (i - 1, i)))
    }

    pub fn cycle(n_nodes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::InvalidInput("a cycle needs at least 3 nodes".into()));
        }
        Topology::new(n_nodes, (0..n_nodes).map(|i| (i, (i + 1) % n_nodes)))
    }

    pub fn complete(n_nodes: usize) -> Result<Self> {
        Topology::new(
            n_nodes,
            (0..n_nodes).flat_map(|i| (i + 1..n_nodes).map(move |j| (i, j))),
        )
    }

    /// Star with node 0 as the hub.
    pub fn star(n_nodes: usize) -> Result<Self> {
        Topology::new(n_nodes, (1..n_nodes).map(|i| (0, i)))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n_nodes * (self.n_nodes - 1) / 2
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.degrees().into_iter().min().unwrap_or(0)
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        bfs(&self.adjacency_lists(), source, usize::MAX)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Parses the edge-list text format: a header line `N <n_nodes>` followed
    /// by one `i j` pair per line.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("N") {
            return Err(Error::Parse(format!(
                "expected header `N <n_nodes>`, got `{header}`"
            )));
        }
        let n_nodes: usize = head
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad node count in header `{header}`")))?;
        if head.next().is_some() {
            return Err(Error::Parse(format!(
                "trailing tokens in header `{header}`"
            )));
        }
        let mut edges = Vec::new();
        for (no, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let pair = match parts.as_slice() {
                [a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
                _ => None,
            };
            let (a, b) = pair
                .ok_or_else(|| Error::Parse(format!("line {no}: expected `i j`, got `{line}`")))?;
            edges.push((a, b));
        }
        Topology::new(n_nodes, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 * (self.edges.len() + 1));
        let _ = writeln!(out, "N {}", self.n_nodes);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

fn bfs(adj: &[Vec<usize>], source: usize, max_depth: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        if du == max_depth {
            continue;
        }
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn require_connected(g: &Topology) -> Result<()> {
    if g.is_connected() {
        Ok(())
    } else {
        Err(Error::Disconnected)
    }
}

/// The n-hop closure: every pair of distinct nodes at distance at most `hops`
/// in `g1` becomes an edge. Computed by depth-truncated BFS from each node.
pub fn hop_closure(g1: &Topology, hops: usize) -> Result<Topology> {
    if hops == 0 {
        return Err(Error::InvalidInput("hop count must be at least 1".into()));
    }
    require_connected(g1)?;
    if hops == 1 {
        return Ok(g1.clone());
    }
    let adj = g1.adjacency_lists();
    let mut set = BTreeSet::new();
    for i in 0..g1.n_nodes {
        for (j, d) in bfs(&adj, i, hops).into_iter().enumerate() {
            if j > i && d.is_some() {
                set.insert((i, j));
            }
        }
    }
    Ok(Topology::from_set(g1.n_nodes, set))
}

/// Diameter of a connected graph: the smallest hop count whose closure is
/// complete.
pub fn max_hop(g1: &Topology) -> Result<usize> {
    let adj = g1.adjacency_lists();
    let mut diameter = 0;
    for i in 0..g1.n_nodes {
        for d in bfs(&adj, i, usize::MAX) {
            diameter = diameter.max(d.ok_or(Error::Disconnected)?);
        }
    }
    Ok(diameter)
}

/// Combinatorial Laplacian `D - A`.
pub fn laplacian(g: &Topology) -> DMatrix<f64> {
    weighted_laplacian(g, &vec![1.0; g.n_edges()])
}

/// Laplacian with per-edge weights, aligned with `g.edges()`.
pub fn weighted_laplacian(g: &Topology, weights: &[f64]) -> DMatrix<f64> {
    assert_eq!(weights.len(), g.n_edges(), "one weight per edge");
    let n = g.n_nodes;
    let mut l = DMatrix::zeros(n, n);
    for (&(i, j), &w) in g.edges.iter().zip(weights) {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

fn attempt_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    rng
}

/// Connected simple `degree`-regular graph from the pairing model, rejecting
/// self-loops, multi-edges and disconnected outcomes.
pub fn gen_regular(n_nodes: usize, degree: usize, seed: u64) -> Result<Topology> {
    if n_nodes == 0 {
        return Err(Error::Infeasible("no nodes".into()));
    }
    if degree >= n_nodes {
        return Err(Error::Infeasible(format!(
            "degree {degree} must be below node count {n_nodes}"
        )));
    }
    if (n_nodes * degree) % 2 != 0 {
        return Err(Error::Infeasible(format!(
            "n_nodes * degree = {} is odd",
            n_nodes * degree
        )));
    }
    if degree == 0 && n_nodes > 1 {
        return Err(Error::Infeasible(
            "a 0-regular graph on several nodes is disconnected".into(),
        ));
    }
    if degree == 1 && n_nodes > 2 {
        return Err(Error::Infeasible(
            "a 1-regular graph on more than 2 nodes is disconnected".into(),
        ));
    }
    let mut stubs: Vec<usize> = (0..n_nodes)
        .flat_map(|v| std::iter::repeat_n(v, degree))
        .collect();
    'attempts: for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = attempt_rng(seed, attempt);
        stubs.sort_unstable();
        stubs.shuffle(&mut rng);
        let mut set = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !set.insert((a.min(b), a.max(b))) {
                continue 'attempts;
            }
        }
        let g = Topology::from_set(n_nodes, set);
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Infeasible(format!(
        "no connected simple {degree}-regular graph on {n_nodes} nodes after \
         {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

/// Planted-partition parameters: cluster sizes, within-cluster edge
/// probability, and between-cluster edge probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams {
    pub sizes: Vec<usize>,
    pub p_intra: f64,
    pub p_inter: f64,
}

impl ClusterParams {
    /// Four clusters holding 40/30/20/10 percent of the nodes.
    pub fn defaults_for(n_nodes: usize) -> Self {
        let shares = [4, 3, 2];
        let mut sizes: Vec<usize> = shares.iter().map(|s| n_nodes * s / 10).collect();
        let used: usize = sizes.iter().sum();
        sizes.push(n_nodes - used);
        sizes.retain(|&s| s > 0);
        ClusterParams {
            sizes,
            p_intra: 0.25,
            p_inter: 0.004,
        }
    }
}

/// Clustered random graph: Bernoulli edges inside and between clusters, plus
/// one forced bridge between each pair of consecutive clusters. Regenerated
/// until connected.
pub fn gen_clustered_random(n_nodes: usize, params: &ClusterParams, seed: u64) -> Result<Topology> {
    let ClusterParams {
        sizes,
        p_intra,
        p_inter,
    } = params;
    if sizes.iter().sum::<usize>() != n_nodes || sizes.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "cluster sizes {sizes:?} must be positive and sum to {n_nodes}"
        )));
    }
    if !(0.0..=1.0).contains(p_intra) || !(0.0..=1.0).contains(p_inter) {
        return Err(Error::InvalidInput(
            "probabilities must lie in [0, 1]".into(),
        ));
    }
    if *p_intra == 0.0 && sizes.iter().any(|&s| s > 1) {
        return Err(Error::Infeasible(
            "zero within-cluster probability cannot connect a cluster".into(),
        ));
    }
    let mut cluster_of = Vec::with_capacity(n_nodes);
    let mut starts = Vec::with_capacity(sizes.len());
    for (c, &size) in sizes.iter().enumerate() {
        starts.push(cluster_of.len());
        cluster_of.extend(std::iter::repeat_n(c, size));
    }
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = attempt_rng(seed, attempt);
        let mut set = BTreeSet::new();
        for i in 0..n_nodes {
            for j in i + 1..n_nodes {
                let p = if cluster_of[i] == cluster_of[j] {
                    *p_intra
                } else {
                    *p_inter
                };
                if rng.random::<f64>() < p {
                    set.insert((i, j));
                }
            }
        }
        for c in 1..sizes.len() {
            let a = starts[c - 1] + rng.random_range(0..sizes[c - 1]);
            let b = starts[c] + rng.random_range(0..sizes[c]);
            set.insert((a, b));
        }
        let g = Topology::from_set(n_nodes, set);
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Infeasible(format!(
        "no connected clustered graph after {MAX_GENERATION_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges_of(g: &Topology) -> Vec<(usize, usize)> {
        g.edges().to_vec()
    }

    #[test]
    fn closure_of_path() {
        let p = Topology::path(4).unwrap();
        let g2 = hop_closure(&p, 2).unwrap();
        assert_eq!(edges_of(&g2), vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn closure_of_five_cycle_is_complete() {
        let c5 = Topology::cycle(5).unwrap();
        assert_eq!(hop_closure(&c5, 2).unwrap(), Topology::complete(5).unwrap());
    }

    #[test]
    fn closure_identity_and_errors() {
        let g = gen_regular(20, 3, 1).unwrap();
        assert_eq!(hop_closure(&g, 1).unwrap(), g);
        assert!(matches!(hop_closure(&g, 0), Err(Error::InvalidInput(_))));
        let split = Topology::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(hop_closure(&split, 2), Err(Error::Disconnected)));
    }

    #[test]
    fn diameters() {
        assert_eq!(max_hop(&Topology::path(4).unwrap()).unwrap(), 3);
        assert_eq!(max_hop(&Topology::complete(6).unwrap()).unwrap(), 1);
        assert_eq!(max_hop(&Topology::cycle(12).unwrap()).unwrap(), 6);
        let split = Topology::new(3, [(0, 1)]).unwrap();
        assert!(matches!(max_hop(&split), Err(Error::Disconnected)));
    }

    #[test]
    fn diameter_closure_is_first_complete_one() {
        for seed in 0..5 {
            let g = gen_regular(30, 3, seed).unwrap();
            let d = max_hop(&g).unwrap();
            assert!(hop_closure(&g, d).unwrap().is_complete());
            assert!(!hop_closure(&g, d - 1).unwrap().is_complete());
        }
    }

    #[test]
    fn small_laplacians() {
        let l = laplacian(&Topology::path(2).unwrap());
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let k3 = laplacian(&Topology::complete(3).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k3[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn rejects_non_simple() {
        assert!(matches!(
            Topology::new(3, [(0, 0)]),
            Err(Error::NonSimple(_))
        ));
        assert!(matches!(
            Topology::new(3, [(0, 1), (1, 0)]),
            Err(Error::NonSimple(_))
        ));
        assert!(matches!(
            Topology::new(3, [(0, 3)]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn regular_generator() {
        let g = gen_regular(100, 3, 7).unwrap();
        assert_eq!(g.n_edges(), 150);
        assert!(g.degrees().iter().all(|&d| d == 3));
        assert!(g.is_connected());
        assert_eq!(
            gen_regular(4, 3, 11).unwrap(),
            Topology::complete(4).unwrap()
        );
        assert_eq!(gen_regular(6, 2, 3).unwrap().n_edges(), 6);
        assert_eq!(max_hop(&gen_regular(6, 2, 3).unwrap()).unwrap(), 3);
        assert_eq!(
            gen_regular(50, 4, 9).unwrap(),
            gen_regular(50, 4, 9).unwrap()
        );
    }

    #[test]
    fn regular_generator_rejects_infeasible() {
        assert!(matches!(gen_regular(5, 3, 0), Err(Error::Infeasible(_))));
        assert!(matches!(gen_regular(4, 4, 0), Err(Error::Infeasible(_))));
        assert!(matches!(gen_regular(6, 1, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn clustered_degenerate_is_two_cliques_and_a_bridge() {
        let params = ClusterParams {
            sizes: vec![5, 5],
            p_intra: 1.0,
            p_inter: 0.0,
        };
        let g = gen_clustered_random(10, &params, 3).unwrap();
        assert_eq!(g.n_edges(), 21);
        let crossing: Vec<_> = g
            .edges()
            .iter()
            .filter(|&&(i, j)| i < 5 && j >= 5)
            .collect();
        assert_eq!(crossing.len(), 1);
        for i in 0..5 {
            for j in i + 1..5 {
                assert!(g.has_edge(i, j) && g.has_edge(i + 5, j + 5));
            }
        }
    }

    #[test]
    fn clustered_default_is_heterogeneous_and_deterministic() {
        let params = ClusterParams::defaults_for(100);
        let g = gen_clustered_random(100, &params, 5).unwrap();
        assert!(g.is_connected());
        assert!(g.max_degree() > g.min_degree());
        assert_eq!(g, gen_clustered_random(100, &params, 5).unwrap());
    }

    #[test]
    fn clustered_rejects_impossible() {
        let params = ClusterParams {
            sizes: vec![3, 3],
            p_intra: 0.0,
            p_inter: 0.5,
        };
        assert!(matches!(
            gen_clustered_random(6, &params, 0),
            Err(Error::Infeasible(_))
        ));
        let bad_sum = ClusterParams {
            sizes: vec![3, 2],
            p_intra: 0.5,
            p_inter: 0.5,
        };
        assert!(gen_clustered_random(6, &bad_sum, 0).is_err());
    }

    #[test]
    fn edge_list_text() {
        let g = Topology::cycle(4).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text, "N 4\n0 1\n0 3\n1 2\n2 3\n");
        assert_eq!(Topology::from_edge_list(&text).unwrap(), g);
        assert!(Topology::from_edge_list("M 3\n0 1\n").is_err());
        assert!(Topology::from_edge_list("N 3\n0 1 2\n").is_err());
        assert!(Topology::from_edge_list("N 3\n0 1\n1 0\n").is_err());
    }
}
