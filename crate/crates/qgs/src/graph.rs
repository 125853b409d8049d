//! Fundamental graphs of Z^d-periodic equilateral metric graphs.
//!
//! A periodic graph is described entirely by its compact quotient: a list of
//! vertices, a list of oriented edges, and for every edge an integer index
//! vector recording which lattice cell the edge crosses into. Everything in
//! this module is immutable after construction and purely combinatorial.

use std::collections::BTreeMap;
use std::fmt;

use crate::dsl::GraphSpec;
use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Integer index vector τ(e) of an edge (one entry per lattice dimension).
pub type LatticeVector = Vec<i64>;

/// An oriented edge of the fundamental graph. The local coordinate runs from
/// the tail (t = 0) to the head (t = 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedEdge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub index: LatticeVector,
}

impl OrientedEdge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }

    /// Euclidean length of the index vector.
    pub fn index_norm(&self) -> f64 {
        self.index
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// Immutable fundamental graph: validated vertices, degrees and indexed edges.
#[derive(Debug, Clone)]
pub struct FundamentalGraph {
    name: String,
    dim: usize,
    vertex_labels: Vec<String>,
    edge_labels: Vec<String>,
    degrees: Vec<usize>,
    edges: Vec<OrientedEdge>,
}

impl FundamentalGraph {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices ν.
    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    /// Number of undirected edges ν*.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_label(&self, v: VertexId) -> &str {
        &self.vertex_labels[v]
    }

    pub fn edge_label(&self, e: EdgeId) -> &str {
        &self.edge_labels[e]
    }

    pub fn edge_by_label(&self, label: &str) -> Option<EdgeId> {
        self.edge_labels.iter().position(|l| l == label)
    }

    /// Vertex degree (loops counted twice).
    pub fn degree(&self, v: VertexId) -> usize {
        self.degrees[v]
    }

    /// Sum of all vertex degrees (equals 2ν*).
    pub fn total_degree(&self) -> usize {
        self.degrees.iter().sum()
    }

    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &OrientedEdge {
        &self.edges[e]
    }

    /// Edges with nonzero index.
    pub fn bridges(&self) -> impl Iterator<Item = &OrientedEdge> {
        self.edges.iter().filter(|e| e.index.iter().any(|&x| x != 0))
    }

    /// All incidences of edges at `v` as `(edge id, endpoint)` pairs; a loop
    /// at `v` appears twice, once per endpoint.
    pub fn incidences(&self, v: VertexId) -> Vec<(EdgeId, Endpoint)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.tail == v {
                out.push((e.id, Endpoint::Tail));
            }
            if e.head == v {
                out.push((e.id, Endpoint::Head));
            }
        }
        out
    }
}

/// Which end of an oriented edge a vertex sits at. Tail is the initial vertex
/// (local coordinate 0), Head the terminal one (local coordinate 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Tail,
    Head,
}

impl Endpoint {
    /// The local coordinate of this endpoint: 0 at the tail, 1 at the head.
    pub fn coordinate(self) -> f64 {
        match self {
            Endpoint::Tail => 0.0,
            Endpoint::Head => 1.0,
        }
    }

    /// 0 at the tail, 1 at the head (the exponent selecting the index phase).
    pub fn marker(self) -> u32 {
        match self {
            Endpoint::Tail => 0,
            Endpoint::Head => 1,
        }
    }
}

/// Validate a spec and build the immutable graph.
pub fn build_graph(spec: &GraphSpec) -> Result<FundamentalGraph> {
    if spec.dim == 0 {
        return Err(Error::InvalidSpec("dim must be positive".into()));
    }
    if spec.vertex_names.is_empty() {
        return Err(Error::InvalidSpec("graph has no vertices".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for name in &spec.vertex_names {
        if !seen.insert(name.clone()) {
            return Err(Error::InvalidSpec(format!("duplicate vertex name `{name}`")));
        }
    }
    let vertex_of = |name: &str| -> Result<VertexId> {
        spec.vertex_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown vertex `{name}`")))
    };

    let mut edges = Vec::with_capacity(spec.edge_decls.len());
    let mut edge_labels = Vec::with_capacity(spec.edge_decls.len());
    let mut seen_edges = std::collections::BTreeSet::new();
    for (id, decl) in spec.edge_decls.iter().enumerate() {
        if !seen_edges.insert(decl.name.clone()) {
            return Err(Error::InvalidSpec(format!(
                "duplicate edge name `{}`",
                decl.name
            )));
        }
        if decl.index.len() != spec.dim {
            return Err(Error::IndexArityMismatch {
                edge: decl.name.clone(),
                expected: spec.dim,
                got: decl.index.len(),
            });
        }
        edges.push(OrientedEdge {
            id,
            tail: vertex_of(&decl.tail)?,
            head: vertex_of(&decl.head)?,
            index: decl.index.clone(),
        });
        edge_labels.push(decl.name.clone());
    }

    let nu = spec.vertex_names.len();
    let mut degrees = vec![0usize; nu];
    for e in &edges {
        degrees[e.tail] += 1;
        degrees[e.head] += 1;
    }

    if !is_connected(nu, &edges) {
        return Err(Error::DisconnectedGraph);
    }

    let nu_star = edges.len();
    if nu + spec.dim > nu_star + 1 {
        return Err(Error::EulerViolation {
            nu,
            nu_star,
            dim: spec.dim,
        });
    }

    let g = FundamentalGraph {
        name: spec.name.clone(),
        dim: spec.dim,
        vertex_labels: spec.vertex_names.clone(),
        edge_labels,
        degrees,
        edges,
    };

    // Z^d-periodicity needs d independent bridge-cycle index sums, not just
    // d independent raw indices: the sums are invariant under re-choosing
    // the fundamental vertex set, raw indices are not. A graph such as two
    // vertices joined by edges with indices (1,0), (1,1), (1,2) has raw
    // rank 2 but cycle rank 1, and its periodic graph is disconnected.
    let tree = spanning_tree(&g);
    let rank = integer_rank(
        tree.cycles.values().map(|c| c.index_sum.as_slice()),
        spec.dim,
    );
    if rank < spec.dim {
        return Err(Error::RankDeficientIndices {
            rank,
            dim: spec.dim,
        });
    }

    Ok(g)
}

fn is_connected(nu: usize, edges: &[OrientedEdge]) -> bool {
    if nu == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); nu];
    for e in edges {
        adj[e.tail].push(e.head);
        adj[e.head].push(e.tail);
    }
    let mut seen = vec![false; nu];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Rank of a set of integer vectors over the rationals, by fraction-free
/// Gaussian elimination in i128 (no floating-point rank misjudgment).
#[allow(clippy::needless_range_loop)] // rows r and rank are borrowed together
fn integer_rank<'a>(rows: impl Iterator<Item = &'a [i64]>, dim: usize) -> usize {
    let mut mat: Vec<Vec<i128>> = rows
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rank = 0;
    for col in 0..dim {
        let pivot = (rank..mat.len()).find(|&r| mat[r][col] != 0);
        let Some(p) = pivot else { continue };
        mat.swap(rank, p);
        let pv = mat[rank][col];
        for r in rank + 1..mat.len() {
            let factor = mat[r][col];
            if factor == 0 {
                continue;
            }
            for c in col..dim {
                mat[r][c] = mat[r][c] * pv - mat[rank][c] * factor;
            }
            // keep entries small; signs do not matter for rank
            let g = mat[r][col..dim].iter().fold(0i128, |g, &x| gcd(g, x.abs()));
            if g > 1 {
                for c in col..dim {
                    mat[r][c] /= g;
                }
            }
        }
        rank += 1;
        if rank == dim {
            break;
        }
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Greedy selection of `dim` edges with linearly independent indices, in
/// increasing edge-id order. Returns `None` when the indices are rank
/// deficient (cannot happen for a validated graph).
pub fn independent_bridges(g: &FundamentalGraph) -> Option<Vec<EdgeId>> {
    let mut picked: Vec<EdgeId> = Vec::new();
    for e in g.edges() {
        let mut rows: Vec<&[i64]> = picked.iter().map(|&id| g.edge(id).index.as_slice()).collect();
        rows.push(&e.index);
        let len = rows.len();
        if integer_rank(rows.into_iter(), g.dim()) == len {
            picked.push(e.id);
            if picked.len() == g.dim() {
                return Some(picked);
            }
        }
    }
    None
}

/// Direction in which a cycle traverses an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    Forward,
    Reverse,
}

/// The unique cycle through a non-tree edge and tree edges. The first step is
/// always the non-tree edge traversed forward.
#[derive(Debug, Clone)]
pub struct Cycle {
    pub steps: Vec<(EdgeId, Traversal)>,
    /// Signed sum of the traversed indices; invariant under index
    /// normalization and equal to the normalized index of the non-tree edge.
    pub index_sum: LatticeVector,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A deterministic spanning tree and the bridge cycle of every non-tree edge.
#[derive(Debug, Clone)]
pub struct SpanningTreeInfo {
    pub tree_edges: Vec<EdgeId>,
    pub cycles: BTreeMap<EdgeId, Cycle>,
}

/// Deterministic spanning tree: grow from vertex 0, always attaching the
/// frontier edge with the smallest index vector (by squared length), ties
/// broken by lowest edge id. Preferring small indices keeps the built-in
/// graphs' zero-index edges in the tree, so normalization is the identity on
/// them.
pub fn spanning_tree(g: &FundamentalGraph) -> SpanningTreeInfo {
    let nu = g.vertex_count();
    let mut in_tree = vec![false; nu];
    in_tree[0] = true;
    let mut tree_edges: Vec<EdgeId> = Vec::new();

    while tree_edges.len() + 1 < nu {
        let mut best: Option<(i128, EdgeId, VertexId)> = None;
        for e in g.edges() {
            if e.is_loop() {
                continue;
            }
            let new_vertex = match (in_tree[e.tail], in_tree[e.head]) {
                (true, false) => e.head,
                (false, true) => e.tail,
                _ => continue,
            };
            let weight: i128 = e.index.iter().map(|&x| (x as i128) * (x as i128)).sum();
            let key = (weight, e.id, new_vertex);
            if best.is_none_or(|b| (b.0, b.1) > (key.0, key.1)) {
                best = Some(key);
            }
        }
        let (_, eid, v) = best.expect("validated graph is connected");
        in_tree[v] = true;
        tree_edges.push(eid);
    }
    tree_edges.sort_unstable();

    // tree adjacency for path finding
    let mut adj: Vec<Vec<(VertexId, EdgeId, Traversal)>> = vec![Vec::new(); nu];
    for &eid in &tree_edges {
        let e = g.edge(eid);
        adj[e.tail].push((e.head, eid, Traversal::Forward));
        adj[e.head].push((e.tail, eid, Traversal::Reverse));
    }

    let mut cycles = BTreeMap::new();
    for e in g.edges() {
        if tree_edges.binary_search(&e.id).is_ok() {
            continue;
        }
        let mut steps = vec![(e.id, Traversal::Forward)];
        if !e.is_loop() {
            steps.extend(tree_path(&adj, e.head, e.tail));
        }
        let mut index_sum = vec![0i64; g.dim()];
        for &(eid, dir) in &steps {
            let sign = match dir {
                Traversal::Forward => 1,
                Traversal::Reverse => -1,
            };
            for (s, &x) in index_sum.iter_mut().zip(&g.edge(eid).index) {
                *s += sign * x;
            }
        }
        cycles.insert(e.id, Cycle { steps, index_sum });
    }

    SpanningTreeInfo { tree_edges, cycles }
}

/// Unique path between two vertices of a tree, as traversal steps.
fn tree_path(
    adj: &[Vec<(VertexId, EdgeId, Traversal)>],
    from: VertexId,
    to: VertexId,
) -> Vec<(EdgeId, Traversal)> {
    let mut prev: Vec<Option<(VertexId, EdgeId, Traversal)>> = vec![None; adj.len()];
    let mut queue = std::collections::VecDeque::from([from]);
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &(u, eid, dir) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                prev[u] = Some((v, eid, dir));
                queue.push_back(u);
            }
        }
    }
    let mut path = Vec::new();
    let mut v = to;
    while v != from {
        let (p, eid, dir) = prev[v].expect("tree is connected");
        path.push((eid, dir));
        v = p;
    }
    path.reverse();
    path
}

/// Re-choose the fundamental vertex set so that every tree edge carries the
/// zero index. Cycle index sums are unchanged.
pub fn normalize_indices(g: &FundamentalGraph, tree: &SpanningTreeInfo) -> FundamentalGraph {
    // shift of each vertex: signed index sum along the tree path from vertex 0
    let nu = g.vertex_count();
    let mut shift: Vec<Option<LatticeVector>> = vec![None; nu];
    shift[0] = Some(vec![0; g.dim()]);
    let mut adj: Vec<Vec<(VertexId, EdgeId, i64)>> = vec![Vec::new(); nu];
    for &eid in &tree.tree_edges {
        let e = g.edge(eid);
        adj[e.tail].push((e.head, eid, 1));
        adj[e.head].push((e.tail, eid, -1));
    }
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let sv = shift[v].clone().unwrap();
        for &(u, eid, sign) in &adj[v] {
            if shift[u].is_none() {
                let e = g.edge(eid);
                let su: LatticeVector = sv
                    .iter()
                    .zip(&e.index)
                    .map(|(&s, &x)| s + sign * x)
                    .collect();
                shift[u] = Some(su);
                queue.push_back(u);
            }
        }
    }

    let mut out = g.clone();
    for e in &mut out.edges {
        let st = shift[e.tail].as_ref().expect("connected");
        let sh = shift[e.head].as_ref().expect("connected");
        for ((x, &a), &b) in e.index.iter_mut().zip(st).zip(sh) {
            *x += a - b;
        }
    }
    out
}

/// Two-coloring of the vertices such that every edge crosses parts.
#[derive(Debug, Clone)]
pub struct Bipartition {
    color: Vec<bool>,
}

impl Bipartition {
    /// Vertices with `part(v) == false` form one part, the rest the other.
    pub fn part(&self, v: VertexId) -> bool {
        self.color[v]
    }

    /// +1 on the first part, -1 on the second.
    pub fn sign(&self, v: VertexId) -> f64 {
        if self.color[v] {
            -1.0
        } else {
            1.0
        }
    }

    pub fn parts(&self) -> (Vec<VertexId>, Vec<VertexId>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (v, &c) in self.color.iter().enumerate() {
            if c {
                b.push(v)
            } else {
                a.push(v)
            }
        }
        (a, b)
    }
}

/// Breadth-first two-coloring; `None` when an odd closed walk exists (any
/// loop defeats it immediately).
pub fn is_bipartite(g: &FundamentalGraph) -> Option<Bipartition> {
    if g.edges().iter().any(|e| e.is_loop()) {
        return None;
    }
    let nu = g.vertex_count();
    let mut color: Vec<Option<bool>> = vec![None; nu];
    color[0] = Some(false);
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut adj: Vec<Vec<VertexId>> = vec![Vec::new(); nu];
    for e in g.edges() {
        adj[e.tail].push(e.head);
        adj[e.head].push(e.tail);
    }
    while let Some(v) = queue.pop_front() {
        let cv = color[v].unwrap();
        for &u in &adj[v] {
            match color[u] {
                None => {
                    color[u] = Some(!cv);
                    queue.push_back(u);
                }
                Some(cu) if cu == cv => return None,
                _ => {}
            }
        }
    }
    Some(Bipartition {
        color: color.into_iter().map(|c| c.unwrap_or(false)).collect(),
    })
}

/// The worked lattices shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    /// Z^d lattice: one vertex, d loops indexed by the standard basis.
    Lattice(usize),
    /// Hexagonal lattice: two vertices joined by three parallel edges.
    Graphene,
    /// Graphene with a pendant edge at each vertex.
    Stanene,
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinName::Lattice(d) => write!(f, "lattice{d}"),
            BuiltinName::Graphene => write!(f, "graphene"),
            BuiltinName::Stanene => write!(f, "stanene"),
        }
    }
}

impl std::str::FromStr for BuiltinName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphene" => return Ok(BuiltinName::Graphene),
            "stanene" => return Ok(BuiltinName::Stanene),
            _ => {}
        }
        let rest = s
            .strip_prefix("lattice")
            .map(|r| r.trim_start_matches('(').trim_end_matches(')'));
        if let Some(r) = rest {
            if let Ok(d) = r.parse::<usize>() {
                if d >= 2 {
                    return Ok(BuiltinName::Lattice(d));
                }
            }
        }
        Err(Error::UnknownBuiltin(s.to_string()))
    }
}

/// Spec of a built-in graph, exactly as it would appear in a `.qg` file.
pub fn builtin_spec(name: BuiltinName) -> Result<GraphSpec> {
    use crate::dsl::EdgeDecl;
    match name {
        BuiltinName::Lattice(d) => {
            if d < 2 {
                return Err(Error::UnknownBuiltin(format!("lattice{d}")));
            }
            let edge_decls = (0..d)
                .map(|s| {
                    let mut index = vec![0i64; d];
                    index[s] = 1;
                    EdgeDecl {
                        name: format!("e{}", s + 1),
                        tail: "v".into(),
                        head: "v".into(),
                        index,
                    }
                })
                .collect();
            Ok(GraphSpec {
                name: format!("lattice{d}"),
                dim: d,
                vertex_names: vec!["v".into()],
                edge_decls,
            })
        }
        BuiltinName::Graphene => Ok(GraphSpec {
            name: "graphene".into(),
            dim: 2,
            vertex_names: vec!["v1".into(), "v2".into()],
            edge_decls: vec![
                EdgeDecl::new("e1", "v1", "v2", vec![1, 0]),
                EdgeDecl::new("e2", "v1", "v2", vec![0, 1]),
                EdgeDecl::new("e3", "v1", "v2", vec![0, 0]),
            ],
        }),
        BuiltinName::Stanene => Ok(GraphSpec {
            name: "stanene".into(),
            dim: 2,
            vertex_names: vec!["v1".into(), "v2".into(), "v3".into(), "v4".into()],
            edge_decls: vec![
                EdgeDecl::new("e1", "v1", "v2", vec![1, 0]),
                EdgeDecl::new("e2", "v1", "v2", vec![0, 1]),
                EdgeDecl::new("e3", "v1", "v2", vec![0, 0]),
                EdgeDecl::new("e4", "v1", "v3", vec![0, 0]),
                EdgeDecl::new("e5", "v2", "v4", vec![0, 0]),
            ],
        }),
    }
}

pub fn builtin(name: BuiltinName) -> Result<FundamentalGraph> {
    build_graph(&builtin_spec(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_vertex_zero_spec() -> GraphSpec {
        GraphSpec {
            name: "bad".into(),
            dim: 2,
            vertex_names: vec!["a".into(), "b".into()],
            edge_decls: vec![
                crate::dsl::EdgeDecl::new("e1", "a", "b", vec![0, 0]),
                crate::dsl::EdgeDecl::new("e2", "a", "b", vec![0, 0]),
                crate::dsl::EdgeDecl::new("e3", "a", "b", vec![0, 0]),
            ],
        }
    }

    #[test]
    fn builtin_counts_and_degrees() {
        let g = builtin(BuiltinName::Stanene).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 5);
        assert_eq!(
            (0..4).map(|v| g.degree(v)).collect::<Vec<_>>(),
            vec![4, 4, 1, 1]
        );

        let l3 = builtin(BuiltinName::Lattice(3)).unwrap();
        assert_eq!(l3.vertex_count(), 1);
        assert_eq!(l3.degree(0), 6);
        for (s, e) in l3.edges().iter().enumerate() {
            let mut basis = vec![0i64; 3];
            basis[s] = 1;
            assert_eq!(e.index, basis);
            assert!(e.is_loop());
        }

        let gr = builtin(BuiltinName::Graphene).unwrap();
        assert_eq!((gr.vertex_count(), gr.edge_count()), (2, 3));
        assert_eq!(
            gr.edges().iter().map(|e| e.index.clone()).collect::<Vec<_>>(),
            vec![vec![1, 0], vec![0, 1], vec![0, 0]]
        );
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        for name in [
            BuiltinName::Lattice(2),
            BuiltinName::Lattice(4),
            BuiltinName::Graphene,
            BuiltinName::Stanene,
        ] {
            let g = builtin(name).unwrap();
            assert_eq!(g.total_degree(), 2 * g.edge_count());
        }
    }

    #[test]
    fn rank_deficient_indices_rejected() {
        let err = build_graph(&two_vertex_zero_spec()).unwrap_err();
        assert!(matches!(err, Error::RankDeficientIndices { rank: 0, dim: 2 }));
    }

    #[test]
    fn cycle_rank_deficiency_rejected() {
        // raw indices have rank 2, but every bridge cycle winds only along
        // the second axis, so the periodic graph is disconnected
        let spec = GraphSpec {
            name: "sheared".into(),
            dim: 2,
            vertex_names: vec!["a".into(), "b".into()],
            edge_decls: vec![
                crate::dsl::EdgeDecl::new("e1", "a", "b", vec![1, 0]),
                crate::dsl::EdgeDecl::new("e2", "a", "b", vec![1, 1]),
                crate::dsl::EdgeDecl::new("e3", "a", "b", vec![1, 2]),
            ],
        };
        let err = build_graph(&spec).unwrap_err();
        assert!(matches!(err, Error::RankDeficientIndices { rank: 1, dim: 2 }));
    }

    #[test]
    fn arity_mismatch_rejected() {
        let mut spec = two_vertex_zero_spec();
        spec.edge_decls[0].index = vec![1];
        let err = build_graph(&spec).unwrap_err();
        assert!(matches!(err, Error::IndexArityMismatch { .. }));
    }

    #[test]
    fn disconnected_rejected() {
        let spec = GraphSpec {
            name: "disc".into(),
            dim: 2,
            vertex_names: vec!["a".into(), "b".into()],
            edge_decls: vec![
                crate::dsl::EdgeDecl::new("e1", "a", "a", vec![1, 0]),
                crate::dsl::EdgeDecl::new("e2", "b", "b", vec![0, 1]),
            ],
        };
        assert!(matches!(
            build_graph(&spec).unwrap_err(),
            Error::DisconnectedGraph
        ));
    }

    #[test]
    fn euler_violation_rejected() {
        // two vertices, two full-rank edges, d = 2: 2 + 2 > 2 + 1
        let spec = GraphSpec {
            name: "euler".into(),
            dim: 2,
            vertex_names: vec!["a".into(), "b".into()],
            edge_decls: vec![
                crate::dsl::EdgeDecl::new("e1", "a", "b", vec![1, 0]),
                crate::dsl::EdgeDecl::new("e2", "a", "b", vec![0, 1]),
            ],
        };
        assert!(matches!(
            build_graph(&spec).unwrap_err(),
            Error::EulerViolation { .. }
        ));
    }

    /// Brute-force spanning tree enumeration for small graphs.
    fn all_spanning_trees(g: &FundamentalGraph) -> Vec<Vec<EdgeId>> {
        let nu = g.vertex_count();
        let ids: Vec<EdgeId> = g.edges().iter().filter(|e| !e.is_loop()).map(|e| e.id).collect();
        let mut out = Vec::new();
        let want = nu - 1;
        let n = ids.len();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != want {
                continue;
            }
            let subset: Vec<EdgeId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ids[i]).collect();
            // spanning + acyclic via union-find
            let mut parent: Vec<usize> = (0..nu).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    p[x] = find(p, p[x]);
                }
                p[x]
            }
            let mut acyclic = true;
            for &eid in &subset {
                let e = g.edge(eid);
                let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
                if a == b {
                    acyclic = false;
                    break;
                }
                parent[a] = b;
            }
            if acyclic {
                let root = find(&mut parent, 0);
                if (0..nu).all(|v| find(&mut parent, v) == root) {
                    out.push(subset);
                }
            }
        }
        out
    }

    #[test]
    fn graphene_tree_and_cycles() {
        let g = builtin(BuiltinName::Graphene).unwrap();
        let t = spanning_tree(&g);
        let all = all_spanning_trees(&g);
        assert_eq!(all.len(), 3); // each single edge spans
        assert!(all.contains(&t.tree_edges));
        assert_eq!(t.tree_edges, vec![2]); // zero-index edge preferred
        assert_eq!(t.cycles.len(), 2);
        for (&eid, cycle) in &t.cycles {
            assert_eq!(cycle.len(), 2);
            assert_eq!(cycle.index_sum, g.edge(eid).index);
        }
    }

    #[test]
    fn stanene_tree_and_cycle_sum() {
        let g = builtin(BuiltinName::Stanene).unwrap();
        let t = spanning_tree(&g);
        assert!(all_spanning_trees(&g).contains(&t.tree_edges));
        assert_eq!(t.tree_edges, vec![2, 3, 4]);
        let c1 = &t.cycles[&0];
        assert_eq!(c1.index_sum, vec![1, 0]);
        assert!(c1.len() <= g.vertex_count());
    }

    #[test]
    fn lattice_tree_is_empty_and_loops_cycle() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let t = spanning_tree(&g);
        assert!(t.tree_edges.is_empty());
        assert_eq!(t.cycles.len(), 2);
        for (&eid, c) in &t.cycles {
            assert_eq!(c.len(), 1);
            assert_eq!(c.index_sum, g.edge(eid).index);
        }
    }

    #[test]
    fn spanning_tree_deterministic() {
        let g = builtin(BuiltinName::Stanene).unwrap();
        let a = spanning_tree(&g);
        let b = spanning_tree(&g);
        assert_eq!(a.tree_edges, b.tree_edges);
    }

    #[test]
    fn normalize_is_identity_on_builtins() {
        for name in [BuiltinName::Lattice(2), BuiltinName::Graphene, BuiltinName::Stanene] {
            let g = builtin(name).unwrap();
            let t = spanning_tree(&g);
            let n = normalize_indices(&g, &t);
            for (a, b) in g.edges().iter().zip(n.edges()) {
                assert_eq!(a.index, b.index, "{name}");
            }
        }
    }

    #[test]
    fn normalize_rezeroes_shifted_graphene() {
        // shift the fundamental vertex choice of v2 by (1, 1)
        let mut spec = builtin_spec(BuiltinName::Graphene).unwrap();
        for decl in &mut spec.edge_decls {
            decl.index[0] -= 1;
            decl.index[1] -= 1;
        }
        let g = build_graph(&spec).unwrap();
        let t = spanning_tree(&g);
        let before: Vec<_> = t.cycles.values().map(|c| c.index_sum.clone()).collect();
        let n = normalize_indices(&g, &t);
        for &eid in &t.tree_edges {
            assert!(n.edge(eid).index.iter().all(|&x| x == 0));
        }
        let t2 = spanning_tree(&n);
        let after: Vec<_> = t2.cycles.values().map(|c| c.index_sum.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn bipartitions() {
        let g = builtin(BuiltinName::Graphene).unwrap();
        let b = is_bipartite(&g).unwrap();
        assert_ne!(b.part(0), b.part(1));

        let s = builtin(BuiltinName::Stanene).unwrap();
        let b = is_bipartite(&s).unwrap();
        let (mut a, mut c) = b.parts();
        a.sort_unstable();
        c.sort_unstable();
        let mut parts = vec![a, c];
        parts.sort();
        assert_eq!(parts, vec![vec![0, 3], vec![1, 2]]);

        assert!(is_bipartite(&builtin(BuiltinName::Lattice(2)).unwrap()).is_none());
    }

    #[test]
    fn builtin_name_parsing() {
        assert_eq!("graphene".parse::<BuiltinName>().unwrap(), BuiltinName::Graphene);
        assert_eq!("lattice3".parse::<BuiltinName>().unwrap(), BuiltinName::Lattice(3));
        assert_eq!("lattice(2)".parse::<BuiltinName>().unwrap(), BuiltinName::Lattice(2));
        assert!("lattice1".parse::<BuiltinName>().is_err());
        assert!("diamond".parse::<BuiltinName>().is_err());
    }

    #[test]
    fn independent_bridges_greedy() {
        let g = builtin(BuiltinName::Graphene).unwrap();
        assert_eq!(independent_bridges(&g).unwrap(), vec![0, 1]);
        let s = builtin(BuiltinName::Stanene).unwrap();
        assert_eq!(independent_bridges(&s).unwrap(), vec![0, 1]);
    }
}
