//! Sparse undirected graphs, random ensembles, colorings and the Potts
//! anti-ferromagnet energy.
//!
//! Adjacency is stored in compressed (CSR) form. Every adjacency slot doubles
//! as the index of a directed edge: slot `s` in the range of vertex `i`
//! pointing at `j` is the directed edge `i -> j`, so message-passing state is
//! a flat array indexed by slot and `reverse(s)` gives `j -> i` in O(1).

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, SeededRng};

/// A color index in `0..q`.
pub type Color = u8;

/// Largest supported color count.
pub const MAX_COLORS: usize = 32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("ensemble error: {0}")]
    Ensemble(String),
    #[error("no simple graph found after {0} restarts")]
    RetryExhausted(usize),
    #[error("graph is complete; no edge can be added")]
    NoCapacity,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which random-graph ensemble a graph is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Regular,
    ErdosRenyi,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ensemble::Regular => f.write_str("regular"),
            Ensemble::ErdosRenyi => f.write_str("erdos_renyi"),
        }
    }
}

/// Read-only neighbor access shared by the static [`Graph`] and the growable
/// graph used by the incremental solver.
pub trait Adjacency {
    fn vertex_count(&self) -> usize;
    fn neighbors(&self, v: usize) -> &[u32];
}

/// Immutable simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    reverse: Vec<u32>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range
    /// endpoints. Edge endpoints are stored with the smaller index first.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: v, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let key = (a.min(b) as u32, a.max(b) as u32);
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0 as usize, key.1 as usize));
            }
            normalized.push(key);
        }
        Ok(Self::from_checked(n, normalized))
    }

    fn from_checked(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut degree = vec![0usize; n];
        for &(a, b) in &edges {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0u32; 2 * edges.len()];
        let mut reverse = vec![0u32; 2 * edges.len()];
        for &(a, b) in &edges {
            let sa = cursor[a as usize];
            let sb = cursor[b as usize];
            targets[sa] = b;
            targets[sb] = a;
            reverse[sa] = sb as u32;
            reverse[sb] = sa as u32;
            cursor[a as usize] += 1;
            cursor[b as usize] += 1;
        }
        Graph {
            n,
            edges,
            offsets,
            targets,
            reverse,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_checked(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges M.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Average connectivity 2M/N.
    pub fn connectivity(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.m() as f64 / self.n as f64
        }
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Number of directed edges, 2M.
    pub fn directed_count(&self) -> usize {
        self.targets.len()
    }

    /// Directed-edge indices `i -> j` for all neighbors `j` of `v`.
    pub fn out_slots(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    /// Head of directed edge `slot`.
    pub fn target(&self, slot: usize) -> usize {
        self.targets[slot] as usize
    }

    /// The directed edge pointing the other way.
    pub fn reverse(&self, slot: usize) -> usize {
        self.reverse[slot] as usize
    }

    /// Tail of directed edge `slot` (binary search over offsets).
    pub fn source(&self, slot: usize) -> usize {
        self.offsets.partition_point(|&o| o <= slot) - 1
    }

    /// Index of the directed edge `i -> j`, if the edge exists.
    pub fn directed_edge(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n {
            return None;
        }
        self.out_slots(i).find(|&s| self.targets[s] as usize == j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.directed_edge(i, j).is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.m() == self.n * self.n.saturating_sub(1) / 2
    }

    pub fn is_forest(&self) -> bool {
        let mut dsu = crate::dsu::DisjointSets::new(self.n);
        self.edges
            .iter()
            .all(|&(a, b)| dsu.union(a as usize, b as usize))
    }

    /// Returns a copy with one more edge. The caller guarantees the edge is
    /// absent and valid.
    fn with_edge(&self, a: u32, b: u32) -> Graph {
        let mut edges = self.edges.clone();
        edges.push((a.min(b), a.max(b)));
        Self::from_checked(self.n, edges)
    }
}

impl Adjacency for Graph {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Per-vertex coloring with `q` colors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    colors: Vec<Color>,
    q: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("color count {0} outside 2..={MAX_COLORS}")]
    BadColorCount(usize),
    #[error("vertex {vertex} has color {color}, not below q = {q}")]
    ColorOutOfRange { vertex: usize, color: usize, q: usize },
}

impl Assignment {
    pub fn new(colors: Vec<Color>, q: usize) -> Result<Self, AssignmentError> {
        check_color_count(q)?;
        if let Some((vertex, &c)) = colors.iter().enumerate().find(|(_, &c)| c as usize >= q) {
            return Err(AssignmentError::ColorOutOfRange {
                vertex,
                color: c as usize,
                q,
            });
        }
        Ok(Assignment { colors, q })
    }

    /// Independent uniform colors.
    pub fn random<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Self {
        assert!((2..=MAX_COLORS).contains(&q), "color count {q} out of range");
        let colors = (0..n).map(|_| rng.random_range(0..q) as Color).collect();
        Assignment { colors, q }
    }

    pub fn uniform_color(n: usize, q: usize, color: Color) -> Self {
        Self::new(vec![color; n], q).expect("color in range")
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> Color {
        self.colors[v]
    }

    pub fn set(&mut self, v: usize, c: Color) {
        assert!((c as usize) < self.q);
        self.colors[v] = c;
    }

    /// Applies `perm` (a permutation of `0..q`) to every color.
    pub fn permuted(&self, perm: &[Color]) -> Assignment {
        Assignment {
            colors: self.colors.iter().map(|&c| perm[c as usize]).collect(),
            q: self.q,
        }
    }

    pub(crate) fn into_colors(self) -> Vec<Color> {
        self.colors
    }
}

pub(crate) fn check_color_count(q: usize) -> Result<(), AssignmentError> {
    if (2..=MAX_COLORS).contains(&q) {
        Ok(())
    } else {
        Err(AssignmentError::BadColorCount(q))
    }
}

/// Potts anti-ferromagnet energy: the number of monochromatic edges.
pub fn energy<A: Adjacency + ?Sized>(g: &A, a: &Assignment) -> usize {
    assert_eq!(a.len(), g.vertex_count(), "assignment length != vertex count");
    let colors = a.colors();
    let mut twice = 0;
    for v in 0..g.vertex_count() {
        let cv = colors[v];
        twice += g
            .neighbors(v)
            .iter()
            .filter(|&&u| colors[u as usize] == cv)
            .count();
    }
    twice / 2
}

pub fn is_proper<A: Adjacency + ?Sized>(g: &A, a: &Assignment) -> bool {
    energy(g, a) == 0
}

/// Erdős–Rényi graph in the G(n, M) convention with M = round(c n / 2).
pub fn gen_erdos_renyi(n: usize, c: f64, seed: u64) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::Ensemble(format!("need n >= 2, got {n}")));
    }
    if !(c >= 0.0) || c >= (n - 1) as f64 {
        return Err(GraphError::Ensemble(format!(
            "connectivity {c} not in [0, n-1) for n = {n}"
        )));
    }
    let m = (c * n as f64 / 2.0).round() as usize;
    let mut rng = rng_from_seed(seed);
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    let capacity = n * (n - 1) / 2;
    if m <= capacity / 2 {
        while edges.len() < m {
            let a = rng.random_range(0..n as u32);
            let b = rng.random_range(0..n as u32);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                edges.push(key);
            }
        }
    } else {
        // Dense case: draw a uniform M-subset of all pairs.
        let mut all: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|a| (a + 1..n as u32).map(move |b| (a, b)))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(m);
        edges = all;
    }
    Ok(Graph::from_checked(n, edges))
}

const REGULAR_RESTARTS: usize = 1000;

/// Uniform-ish random c-regular simple graph from the pairing model.
///
/// Stubs are paired one at a time, drawing partner pairs at random and
/// rejecting pairs that would create a loop or a multi-edge; the whole
/// pairing restarts only when the remaining stubs admit no valid pair.
pub fn gen_regular(n: usize, c: usize, seed: u64) -> Result<Graph, GraphError> {
    if n * c % 2 == 1 {
        return Err(GraphError::Ensemble(format!("n*c = {} is odd", n * c)));
    }
    if c >= n {
        return Err(GraphError::Ensemble(format!("degree {c} >= n = {n}")));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..REGULAR_RESTARTS {
        if let Some(edges) = try_pairing(n, c, &mut rng) {
            return Ok(Graph::from_checked(n, edges));
        }
    }
    Err(GraphError::RetryExhausted(REGULAR_RESTARTS))
}

fn try_pairing(n: usize, c: usize, rng: &mut SeededRng) -> Option<Vec<(u32, u32)>> {
    let mut stubs: Vec<u32> = (0..n as u32)
        .flat_map(|v| std::iter::repeat_n(v, c))
        .collect();
    let mut seen = HashSet::with_capacity(n * c / 2);
    let mut edges = Vec::with_capacity(n * c / 2);
    while !stubs.is_empty() {
        let len = stubs.len();
        let mut picked = None;
        for _ in 0..64 {
            let x = rng.random_range(0..len);
            let y = rng.random_range(0..len);
            let (a, b) = (stubs[x], stubs[y]);
            if x != y && a != b && !seen.contains(&(a.min(b), a.max(b))) {
                picked = Some((x, y));
                break;
            }
        }
        if picked.is_none() {
            // Slow path: enumerate all valid pairs among the remaining stubs.
            let valid: Vec<(usize, usize)> = (0..len)
                .flat_map(|x| (x + 1..len).map(move |y| (x, y)))
                .filter(|&(x, y)| {
                    let (a, b) = (stubs[x], stubs[y]);
                    a != b && !seen.contains(&(a.min(b), a.max(b)))
                })
                .collect();
            picked = Some(*valid.choose(rng)?);
        }
        let (x, y) = picked.unwrap();
        let (a, b) = (stubs[x], stubs[y]);
        seen.insert((a.min(b), a.max(b)));
        edges.push((a.min(b), a.max(b)));
        let (hi, lo) = (x.max(y), x.min(y));
        stubs.swap_remove(hi);
        stubs.swap_remove(lo);
    }
    Some(edges)
}

/// Draws a uniformly random absent pair `(a, b)`, `a < b`.
pub(crate) fn sample_absent_pair<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    has_edge: impl Fn(u32, u32) -> bool,
    rng: &mut R,
) -> Option<(u32, u32)> {
    let capacity = n * n.saturating_sub(1) / 2;
    if m >= capacity {
        return None;
    }
    if m <= capacity / 2 {
        loop {
            let a = rng.random_range(0..n as u32);
            let b = rng.random_range(0..n as u32);
            if a != b && !has_edge(a, b) {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    let absent: Vec<(u32, u32)> = (0..n as u32)
        .flat_map(|a| (a + 1..n as u32).map(move |b| (a, b)))
        .filter(|&(a, b)| !has_edge(a, b))
        .collect();
    absent.choose(rng).copied()
}

/// Adds one uniformly random edge not already present.
pub fn add_random_edge<R: Rng + ?Sized>(
    g: &Graph,
    rng: &mut R,
) -> Result<(Graph, (usize, usize)), GraphError> {
    let (a, b) = sample_absent_pair(g.n(), g.m(), |a, b| g.has_edge(a as usize, b as usize), rng)
        .ok_or(GraphError::NoCapacity)?;
    Ok((g.with_edge(a, b), (a as usize, b as usize)))
}

/// Writes the `p col <n> <m>` / `e <i> <j>` edge-list format.
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> std::io::Result<()> {
    writeln!(w, "p col {} {}", g.n(), g.m())?;
    for &(a, b) in g.edges() {
        writeln!(w, "e {a} {b}")?;
    }
    w.flush()
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Graph, GraphError> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let parse_err = |msg: &str| GraphError::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        match (header, fields.as_slice()) {
            (None, ["p", "col", n, m]) => {
                let n = n.parse().map_err(|_| parse_err("bad vertex count"))?;
                let m = m.parse().map_err(|_| parse_err("bad edge count"))?;
                header = Some((n, m));
            }
            (None, _) => return Err(parse_err("expected `p col <n> <m>` header")),
            (Some(_), ["e", i, j]) => {
                let i: usize = i.parse().map_err(|_| parse_err("bad vertex index"))?;
                let j: usize = j.parse().map_err(|_| parse_err("bad vertex index"))?;
                edges.push((i, j));
            }
            (Some(_), _) => return Err(parse_err("expected `e <i> <j>`")),
        }
    }
    let (n, m) = header.ok_or(GraphError::Parse {
        line: 0,
        msg: "missing header".into(),
    })?;
    if edges.len() != m {
        return Err(GraphError::Parse {
            line: 0,
            msg: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    Graph::from_edges(n, &edges)
}

/// Graph that grows one edge at a time; used by the incremental solver.
#[derive(Debug, Clone)]
pub(crate) struct GrowingGraph {
    adj: Vec<Vec<u32>>,
    edges: Vec<(u32, u32)>,
    present: HashSet<(u32, u32)>,
}

impl GrowingGraph {
    pub fn new(n: usize) -> Self {
        GrowingGraph {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
            present: HashSet::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.present.contains(&(a.min(b), a.max(b)))
    }

    pub fn add_edge(&mut self, a: u32, b: u32) {
        let key = (a.min(b), a.max(b));
        debug_assert!(a != b && !self.present.contains(&key));
        self.present.insert(key);
        self.edges.push(key);
        self.adj[a as usize].push(b);
        self.adj[b as usize].push(a);
    }

    /// Removes the most recently added edge.
    pub fn pop_edge(&mut self) -> Option<(u32, u32)> {
        let (a, b) = self.edges.pop()?;
        self.present.remove(&(a, b));
        let ra = self.adj[a as usize].iter().rposition(|&x| x == b).unwrap();
        self.adj[a as usize].remove(ra);
        let rb = self.adj[b as usize].iter().rposition(|&x| x == a).unwrap();
        self.adj[b as usize].remove(rb);
        Some((a, b))
    }

    pub fn freeze(&self) -> Graph {
        Graph::from_checked(self.adj.len(), self.edges.clone())
    }
}

impl Adjacency for GrowingGraph {
    fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }
}

/// Small fixed graphs used throughout the tests and docs.
pub mod fixtures {
    use super::Graph;

    pub fn triangle() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    pub fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Graph::from_edges(n, &edges).unwrap()
    }
}
