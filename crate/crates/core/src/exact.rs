//! Brute-force ground truth for small instances.
//!
//! Proper colorings are enumerated by backtracking with forward checking.
//! Clusters are the connected components of the solution graph in which two
//! colorings are adjacent when they differ at exactly one vertex.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsu::DisjointSets;
use crate::graph::{check_color_count, Adjacency, AssignmentError, Color, Graph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("enumeration exceeded the work cap of {0} search nodes")]
    WorkCapExceeded(u64),
    #[error("no proper coloring exists; entropy undefined")]
    NoSolutions,
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerateOptions {
    /// Upper bound on visited search nodes.
    pub work_cap: u64,
    /// Solution graphs are only built up to this many solutions.
    pub cluster_cap: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            work_cap: 100_000_000,
            cluster_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub size: u64,
    /// `Some(c)` when the vertex takes color `c` in every solution of the
    /// cluster.
    pub frozen: Vec<Option<Color>>,
}

impl Cluster {
    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|f| f.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub q: usize,
    pub solution_count: u64,
    /// Natural log of the solution count; `-inf` when there are none.
    pub log_count: f64,
    /// Per-vertex color frequencies over all solutions (all zero when there
    /// are no solutions).
    pub marginals: Vec<Vec<f64>>,
    /// `None` when the solution count exceeded the cluster cap.
    pub clusters: Option<Vec<Cluster>>,
    /// Every solution, vertex-major, when clusters were computed.
    #[serde(skip)]
    solutions: Option<Vec<Color>>,
    /// Cluster index of each stored solution.
    #[serde(skip)]
    labels: Option<Vec<usize>>,
}

impl ExactSummary {
    /// Index of the cluster containing `colors`, if it is a stored solution.
    pub fn cluster_of(&self, colors: &[Color]) -> Option<usize> {
        let idx = self.solutions(colors.len())?.position(|s| s == colors)?;
        Some(self.labels.as_ref()?[idx])
    }

    /// Iterator over all stored solutions.
    pub fn solutions(&self, n: usize) -> Option<impl Iterator<Item = &[Color]>> {
        Some(self.solutions.as_ref()?.chunks_exact(n.max(1)))
    }
}

/// Enumerates all proper `q`-colorings of `g` with default limits.
pub fn enumerate(g: &Graph, q: usize) -> Result<ExactSummary, ExactError> {
    enumerate_with(g, q, EnumerateOptions::default())
}

pub fn enumerate_with(
    g: &Graph,
    q: usize,
    opts: EnumerateOptions,
) -> Result<ExactSummary, ExactError> {
    check_color_count(q)?;
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    let mut position = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    let full = if q == 32 { u32::MAX } else { (1u32 << q) - 1 };
    let mut search = Search {
        g,
        q,
        order: &order,
        position: &position,
        domain: vec![full; n],
        colors: vec![0; n],
        undo: Vec::new(),
        work: 0,
        work_cap: opts.work_cap,
        count: 0,
        color_counts: vec![0u64; n * q],
        solutions: Some(Vec::new()),
        cluster_cap: opts.cluster_cap,
    };
    search.descend(0)?;

    let count = search.count;
    let marginals = (0..n)
        .map(|v| {
            (0..q)
                .map(|c| {
                    if count == 0 {
                        0.0
                    } else {
                        search.color_counts[v * q + c] as f64 / count as f64
                    }
                })
                .collect()
        })
        .collect();
    let solutions = search.solutions.take();
    let (clusters, labels) = match &solutions {
        Some(sols) => {
            let (c, l) = clusters_of(sols, n, q);
            (Some(c), Some(l))
        }
        None => (None, None),
    };
    Ok(ExactSummary {
        q,
        solution_count: count,
        log_count: if count == 0 {
            f64::NEG_INFINITY
        } else {
            (count as f64).ln()
        },
        marginals,
        clusters,
        solutions,
        labels,
    })
}

struct Search<'a> {
    g: &'a Graph,
    q: usize,
    order: &'a [usize],
    position: &'a [usize],
    domain: Vec<u32>,
    colors: Vec<Color>,
    undo: Vec<(usize, u32)>,
    work: u64,
    work_cap: u64,
    count: u64,
    color_counts: Vec<u64>,
    solutions: Option<Vec<Color>>,
    cluster_cap: usize,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) -> Result<(), ExactError> {
        self.work += 1;
        if self.work > self.work_cap {
            return Err(ExactError::WorkCapExceeded(self.work_cap));
        }
        if depth == self.order.len() {
            self.record();
            return Ok(());
        }
        let v = self.order[depth];
        let mut options = self.domain[v];
        while options != 0 {
            let c = options.trailing_zeros() as usize;
            options &= options - 1;
            let mark = self.undo.len();
            let mut wiped = false;
            for &u in self.g.neighbors(v) {
                let u = u as usize;
                if self.position[u] > depth && self.domain[u] & (1 << c) != 0 {
                    self.undo.push((u, self.domain[u]));
                    self.domain[u] &= !(1 << c);
                    if self.domain[u] == 0 {
                        wiped = true;
                        break;
                    }
                }
            }
            if !wiped {
                self.colors[v] = c as Color;
                self.descend(depth + 1)?;
            }
            while self.undo.len() > mark {
                let (u, d) = self.undo.pop().unwrap();
                self.domain[u] = d;
            }
        }
        Ok(())
    }

    fn record(&mut self) {
        self.count += 1;
        for (v, &c) in self.colors.iter().enumerate() {
            self.color_counts[v * self.q + c as usize] += 1;
        }
        if let Some(sols) = &mut self.solutions {
            if self.count as usize > self.cluster_cap {
                self.solutions = None;
            } else {
                sols.extend_from_slice(&self.colors);
            }
        }
    }
}

fn clusters_of(sols: &[Color], n: usize, q: usize) -> (Vec<Cluster>, Vec<usize>) {
    if n == 0 {
        // The empty coloring is the single solution.
        return (
            vec![Cluster {
                size: 1,
                frozen: Vec::new(),
            }],
            vec![0],
        );
    }
    let count = sols.len() / n;
    let index: HashMap<&[Color], usize> = sols
        .chunks_exact(n)
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut dsu = DisjointSets::new(count);
    let mut probe = vec![0 as Color; n];
    for (i, s) in sols.chunks_exact(n).enumerate() {
        probe.copy_from_slice(s);
        for v in 0..n {
            let original = probe[v];
            for c in 0..q as Color {
                if c == original {
                    continue;
                }
                probe[v] = c;
                if let Some(&j) = index.get(probe.as_slice()) {
                    dsu.union(i, j);
                }
            }
            probe[v] = original;
        }
    }
    let mut cluster_id: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut labels = Vec::with_capacity(count);
    for (i, s) in sols.chunks_exact(n).enumerate() {
        let root = dsu.find(i);
        let id = *cluster_id.entry(root).or_insert_with(|| {
            clusters.push(Cluster {
                size: 0,
                frozen: s.iter().map(|&c| Some(c)).collect(),
            });
            clusters.len() - 1
        });
        let cl = &mut clusters[id];
        cl.size += 1;
        for (f, &c) in cl.frozen.iter_mut().zip(s) {
            if *f != Some(c) {
                *f = None;
            }
        }
        labels.push(id);
    }
    (clusters, labels)
}

/// Entropy density log(N_sol) / n.
pub fn exact_entropy(summary: &ExactSummary, n: usize) -> Result<f64, ExactError> {
    if summary.solution_count == 0 {
        return Err(ExactError::NoSolutions);
    }
    Ok(summary.log_count / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn triangle_three_colors() {
        let s = enumerate(&triangle(), 3).unwrap();
        assert_eq!(s.solution_count, 6);
        for m in &s.marginals {
            for &p in m {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        // Every recoloring of a single vertex of a proper 3-coloring of the
        // triangle collides with a neighbor: six isolated, fully frozen
        // clusters.
        let clusters = s.clusters.clone().unwrap();
        assert_eq!(clusters.len(), 6);
        assert!(clusters.iter().all(|c| c.size == 1 && c.frozen_count() == 3));
        assert!((exact_entropy(&s, 3).unwrap() - 6f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k4_is_not_three_colorable() {
        let s = enumerate(&complete(4), 3).unwrap();
        assert_eq!(s.solution_count, 0);
        assert_eq!(s.clusters.as_ref().unwrap().len(), 0);
        assert_eq!(exact_entropy(&s, 4), Err(ExactError::NoSolutions));
    }

    #[test]
    fn single_edge_two_colors() {
        let s = enumerate(&path(2), 2).unwrap();
        assert_eq!(s.solution_count, 2);
        let clusters = s.clusters.unwrap();
        assert_eq!(clusters.len(), 2);
        for c in clusters {
            assert_eq!(c.size, 1);
            assert_eq!(c.frozen_count(), 2);
        }
    }

    #[test]
    fn entropy_examples() {
        let s = enumerate(&Graph::empty(5), 3).unwrap();
        assert_eq!(s.solution_count, 243);
        assert!((exact_entropy(&s, 5).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(s.clusters.as_ref().unwrap().len(), 1);
        let e = enumerate(&path(2), 3).unwrap();
        assert_eq!(e.solution_count, 6);
        assert!((exact_entropy(&e, 2).unwrap() - 6f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn path_three_colors_is_one_unfrozen_cluster() {
        let s = enumerate(&path(4), 3).unwrap();
        assert_eq!(s.solution_count, 3 * 2 * 2 * 2);
        let clusters = s.clusters.unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].frozen_count(), 0);
    }

    #[test]
    fn even_cycle_two_colors_has_two_frozen_clusters() {
        let s = enumerate(&cycle(6), 2).unwrap();
        assert_eq!(s.solution_count, 2);
        assert_eq!(s.clusters.unwrap().len(), 2);
    }

    #[test]
    fn cluster_lookup() {
        let s = enumerate(&path(2), 2).unwrap();
        let a = s.cluster_of(&[0, 1]).unwrap();
        let b = s.cluster_of(&[1, 0]).unwrap();
        assert_ne!(a, b);
        assert_eq!(s.cluster_of(&[0, 0]), None);
    }

    #[test]
    fn work_cap_refuses() {
        let g = Graph::empty(20);
        let opts = EnumerateOptions {
            work_cap: 1000,
            cluster_cap: 10,
        };
        assert_eq!(
            enumerate_with(&g, 3, opts),
            Err(ExactError::WorkCapExceeded(1000))
        );
    }

    #[test]
    fn clusters_skipped_above_cap() {
        let opts = EnumerateOptions {
            work_cap: 1_000_000,
            cluster_cap: 100,
        };
        let s = enumerate_with(&Graph::empty(6), 3, opts).unwrap();
        assert_eq!(s.solution_count, 729);
        assert!(s.clusters.is_none());
    }

    #[test]
    fn summary_serializes() {
        let s = enumerate(&path(2), 2).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"solution_count\":2"));
    }
}
