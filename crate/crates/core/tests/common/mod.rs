//! Independent oracles and instance generators shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use qcol::Graph;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type EdgeSet = BTreeSet<(usize, usize)>;

/// Chromatic polynomial at `q` by deletion–contraction,
/// `P(G) = P(G - e) - P(G / e)`, memoized on the edge set.
pub fn chromatic_count(n: usize, edges: &[(usize, usize)], q: u64) -> u64 {
    let set: EdgeSet = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut memo = HashMap::new();
    dc(n, set, q, &mut memo) as u64
}

fn dc(n: usize, edges: EdgeSet, q: u64, memo: &mut HashMap<(usize, EdgeSet), i128>) -> i128 {
    let Some(&(a, b)) = edges.iter().next() else {
        return (q as i128).pow(n as u32);
    };
    if let Some(&v) = memo.get(&(n, edges.clone())) {
        return v;
    }
    let mut deleted = edges.clone();
    deleted.remove(&(a, b));
    // Contract b into a, then relabel the last vertex as b.
    let last = n - 1;
    let relabel = |v: usize| {
        let v = if v == b { a } else { v };
        if v == last {
            b
        } else {
            v
        }
    };
    let contracted: EdgeSet = deleted
        .iter()
        .map(|&(x, y)| (relabel(x), relabel(y)))
        .filter(|(x, y)| x != y)
        .map(|(x, y)| (x.min(y), x.max(y)))
        .collect();
    let value = dc(n, deleted, q, memo) - dc(n - 1, contracted, q, memo);
    memo.insert((n, edges), value);
    value
}

/// Proper colorings counted by brute force over all `q^n` assignments.
pub fn brute_force_count(g: &Graph, q: usize) -> u64 {
    let n = g.n();
    let total = q.pow(n as u32);
    let mut colors = vec![0usize; n];
    (0..total)
        .filter(|&code| {
            let mut x = code;
            for c in colors.iter_mut() {
                *c = x % q;
                x /= q;
            }
            g.edges().iter().all(|&(a, b)| colors[a as usize] != colors[b as usize])
        })
        .count() as u64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random labelled tree on `n` vertices (random attachment).
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Graph {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    Graph::from_edges(n, &edges).unwrap()
}

/// Random connected graph: a random tree plus each remaining pair with
/// probability `extra`.
pub fn random_connected<R: Rng>(n: usize, extra: f64, rng: &mut R) -> Graph {
    let tree = random_tree(n, rng);
    let mut edges: Vec<(usize, usize)> = tree.edges().iter().map(|&(a, b)| (a as usize, b as usize)).collect();
    for a in 0..n {
        for b in a + 1..n {
            if !tree.has_edge(a, b) && rng.random::<f64>() < extra {
                edges.push((a, b));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

pub fn edge_list(g: &Graph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|&(a, b)| (a as usize, b as usize)).collect()
}
