//! Stochastic local search: Walk-COL, Metropolis sampling of the Potts
//! anti-ferromagnet, simulated annealing and the incremental add-a-link
//! solver.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    check_color_count, energy, sample_absent_pair, Adjacency, Assignment, AssignmentError, Color,
    Graph, GrowingGraph,
};
use crate::rng::{rng_from_seed, SeededRng};

/// Default non-improving acceptance probability for Walk-COL.
pub const DEFAULT_WALK_P: f64 = 0.05;

/// Ratio between successive trace checkpoints.
pub const CHECKPOINT_RATIO: f64 = 1.25;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("acceptance probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("temperature {0} must be positive")]
    BadTemperature(f64),
    #[error("annealing schedule must be non-empty with strictly decreasing temperatures >= 0")]
    BadSchedule,
    #[error("starting assignment has {got} vertices, graph has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkColParams {
    /// Acceptance probability for proposals that do not lower the number
    /// of unsatisfied vertices.
    pub p: f64,
    /// Budget of attempted flips.
    pub max_flips: u64,
    pub seed: u64,
}

impl Default for WalkColParams {
    fn default() -> Self {
        WalkColParams {
            p: DEFAULT_WALK_P,
            max_flips: 10_000_000,
            seed: 0,
        }
    }
}

/// Where a local search starts.
#[derive(Debug, Clone)]
pub enum Start {
    Given(Assignment),
    /// Uniform random colors drawn from the run's seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub flips_per_n: f64,
    pub fraction_unsat: f64,
    pub energy_per_vertex: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    pub samples: Vec<TracePoint>,
    #[serde(skip)]
    pub assignment: Assignment,
    pub solved: bool,
    pub flips_used: u64,
}

impl SearchTrace {
    /// Writes `flips_per_n,fraction_unsat` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "flips_per_n,fraction_unsat")?;
        for s in &self.samples {
            writeln!(w, "{},{}", s.flips_per_n, s.fraction_unsat)?;
        }
        w.flush()
    }
}

/// Positions-indexed set of vertices with O(1) insert, remove and uniform
/// sampling.
#[derive(Debug, Clone)]
struct VertexSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl VertexSet {
    fn new(n: usize) -> Self {
        VertexSet {
            items: Vec::new(),
            pos: vec![ABSENT; n],
        }
    }

    fn insert(&mut self, v: usize) {
        if self.pos[v] == ABSENT {
            self.pos[v] = self.items.len() as u32;
            self.items.push(v as u32);
        }
    }

    fn remove(&mut self, v: usize) {
        let p = self.pos[v];
        if p != ABSENT {
            let last = *self.items.last().unwrap();
            self.items.swap_remove(p as usize);
            if last as usize != v {
                self.pos[last as usize] = p;
            }
            self.pos[v] = ABSENT;
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.items[rng.random_range(0..self.items.len())] as usize
    }
}

/// Coloring with incrementally maintained conflict counts, energy and the
/// set of unsatisfied vertices (those with at least one monochromatic
/// incident edge). Pinned vertices are never offered for recoloring.
#[derive(Debug, Clone)]
pub struct ColoringState {
    q: usize,
    colors: Vec<Color>,
    conflicts: Vec<u32>,
    pinned: Vec<bool>,
    movable: VertexSet,
    unsat: usize,
    energy: usize,
}

impl ColoringState {
    pub fn new<A: Adjacency + ?Sized>(g: &A, a: Assignment, pinned: Option<Vec<bool>>) -> Self {
        let n = g.vertex_count();
        let q = a.q();
        let colors = a.into_colors();
        let mut st = ColoringState {
            q,
            conflicts: vec![0; n],
            pinned: pinned.unwrap_or_else(|| vec![false; n]),
            movable: VertexSet::new(n),
            unsat: 0,
            energy: 0,
            colors,
        };
        for v in 0..n {
            let cv = st.colors[v];
            st.conflicts[v] = g
                .neighbors(v)
                .iter()
                .filter(|&&u| st.colors[u as usize] == cv)
                .count() as u32;
            st.energy += st.conflicts[v] as usize;
            if st.conflicts[v] > 0 {
                st.mark_unsat(v);
            }
        }
        st.energy /= 2;
        st
    }

    fn mark_unsat(&mut self, v: usize) {
        self.unsat += 1;
        if !self.pinned[v] {
            self.movable.insert(v);
        }
    }

    fn mark_sat(&mut self, v: usize) {
        self.unsat -= 1;
        self.movable.remove(v);
    }

    pub fn energy(&self) -> usize {
        self.energy
    }

    pub fn unsat(&self) -> usize {
        self.unsat
    }

    pub fn color(&self, v: usize) -> Color {
        self.colors[v]
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::new(self.colors.clone(), self.q).expect("colors stay in range")
    }

    /// Change in the number of unsatisfied vertices if `v` took color `to`.
    pub fn unsat_delta<A: Adjacency + ?Sized>(&self, g: &A, v: usize, to: Color) -> i64 {
        let from = self.colors[v];
        if from == to {
            return 0;
        }
        let mut delta = 0i64;
        let mut new_conf = 0u32;
        for &u in g.neighbors(v) {
            let u = u as usize;
            let cu = self.colors[u];
            if cu == from {
                if self.conflicts[u] == 1 {
                    delta -= 1;
                }
            } else if cu == to {
                new_conf += 1;
                if self.conflicts[u] == 0 {
                    delta += 1;
                }
            }
        }
        delta + (new_conf > 0) as i64 - (self.conflicts[v] > 0) as i64
    }

    /// Change in energy if `v` took color `to`.
    pub fn energy_delta<A: Adjacency + ?Sized>(&self, g: &A, v: usize, to: Color) -> i64 {
        let with_to = g
            .neighbors(v)
            .iter()
            .filter(|&&u| self.colors[u as usize] == to)
            .count() as i64;
        with_to - self.conflicts[v] as i64
    }

    pub fn recolor<A: Adjacency + ?Sized>(&mut self, g: &A, v: usize, to: Color) {
        let from = self.colors[v];
        if from == to {
            return;
        }
        let mut new_conf = 0u32;
        for &u in g.neighbors(v) {
            let u = u as usize;
            let cu = self.colors[u];
            if cu == from {
                self.conflicts[u] -= 1;
                if self.conflicts[u] == 0 {
                    self.mark_sat(u);
                }
            } else if cu == to {
                new_conf += 1;
                self.conflicts[u] += 1;
                if self.conflicts[u] == 1 {
                    self.mark_unsat(u);
                }
            }
        }
        let old_conf = self.conflicts[v];
        self.energy = self.energy + new_conf as usize - old_conf as usize;
        self.conflicts[v] = new_conf;
        self.colors[v] = to;
        match (old_conf > 0, new_conf > 0) {
            (true, false) => self.mark_sat(v),
            (false, true) => self.mark_unsat(v),
            _ => {}
        }
    }

    /// Accounts for an edge `(a, b)` that was just added to the graph.
    pub fn edge_added(&mut self, a: usize, b: usize) {
        if self.colors[a] == self.colors[b] {
            self.energy += 1;
            for v in [a, b] {
                self.conflicts[v] += 1;
                if self.conflicts[v] == 1 {
                    self.mark_unsat(v);
                }
            }
        }
    }
}

/// Records trace points at geometrically spaced flip counts.
struct Checkpoints {
    n: f64,
    next: u64,
    samples: Vec<TracePoint>,
}

impl Checkpoints {
    fn new(n: usize) -> Self {
        Checkpoints {
            n: n.max(1) as f64,
            next: 0,
            samples: Vec::new(),
        }
    }

    fn point(&self, flips: u64, st: &ColoringState) -> TracePoint {
        TracePoint {
            flips_per_n: flips as f64 / self.n,
            fraction_unsat: st.unsat() as f64 / self.n,
            energy_per_vertex: st.energy() as f64 / self.n,
        }
    }

    #[inline]
    fn observe(&mut self, flips: u64, st: &ColoringState) {
        if flips >= self.next {
            self.samples.push(self.point(flips, st));
            self.next = ((self.next as f64 * CHECKPOINT_RATIO).ceil() as u64).max(self.next + 1);
        }
    }

    fn finish(mut self, flips: u64, st: &ColoringState) -> Vec<TracePoint> {
        let last = self.point(flips, st);
        if self.samples.last() != Some(&last) {
            self.samples.push(last);
        }
        self.samples
    }
}

/// Walk-COL dynamics on `st` until energy 0 or `budget` attempted flips.
/// Returns the number of attempted flips.
fn walk<A: Adjacency + ?Sized>(
    g: &A,
    st: &mut ColoringState,
    p: f64,
    budget: u64,
    rng: &mut SeededRng,
    mut trace: Option<&mut Checkpoints>,
) -> u64 {
    let q = st.q;
    let mut flips = 0u64;
    if let Some(t) = trace.as_deref_mut() {
        t.observe(0, st);
    }
    while st.energy > 0 && flips < budget && st.movable.len() > 0 {
        let v = st.movable.sample(rng);
        debug_assert!(st.conflicts[v] > 0, "picked a satisfied vertex");
        let from = st.colors[v];
        let mut to = rng.random_range(0..q as u32 - 1) as Color;
        if to >= from {
            to += 1;
        }
        flips += 1;
        let delta = st.unsat_delta(g, v, to);
        if delta < 0 || rng.random::<f64>() < p {
            st.recolor(g, v, to);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.observe(flips, st);
        }
    }
    flips
}

fn start_assignment(n: usize, q: usize, start: Start, rng: &mut SeededRng) -> Result<Assignment, SearchError> {
    match start {
        Start::Random => Ok(Assignment::random(n, q, rng)),
        Start::Given(a) => {
            if a.len() != n {
                return Err(SearchError::LengthMismatch {
                    expected: n,
                    got: a.len(),
                });
            }
            if a.q() != q {
                return Err(SearchError::Colors(AssignmentError::BadColorCount(a.q())));
            }
            Ok(a)
        }
    }
}

/// Walk-COL: repeatedly pick a random unsatisfied vertex and propose a
/// random different color; accept if the number of unsatisfied vertices
/// drops, otherwise with probability `p`.
pub fn walkcol(g: &Graph, q: usize, start: Start, params: &WalkColParams) -> Result<SearchTrace, SearchError> {
    walkcol_pinned(g, q, start, params, None)
}

/// Walk-COL where vertices flagged in `pinned` keep their color.
pub fn walkcol_pinned(
    g: &Graph,
    q: usize,
    start: Start,
    params: &WalkColParams,
    pinned: Option<Vec<bool>>,
) -> Result<SearchTrace, SearchError> {
    check_color_count(q)?;
    if !(0.0..=1.0).contains(&params.p) {
        return Err(SearchError::BadProbability(params.p));
    }
    let mut rng = rng_from_seed(params.seed);
    let a = start_assignment(g.n(), q, start, &mut rng)?;
    let mut st = ColoringState::new(g, a, pinned);
    let mut cp = Checkpoints::new(g.n());
    let flips = walk(g, &mut st, params.p, params.max_flips, &mut rng, Some(&mut cp));
    let samples = cp.finish(flips, &st);
    let assignment = st.assignment();
    let solved = energy(g, &assignment) == 0;
    Ok(SearchTrace {
        samples,
        assignment,
        solved,
        flips_used: flips,
    })
}

/// Single-spin-flip Metropolis at temperature `t` for `sweeps` sweeps of
/// `n` proposals each. Stops early at energy 0.
pub fn metropolis(
    g: &Graph,
    q: usize,
    start: Start,
    t: f64,
    sweeps: usize,
    seed: u64,
) -> Result<SearchTrace, SearchError> {
    if !(t > 0.0) {
        return Err(SearchError::BadTemperature(t));
    }
    run_schedule(g, q, start, &[(t, sweeps)], seed)
}

/// Chained Metropolis segments with strictly decreasing temperatures; a
/// final temperature of 0 runs greedy descent.
pub fn anneal(
    g: &Graph,
    q: usize,
    schedule: &[(f64, usize)],
    seed: u64,
) -> Result<SearchTrace, SearchError> {
    let valid = !schedule.is_empty()
        && schedule.iter().all(|&(t, _)| t >= 0.0)
        && schedule.windows(2).all(|w| w[1].0 < w[0].0);
    if !valid {
        return Err(SearchError::BadSchedule);
    }
    run_schedule(g, q, Start::Random, schedule, seed)
}

/// `steps` temperatures geometrically spaced from `hot` down to `cold`.
pub fn geometric_schedule(hot: f64, cold: f64, steps: usize, sweeps_per_step: usize) -> Vec<(f64, usize)> {
    assert!(hot > 0.0 && cold > 0.0 && steps >= 1);
    if steps == 1 {
        return vec![(hot, sweeps_per_step)];
    }
    let ratio = (cold / hot).powf(1.0 / (steps - 1) as f64);
    (0..steps)
        .map(|k| (hot * ratio.powi(k as i32), sweeps_per_step))
        .collect()
}

fn run_schedule(
    g: &Graph,
    q: usize,
    start: Start,
    schedule: &[(f64, usize)],
    seed: u64,
) -> Result<SearchTrace, SearchError> {
    check_color_count(q)?;
    let n = g.n();
    let mut rng = rng_from_seed(seed);
    let a = start_assignment(n, q, start, &mut rng)?;
    let mut st = ColoringState::new(g, a, None);
    let mut cp = Checkpoints::new(n);
    let max_deg = g.max_degree();
    let mut flips = 0u64;
    cp.observe(0, &st);
    'segments: for &(t, sweeps) in schedule {
        // accept[k] = exp(-k / t) for an energy increase of k.
        let accept: Vec<f64> = (0..=max_deg)
            .map(|k| if t > 0.0 { (-(k as f64) / t).exp() } else { (k == 0) as u8 as f64 })
            .collect();
        for _ in 0..sweeps {
            for _ in 0..n {
                if st.energy() == 0 && g.m() > 0 {
                    break 'segments;
                }
                let v = rng.random_range(0..n);
                let from = st.colors[v];
                let mut to = rng.random_range(0..q as u32 - 1) as Color;
                if to >= from {
                    to += 1;
                }
                flips += 1;
                let dh = st.energy_delta(g, v, to);
                if dh <= 0 || rng.random::<f64>() < accept[dh as usize] {
                    st.recolor(g, v, to);
                }
                cp.observe(flips, &st);
            }
        }
    }
    let samples = cp.finish(flips, &st);
    let assignment = st.assignment();
    let solved = energy(g, &assignment) == 0;
    Ok(SearchTrace {
        samples,
        assignment,
        solved,
        flips_used: flips,
    })
}

/// Repair cost of one added link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkRecord {
    /// Connectivity 2M/N right after the link was added.
    pub c: f64,
    /// Attempted Walk-COL flips spent repairing it (0 if it was not
    /// monochromatic).
    pub repair_flips: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IncrementalConfig {
    pub n: usize,
    pub q: usize,
    pub target_c: f64,
    pub repair_budget_per_link: u64,
    pub p: f64,
    pub seed: u64,
}

impl IncrementalConfig {
    /// Defaults: Walk-COL with `p = DEFAULT_WALK_P` and a repair budget of
    /// `1000 n` flips per link.
    pub fn new(n: usize, q: usize, target_c: f64, seed: u64) -> Self {
        IncrementalConfig {
            n,
            q,
            target_c,
            repair_budget_per_link: 1000 * n as u64,
            p: DEFAULT_WALK_P,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IncrementalOutcome {
    pub links: Vec<LinkRecord>,
    /// Graph with every successfully repaired link.
    pub graph: Graph,
    /// Proper coloring of `graph`.
    pub assignment: Assignment,
    /// Connectivity at which the run ended: the target, or the connectivity
    /// including the first link Walk-COL could not repair.
    pub stop_connectivity: f64,
    pub reached_target: bool,
}

impl IncrementalOutcome {
    /// Writes `c,repair_flips` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "c,repair_flips")?;
        for l in &self.links {
            writeln!(w, "{},{}", l.c, l.repair_flips)?;
        }
        w.flush()
    }
}

pub fn incremental_solve(
    n: usize,
    q: usize,
    target_c: f64,
    repair_budget_per_link: u64,
    seed: u64,
) -> Result<IncrementalOutcome, SearchError> {
    incremental_solve_with(&IncrementalConfig {
        repair_budget_per_link,
        ..IncrementalConfig::new(n, q, target_c, seed)
    })
}

/// Starts from `n` isolated vertices and a random coloring, adds uniformly
/// random links and repairs each monochromatic one with Walk-COL.
pub fn incremental_solve_with(cfg: &IncrementalConfig) -> Result<IncrementalOutcome, SearchError> {
    check_color_count(cfg.q)?;
    if !(0.0..=1.0).contains(&cfg.p) {
        return Err(SearchError::BadProbability(cfg.p));
    }
    let n = cfg.n;
    let mut rng = rng_from_seed(cfg.seed);
    let mut g = GrowingGraph::new(n);
    let start = Assignment::random(n, cfg.q, &mut rng);
    let mut st = ColoringState::new(&g, start, None);
    let mut links = Vec::new();
    let connectivity = |m: usize| 2.0 * m as f64 / n as f64;
    let mut stop = None;
    while connectivity(g.m()) < cfg.target_c {
        let Some((a, b)) = sample_absent_pair(n, g.m(), |a, b| g.has_edge(a, b), &mut rng) else {
            break;
        };
        g.add_edge(a, b);
        let (a, b) = (a as usize, b as usize);
        let c = connectivity(g.m());
        if st.color(a) != st.color(b) {
            links.push(LinkRecord { c, repair_flips: 0 });
            continue;
        }
        let snapshot = st.colors().to_vec();
        st.edge_added(a, b);
        let flips = walk(&g, &mut st, cfg.p, cfg.repair_budget_per_link, &mut rng, None);
        if st.energy() > 0 {
            g.pop_edge();
            st = ColoringState::new(&g, Assignment::new(snapshot, cfg.q)?, None);
            stop = Some(c);
            break;
        }
        links.push(LinkRecord {
            c,
            repair_flips: flips,
        });
    }
    let graph = g.freeze();
    let assignment = st.assignment();
    debug_assert_eq!(energy(&graph, &assignment), 0);
    Ok(IncrementalOutcome {
        links,
        graph,
        assignment,
        stop_connectivity: stop.unwrap_or_else(|| connectivity(g.m())),
        reached_target: stop.is_none(),
    })
}
