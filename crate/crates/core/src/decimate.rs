//! Message-passing guided solvers: BP- and SP-guided decimation, and BP with
//! a self-consistent reinforcement field.
//!
//! Decimated vertices are never removed from the graph. A vertex fixed to
//! color `c` sends a point-mass message (BP) or a certain warning (SP) on
//! `c` to its neighbors, which excludes `c` for them.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{BeliefState, BpEngine};
use crate::graph::{check_color_count, energy, Adjacency, Assignment, AssignmentError, Color, Graph};
use crate::rng::{mix_seed, rng_from_seed, SeededRng};
use crate::search::{walkcol_pinned, Start, WalkColParams, DEFAULT_WALK_P};
use crate::sp::{SpEngine, SurveyState, SP_MAX_COLORS, TRIVIAL_MASS};

/// Batch fraction that fixes a single vertex per round on any realistic
/// instance.
pub const SINGLE_VERTEX_BATCH: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DecimateError {
    #[error("batch fraction {0} outside (0, 1]")]
    BadBatchFraction(f64),
    #[error("reinforcement rate must be positive, got {0}")]
    BadRate(f64),
    #[error("survey-guided decimation supports at most {SP_MAX_COLORS} colors")]
    TooManyColors,
    #[error("no proper coloring after {sweeps} sweeps (energy {energy})")]
    BudgetExhausted { sweeps: usize, energy: usize },
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guide {
    Bp,
    Sp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecimationPolicy {
    pub guide: Guide,
    /// Fraction of the free vertices fixed per round; at least one vertex
    /// is always fixed.
    pub batch_fraction: f64,
    pub restart_limit: u32,
    /// Growth rate of a reinforcement field on BP marginals; 0 disables.
    pub reinforcement_rate: f64,
    /// Message-passing sweep budget per round.
    pub sweeps_per_round: usize,
    pub tolerance: f64,
    pub damping: f64,
    /// Walk-COL budget, in flips per vertex, for the residual instance.
    pub walk_flips_per_n: u64,
    pub walk_p: f64,
}

impl Default for DecimationPolicy {
    fn default() -> Self {
        Self::bp()
    }
}

impl DecimationPolicy {
    pub fn bp() -> Self {
        DecimationPolicy {
            guide: Guide::Bp,
            batch_fraction: SINGLE_VERTEX_BATCH,
            restart_limit: 3,
            reinforcement_rate: 0.0,
            sweeps_per_round: 200,
            tolerance: 1e-6,
            damping: 0.0,
            walk_flips_per_n: 1000,
            walk_p: DEFAULT_WALK_P,
        }
    }

    pub fn sp() -> Self {
        DecimationPolicy {
            guide: Guide::Sp,
            sweeps_per_round: 500,
            tolerance: 1e-5,
            damping: 0.1,
            ..Self::bp()
        }
    }

    fn batch(&self, free: usize) -> usize {
        ((self.batch_fraction * free as f64).floor() as usize).clamp(1, free.max(1))
    }

    fn validate(&self) -> Result<(), DecimateError> {
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(DecimateError::BadBatchFraction(self.batch_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMethod {
    None,
    Walkcol,
}

/// Outcome of a decimation run; serialized as the CLI-facing JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecimationReport {
    pub solved: bool,
    /// Rounds in the final attempt.
    pub rounds: usize,
    pub restarts: u32,
    pub residual_method: ResidualMethod,
    pub seed: u64,
    /// Rounds whose message passing hit the sweep budget; their last
    /// iterate was used.
    pub nonconverged_rounds: usize,
    /// Free vertices left when the last attempt ended.
    pub free_at_end: usize,
    pub failure: Option<String>,
    #[serde(skip)]
    pub assignment: Option<Assignment>,
}

struct Attempt {
    solved: Option<Assignment>,
    rounds: usize,
    nonconverged: usize,
    residual: ResidualMethod,
    free_at_end: usize,
    failure: Option<String>,
}

fn run_attempts(
    g: &Graph,
    policy: &DecimationPolicy,
    seed: u64,
    mut attempt: impl FnMut(&mut SeededRng) -> Attempt,
) -> DecimationReport {
    let mut restarts = 0;
    loop {
        let mut rng = rng_from_seed(mix_seed(seed, restarts as u64));
        let mut a = attempt(&mut rng);
        // Success is only reported for verified proper colorings.
        if let Some(sol) = &a.solved {
            if energy(g, sol) != 0 {
                a.failure = Some("decoded assignment is not proper".into());
                a.solved = None;
            }
        }
        if a.solved.is_some() || restarts >= policy.restart_limit {
            return DecimationReport {
                solved: a.solved.is_some(),
                rounds: a.rounds,
                restarts,
                residual_method: a.residual,
                seed,
                nonconverged_rounds: a.nonconverged,
                free_at_end: a.free_at_end,
                failure: a.failure,
                assignment: a.solved,
            };
        }
        restarts += 1;
    }
}

/// Color domains of the vertices under the current partial coloring, kept
/// closed under unit propagation: a vertex left with a single color is
/// fixed to it, and fixing a vertex removes its color from its neighbors.
struct Domains {
    mask: Vec<u32>,
    fixed: Vec<Option<Color>>,
    trail: Vec<(usize, u32, Option<Color>)>,
}

#[derive(Debug)]
struct Inconsistent;

impl Domains {
    fn new(n: usize, q: usize) -> Self {
        Domains {
            mask: vec![if q == 32 { u32::MAX } else { (1 << q) - 1 }; n],
            fixed: vec![None; n],
            trail: Vec::new(),
        }
    }

    fn set(&mut self, v: usize, mask: u32, fixed: Option<Color>) {
        self.trail.push((v, self.mask[v], self.fixed[v]));
        self.mask[v] = mask;
        self.fixed[v] = fixed;
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, mask, fixed) = self.trail.pop().unwrap();
            self.mask[v] = mask;
            self.fixed[v] = fixed;
        }
    }

    /// Fixes `v` to `c` and propagates. Returns every vertex fixed on the
    /// way; on a contradiction the domains are left unchanged.
    fn assign(&mut self, g: &Graph, v: usize, c: Color) -> Result<Vec<(usize, Color)>, Inconsistent> {
        let mark = self.trail.len();
        let mut queue = vec![(v, c)];
        let mut done = Vec::new();
        while let Some((v, c)) = queue.pop() {
            if self.fixed[v].is_some() {
                continue;
            }
            if self.mask[v] & 1 << c == 0 {
                self.undo(mark);
                return Err(Inconsistent);
            }
            self.set(v, 1 << c, Some(c));
            done.push((v, c));
            for &u in g.neighbors(v) {
                let u = u as usize;
                if self.mask[u] & 1 << c == 0 {
                    continue;
                }
                let left = self.mask[u] & !(1 << c);
                if left == 0 {
                    self.undo(mark);
                    return Err(Inconsistent);
                }
                self.set(u, left, self.fixed[u]);
                if left.count_ones() == 1 && self.fixed[u].is_none() {
                    queue.push((u, left.trailing_zeros() as Color));
                }
            }
        }
        self.trail.clear();
        Ok(done)
    }

    /// Removes `c` from the domain of free vertex `v`, fixing it if a single
    /// color is left.
    fn exclude(&mut self, g: &Graph, v: usize, c: Color) -> Result<Vec<(usize, Color)>, Inconsistent> {
        let left = self.mask[v] & !(1 << c);
        match left.count_ones() {
            0 => Err(Inconsistent),
            1 => self.assign(g, v, left.trailing_zeros() as Color),
            _ => {
                self.mask[v] = left;
                Ok(Vec::new())
            }
        }
    }
}

/// Fixes up to `k` of the best scoring free vertices, each to the allowed
/// color returned by `pick`, and returns every vertex fixed, including those
/// forced by propagation. A choice that propagates to a contradiction is
/// withdrawn and its color excluded instead.
fn fix_batch(
    g: &Graph,
    dom: &mut Domains,
    scores: &[(usize, f64)],
    k: usize,
    mut pick: impl FnMut(usize, u32) -> Color,
) -> Result<Vec<(usize, Color)>, Inconsistent> {
    let mut out = Vec::new();
    for &(v, _) in scores.iter().take(k) {
        if dom.fixed[v].is_some() {
            continue;
        }
        let c = pick(v, dom.mask[v]);
        match dom.assign(g, v, c) {
            Ok(done) => out.extend(done),
            Err(Inconsistent) => out.extend(dom.exclude(g, v, c)?),
        }
    }
    Ok(out)
}

/// Most probable color among those allowed by `mask`, ties broken at random.
fn argmax_allowed<R: Rng + ?Sized>(p: &[f64], mask: u32, rng: &mut R) -> Color {
    let allowed = |c: usize| mask & 1 << c != 0;
    let best = (0..p.len()).filter(|&c| allowed(c)).map(|c| p[c]).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..p.len()).filter(|&c| allowed(c) && p[c] >= best).collect();
    *ties.choose(rng).unwrap() as Color
}

/// Free vertices in random order, then stably sorted by decreasing score.
fn ranked(free: Vec<usize>, score: impl Fn(usize) -> f64, rng: &mut SeededRng) -> Vec<(usize, f64)> {
    let mut free = free;
    free.shuffle(rng);
    let mut scored: Vec<(usize, f64)> = free.into_iter().map(|v| (v, score(v))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored
}

/// Batch size for one round: at most `k`, and only vertices scoring at
/// least half the best score. While the messages are still color-symmetric
/// this fixes a single vertex, which breaks the symmetry.
fn informative(scores: &[(usize, f64)], k: usize) -> usize {
    let Some(&(_, best)) = scores.first() else { return 0 };
    scores.iter().take(k).take_while(|s| s.1 >= 0.5 * best && s.1 > 1e-9).count().max(1)
}

/// Gap between the most and second most probable frozen colors.
fn polarization(p: &[f64]) -> f64 {
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for &x in p {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    first - second
}

/// BP-guided decimation: fix the most biased free vertex (or batch) to its
/// most probable color, re-run BP from the previous messages, repeat.
pub fn decimate_bp(g: &Graph, q: usize, policy: &DecimationPolicy, seed: u64) -> Result<DecimationReport, DecimateError> {
    check_color_count(q)?;
    policy.validate()?;
    let n = g.n();
    let uniform = 1.0 / q as f64;
    Ok(run_attempts(g, policy, seed, |rng| {
        let mut engine = BpEngine::new(g, BeliefState::uniform(g, q));
        engine.damping = policy.damping;
        let mut rounds = 0;
        let mut nonconverged = 0;
        let mut free_count = n;
        let mut dom = Domains::new(n, q);
        let fail = |rounds, nonconverged, free_at_end, msg: String| Attempt {
            solved: None,
            rounds,
            nonconverged,
            residual: ResidualMethod::None,
            free_at_end,
            failure: Some(msg),
        };
        while free_count > 0 {
            rounds += 1;
            match engine.iterate(policy.tolerance, policy.sweeps_per_round, rng) {
                Ok((converged, _, _)) => nonconverged += (!converged) as usize,
                Err(e) => return fail(rounds, nonconverged, free_count, format!("round {rounds}: {e}")),
            }
            let marg = match engine.marginals() {
                Ok(m) => m,
                Err(e) => return fail(rounds, nonconverged, free_count, format!("round {rounds}: {e}")),
            };
            if policy.reinforcement_rate > 0.0 {
                let strength = (policy.reinforcement_rate * rounds as f64).min(MAX_FIELD_LOG);
                engine.field = Some(argmax_field(&marg, q, strength));
            }
            let free: Vec<usize> = (0..n).filter(|&v| engine.fixed[v].is_none()).collect();
            let bias = |v: usize| marg[v * q..(v + 1) * q].iter().cloned().fold(0.0, f64::max) - uniform;
            let scores = ranked(free, bias, rng);
            let k = informative(&scores, policy.batch(scores.len()));
            let Ok(done) = fix_batch(g, &mut dom, &scores, k, |v, mask| {
                argmax_allowed(&marg[v * q..(v + 1) * q], mask, rng)
            }) else {
                return fail(rounds, nonconverged, free_count, format!("round {rounds}: partial coloring cannot be extended"));
            };
            for &(v, c) in &done {
                engine.fix(v, c);
            }
            if done.is_empty() {
                return fail(rounds, nonconverged, free_count, format!("round {rounds}: no consistent vertex to fix"));
            }
            free_count -= done.len();
        }
        let colors = engine.fixed.iter().map(|c| c.unwrap()).collect();
        Attempt {
            solved: Some(Assignment::new(colors, q).unwrap()),
            rounds,
            nonconverged,
            residual: ResidualMethod::None,
            free_at_end: 0,
            failure: None,
        }
    }))
}

/// SP-guided decimation: fix the free vertices most likely to be frozen to
/// their most probable frozen color; once SP reaches the trivial fixed point
/// on the decimated instance, finish with Walk-COL.
pub fn decimate_sp(g: &Graph, q: usize, policy: &DecimationPolicy, seed: u64) -> Result<DecimationReport, DecimateError> {
    check_color_count(q)?;
    policy.validate()?;
    if q > SP_MAX_COLORS {
        return Err(DecimateError::TooManyColors);
    }
    let n = g.n();
    Ok(run_attempts(g, policy, seed, |rng| {
        let mut engine = SpEngine::new(g, SurveyState::random(g, q, rng));
        engine.damping = policy.damping;
        let mut rounds = 0;
        let mut nonconverged = 0;
        let mut free_count = n;
        let mut dom = Domains::new(n, q);
        let fail = |rounds, nonconverged, free_at_end, residual, msg: String| Attempt {
            solved: None,
            rounds,
            nonconverged,
            residual,
            free_at_end,
            failure: Some(msg),
        };
        while free_count > 0 {
            rounds += 1;
            match engine.iterate(policy.tolerance, policy.sweeps_per_round, rng) {
                Ok((converged, _, _)) => nonconverged += (!converged) as usize,
                Err(e) => {
                    return fail(rounds, nonconverged, free_count, ResidualMethod::None, format!("round {rounds}: {e}"))
                }
            }
            if free_surveys_trivial(g, &engine) {
                let pinned: Vec<bool> = engine.fixed.iter().map(Option::is_some).collect();
                let colors: Vec<Color> = engine
                    .fixed
                    .iter()
                    .map(|c| c.unwrap_or_else(|| rng.random_range(0..q) as Color))
                    .collect();
                let params = WalkColParams {
                    p: policy.walk_p,
                    max_flips: policy.walk_flips_per_n * n.max(1) as u64,
                    seed: rng.random(),
                };
                let start = Start::Given(Assignment::new(colors, q).unwrap());
                let trace = walkcol_pinned(g, q, start, &params, Some(pinned)).expect("valid walk parameters");
                return Attempt {
                    solved: trace.solved.then_some(trace.assignment),
                    rounds,
                    nonconverged,
                    residual: ResidualMethod::Walkcol,
                    free_at_end: free_count,
                    failure: (!trace.solved).then(|| format!("walkcol left energy after {} flips", trace.flips_used)),
                };
            }
            let frozen = match engine.frozen_colors() {
                Ok(f) => f,
                Err(e) => {
                    return fail(rounds, nonconverged, free_count, ResidualMethod::None, format!("round {rounds}: {e}"))
                }
            };
            let free: Vec<usize> = (0..n).filter(|&v| engine.fixed[v].is_none()).collect();
            let scores = ranked(free, |v| polarization(&frozen[v]), rng);
            let k = informative(&scores, policy.batch(scores.len()));
            let Ok(done) = fix_batch(g, &mut dom, &scores, k, |v, mask| argmax_allowed(&frozen[v], mask, rng)) else {
                return fail(
                    rounds,
                    nonconverged,
                    free_count,
                    ResidualMethod::None,
                    format!("round {rounds}: partial coloring cannot be extended"),
                );
            };
            for &(v, c) in &done {
                engine.fix(v, c);
            }
            if done.is_empty() {
                return fail(
                    rounds,
                    nonconverged,
                    free_count,
                    ResidualMethod::None,
                    format!("round {rounds}: no consistent vertex to fix"),
                );
            }
            free_count -= done.len();
        }
        let colors = engine.fixed.iter().map(|c| c.unwrap()).collect();
        Attempt {
            solved: Some(Assignment::new(colors, q).unwrap()),
            rounds,
            nonconverged,
            residual: ResidualMethod::None,
            free_at_end: 0,
            failure: None,
        }
    }))
}

/// True when every survey sent by a free vertex is (nearly) null.
fn free_surveys_trivial(g: &Graph, engine: &SpEngine<'_>) -> bool {
    let st = engine.state();
    let q = st.q();
    (0..g.n())
        .filter(|&v| engine.fixed[v].is_none())
        .all(|v| g.out_slots(v).all(|s| st.survey(s)[q] > 1.0 - TRIVIAL_MASS))
}

/// Cap on the log-strength of the reinforcement field; beyond it messages
/// saturate to exact point masses in double precision.
const MAX_FIELD_LOG: f64 = 25.0;

fn argmax_field(marginals: &[f64], q: usize, strength: f64) -> Vec<f64> {
    let mut field = vec![1.0; marginals.len()];
    let boost = strength.exp();
    for (m, f) in marginals.chunks_exact(q).zip(field.chunks_exact_mut(q)) {
        let best = (0..q).fold(0, |b, c| if m[c] > m[b] { c } else { b });
        f[best] = boost;
    }
    field
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reinforced {
    pub assignment: Assignment,
    pub sweeps: usize,
}

/// BP with an external field pulling each vertex toward its current most
/// probable color, with log-strength `rate * sweep`. The per-vertex argmax
/// is decoded after every sweep.
pub fn reinforce(g: &Graph, q: usize, rate: f64, max_sweeps: usize, seed: u64) -> Result<Reinforced, DecimateError> {
    check_color_count(q)?;
    if !(rate > 0.0) {
        return Err(DecimateError::BadRate(rate));
    }
    let n = g.n();
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..n * q).map(|_| 1.0 + 0.01 * rng.random::<f64>()).collect();
    let mut engine = BpEngine::new(g, BeliefState::uniform(g, q));
    engine.field = Some(noise.clone());
    let mut best_energy = usize::MAX;
    for sweep in 0..=max_sweeps {
        if sweep > 0 && engine.sweep(&mut rng).is_err() {
            break;
        }
        let Ok(marg) = engine.marginals() else { break };
        let colors: Vec<Color> = marg
            .chunks_exact(q)
            .map(|m| (0..q).fold(0, |b, c| if m[c] > m[b] { c } else { b }) as Color)
            .collect();
        let a = Assignment::new(colors, q)?;
        let e = energy(g, &a);
        if e == 0 {
            return Ok(Reinforced { assignment: a, sweeps: sweep });
        }
        best_energy = best_energy.min(e);
        let strength = (rate * (sweep + 1) as f64).min(MAX_FIELD_LOG);
        let mut field = argmax_field(&marg, q, strength);
        field.iter_mut().zip(&noise).for_each(|(f, z)| *f *= z);
        engine.field = Some(field);
    }
    Err(DecimateError::BudgetExhausted {
        sweeps: max_sweeps,
        energy: best_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn propagation_forces_paths_and_rejects_odd_cycles() {
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut dom = Domains::new(4, 2);
        let done = dom.assign(&path, 1, 0).unwrap();
        assert_eq!(done.len(), 4);
        assert_eq!(dom.fixed, vec![Some(1), Some(0), Some(1), Some(0)]);

        let mut dom = Domains::new(3, 2);
        assert!(dom.assign(&triangle(), 0, 1).is_err());
        // A failed assignment leaves the domains untouched.
        assert_eq!(dom.fixed, vec![None; 3]);
        assert_eq!(dom.mask, vec![0b11; 3]);
        assert_eq!(dom.exclude(&triangle(), 0, 1).map(|d| d.len()).ok(), None);
    }

    #[test]
    fn triangle_bp_decimation() {
        for seed in 0..20 {
            let r = decimate_bp(&triangle(), 3, &DecimationPolicy::bp(), seed).unwrap();
            assert!(r.solved, "{r:?}");
            assert!(r.rounds <= 3);
            assert_eq!(r.restarts, 0);
        }
    }

    #[test]
    fn k4_three_colors_fails_with_report() {
        let r = decimate_bp(&complete(4), 3, &DecimationPolicy::bp(), 1).unwrap();
        assert!(!r.solved);
        assert_eq!(r.restarts, 3);
        assert!(r.failure.is_some());
        let s = decimate_sp(&complete(4), 3, &DecimationPolicy::sp(), 1).unwrap();
        assert!(!s.solved);
    }

    #[test]
    fn sp_on_tree_hands_off_to_walkcol() {
        let g = path(30);
        let r = decimate_sp(&g, 3, &DecimationPolicy::sp(), 2).unwrap();
        assert!(r.solved);
        assert_eq!(r.residual_method, ResidualMethod::Walkcol);
        assert_eq!(r.rounds, 1);
        assert_eq!(r.free_at_end, 30);
    }

    #[test]
    fn reinforce_small_instances() {
        let empty = reinforce(&Graph::empty(10), 3, 0.1, 10, 0).unwrap();
        assert_eq!(empty.sweeps, 0);
        for seed in 0..20 {
            let r = reinforce(&triangle(), 3, 0.2, 200, seed).unwrap();
            assert_eq!(energy(&triangle(), &r.assignment), 0);
        }
        assert_eq!(reinforce(&triangle(), 3, 0.0, 10, 0), Err(DecimateError::BadRate(0.0)));
        assert!(matches!(
            reinforce(&complete(4), 3, 0.2, 50, 0),
            Err(DecimateError::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn batch_sizes() {
        let mut p = DecimationPolicy::bp();
        assert_eq!(p.batch(10_000), 1);
        p.batch_fraction = 0.05;
        assert_eq!(p.batch(1000), 50);
        assert_eq!(p.batch(3), 1);
        p.batch_fraction = 1.0;
        assert_eq!(p.batch(7), 7);
        p.batch_fraction = 0.0;
        assert_eq!(decimate_bp(&triangle(), 3, &p, 0), Err(DecimateError::BadBatchFraction(0.0)));
    }

    #[test]
    fn batches_shrink_without_information() {
        let flat = [(3, 0.0), (1, 0.0), (2, 0.0)];
        assert_eq!(informative(&flat, 3), 1);
        let mixed = [(3, 0.9), (1, 0.6), (2, 0.1)];
        assert_eq!(informative(&mixed, 3), 2);
        assert_eq!(informative(&mixed, 1), 1);
        assert!((polarization(&[0.2, 0.7, 0.1]) - 0.5).abs() < 1e-15);
        assert_eq!(polarization(&[0.3, 0.3, 0.3]), 0.0);
    }

    #[test]
    fn report_json_fields() {
        let r = decimate_bp(&triangle(), 3, &DecimationPolicy::bp(), 5).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["solved", "rounds", "restarts", "residual_method", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["residual_method"], "none");
    }
}
