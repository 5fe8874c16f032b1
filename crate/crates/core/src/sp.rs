//! Survey Propagation for q-coloring.
//!
//! A survey on `i -> j` is a distribution over the warning `i` sends to `j`:
//! `eta[c]` for a warning on color `c` and a final entry for no warning.
//! Incoming warnings are treated as independent. With
//! `P(T) = prod_k (1 - sum_{c in T} eta_k[c])`, the probability that no
//! neighbor warns any color of `T`, inclusion-exclusion gives
//!
//! * `W_c = sum_{T contains c} (-1)^{|T|-1} P(T)`: `c` is the only unwarned
//!   color, so `i` is forced to `c`;
//! * `Z = sum_{T nonempty} (-1)^{|T|-1} P(T)`: some color stays unwarned.
//!
//! The outgoing survey is `eta[c] = W_c / Z` and `eta[null] = 1 - sum W_c / Z`.
//! On deterministic inputs this reproduces the Warning Propagation rule.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{check_color_count, AssignmentError, Color, Graph};
use crate::rng::{rng_from_seed, SeededRng};

/// Largest color count SP accepts (the update enumerates all color subsets).
pub const SP_MAX_COLORS: usize = 16;

/// A survey is "null" when its no-warning mass exceeds `1 - TRIVIAL_MASS`.
pub const TRIVIAL_MASS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpError {
    #[error("contradiction on edge {from} -> {to}: all warning mass conflicts")]
    Contradiction { from: usize, to: usize },
    #[error("contradiction at vertex {0}: non-positive local weight")]
    VertexContradiction(usize),
    #[error("contradiction on edge ({0}, {1}): non-positive edge weight")]
    EdgeContradiction(usize, usize),
    #[error("survey propagation supports at most {SP_MAX_COLORS} colors, got {0}")]
    TooManyColors(usize),
    #[error("damping {0} outside [0, 1)")]
    BadDamping(f64),
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

/// One `(q + 1)`-entry survey per directed edge; the last entry is the null
/// warning.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyState {
    q: usize,
    surveys: Vec<f64>,
}

impl SurveyState {
    pub fn all_null(g: &Graph, q: usize) -> Self {
        let mut surveys = vec![0.0; g.directed_count() * (q + 1)];
        for s in 0..g.directed_count() {
            surveys[s * (q + 1) + q] = 1.0;
        }
        SurveyState { q, surveys }
    }

    /// Dirichlet(1) surveys.
    pub fn random<R: Rng + ?Sized>(g: &Graph, q: usize, rng: &mut R) -> Self {
        let mut surveys = Vec::with_capacity(g.directed_count() * (q + 1));
        for _ in 0..g.directed_count() {
            let draws: Vec<f64> = (0..=q).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            surveys.extend(draws.iter().map(|x| x / total));
        }
        SurveyState { q, surveys }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn survey(&self, slot: usize) -> &[f64] {
        let w = self.q + 1;
        &self.surveys[slot * w..(slot + 1) * w]
    }

    pub fn set_survey(&mut self, slot: usize, eta: &[f64]) {
        let w = self.q + 1;
        assert_eq!(eta.len(), w);
        self.surveys[slot * w..(slot + 1) * w].copy_from_slice(eta);
    }

    /// Point-mass survey on `warning` (`None` = null).
    pub fn set_deterministic(&mut self, slot: usize, warning: Option<Color>) {
        let w = self.q + 1;
        let s = &mut self.surveys[slot * w..(slot + 1) * w];
        s.fill(0.0);
        s[warning.map_or(self.q, |c| c as usize)] = 1.0;
    }

    /// True when every survey puts at least `1 - TRIVIAL_MASS` on null.
    pub fn is_trivial(&self) -> bool {
        let w = self.q + 1;
        self.surveys
            .chunks_exact(w)
            .all(|s| s[self.q] > 1.0 - TRIVIAL_MASS)
    }
}

/// Subset sums and signed products for one vertex.
struct Subsets {
    q: usize,
    /// `sign(T) * P(T)` per subset mask, sign = `(-1)^{|T|-1}`.
    signed: Vec<f64>,
}

impl Subsets {
    fn new(q: usize) -> Self {
        Subsets {
            q,
            signed: vec![0.0; 1 << q],
        }
    }

    /// Loads `P(T)` (indexed by mask) and applies inclusion-exclusion signs.
    fn load(&mut self, products: &[f64]) {
        for (t, (s, &p)) in self.signed.iter_mut().zip(products).enumerate() {
            *s = if t.count_ones() % 2 == 1 { p } else { -p };
        }
    }

    /// Non-contradiction weight `Z`.
    fn z(&self) -> f64 {
        self.signed[1..].iter().sum()
    }

    /// Forced weights `W_c`, clamped to `[0, z]`.
    fn forced(&self, z: f64, out: &mut [f64]) {
        out.fill(0.0);
        for (t, &s) in self.signed.iter().enumerate().skip(1) {
            let mut bits = t;
            while bits != 0 {
                out[bits.trailing_zeros() as usize] += s;
                bits &= bits - 1;
            }
        }
        for w in out[..self.q].iter_mut() {
            *w = w.clamp(0.0, z);
        }
    }
}

/// Fills `sums[T] = 1 - sum_{c in T} eta[c]` for every mask `T`.
fn unwarned_factors(eta: &[f64], q: usize, sums: &mut [f64]) {
    sums[0] = 0.0;
    for t in 1usize..(1 << q) {
        let low = t.trailing_zeros() as usize;
        sums[t] = sums[t & (t - 1)] + eta[low];
    }
    for x in sums.iter_mut() {
        *x = (1.0 - *x).max(0.0);
    }
}

fn check_colors(q: usize) -> Result<(), SpError> {
    check_color_count(q)?;
    if q > SP_MAX_COLORS {
        return Err(SpError::TooManyColors(q));
    }
    Ok(())
}

/// Recomputes the survey on directed edge `slot` (`i -> j`).
pub fn sp_update_edge(state: &SurveyState, g: &Graph, slot: usize) -> Result<Vec<f64>, SpError> {
    let q = state.q;
    check_colors(q)?;
    let i = g.source(slot);
    let full = 1usize << q;
    let mut products = vec![1.0; full];
    let mut factors = vec![0.0; full];
    for s in g.out_slots(i) {
        if s == slot {
            continue;
        }
        unwarned_factors(state.survey(g.reverse(s)), q, &mut factors);
        for (p, f) in products.iter_mut().zip(&factors) {
            *p *= f;
        }
    }
    let mut sub = Subsets::new(q);
    sub.load(&products);
    let z = sub.z();
    if !(z > 0.0) {
        return Err(SpError::Contradiction {
            from: i,
            to: g.target(slot),
        });
    }
    let mut out = vec![0.0; q + 1];
    sub.forced(z, &mut out);
    let mut forced = 0.0;
    for w in out[..q].iter_mut() {
        *w /= z;
        forced += *w;
    }
    out[q] = (1.0 - forced).max(0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpInit {
    Random,
    AllNull,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpConfig {
    pub init: SpInit,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    pub seed: u64,
}

impl Default for SpConfig {
    fn default() -> Self {
        SpConfig {
            init: SpInit::Random,
            tolerance: 1e-7,
            max_sweeps: 1000,
            damping: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpResult {
    pub converged: bool,
    pub iterations: usize,
    pub max_residual: f64,
    pub trivial: bool,
    /// Probability that each vertex is frozen, to any color.
    pub freeze_probability: Vec<f64>,
    /// Per-vertex probability of being frozen to each color.
    pub frozen_color_probability: Vec<Vec<f64>>,
    /// Complexity density Σ.
    pub complexity: f64,
}

pub fn sp_run(g: &Graph, q: usize, cfg: &SpConfig) -> Result<SpResult, SpError> {
    sp_run_with_state(g, q, cfg).map(|(r, _)| r)
}

pub fn sp_run_with_state(
    g: &Graph,
    q: usize,
    cfg: &SpConfig,
) -> Result<(SpResult, SurveyState), SpError> {
    check_colors(q)?;
    if !(0.0..1.0).contains(&cfg.damping) {
        return Err(SpError::BadDamping(cfg.damping));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let state = match cfg.init {
        SpInit::Random => SurveyState::random(g, q, &mut rng),
        SpInit::AllNull => SurveyState::all_null(g, q),
    };
    let mut engine = SpEngine::new(g, state);
    engine.damping = cfg.damping;
    let (converged, iterations, max_residual) =
        engine.iterate(cfg.tolerance, cfg.max_sweeps, &mut rng)?;
    let result = engine.result(converged, iterations, max_residual)?;
    Ok((result, engine.into_state()))
}

/// Complexity density `(1/n)[sum_i log Z_i - sum_(ij) log Z_ij]`.
pub fn complexity(state: &SurveyState, g: &Graph) -> Result<f64, SpError> {
    let q = state.q;
    check_colors(q)?;
    let full = 1usize << q;
    let mut products = vec![1.0; full];
    let mut factors = vec![0.0; full];
    let mut sub = Subsets::new(q);
    let mut total = 0.0;
    for i in 0..g.n() {
        products.fill(1.0);
        for s in g.out_slots(i) {
            unwarned_factors(state.survey(g.reverse(s)), q, &mut factors);
            for (p, f) in products.iter_mut().zip(&factors) {
                *p *= f;
            }
        }
        sub.load(&products);
        let z = sub.z();
        if !(z > 0.0) {
            return Err(SpError::VertexContradiction(i));
        }
        total += z.ln();
    }
    for &(a, b) in g.edges() {
        let s = g.directed_edge(a as usize, b as usize).unwrap();
        let (x, y) = (state.survey(s), state.survey(g.reverse(s)));
        let clash: f64 = (0..q).map(|c| x[c] * y[c]).sum();
        let z = 1.0 - clash;
        if !(z > 0.0) {
            return Err(SpError::EdgeContradiction(a as usize, b as usize));
        }
        total -= z.ln();
    }
    Ok(if g.n() == 0 { 0.0 } else { total / g.n() as f64 })
}

/// Writes `vertex,freeze_probability` rows.
pub fn write_freeze_csv<W: Write>(freeze: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "vertex,freeze_probability")?;
    for (v, p) in freeze.iter().enumerate() {
        writeln!(w, "{v},{p}")?;
    }
    w.flush()
}

/// Sweep engine shared by `sp_run` and SP-guided decimation. Fixed vertices
/// send a certain warning on their color and are never updated.
pub(crate) struct SpEngine<'g> {
    g: &'g Graph,
    q: usize,
    state: SurveyState,
    pub fixed: Vec<Option<Color>>,
    pub damping: f64,
    order: Vec<usize>,
    factors: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    cavity: Vec<f64>,
    sub: Subsets,
    out: Vec<f64>,
}

impl<'g> SpEngine<'g> {
    pub fn new(g: &'g Graph, state: SurveyState) -> Self {
        let q = state.q;
        SpEngine {
            g,
            q,
            state,
            fixed: vec![None; g.n()],
            damping: 0.0,
            order: (0..g.n()).collect(),
            factors: Vec::new(),
            prefix: Vec::new(),
            suffix: Vec::new(),
            cavity: vec![0.0; 1 << q],
            sub: Subsets::new(q),
            out: vec![0.0; q + 1],
        }
    }

    pub fn into_state(self) -> SurveyState {
        self.state
    }

    pub fn state(&self) -> &SurveyState {
        &self.state
    }

    pub fn fix(&mut self, v: usize, color: Color) {
        self.fixed[v] = Some(color);
        for s in self.g.out_slots(v) {
            self.state.set_deterministic(s, Some(color));
        }
    }

    pub fn iterate(
        &mut self,
        tolerance: f64,
        max_sweeps: usize,
        rng: &mut SeededRng,
    ) -> Result<(bool, usize, f64), SpError> {
        let mut residual = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            residual = self.sweep(rng)?;
            if residual <= tolerance {
                return Ok((true, sweep, residual));
            }
        }
        Ok((false, max_sweeps, residual))
    }

    pub fn sweep(&mut self, rng: &mut SeededRng) -> Result<f64, SpError> {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(rng);
        let mut residual: f64 = 0.0;
        for &v in &order {
            if self.fixed[v].is_none() {
                residual = residual.max(self.update_vertex(v)?);
            }
        }
        self.order = order;
        Ok(residual)
    }

    /// Loads per-neighbor unwarned factors of `v` into `self.factors`.
    fn load_factors(&mut self, v: usize) -> usize {
        let g = self.g;
        let full = 1usize << self.q;
        let d = g.degree(v);
        self.factors.resize(d * full, 0.0);
        for (t, s) in g.out_slots(v).enumerate() {
            let eta = self.state.survey(g.reverse(s));
            unwarned_factors(eta, self.q, &mut self.factors[t * full..(t + 1) * full]);
        }
        d
    }

    fn update_vertex(&mut self, v: usize) -> Result<f64, SpError> {
        let q = self.q;
        let g = self.g;
        let full = 1usize << q;
        let d = self.load_factors(v);
        if d == 0 {
            return Ok(0.0);
        }
        self.prefix.resize((d + 1) * full, 0.0);
        self.suffix.resize((d + 1) * full, 0.0);
        self.prefix[..full].fill(1.0);
        self.suffix[d * full..].fill(1.0);
        for t in 0..d {
            for m in 0..full {
                self.prefix[(t + 1) * full + m] = self.prefix[t * full + m] * self.factors[t * full + m];
            }
        }
        for t in (0..d).rev() {
            for m in 0..full {
                self.suffix[t * full + m] = self.suffix[(t + 1) * full + m] * self.factors[t * full + m];
            }
        }
        let mut residual: f64 = 0.0;
        let w = q + 1;
        for (t, s) in g.out_slots(v).enumerate() {
            for m in 0..full {
                self.cavity[m] = self.prefix[t * full + m] * self.suffix[(t + 1) * full + m];
            }
            self.sub.load(&self.cavity);
            let z = self.sub.z();
            if !(z > 0.0) {
                return Err(SpError::Contradiction {
                    from: v,
                    to: g.target(s),
                });
            }
            self.sub.forced(z, &mut self.out);
            let mut forced = 0.0;
            for x in self.out[..q].iter_mut() {
                *x /= z;
                forced += *x;
            }
            self.out[q] = (1.0 - forced).max(0.0);
            let old = &mut self.state.surveys[s * w..(s + 1) * w];
            for c in 0..w {
                let new = (1.0 - self.damping) * self.out[c] + self.damping * old[c];
                residual = residual.max((new - old[c]).abs());
                old[c] = new;
            }
        }
        Ok(residual)
    }

    /// Full-neighborhood forced weights of `v`: `(W_c / Z for each c, Z)`.
    fn vertex_forced(&mut self, v: usize) -> Result<(Vec<f64>, f64), SpError> {
        let q = self.q;
        let full = 1usize << q;
        let d = self.load_factors(v);
        self.cavity.fill(1.0);
        for t in 0..d {
            for m in 0..full {
                self.cavity[m] *= self.factors[t * full + m];
            }
        }
        self.sub.load(&self.cavity);
        let z = self.sub.z();
        if !(z > 0.0) {
            return Err(SpError::VertexContradiction(v));
        }
        let mut out = vec![0.0; q + 1];
        self.sub.forced(z, &mut out);
        out.truncate(q);
        out.iter_mut().for_each(|x| *x /= z);
        Ok((out, z))
    }

    /// Per-vertex frozen-color probabilities (`n` vectors of length `q`).
    pub fn frozen_colors(&mut self) -> Result<Vec<Vec<f64>>, SpError> {
        (0..self.g.n())
            .map(|v| match self.fixed[v] {
                Some(c) => {
                    let mut p = vec![0.0; self.q];
                    p[c as usize] = 1.0;
                    Ok(p)
                }
                None => self.vertex_forced(v).map(|(p, _)| p),
            })
            .collect()
    }

    pub fn result(
        &mut self,
        converged: bool,
        iterations: usize,
        max_residual: f64,
    ) -> Result<SpResult, SpError> {
        let frozen = self.frozen_colors()?;
        let freeze = frozen.iter().map(|p| p.iter().sum::<f64>().min(1.0)).collect();
        Ok(SpResult {
            converged,
            iterations,
            max_residual,
            trivial: self.state.is_trivial(),
            freeze_probability: freeze,
            frozen_color_probability: frozen,
            complexity: complexity(&self.state, self.g)?,
        })
    }
}
