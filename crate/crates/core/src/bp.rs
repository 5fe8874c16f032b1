//! Belief Propagation for proper q-colorings.
//!
//! The message `psi[i -> j]` is the color distribution of `i` in the absence
//! of `j`; an update multiplies `1 - psi[k -> i]` over the other neighbors
//! `k` of `i` and normalizes. Sweeps visit vertices in a fresh random order
//! and refresh every outgoing message of a vertex at once, using prefix and
//! suffix products for the cavity terms.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{check_color_count, AssignmentError, Color, Graph};
use crate::rng::{rng_from_seed, SeededRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BpError {
    #[error("contradiction on edge {from} -> {to}: every color excluded")]
    Contradiction { from: usize, to: usize },
    #[error("contradiction at vertex {0}: non-positive local weight")]
    VertexContradiction(usize),
    #[error("contradiction on edge ({0}, {1}): non-positive edge weight")]
    EdgeContradiction(usize, usize),
    #[error("damping {0} outside [0, 1)")]
    BadDamping(f64),
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

/// One normalized color distribution per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    q: usize,
    messages: Vec<f64>,
}

impl BeliefState {
    pub fn uniform(g: &Graph, q: usize) -> Self {
        BeliefState {
            q,
            messages: vec![1.0 / q as f64; g.directed_count() * q],
        }
    }

    /// Each message drawn from a symmetric Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(g: &Graph, q: usize, rng: &mut R) -> Self {
        let mut messages = Vec::with_capacity(g.directed_count() * q);
        for _ in 0..g.directed_count() {
            let draws: Vec<f64> = (0..q).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            messages.extend(draws.iter().map(|x| x / total));
        }
        BeliefState { q, messages }
    }

    /// Builds a state from per-directed-edge messages (`2M * q` entries).
    pub fn from_messages(g: &Graph, q: usize, messages: Vec<f64>) -> Self {
        assert_eq!(messages.len(), g.directed_count() * q);
        BeliefState { q, messages }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn message(&self, slot: usize) -> &[f64] {
        &self.messages[slot * self.q..(slot + 1) * self.q]
    }

    pub fn set_message(&mut self, slot: usize, msg: &[f64]) {
        self.messages[slot * self.q..(slot + 1) * self.q].copy_from_slice(msg);
    }
}

/// Recomputes the message on directed edge `slot` (`i -> j`) from the
/// current incoming messages of `i`.
pub fn bp_update_edge(state: &BeliefState, g: &Graph, slot: usize) -> Result<Vec<f64>, BpError> {
    let q = state.q;
    let i = g.source(slot);
    let j = g.target(slot);
    let mut out = vec![1.0; q];
    for s in g.out_slots(i) {
        if s == slot {
            continue;
        }
        let incoming = state.message(g.reverse(s));
        for (o, p) in out.iter_mut().zip(incoming) {
            *o *= 1.0 - p;
        }
    }
    let z: f64 = out.iter().sum();
    if z <= 0.0 {
        return Err(BpError::Contradiction { from: i, to: j });
    }
    out.iter_mut().for_each(|o| *o /= z);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpInit {
    Uniform,
    /// Dirichlet(1) messages drawn from the run's seed.
    Random,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BpConfig {
    pub init: BpInit,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub damping: f64,
    pub seed: u64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            init: BpInit::Uniform,
            tolerance: 1e-8,
            max_sweeps: 1000,
            damping: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpResult {
    pub converged: bool,
    pub iterations: usize,
    pub max_residual: f64,
    pub marginals: Vec<Vec<f64>>,
    pub bethe_entropy: f64,
}

pub fn bp_run(g: &Graph, q: usize, cfg: &BpConfig) -> Result<BpResult, BpError> {
    bp_run_with_state(g, q, cfg).map(|(r, _)| r)
}

/// Like [`bp_run`], also returning the final messages.
pub fn bp_run_with_state(
    g: &Graph,
    q: usize,
    cfg: &BpConfig,
) -> Result<(BpResult, BeliefState), BpError> {
    check_color_count(q)?;
    if !(0.0..1.0).contains(&cfg.damping) {
        return Err(BpError::BadDamping(cfg.damping));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let state = match cfg.init {
        BpInit::Uniform => BeliefState::uniform(g, q),
        BpInit::Random => BeliefState::random(g, q, &mut rng),
    };
    let mut engine = BpEngine::new(g, state);
    engine.damping = cfg.damping;
    let (converged, iterations, max_residual) =
        engine.iterate(cfg.tolerance, cfg.max_sweeps, &mut rng)?;
    let marginals = engine.marginals()?;
    let state = engine.into_state();
    let bethe = bethe_entropy(&state, g)?;
    Ok((
        BpResult {
            converged,
            iterations,
            max_residual,
            marginals: marginals.chunks_exact(q).map(<[f64]>::to_vec).collect(),
            bethe_entropy: bethe,
        },
        state,
    ))
}

/// Bethe entropy density `(1/n)[sum_i log Z_i - sum_(ij) log Z_ij]`.
pub fn bethe_entropy(state: &BeliefState, g: &Graph) -> Result<f64, BpError> {
    let q = state.q;
    let mut total = 0.0;
    let mut prod = vec![0.0; q];
    for i in 0..g.n() {
        prod.fill(1.0);
        for s in g.out_slots(i) {
            for (p, m) in prod.iter_mut().zip(state.message(g.reverse(s))) {
                *p *= 1.0 - m;
            }
        }
        let z: f64 = prod.iter().sum();
        if z <= 0.0 {
            return Err(BpError::VertexContradiction(i));
        }
        total += z.ln();
    }
    for &(a, b) in g.edges() {
        let s = g.directed_edge(a as usize, b as usize).unwrap();
        let overlap: f64 = state
            .message(s)
            .iter()
            .zip(state.message(g.reverse(s)))
            .map(|(x, y)| x * y)
            .sum();
        let z = 1.0 - overlap;
        if z <= 0.0 {
            return Err(BpError::EdgeContradiction(a as usize, b as usize));
        }
        total -= z.ln();
    }
    Ok(if g.n() == 0 { 0.0 } else { total / g.n() as f64 })
}

/// Writes marginals as `vertex,color,probability` rows.
pub fn write_marginals_csv<W: Write>(marginals: &[Vec<f64>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "vertex,color,probability")?;
    for (v, m) in marginals.iter().enumerate() {
        for (c, p) in m.iter().enumerate() {
            writeln!(w, "{v},{c},{p}")?;
        }
    }
    w.flush()
}

/// Sweep engine shared by `bp_run`, BP-guided decimation and reinforcement.
///
/// Fixed vertices emit a point-mass message on their color and are never
/// updated. An optional external field multiplies every product at a vertex.
pub(crate) struct BpEngine<'g> {
    g: &'g Graph,
    q: usize,
    msgs: Vec<f64>,
    pub fixed: Vec<Option<Color>>,
    pub field: Option<Vec<f64>>,
    pub damping: f64,
    order: Vec<usize>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    out: Vec<f64>,
}

impl<'g> BpEngine<'g> {
    pub fn new(g: &'g Graph, state: BeliefState) -> Self {
        let q = state.q;
        BpEngine {
            g,
            q,
            msgs: state.messages,
            fixed: vec![None; g.n()],
            field: None,
            damping: 0.0,
            order: (0..g.n()).collect(),
            prefix: Vec::new(),
            suffix: Vec::new(),
            out: vec![0.0; q],
        }
    }

    pub fn into_state(self) -> BeliefState {
        BeliefState {
            q: self.q,
            messages: self.msgs,
        }
    }

    pub fn fix(&mut self, v: usize, color: Color) {
        self.fixed[v] = Some(color);
        let q = self.q;
        for s in self.g.out_slots(v) {
            let m = &mut self.msgs[s * q..(s + 1) * q];
            m.fill(0.0);
            m[color as usize] = 1.0;
        }
    }

    /// Runs sweeps until the largest message change is at most `tolerance`.
    /// Returns `(converged, sweeps, last residual)`.
    pub fn iterate(
        &mut self,
        tolerance: f64,
        max_sweeps: usize,
        rng: &mut SeededRng,
    ) -> Result<(bool, usize, f64), BpError> {
        let mut residual = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            residual = self.sweep(rng)?;
            if residual <= tolerance {
                return Ok((true, sweep, residual));
            }
        }
        Ok((false, max_sweeps, residual))
    }

    pub fn sweep(&mut self, rng: &mut SeededRng) -> Result<f64, BpError> {
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

    fn update_vertex(&mut self, v: usize) -> Result<f64, BpError> {
        let q = self.q;
        let g = self.g;
        let slots = g.out_slots(v);
        let d = slots.len();
        if d == 0 {
            return Ok(0.0);
        }
        self.prefix.resize((d + 1) * q, 0.0);
        self.suffix.resize((d + 1) * q, 0.0);
        self.prefix[..q].fill(1.0);
        self.suffix[d * q..].fill(1.0);
        for (t, s) in slots.clone().enumerate() {
            let inc = g.reverse(s) * q;
            for c in 0..q {
                self.prefix[(t + 1) * q + c] = self.prefix[t * q + c] * (1.0 - self.msgs[inc + c]);
            }
        }
        for (t, s) in slots.clone().enumerate().rev() {
            let inc = g.reverse(s) * q;
            for c in 0..q {
                self.suffix[t * q + c] = self.suffix[(t + 1) * q + c] * (1.0 - self.msgs[inc + c]);
            }
        }
        let field = self.field.as_ref().map(|f| &f[v * q..(v + 1) * q]);
        let mut residual: f64 = 0.0;
        for (t, s) in slots.enumerate() {
            let mut z = 0.0;
            for c in 0..q {
                let mut x = self.prefix[t * q + c] * self.suffix[(t + 1) * q + c];
                if let Some(f) = field {
                    x *= f[c];
                }
                self.out[c] = x;
                z += x;
            }
            if !(z > 0.0) {
                return Err(BpError::Contradiction {
                    from: v,
                    to: g.target(s),
                });
            }
            let old = &mut self.msgs[s * q..(s + 1) * q];
            for c in 0..q {
                let new = (1.0 - self.damping) * self.out[c] / z + self.damping * old[c];
                residual = residual.max((new - old[c]).abs());
                old[c] = new;
            }
        }
        Ok(residual)
    }

    /// Full-neighborhood marginals, `n * q` entries.
    pub fn marginals(&self) -> Result<Vec<f64>, BpError> {
        let q = self.q;
        let g = self.g;
        let mut out = vec![0.0; g.n() * q];
        for v in 0..g.n() {
            let m = &mut out[v * q..(v + 1) * q];
            if let Some(c) = self.fixed[v] {
                m[c as usize] = 1.0;
                continue;
            }
            match &self.field {
                Some(f) => m.copy_from_slice(&f[v * q..(v + 1) * q]),
                None => m.fill(1.0),
            }
            for s in g.out_slots(v) {
                let inc = g.reverse(s) * q;
                for c in 0..q {
                    m[c] *= 1.0 - self.msgs[inc + c];
                }
            }
            let z: f64 = m.iter().sum();
            if !(z > 0.0) {
                return Err(BpError::VertexContradiction(v));
            }
            m.iter_mut().for_each(|x| *x /= z);
        }
        Ok(out)
    }
}
