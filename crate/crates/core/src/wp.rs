//! Warning Propagation: message passing restricted to frozen variables.
//!
//! A warning `c` on `i -> j` says that `i` is forced to color `c` by its
//! other neighbors, so `j` may not take `c`. The allowed set of `i` seen
//! from `j` is the set of colors nobody in `N(i) \ {j}` warns about; a
//! singleton allowed set emits a warning, an empty one is a contradiction.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{check_color_count, Assignment, AssignmentError, Color, Graph};
use crate::rng::rng_from_seed;

/// `None` is the null message.
pub type Warning = Option<Color>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WpError {
    #[error("contradiction at vertex {vertex}: every color is warned")]
    Contradiction { vertex: usize },
    #[error(transparent)]
    Colors(#[from] AssignmentError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarningState {
    q: usize,
    warnings: Vec<Warning>,
}

impl WarningState {
    pub fn all_null(g: &Graph, q: usize) -> Self {
        WarningState {
            q,
            warnings: vec![None; g.directed_count()],
        }
    }

    /// Every directed edge `i -> j` carries the warning `a[i]`.
    pub fn from_assignment(g: &Graph, a: &Assignment) -> Self {
        let mut warnings = vec![None; g.directed_count()];
        for v in 0..g.n() {
            for s in g.out_slots(v) {
                warnings[s] = Some(a.color(v));
            }
        }
        WarningState { q: a.q(), warnings }
    }

    /// Each edge null or one of the colors, uniformly.
    pub fn random(g: &Graph, q: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let warnings = (0..g.directed_count())
            .map(|_| {
                let x = rng.random_range(0..=q);
                (x < q).then_some(x as Color)
            })
            .collect();
        WarningState { q, warnings }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn warning(&self, slot: usize) -> Warning {
        self.warnings[slot]
    }

    pub fn set_warning(&mut self, slot: usize, w: Warning) {
        assert!(w.is_none_or(|c| (c as usize) < self.q));
        self.warnings[slot] = w;
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn is_all_null(&self) -> bool {
        self.warnings.iter().all(Option::is_none)
    }

    /// Color of every vertex whose full neighborhood warns all other colors.
    pub fn frozen_vertices(&self, g: &Graph) -> Vec<Option<Color>> {
        let mut counts = vec![0u32; self.q];
        (0..g.n())
            .map(|v| {
                counts.fill(0);
                for s in g.out_slots(v) {
                    if let Some(c) = self.warnings[g.reverse(s)] {
                        counts[c as usize] += 1;
                    }
                }
                single_allowed(&counts, None)
            })
            .collect()
    }
}

/// The only unwarned color, if exactly one; `excluded` is removed from the
/// counts first.
fn single_allowed(counts: &[u32], excluded: Warning) -> Option<Color> {
    let mut allowed = None;
    for (c, &k) in counts.iter().enumerate() {
        let k = if excluded == Some(c as Color) { k - 1 } else { k };
        if k == 0 {
            if allowed.is_some() {
                return None;
            }
            allowed = Some(c as Color);
        }
    }
    allowed
}

/// Evaluates the warning rule on directed edge `slot` (`i -> j`).
pub fn wp_update_edge(state: &WarningState, g: &Graph, slot: usize) -> Result<Warning, WpError> {
    let i = g.source(slot);
    let mut counts = vec![0u32; state.q];
    for s in g.out_slots(i) {
        if s != slot {
            if let Some(c) = state.warnings[g.reverse(s)] {
                counts[c as usize] += 1;
            }
        }
    }
    edge_rule(&counts, None, i)
}

fn edge_rule(counts: &[u32], excluded: Warning, vertex: usize) -> Result<Warning, WpError> {
    let mut allowed = 0;
    let mut last = 0;
    for (c, &k) in counts.iter().enumerate() {
        let k = if excluded == Some(c as Color) { k - 1 } else { k };
        if k == 0 {
            allowed += 1;
            last = c;
        }
    }
    match allowed {
        0 => Err(WpError::Contradiction { vertex }),
        1 => Ok(Some(last as Color)),
        _ => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub enum WpInit<'a> {
    AllNull,
    FromAssignment(&'a Assignment),
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WpStatus {
    Trivial,
    Nontrivial,
    Contradiction,
    NoConvergence,
}

#[derive(Debug, Clone)]
pub struct WpOutcome {
    pub state: WarningState,
    pub status: WpStatus,
    pub sweeps: usize,
    /// Vertex where a contradiction was detected.
    pub contradiction_at: Option<usize>,
}

/// Synchronous Warning Propagation from the given initialization.
pub fn wp_run(g: &Graph, q: usize, init: WpInit<'_>, max_sweeps: usize) -> Result<WpOutcome, WpError> {
    check_color_count(q)?;
    let mut state = match init {
        WpInit::AllNull => WarningState::all_null(g, q),
        WpInit::FromAssignment(a) => {
            assert_eq!(a.q(), q, "assignment uses a different color count");
            WarningState::from_assignment(g, a)
        }
        WpInit::Random(seed) => WarningState::random(g, q, seed),
    };
    let mut next = state.warnings.clone();
    let mut counts = vec![0u32; q];
    for sweep in 1..=max_sweeps {
        let mut changed = false;
        for v in 0..g.n() {
            counts.fill(0);
            for s in g.out_slots(v) {
                if let Some(c) = state.warnings[g.reverse(s)] {
                    counts[c as usize] += 1;
                }
            }
            for s in g.out_slots(v) {
                let from_target = state.warnings[g.reverse(s)];
                match edge_rule(&counts, from_target, v) {
                    Ok(w) => {
                        changed |= w != state.warnings[s];
                        next[s] = w;
                    }
                    Err(WpError::Contradiction { vertex }) => {
                        return Ok(WpOutcome {
                            state,
                            status: WpStatus::Contradiction,
                            sweeps: sweep,
                            contradiction_at: Some(vertex),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        std::mem::swap(&mut state.warnings, &mut next);
        if !changed {
            let status = if state.is_all_null() {
                WpStatus::Trivial
            } else {
                WpStatus::Nontrivial
            };
            return Ok(WpOutcome {
                state,
                status,
                sweeps: sweep,
                contradiction_at: None,
            });
        }
    }
    Ok(WpOutcome {
        state,
        status: WpStatus::NoConvergence,
        sweeps: max_sweeps,
        contradiction_at: None,
    })
}
