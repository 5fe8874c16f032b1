//! Browser bindings for the qcol demo page.
//!
//! Every export returns a flat `Float64Array` of fixed-width rows so the page
//! can plot without any JSON handling.

use qcol::bp::{bp_run, BpConfig, BpInit};
use qcol::graph::gen_erdos_renyi;
use qcol::rng::mix_seed;
use qcol::search::{walkcol, Start, WalkColParams};
use qcol::sp::{sp_run, SpConfig};
use qcol::rs_entropy;
use wasm_bindgen::prelude::*;

/// Largest graph the page may request; keeps each call well under a second.
pub const MAX_N: usize = 20_000;

fn check(n: usize, q: usize) -> Result<(), String> {
    if !(2..=MAX_N).contains(&n) {
        return Err(format!("n must be in 2..={MAX_N}"));
    }
    if !(2..=10).contains(&q) {
        return Err("q must be in 2..=10".into());
    }
    Ok(())
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// BP entropy density against the closed-form curve on ER graphs.
/// Rows: `[c, bethe, closed_form, converged]`.
#[wasm_bindgen]
pub fn entropy_curve(q: usize, n: usize, c_max: f64, points: usize, seed: u64) -> Result<Vec<f64>, String> {
    check(n, q)?;
    let mut out = Vec::with_capacity(points * 4);
    for c in grid(0.0, c_max, points) {
        let g = gen_erdos_renyi(n, c, mix_seed(seed, c.to_bits())).map_err(|e| e.to_string())?;
        let cfg = BpConfig {
            init: BpInit::Random,
            tolerance: 1e-8,
            max_sweeps: 300,
            damping: 0.0,
            seed,
        };
        let res = bp_run(&g, q, &cfg).map_err(|e| e.to_string())?;
        out.extend([c, res.bethe_entropy, rs_entropy(q, c), res.converged as u8 as f64]);
    }
    Ok(out)
}

/// One Walk-COL run on an ER graph. Rows: `[flips / n, fraction unsat]`.
#[wasm_bindgen]
pub fn walkcol_trace(q: usize, n: usize, c: f64, p: f64, flips_per_n: u64, seed: u64) -> Result<Vec<f64>, String> {
    check(n, q)?;
    let g = gen_erdos_renyi(n, c, mix_seed(seed, 1)).map_err(|e| e.to_string())?;
    let params = WalkColParams {
        p,
        max_flips: flips_per_n.saturating_mul(n as u64),
        seed: mix_seed(seed, 2),
    };
    let trace = walkcol(&g, q, Start::Random, &params).map_err(|e| e.to_string())?;
    Ok(trace.samples.iter().flat_map(|s| [s.flips_per_n, s.fraction_unsat]).collect())
}

/// SP complexity across a range of ER connectivities.
/// Rows: `[c, complexity, trivial, converged]`.
#[wasm_bindgen]
pub fn sp_complexity(q: usize, n: usize, c_min: f64, c_max: f64, points: usize, seed: u64) -> Result<Vec<f64>, String> {
    check(n, q)?;
    if q > qcol::sp::SP_MAX_COLORS {
        return Err(format!("survey propagation supports q <= {}", qcol::sp::SP_MAX_COLORS));
    }
    let mut out = Vec::with_capacity(points * 4);
    for c in grid(c_min, c_max, points) {
        let g = gen_erdos_renyi(n, c, mix_seed(seed, c.to_bits())).map_err(|e| e.to_string())?;
        let cfg = SpConfig {
            max_sweeps: 300,
            tolerance: 1e-5,
            seed,
            ..SpConfig::default()
        };
        let res = sp_run(&g, q, &cfg).map_err(|e| e.to_string())?;
        out.extend([c, res.complexity, res.trivial as u8 as f64, res.converged as u8 as f64]);
    }
    Ok(out)
}
