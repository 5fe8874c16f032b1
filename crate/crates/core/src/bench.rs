//! Experiment harness behind the `bench` binary.
//!
//! A run expands a config into independent `(c, seed)` work units, executes
//! them on a bounded thread pool and emits CSV tables plus a JSON record.
//! Units are collected in cell-key order, so the CSV bytes do not depend on
//! scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bp::{bp_run, BpConfig, BpInit};
use crate::decimate::{decimate_bp, decimate_sp, DecimationPolicy, Guide};
use crate::graph::{gen_erdos_renyi, gen_regular, Ensemble, Graph, GraphError};
use crate::rng::mix_seed;
use crate::search::{incremental_solve_with, walkcol, IncrementalConfig, Start, WalkColParams, DEFAULT_WALK_P};
use crate::sp::{sp_run, SpConfig, SpInit};
use crate::thresholds::{asymptotic, table_lookup};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EntropyCurve,
    WalkcolSweep,
    Incremental,
    SpBracket,
    Decimate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::EntropyCurve => "entropy_curve",
            Experiment::WalkcolSweep => "walkcol_sweep",
            Experiment::Incremental => "incremental",
            Experiment::SpBracket => "sp_bracket",
            Experiment::Decimate => "decimate",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_owned()))
            .map_err(|_| BenchError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpBlock {
    /// Start from random messages rather than the uniform fixed point.
    pub random_init: bool,
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub damping: f64,
}

impl Default for BpBlock {
    fn default() -> Self {
        BpBlock {
            random_init: true,
            tolerance: 1e-8,
            max_sweeps: 1000,
            damping: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpBlock {
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub damping: f64,
}

impl Default for SpBlock {
    fn default() -> Self {
        let d = SpConfig::default();
        SpBlock {
            tolerance: d.tolerance,
            max_sweeps: d.max_sweeps,
            damping: d.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkBlock {
    pub p: f64,
    /// Budget of attempted flips per vertex.
    pub flips_per_n: u64,
}

impl Default for WalkBlock {
    fn default() -> Self {
        WalkBlock {
            p: DEFAULT_WALK_P,
            flips_per_n: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementalBlock {
    pub target_c: f64,
    /// Repair budget per added link, in flips per vertex.
    pub repair_flips_per_n: u64,
    pub p: f64,
    /// Number of log-spaced connectivity bins over the final decade.
    pub bins: usize,
}

impl Default for IncrementalBlock {
    fn default() -> Self {
        IncrementalBlock {
            target_c: 20.0,
            repair_flips_per_n: 1000,
            p: DEFAULT_WALK_P,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub q: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    /// Connectivities, strictly increasing. Unused by `incremental`.
    #[serde(default)]
    pub grid: Vec<f64>,
    pub n: usize,
    pub seeds: u32,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub bp: BpBlock,
    #[serde(default)]
    pub sp: SpBlock,
    #[serde(default)]
    pub walkcol: WalkBlock,
    #[serde(default)]
    pub incremental: IncrementalBlock,
    #[serde(default)]
    pub decimation: DecimationPolicy,
    /// Output directory, overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_ensemble() -> Ensemble {
    Ensemble::ErdosRenyi
}

impl ExperimentConfig {
    /// Parses either a config or a previously written run record, whose
    /// `config` field is replayed.
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let v: Value = serde_json::from_str(text)?;
        let v = match v.get("config") {
            Some(inner) if v.get("cells").is_some() => inner.clone(),
            _ => v,
        };
        Ok(serde_json::from_value(v)?)
    }

    pub fn validate(&self, kind: Experiment) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if let Some(k) = self.experiment {
            if k != kind {
                return bad(format!("config is for {} but {} was requested", k.name(), kind.name()));
            }
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.n < 2 {
            return bad("n must be at least 2".into());
        }
        if kind != Experiment::Incremental {
            if self.grid.is_empty() {
                return bad("grid is empty".into());
            }
            if !self.grid.windows(2).all(|w| w[0] < w[1]) {
                return bad("grid must be strictly increasing".into());
            }
            if self.grid.iter().any(|&c| !(c >= 0.0)) {
                return bad("connectivities must be non-negative".into());
            }
            if self.ensemble == Ensemble::Regular && self.grid.iter().any(|c| c.fract() != 0.0) {
                return bad("regular ensemble needs integer degrees".into());
            }
        }
        Ok(())
    }

    /// Seeds used for every cell.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|s| self.seed_base.wrapping_add(s)).collect()
    }
}

/// A produced table: file name and CSV text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub cells: Vec<Value>,
    /// Number of cells carrying a non-empty `flags` list.
    pub flagged_cells: usize,
    /// Experiment-level summary (bracket, medians).
    pub summary: Value,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub tables: Vec<Table>,
}

impl RunOutput {
    /// Writes every table as `<dir>/<name>.csv` and the record as
    /// `<dir>/<experiment>.json`; returns the written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, &t.csv)?;
            paths.push(p);
        }
        let p = dir.join(format!("{}.json", self.record.experiment.name()));
        std::fs::write(&p, serde_json::to_string_pretty(&self.record)? + "\n")?;
        paths.push(p);
        Ok(paths)
    }
}

fn make_graph(cfg: &ExperimentConfig, c: f64, seed: u64) -> Result<Graph, GraphError> {
    match cfg.ensemble {
        Ensemble::ErdosRenyi => gen_erdos_renyi(cfg.n, c, seed),
        Ensemble::Regular => gen_regular(cfg.n, c as usize, seed),
    }
}

/// Seed of the graph for one unit; algorithm seeds are derived from it.
fn unit_seed(c: f64, seed: u64) -> u64 {
    mix_seed(seed, c.to_bits())
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    Some(if k % 2 == 1 { xs[k / 2] } else { 0.5 * (xs[k / 2 - 1] + xs[k / 2]) })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Condensation threshold for the config's q and ensemble, from the table
/// when tabulated and from the asymptotic form otherwise.
fn condensation(q: usize, ensemble: Ensemble) -> Option<f64> {
    table_lookup(q, ensemble)
        .ok()
        .and_then(|r| r.c_c.map(|t| t.value))
        .or_else(|| asymptotic(q).ok().map(|a| a.c_c))
}

/// Runs `kind` with `workers` threads (0 = all cores).
pub fn run(kind: Experiment, cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput, BenchError> {
    cfg.validate(kind)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let start = Instant::now();
    let (cells, tables, summary) = pool.install(|| match kind {
        Experiment::EntropyCurve => entropy_curve(cfg),
        Experiment::WalkcolSweep => walkcol_sweep(cfg),
        Experiment::Incremental => incremental(cfg),
        Experiment::SpBracket => sp_bracket(cfg),
        Experiment::Decimate => decimate(cfg),
    })?;
    let flagged_cells = cells
        .iter()
        .filter(|c| c["flags"].as_array().is_some_and(|f| !f.is_empty()))
        .count();
    let mut config = cfg.clone();
    config.experiment = Some(kind);
    Ok(RunOutput {
        record: RunRecord {
            experiment: kind,
            version: env!("CARGO_PKG_VERSION"),
            config,
            cells,
            flagged_cells,
            summary,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        tables,
    })
}

type Produced = (Vec<Value>, Vec<Table>, Value);

/// Runs `f` on every `(c, seed)` unit in parallel; results come back
/// grouped by cell in grid order.
fn per_unit<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(f64, u64) -> Result<T, BenchError> + Sync,
) -> Result<Vec<(f64, Vec<(u64, T)>)>, BenchError> {
    let seeds = cfg.seed_list();
    let units: Vec<(f64, u64)> = cfg.grid.iter().flat_map(|&c| seeds.iter().map(move |&s| (c, s))).collect();
    let results: Vec<T> = units.par_iter().map(|&(c, s)| f(c, s)).collect::<Result<_, _>>()?;
    let mut it = results.into_iter();
    Ok(cfg
        .grid
        .iter()
        .map(|&c| (c, seeds.iter().map(|&s| (s, it.next().unwrap())).collect()))
        .collect())
}

struct EntropyUnit {
    converged: bool,
    iterations: usize,
    bethe: Option<f64>,
    error: Option<String>,
}

fn entropy_curve(cfg: &ExperimentConfig) -> Result<Produced, BenchError> {
    let q = cfg.q;
    let c_c = condensation(q, cfg.ensemble);
    let units = per_unit(cfg, |c, s| {
        let seed = unit_seed(c, s);
        let g = make_graph(cfg, c, seed)?;
        let bp = BpConfig {
            init: if cfg.bp.random_init { BpInit::Random } else { BpInit::Uniform },
            tolerance: cfg.bp.tolerance,
            max_sweeps: cfg.bp.max_sweeps,
            damping: cfg.bp.damping,
            seed: mix_seed(seed, 1),
        };
        Ok(match bp_run(&g, q, &bp) {
            Ok(r) => EntropyUnit {
                converged: r.converged,
                iterations: r.iterations,
                bethe: Some(r.bethe_entropy),
                error: None,
            },
            Err(e) => EntropyUnit {
                converged: false,
                iterations: 0,
                bethe: None,
                error: Some(e.to_string()),
            },
        })
    })?;
    let mut rows = String::from("c,seed,converged,iterations,bethe_entropy,eq3_entropy,error\n");
    let mut cell_csv = String::from("c,regime,mean_bethe_entropy,eq3_entropy,relative_difference,flagged_seeds\n");
    let mut cells = Vec::new();
    for (c, seeds) in &units {
        let eq3 = crate::rs_entropy(q, *c);
        let regime = if c_c.is_some_and(|cc| *c > cc) { "upper_bound" } else { "valid" };
        let mut flags = Vec::new();
        for (s, u) in seeds {
            writeln!(
                rows,
                "{c},{s},{},{},{},{eq3},{}",
                u.converged,
                u.iterations,
                opt(u.bethe),
                u.error.as_deref().unwrap_or("")
            )
            .unwrap();
            if let Some(e) = &u.error {
                flags.push(format!("seed {s}: {e}"));
            } else if !u.converged {
                flags.push(format!("seed {s}: not converged"));
            }
        }
        let good: Vec<f64> = seeds.iter().filter(|(_, u)| u.converged).filter_map(|(_, u)| u.bethe).collect();
        let mean_bethe = (!good.is_empty()).then(|| mean(good.iter().copied()));
        let rel = mean_bethe.map(|b| (b - eq3) / eq3.abs());
        writeln!(cell_csv, "{c},{regime},{},{eq3},{},{}", opt(mean_bethe), opt(rel), flags.len()).unwrap();
        cells.push(json!({
            "c": c,
            "seeds": seeds.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            "regime": regime,
            "mean_bethe_entropy": mean_bethe,
            "eq3_entropy": eq3,
            "relative_difference": rel,
            "flags": flags,
        }));
    }
    let summary = json!({ "condensation_threshold": c_c });
    Ok((cells, vec![table("entropy_curve", rows), table("entropy_curve_cells", cell_csv)], summary))
}

fn table(name: &str, csv: String) -> Table {
    Table {
        name: name.to_owned(),
        csv,
    }
}

fn walkcol_sweep(cfg: &ExperimentConfig) -> Result<Produced, BenchError> {
    let q = cfg.q;
    let units = per_unit(cfg, |c, s| {
        let seed = unit_seed(c, s);
        let g = make_graph(cfg, c, seed)?;
        let params = WalkColParams {
            p: cfg.walkcol.p,
            max_flips: cfg.walkcol.flips_per_n.saturating_mul(cfg.n as u64),
            seed: mix_seed(seed, 1),
        };
        walkcol(&g, q, Start::Random, &params).map_err(|e| BenchError::Config(e.to_string()))
    })?;
    let n = cfg.n as f64;
    let mut rows = String::from("c,seed,solved,flips_per_n,final_fraction_unsat\n");
    let mut traces = String::from("c,seed,flips_per_n,fraction_unsat\n");
    let mut cell_csv = String::from("c,success_rate,median_tau_solved\n");
    let mut cells = Vec::new();
    for (c, seeds) in &units {
        for (s, t) in seeds {
            let last = t.samples.last().map_or(f64::NAN, |p| p.fraction_unsat);
            writeln!(rows, "{c},{s},{},{},{last}", t.solved, t.flips_used as f64 / n).unwrap();
            for p in &t.samples {
                writeln!(traces, "{c},{s},{},{}", p.flips_per_n, p.fraction_unsat).unwrap();
            }
        }
        let solved = seeds.iter().filter(|(_, t)| t.solved).count();
        let rate = solved as f64 / seeds.len() as f64;
        let mut taus: Vec<f64> = seeds
            .iter()
            .filter(|(_, t)| t.solved)
            .map(|(_, t)| t.flips_used as f64 / n)
            .collect();
        let tau = median(&mut taus);
        writeln!(cell_csv, "{c},{rate},{}", opt(tau)).unwrap();
        cells.push(json!({
            "c": c,
            "seeds": seeds.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            "success_rate": rate,
            "median_tau_solved": tau,
            "flags": Vec::<String>::new(),
        }));
    }
    Ok((
        cells,
        vec![
            table("walkcol_sweep", rows),
            table("walkcol_traces", traces),
            table("walkcol_sweep_cells", cell_csv),
        ],
        Value::Null,
    ))
}

/// Per-seed mean repair cost in each of `bins` log-spaced bins over
/// `[hi / 10, hi]`; `None` for empty bins.
pub fn binned_repair_cost(links: &[crate::search::LinkRecord], hi: f64, bins: usize) -> Vec<Option<f64>> {
    let lo = hi / 10.0;
    let width = (hi / lo).ln() / bins as f64;
    let mut sums = vec![(0.0, 0usize); bins];
    for l in links.iter().filter(|l| l.c > lo && l.c <= hi) {
        let b = (((l.c / lo).ln() / width) as usize).min(bins - 1);
        sums[b].0 += l.repair_flips as f64;
        sums[b].1 += 1;
    }
    sums.into_iter().map(|(s, k)| (k > 0).then(|| s / k as f64)).collect()
}

fn incremental(cfg: &ExperimentConfig) -> Result<Produced, BenchError> {
    let seeds = cfg.seed_list();
    let inc = &cfg.incremental;
    if inc.bins == 0 {
        return Err(BenchError::Config("incremental.bins must be at least 1".into()));
    }
    let outcomes: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            incremental_solve_with(&IncrementalConfig {
                repair_budget_per_link: inc.repair_flips_per_n.saturating_mul(cfg.n as u64),
                p: inc.p,
                ..IncrementalConfig::new(cfg.n, cfg.q, inc.target_c, mix_seed(s, 0x1c))
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut rows = String::from("seed,stop_connectivity,reached_target,links\n");
    let mut cells = Vec::new();
    for (s, o) in seeds.iter().zip(&outcomes) {
        writeln!(rows, "{s},{},{},{}", o.stop_connectivity, o.reached_target, o.links.len()).unwrap();
        cells.push(json!({
            "seed": s,
            "seeds": [s],
            "stop_connectivity": o.stop_connectivity,
            "reached_target": o.reached_target,
            "flags": Vec::<String>::new(),
        }));
    }
    let mut stops: Vec<f64> = outcomes.iter().map(|o| o.stop_connectivity).collect();
    let median_stop = median(&mut stops).unwrap();
    // Bins end at the smallest stop connectivity so every seed covers all.
    let hi = stops[0];
    let per_seed: Vec<Vec<Option<f64>>> = outcomes.iter().map(|o| binned_repair_cost(&o.links, hi, inc.bins)).collect();
    let lo = hi / 10.0;
    let mut curve = String::from("bin,c_low,c_high,median_repair_flips_per_link\n");
    let mut medians = Vec::new();
    for b in 0..inc.bins {
        let edge = |k: usize| lo * (10f64).powf(k as f64 / inc.bins as f64);
        let mut vals: Vec<f64> = per_seed.iter().filter_map(|v| v[b]).collect();
        let m = median(&mut vals);
        medians.push(m);
        writeln!(curve, "{b},{},{},{}", edge(b), edge(b + 1), opt(m)).unwrap();
    }
    let mut links = String::from("seed,c,repair_flips\n");
    for (s, o) in seeds.iter().zip(&outcomes) {
        for l in &o.links {
            writeln!(links, "{s},{},{}", l.c, l.repair_flips).unwrap();
        }
    }
    let summary = json!({
        "median_stop_connectivity": median_stop,
        "bin_range": [lo, hi],
        "median_repair_cost_per_bin": medians,
    });
    Ok((
        cells,
        vec![
            table("incremental", rows),
            table("incremental_cost", curve),
            table("incremental_links", links),
        ],
        summary,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpOutcome {
    Trivial,
    Nontrivial,
    Contradiction,
    NotConverged,
}

/// A run counts as colorable when SP converged either to the trivial fixed
/// point or to a non-trivial one with positive complexity.
pub fn sp_colorable(outcome: SpOutcome, complexity: Option<f64>) -> bool {
    match outcome {
        SpOutcome::Trivial => true,
        SpOutcome::Nontrivial => complexity.is_some_and(|s| s > 0.0),
        _ => false,
    }
}

/// First grid interval where the colorable fraction drops from at least
/// one half to below it.
pub fn bracket(grid: &[f64], colorable_fraction: &[f64]) -> Option<(f64, f64)> {
    grid.windows(2)
        .zip(colorable_fraction.windows(2))
        .find(|(_, f)| f[0] >= 0.5 && f[1] < 0.5)
        .map(|(c, _)| (c[0], c[1]))
}

fn sp_bracket(cfg: &ExperimentConfig) -> Result<Produced, BenchError> {
    let q = cfg.q;
    let units = per_unit(cfg, |c, s| {
        let seed = unit_seed(c, s);
        let g = make_graph(cfg, c, seed)?;
        let sp = SpConfig {
            init: SpInit::Random,
            tolerance: cfg.sp.tolerance,
            max_sweeps: cfg.sp.max_sweeps,
            damping: cfg.sp.damping,
            seed: mix_seed(seed, 2),
        };
        Ok(match sp_run(&g, q, &sp) {
            Ok(r) if !r.converged => (SpOutcome::NotConverged, Some(r.complexity), r.iterations),
            Ok(r) if r.trivial => (SpOutcome::Trivial, Some(r.complexity), r.iterations),
            Ok(r) => (SpOutcome::Nontrivial, Some(r.complexity), r.iterations),
            Err(_) => (SpOutcome::Contradiction, None, 0),
        })
    })?;
    let mut rows = String::from("c,seed,outcome,complexity,iterations,colorable\n");
    let mut cell_csv = String::from("c,trivial_fraction,nontrivial_fraction,colorable_fraction,mean_complexity_nontrivial\n");
    let mut cells = Vec::new();
    let mut fractions = Vec::new();
    for (c, seeds) in &units {
        let k = seeds.len() as f64;
        let count = |o: SpOutcome| seeds.iter().filter(|(_, u)| u.0 == o).count() as f64 / k;
        let mut flags = Vec::new();
        for (s, (o, sigma, it)) in seeds {
            let name = serde_json::to_value(o).unwrap();
            let col = sp_colorable(*o, *sigma);
            writeln!(rows, "{c},{s},{},{},{it},{col}", name.as_str().unwrap(), opt(*sigma)).unwrap();
            if *o == SpOutcome::NotConverged {
                flags.push(format!("seed {s}: not converged"));
            }
        }
        let colorable = seeds.iter().filter(|(_, u)| sp_colorable(u.0, u.1)).count() as f64 / k;
        fractions.push(colorable);
        let sigma_nt = seeds
            .iter()
            .filter(|(_, u)| u.0 == SpOutcome::Nontrivial)
            .filter_map(|(_, u)| u.1);
        let sigma_nt: Vec<f64> = sigma_nt.collect();
        let mean_sigma = (!sigma_nt.is_empty()).then(|| mean(sigma_nt.iter().copied()));
        let (triv, nontriv) = (count(SpOutcome::Trivial), count(SpOutcome::Nontrivial));
        writeln!(cell_csv, "{c},{triv},{nontriv},{colorable},{}", opt(mean_sigma)).unwrap();
        cells.push(json!({
            "c": c,
            "seeds": seeds.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            "trivial_fraction": triv,
            "nontrivial_fraction": nontriv,
            "colorable_fraction": colorable,
            "mean_complexity_nontrivial": mean_sigma,
            "flags": flags,
        }));
    }
    let b = bracket(&cfg.grid, &fractions);
    let c_s = table_lookup(q, cfg.ensemble).ok().and_then(|r| r.c_s.map(|t| t.value));
    let summary = json!({
        "bracket": b.map(|(lo, hi)| [lo, hi]),
        "table_c_s": c_s,
        "contains_table_c_s": match (b, c_s) {
            (Some((lo, hi)), Some(cs)) => Some(lo <= cs && cs <= hi),
            _ => None,
        },
    });
    Ok((cells, vec![table("sp_bracket", rows), table("sp_bracket_cells", cell_csv)], summary))
}

fn decimate(cfg: &ExperimentConfig) -> Result<Produced, BenchError> {
    let q = cfg.q;
    let policy = cfg.decimation;
    let units = per_unit(cfg, |c, s| {
        let seed = unit_seed(c, s);
        let g = make_graph(cfg, c, seed)?;
        let r = match policy.guide {
            Guide::Bp => decimate_bp(&g, q, &policy, mix_seed(seed, 3)),
            Guide::Sp => decimate_sp(&g, q, &policy, mix_seed(seed, 3)),
        };
        r.map_err(|e| BenchError::Config(e.to_string()))
    })?;
    let mut rows = String::from("c,seed,solved,rounds,restarts,residual_method,nonconverged_rounds\n");
    let mut cell_csv = String::from("c,success_rate\n");
    let mut cells = Vec::new();
    for (c, seeds) in &units {
        for (s, r) in seeds {
            let method = serde_json::to_value(r.residual_method).unwrap();
            writeln!(
                rows,
                "{c},{s},{},{},{},{},{}",
                r.solved,
                r.rounds,
                r.restarts,
                method.as_str().unwrap(),
                r.nonconverged_rounds
            )
            .unwrap();
        }
        let rate = seeds.iter().filter(|(_, r)| r.solved).count() as f64 / seeds.len() as f64;
        writeln!(cell_csv, "{c},{rate}").unwrap();
        cells.push(json!({
            "c": c,
            "seeds": seeds.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
            "success_rate": rate,
            "reports": seeds.iter().map(|(_, r)| r).collect::<Vec<_>>(),
            "flags": Vec::<String>::new(),
        }));
    }
    Ok((cells, vec![table("decimate", rows), table("decimate_cells", cell_csv)], Value::Null))
}
