//! Reference threshold connectivities for random-graph coloring and their
//! large-q asymptotic forms.
//!
//! Values are kept exactly as printed, e.g. `8.353(3)` (value 8.353 with an
//! uncertainty of 3 in the last digit), `5+` (just above 5) and `-` (no
//! value).

use serde::Serialize;
use thiserror::Error;

use crate::graph::Ensemble;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("q = {0} is not tabulated (3 <= q <= 10)")]
    NotTabulated(usize),
    #[error("asymptotic formulas need q >= 3, got {0}")]
    TooFewColors(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    /// Absolute uncertainty, when one is printed.
    pub uncertainty: Option<f64>,
    /// The threshold lies strictly above `value`.
    pub strictly_above: bool,
    /// The entry as printed.
    pub printed: &'static str,
}

impl Threshold {
    /// Parses `value`, `value(digits)` or `value+`.
    fn parse(printed: &'static str) -> Option<Threshold> {
        if printed == "-" {
            return None;
        }
        if let Some(base) = printed.strip_suffix('+') {
            return Some(Threshold {
                value: base.parse().expect("numeric threshold"),
                uncertainty: None,
                strictly_above: true,
                printed,
            });
        }
        let (number, uncertainty) = match printed.split_once('(') {
            Some((number, rest)) => {
                let digits = rest.trim_end_matches(')');
                let decimals = number.split_once('.').map_or(0, |(_, f)| f.len());
                let unit = 10f64.powi(-(decimals as i32));
                (number, Some(digits.parse::<f64>().expect("uncertainty digits") * unit))
            }
            None => (printed, None),
        };
        Some(Threshold {
            value: number.parse().expect("numeric threshold"),
            uncertainty,
            strictly_above: false,
            printed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub q: usize,
    pub ensemble: Ensemble,
    /// Clustering (dynamical) threshold.
    pub c_d: Option<Threshold>,
    /// Rigidity (freezing) threshold.
    pub c_r: Option<Threshold>,
    /// Condensation threshold.
    pub c_c: Option<Threshold>,
    /// COL/UNCOL threshold.
    pub c_s: Option<Threshold>,
}

/// Printed table rows `[q, c_d, c_r, c_c, c_s]`, regular ensemble.
pub const REGULAR_TABLE: [[&str; 5]; 8] = [
    ["3", "5+", "-", "6", "6"],
    ["4", "9", "-", "10", "10"],
    ["5", "14", "14", "14", "15"],
    ["6", "18", "19", "19", "20"],
    ["7", "23", "-", "25", "25"],
    ["8", "29", "30", "31", "31"],
    ["9", "34", "36", "37", "37"],
    ["10", "39", "42", "43", "44"],
];

/// Printed table rows `[q, c_d, c_r, c_c, c_s]`, Erdős–Rényi ensemble.
pub const ERDOS_RENYI_TABLE: [[&str; 5]; 8] = [
    ["3", "4", "4.66(1)", "4", "4.687(2)"],
    ["4", "8.353(3)", "8.83(2)", "8.46(1)", "8.901(2)"],
    ["5", "12.837(3)", "13.55(2)", "13.23(1)", "13.669(2)"],
    ["6", "17.645(5)", "18.68(2)", "18.44(1)", "18.880(2)"],
    ["7", "22.705(5)", "24.16(2)", "24.01(1)", "24.455(5)"],
    ["8", "27.95(5)", "29.93(3)", "29.90(1)", "30.335(5)"],
    ["9", "33.45(5)", "35.658", "36.08(5)", "36.490(5)"],
    ["10", "39.0(1)", "41.508", "42.50(5)", "42.93(1)"],
];

pub fn table_lookup(q: usize, ensemble: Ensemble) -> Result<ThresholdRow, ThresholdError> {
    if !(3..=10).contains(&q) {
        return Err(ThresholdError::NotTabulated(q));
    }
    let table = match ensemble {
        Ensemble::Regular => &REGULAR_TABLE,
        Ensemble::ErdosRenyi => &ERDOS_RENYI_TABLE,
    };
    let row = &table[q - 3];
    Ok(ThresholdRow {
        q,
        ensemble,
        c_d: Threshold::parse(row[1]),
        c_r: Threshold::parse(row[2]),
        c_c: Threshold::parse(row[3]),
        c_s: Threshold::parse(row[4]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticThresholds {
    pub c_r: f64,
    pub c_c: f64,
    pub c_s: f64,
    /// The neglected o(1) corrections are large at this q.
    pub low_q: bool,
}

/// Below this q the asymptotic forms are flagged as unreliable.
pub const LOW_Q_LIMIT: usize = 5;

/// Leading large-q behavior, natural logarithms, o(1) terms dropped:
/// `c_r = q(log q + log log q + 1)`, `c_c = 2q log q - log q - 2 log 2`,
/// `c_s = 2q log q - log q - 1`.
pub fn asymptotic(q: usize) -> Result<AsymptoticThresholds, ThresholdError> {
    if q < 3 {
        return Err(ThresholdError::TooFewColors(q));
    }
    let qf = q as f64;
    let lq = qf.ln();
    Ok(AsymptoticThresholds {
        c_r: qf * (lq + lq.ln() + 1.0),
        c_c: 2.0 * qf * lq - lq - 2.0 * 2f64.ln(),
        c_s: 2.0 * qf * lq - lq - 1.0,
        low_q: q < LOW_Q_LIMIT,
    })
}
