//! File formats: chain CSV, residual CSV and the JSON report.

use std::fmt::Write as _;

use chaincast_core::{ChainCoefficients, Interval};
use serde::Serialize;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn support_text(support: &[Interval]) -> String {
    support.iter().map(|i| format!("[{},{}]", num(i.lo), num(i.hi))).collect::<Vec<_>>().join("U")
}

pub fn chain_csv(chain: &ChainCoefficients, support: &[Interval]) -> String {
    let rc = &chain.rc;
    let mut s = String::new();
    let _ = writeln!(s, "# E5={},q={},support={}", num(chain.e5), num(chain.q), support_text(support));
    s.push_str("n,alpha,beta,E1,E2,E3,E4\n");
    for n in 0..chain.sites() {
        let _ = writeln!(
            s,
            "{n},{},{},{},{},{},{}",
            num(rc.alpha[n]),
            num(rc.beta[n]),
            num(chain.e1[n]),
            num(chain.e2[n]),
            num(chain.e3[n]),
            num(chain.e4[n])
        );
    }
    s
}

/// A chain CSV read back.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTable {
    pub e5: f64,
    pub q: f64,
    /// `[alpha, beta, E1, E2, E3, E4]` per site.
    pub rows: Vec<[f64; 6]>,
}

pub fn read_chain_csv(text: &str) -> Result<ChainTable, String> {
    let mut lines = text.lines();
    let meta = lines.next().and_then(|l| l.strip_prefix("# ")).ok_or("missing metadata line")?;
    let field = |key: &str| -> Result<f64, String> {
        let start = meta.find(key).ok_or_else(|| format!("missing {key}"))? + key.len();
        let rest = &meta[start..];
        let end = rest.find(',').unwrap_or(rest.len());
        rest[..end].parse().map_err(|e| format!("{key} {e}"))
    };
    let (e5, q) = (field("E5=")?, field("q=")?);
    if lines.next() != Some("n,alpha,beta,E1,E2,E3,E4") {
        return Err("unexpected header".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 || cols[0].parse::<usize>() != Ok(i) {
            return Err(format!("bad row {i}"));
        }
        let mut r = [0.0; 6];
        for (k, c) in cols[1..].iter().enumerate() {
            r[k] = c.parse().map_err(|e| format!("row {i}: {e}"))?;
        }
        rows.push(r);
    }
    Ok(ChainTable { e5, q, rows })
}

/// `omega,J<n>...` over a grid; `columns[k][i]` is order `orders[k]` at `omega[i]`.
pub fn residual_csv(omega: &[f64], orders: &[usize], columns: &[Vec<f64>]) -> String {
    let mut s = String::from("omega");
    for n in orders {
        let _ = write!(s, ",J{n}");
    }
    s.push('\n');
    for (i, w) in omega.iter().enumerate() {
        s.push_str(&num(*w));
        for c in columns {
            s.push(',');
            s.push_str(&num(c[i]));
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Tool {
    fn default() -> Self {
        Tool { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSection {
    pub orders: Vec<usize>,
    pub grid_range: [f64; 2],
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub mapping_q: f64,
    pub sites: usize,
    pub support: Vec<[f64; 2]>,
    pub e5: f64,
    pub szego: String,
    pub alpha_limit: Option<f64>,
    pub beta_limit: Option<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub alpha_deviation: Vec<f64>,
    pub beta_deviation: Vec<f64>,
    pub alpha_over_sqrt_beta: Vec<f64>,
    pub terminal_moment_gap: Vec<Vec<f64>>,
    pub residual: Option<ResidualSection>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
