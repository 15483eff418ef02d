//! Spectral densities built from a configuration.

use std::path::Path;
use std::sync::Arc;

use chaincast_core::{Interval, SdFamily, SpectralDensity};

use crate::config::{DensitySpec, Piece};

/// Tabulated samples with monotone cubic (Fritsch-Carlson) slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub omega: Vec<f64>,
    pub value: Vec<f64>,
    slope: Vec<f64>,
}

/// Knots beyond this count are not passed to quadrature.
const MAX_KNOT_BREAKS: usize = 256;

impl Table {
    pub fn new(omega: Vec<f64>, value: Vec<f64>) -> Result<Self, String> {
        if omega.len() != value.len() || omega.len() < 2 {
            return Err("need at least two samples".into());
        }
        for i in 0..omega.len() {
            let (w, j) = (omega[i], value[i]);
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("row {}: omega must be finite and >= 0", i + 1));
            }
            if !(j.is_finite() && j >= 0.0) {
                return Err(format!("row {}: J = {j} must be finite and >= 0", i + 1));
            }
            if i > 0 && w <= omega[i - 1] {
                return Err(format!("row {}: omega must be strictly increasing", i + 1));
            }
        }
        let slope = pchip_slopes(&omega, &value);
        Ok(Table { omega, value, slope })
    }

    pub fn eval(&self, w: f64) -> f64 {
        let x = &self.omega;
        let n = x.len();
        if !(w >= x[0] && w <= x[n - 1]) {
            return 0.0;
        }
        let i = match x.partition_point(|&v| v <= w) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = x[i + 1] - x[i];
        let t = (w - x[i]) / h;
        let (y0, y1) = (self.value[i], self.value[i + 1]);
        let (d0, d1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        v.max(0.0)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Reads `omega,J` rows; `#` lines and a non-numeric header row are skipped.
pub fn read_table(path: &Path) -> Result<Table, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let (mut omega, mut value) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        if rec.len() != 2 {
            return Err(format!("row {}: expected two columns", i + 1));
        }
        let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
        match parsed {
            (Ok(w), Ok(j)) => {
                omega.push(w);
                value.push(j);
            }
            _ if i == 0 => continue,
            _ => return Err(format!("row {}: not a number", i + 1)),
        }
    }
    Table::new(omega, value)
}

pub fn horner(c: &[f64], w: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * w + v)
}

/// The spectral density a validated spec describes.
pub fn build(spec: &DensitySpec, table: Option<&Table>) -> chaincast_core::Result<SpectralDensity> {
    match spec {
        DensitySpec::PowerLaw { s, alpha, omega_c } => SpectralDensity::power_law(*s, *alpha, *omega_c),
        DensitySpec::PowerLawExpCutoff { s, alpha, omega_c } => {
            SpectralDensity::power_law_exp_cutoff(*s, *alpha, *omega_c)
        }
        DensitySpec::Tabulated { .. } => {
            let t = table.expect("tabulated spec is validated together with its table").clone();
            let support = [Interval::new(t.omega[0], *t.omega.last().unwrap())?];
            let knots: Vec<f64> =
                if t.omega.len() <= MAX_KNOT_BREAKS { t.omega[1..t.omega.len() - 1].to_vec() } else { Vec::new() };
            Ok(SpectralDensity::from_arc(Arc::new(move |w| t.eval(w)), &support, SdFamily::Tabulated)?
                .with_knots(&knots))
        }
        DensitySpec::Piecewise { intervals } => piecewise(intervals),
    }
}

fn piecewise(pieces: &[Piece]) -> chaincast_core::Result<SpectralDensity> {
    let support: Vec<Interval> = pieces.iter().map(|p| Interval::new(p.lo, p.hi)).collect::<Result<_, _>>()?;
    let owned: Vec<Piece> = pieces.to_vec();
    let f = move |w: f64| {
        owned
            .iter()
            .find(|p| w >= p.lo && w <= p.hi)
            .map(|p| horner(&p.coefficients, w).max(0.0))
            .unwrap_or(0.0)
    };
    let joints: Vec<f64> = pieces.windows(2).filter(|p| p[0].hi == p[1].lo).map(|p| p[0].hi).collect();
    Ok(SpectralDensity::new(f, &support, SdFamily::Custom)?.with_breakpoints(&joints))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pchip_reproduces_linear_data_and_stays_monotone() {
        let t = Table::new(vec![0.0, 1.0, 2.0, 4.0], vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        for i in 0..=40 {
            let w = i as f64 / 10.0;
            assert!((t.eval(w) - w).abs() < 1e-14);
        }
        let step = Table::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut prev = 0.0;
        for i in 0..=300 {
            let v = step.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-15 && v <= 1.0);
            prev = v;
        }
    }

    #[test]
    fn table_rejects_bad_rows() {
        assert!(Table::new(vec![0.0, 1.0], vec![1.0, -0.1]).unwrap_err().contains("row 2"));
        assert!(Table::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap_err().contains("increasing"));
    }

    #[test]
    fn piecewise_is_zero_in_gaps() {
        let j = piecewise(&[
            Piece { lo: 0.0, hi: 1.0, coefficients: vec![1.0] },
            Piece { lo: 2.0, hi: 3.0, coefficients: vec![0.0, 1.0] },
        ])
        .unwrap();
        assert_eq!(j.eval(1.5), 0.0);
        assert_eq!(j.eval(2.5), 2.5);
        assert!(!j.is_gapless());
    }
}
