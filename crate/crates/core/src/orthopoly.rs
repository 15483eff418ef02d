//! Recurrence coefficients, orthogonal and secondary polynomials, Gauss rules.
//!
//! Conventions: monic `π_{n+1} = (x - α_n) π_n - β_n π_{n-1}` with
//! `β_0 = C_0`, and orthonormal `P_n` with positive leading coefficient,
//! `√β_{n+1} P_{n+1} = (x - α_n) P_n - √β_n P_{n-1}`, `P_0 = 1/√β_0`.

use alloc::vec::Vec;

use crate::eigen::tridiagonal_eigen;
use crate::error::{Error, Result};
use crate::math::{abs, sqrt, Sum};
use crate::measures::{Measure, MeasureFamily};
use crate::quad::Resolution;

/// Default (and maximum) number of coefficients computed numerically.
pub const MAX_COEFFICIENTS: usize = 200;

/// Recurrence coefficients `α_0..α_{N-1}`, `β_0..β_{N-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Hull `[a, b]` of the measure the coefficients came from.
    pub support: (f64, f64),
}

/// Generic discretized orthogonalization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecurrenceMethod {
    /// Closed forms for tagged families, Stieltjes procedure otherwise.
    Auto,
    Stieltjes,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecurrenceOptions {
    pub method: RecurrenceMethod,
    /// Relative change between refinements regarded as converged.
    pub tol: f64,
    /// Relative change still accepted after the last refinement.
    pub accept: f64,
    pub max_refinements: usize,
}

impl Default for RecurrenceOptions {
    fn default() -> Self {
        RecurrenceOptions { method: RecurrenceMethod::Auto, tol: 1e-12, accept: 1e-10, max_refinements: 5 }
    }
}

impl RecurrenceOptions {
    /// Skips the closed-form fast paths.
    pub fn generic() -> Self {
        RecurrenceOptions { method: RecurrenceMethod::Stieltjes, ..Default::default() }
    }
}

/// Gauss quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = Sum::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s.add(w * f(*x));
        }
        s.value()
    }
}

impl RecurrenceCoefficients {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, support: (f64, f64)) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.is_empty() {
            return Err(Error::DomainError("alpha and beta must be nonempty and of equal length"));
        }
        if beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::DomainError("beta must be positive and coefficients finite"));
        }
        Ok(RecurrenceCoefficients { alpha, beta, support })
    }

    /// Number of coefficient pairs.
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            return Err(Error::IndexOutOfRange { index: n, available: self.len() });
        }
        Ok(())
    }

    /// Monic `π_n(x)`.
    pub fn eval_monic(&self, n: usize, x: f64) -> Result<f64> {
        self.check(n)?;
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..n {
            let next = (x - self.alpha[k]) * cur - if k > 0 { self.beta[k] * prev } else { 0.0 };
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Orthonormal `P_n(x)`.
    pub fn eval_orthonormal(&self, n: usize, x: f64) -> Result<f64> {
        Ok(self.eval_pq(n, x)?.0)
    }

    /// Secondary polynomial `Q_n(x) = ∫ (P_n(t) - P_n(x)) / (t - x) dμ(t)`.
    pub fn eval_secondary(&self, n: usize, x: f64) -> Result<f64> {
        Ok(self.eval_pq(n, x)?.1)
    }

    /// `(P_n(x), Q_n(x))` from one pass of the shared recurrence.
    pub fn eval_pq(&self, n: usize, x: f64) -> Result<(f64, f64)> {
        self.check(n)?;
        let b0 = self.beta[0];
        let (mut p_prev, mut p) = (0.0, 1.0 / sqrt(b0));
        let (mut q_prev, mut q) = (0.0, 0.0);
        for k in 0..n {
            let t = sqrt(self.beta[k + 1]);
            let tm = if k > 0 { sqrt(self.beta[k]) } else { 0.0 };
            let p_next = ((x - self.alpha[k]) * p - tm * p_prev) / t;
            let q_next = if k == 0 { sqrt(b0) / t } else { ((x - self.alpha[k]) * q - tm * q_prev) / t };
            p_prev = p;
            p = p_next;
            q_prev = q;
            q = q_next;
        }
        Ok((p, q))
    }

    /// N-point Gauss rule from the leading Jacobi block (Golub-Welsch).
    pub fn gauss_rule(&self, n: usize) -> Result<GaussRule> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange { index: n, available: self.len() });
        }
        let off: Vec<f64> = (1..n).map(|k| sqrt(self.beta[k])).collect();
        let (nodes, first) = tridiagonal_eigen(&self.alpha[..n], &off)?;
        let weights = first.iter().map(|z| self.beta[0] * z * z).collect();
        Ok(GaussRule { nodes, weights })
    }

    /// Coefficients with the first `offset` pairs removed; the `β_0` slot
    /// then holds `β_offset`.
    pub fn shifted(&self, offset: usize) -> Result<Self> {
        self.check(offset)?;
        Ok(RecurrenceCoefficients {
            alpha: self.alpha[offset..].to_vec(),
            beta: self.beta[offset..].to_vec(),
            support: self.support,
        })
    }

    /// Leading `n` pairs.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange { index: n, available: self.len() });
        }
        Ok(RecurrenceCoefficients {
            alpha: self.alpha[..n].to_vec(),
            beta: self.beta[..n].to_vec(),
            support: self.support,
        })
    }

    /// Coefficient bounds for bounded support: `a < α_n < b` and
    /// `0 < β_n <= max(a², b²)` for `n >= 1`.
    pub fn satisfies_bounds(&self) -> bool {
        let (a, b) = self.support;
        if !b.is_finite() {
            return self.beta.iter().all(|&x| x > 0.0);
        }
        let slack = 1e-12 * (b - a);
        let bmax = (a * a).max(b * b) * (1.0 + 1e-12);
        self.alpha.iter().all(|&x| x > a - slack && x < b + slack)
            && self.beta.iter().skip(1).all(|&x| x > 0.0 && x <= bmax)
            && self.beta[0] > 0.0
    }
}

/// First `n` recurrence coefficient pairs of `m` with default options.
pub fn recurrence_coefficients(m: &Measure, n: usize) -> Result<RecurrenceCoefficients> {
    recurrence_coefficients_with(m, n, RecurrenceOptions::default())
}

pub fn recurrence_coefficients_with(
    m: &Measure,
    n: usize,
    opts: RecurrenceOptions,
) -> Result<RecurrenceCoefficients> {
    if n == 0 {
        return Err(Error::DomainError("need at least one coefficient pair"));
    }
    if opts.method == RecurrenceMethod::Auto {
        if let Some(f) = m.family() {
            return Ok(family_coefficients(f, n, m.hull()));
        }
    }
    if n > MAX_COEFFICIENTS {
        return Err(Error::IllConditioned("requested more coefficients than the numerical cap"));
    }
    let method = match opts.method {
        RecurrenceMethod::Lanczos => RecurrenceMethod::Lanczos,
        _ => RecurrenceMethod::Stieltjes,
    };
    let mut res = Resolution { panels: (n as u32 / 2).max(4), ..Resolution::default() };
    let mut prev = discrete_coefficients(m, n, res, method)?;
    let mut last_diff = f64::INFINITY;
    for _ in 0..opts.max_refinements {
        res = res.refined();
        let cur = discrete_coefficients(m, n, res, method)?;
        last_diff = relative_change(&prev, &cur, m);
        prev = cur;
        if last_diff <= opts.tol {
            break;
        }
    }
    if last_diff > opts.accept {
        return Err(Error::IllConditioned("recurrence coefficients did not stabilize under refinement"));
    }
    if m.is_bounded() && !prev.satisfies_bounds() {
        return Err(Error::IllConditioned("recurrence coefficients violate the support bounds"));
    }
    Ok(prev)
}

fn relative_change(a: &RecurrenceCoefficients, b: &RecurrenceCoefficients, m: &Measure) -> f64 {
    let (lo, hi) = m.hull();
    let scale = if hi.is_finite() { hi - lo } else { 0.0 };
    let mut worst: f64 = 0.0;
    for k in 0..a.len() {
        let da = abs(a.alpha[k] - b.alpha[k]) / abs(b.alpha[k]).max(scale).max(1e-300);
        let db = abs(a.beta[k] - b.beta[k]) / abs(b.beta[k]);
        worst = worst.max(da).max(db);
    }
    worst
}

fn discrete_coefficients(
    m: &Measure,
    n: usize,
    res: Resolution,
    method: RecurrenceMethod,
) -> Result<RecurrenceCoefficients> {
    let (x, w) = m.discretize(2 * n, res)?;
    if x.len() < n {
        return Err(Error::IllConditioned("discretization has fewer nodes than coefficients"));
    }
    let (alpha, beta) = match method {
        RecurrenceMethod::Lanczos => lanczos(&x, &w, n),
        _ => stieltjes_procedure(&x, &w, n),
    };
    RecurrenceCoefficients::new(alpha, beta, m.hull())
        .map_err(|_| Error::IllConditioned("discretized orthogonalization broke down"))
}

/// Stieltjes procedure on a discrete measure, carried with normalized vectors.
pub(crate) fn stieltjes_procedure(x: &[f64], w: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    let mut mass = Sum::default();
    for wi in w {
        mass.add(*wi);
    }
    let b0 = mass.value();
    beta.push(b0);
    let mut q_prev = alloc::vec![0.0; x.len()];
    let mut q = alloc::vec![1.0 / sqrt(b0); x.len()];
    for k in 0..n {
        let mut s = Sum::default();
        for i in 0..x.len() {
            s.add(w[i] * x[i] * q[i] * q[i]);
        }
        let a = s.value();
        alpha.push(a);
        if k + 1 == n {
            break;
        }
        let tb = if k > 0 { sqrt(beta[k]) } else { 0.0 };
        let mut r: Vec<f64> = (0..x.len()).map(|i| (x[i] - a) * q[i] - tb * q_prev[i]).collect();
        // One pass of reorthogonalization against the two previous vectors.
        let mut c0 = Sum::default();
        let mut c1 = Sum::default();
        for i in 0..x.len() {
            c0.add(w[i] * r[i] * q[i]);
            c1.add(w[i] * r[i] * q_prev[i]);
        }
        let (c0, c1) = (c0.value(), c1.value());
        for i in 0..x.len() {
            r[i] -= c0 * q[i] + c1 * q_prev[i];
        }
        let mut nn = Sum::default();
        for i in 0..x.len() {
            nn.add(w[i] * r[i] * r[i]);
        }
        let b = nn.value();
        beta.push(b);
        let sb = sqrt(b);
        for i in 0..x.len() {
            q_prev[i] = q[i];
            q[i] = r[i] / sb;
        }
    }
    (alpha, beta)
}

/// Rutishauser-Kahan-Pal-Walker Lanczos on a discrete measure.
pub(crate) fn lanczos(x: &[f64], w: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let ncap = x.len();
    let mut p0: Vec<f64> = x.to_vec();
    let mut p1 = alloc::vec![0.0; ncap];
    p1[0] = w[0];
    for k in 0..ncap - 1 {
        let mut pn = w[k + 1];
        let mut gam = 1.0;
        let mut sig = 0.0;
        let mut t = 0.0;
        let xlam = x[k + 1];
        for i in 0..=k + 1 {
            let rho = p1[i] + pn;
            let tmp = gam * rho;
            let tsig = sig;
            if rho <= 0.0 {
                gam = 1.0;
                sig = 0.0;
            } else {
                gam = p1[i] / rho;
                sig = pn / rho;
            }
            let tk = sig * (p0[i] - xlam) - gam * t;
            p0[i] -= tk - t;
            t = tk;
            pn = if sig <= 0.0 { tsig * p1[i] } else { t * t / sig };
            p1[i] = tmp;
        }
    }
    (p0[..n].to_vec(), p1[..n].to_vec())
}

/// Closed-form coefficients of the tagged families.
pub(crate) fn family_coefficients(f: MeasureFamily, n: usize, support: (f64, f64)) -> RecurrenceCoefficients {
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    beta.push(f.mass());
    match f {
        MeasureFamily::PowerLaw { s, upper, .. } => {
            for k in 0..n {
                let kf = k as f64;
                let a = if k == 0 {
                    0.5 * upper * (1.0 + s / (s + 2.0))
                } else {
                    0.5 * upper * (1.0 + s * s / ((s + 2.0 * kf) * (s + 2.0 * kf + 2.0)))
                };
                alpha.push(a);
                if k + 1 < n {
                    let num = (kf + 1.0) * (kf + 1.0) * (kf + s + 1.0) * (kf + s + 1.0);
                    let d = s + 2.0 * kf + 2.0;
                    let den = d * d * (s + 2.0 * kf + 3.0) * (s + 2.0 * kf + 1.0);
                    beta.push(upper * upper * num / den);
                }
            }
        }
        MeasureFamily::Laguerre { s, scale, .. } => {
            for k in 0..n {
                let kf = k as f64;
                alpha.push(scale * (2.0 * kf + 1.0 + s));
                if k + 1 < n {
                    beta.push(scale * scale * (kf + 1.0) * (kf + s + 1.0));
                }
            }
        }
    }
    RecurrenceCoefficients { alpha, beta, support }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Interval;
    use approx::assert_relative_eq;

    fn semicircle_rc(n: usize) -> RecurrenceCoefficients {
        recurrence_coefficients(&Measure::semicircle(-1.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn semicircle_coefficients() {
        let rc = semicircle_rc(12);
        assert_relative_eq!(rc.beta[0], 1.0, max_relative = 1e-12);
        for k in 0..12 {
            assert!(rc.alpha[k].abs() < 1e-12);
            if k > 0 {
                assert_relative_eq!(rc.beta[k], 0.25, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let rc = recurrence_coefficients(&Measure::power_law(1.0, 1.0, 1.0).unwrap(), 3).unwrap();
        assert_relative_eq!(rc.alpha[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(rc.beta[1], 1.0 / 18.0, max_relative = 1e-15);
        let rc = recurrence_coefficients(&Measure::laguerre(1.0, 1.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(rc.alpha[..2], [2.0, 4.0]);
        assert_eq!(rc.beta[1], 2.0);
    }

    #[test]
    fn generic_matches_closed_form() {
        let m = Measure::power_law(1.0, 0.5, 1.0).unwrap();
        let exact = recurrence_coefficients(&m, 20).unwrap();
        for method in [RecurrenceMethod::Stieltjes, RecurrenceMethod::Lanczos] {
            let opts = RecurrenceOptions { method, ..Default::default() };
            let num = recurrence_coefficients_with(&m, 20, opts).unwrap();
            for k in 0..20 {
                assert_relative_eq!(num.alpha[k], exact.alpha[k], max_relative = 1e-11);
                assert_relative_eq!(num.beta[k], exact.beta[k], max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn polynomial_examples() {
        let rc = semicircle_rc(4);
        assert_eq!(rc.eval_monic(0, 0.3).unwrap(), 1.0);
        assert_relative_eq!(rc.eval_monic(1, 0.3).unwrap(), 0.3, epsilon = 1e-12);
        assert_relative_eq!(rc.eval_monic(2, 0.3).unwrap(), 0.09 - 0.25, epsilon = 1e-12);
        assert_relative_eq!(rc.eval_orthonormal(0, 0.3).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rc.eval_orthonormal(1, 0.3).unwrap(), 0.6, epsilon = 1e-11);
        assert_eq!(rc.eval_secondary(0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(rc.eval_secondary(1, 0.7).unwrap(), 2.0, epsilon = 1e-11);
        assert!(rc.eval_secondary(2, 0.0).unwrap().abs() < 1e-11);
        assert!(matches!(rc.eval_monic(4, 0.0), Err(Error::IndexOutOfRange { .. })));
        let lin = recurrence_coefficients(&Measure::power_law(1.0, 1.0, 1.0).unwrap(), 3).unwrap();
        assert_relative_eq!(lin.eval_monic(1, 0.9).unwrap(), 0.9 - 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_is_scaled_monic() {
        let m = Measure::power_law(2.0, 1.0, 1.0).unwrap();
        let rc = recurrence_coefficients(&m, 8).unwrap();
        for &x in &[0.1, 0.45, 0.8] {
            let mut prod = 1.0;
            for n in 0..8 {
                prod *= rc.beta[n];
                let expect = rc.eval_monic(n, x).unwrap() / prod.sqrt();
                assert_relative_eq!(rc.eval_orthonormal(n, x).unwrap(), expect, max_relative = 1e-12);
            }
        }
    }

    /// Q_n from the recurrence against the defining integral, by Gauss quadrature.
    #[test]
    fn secondary_recurrence_matches_defining_integral() {
        let measures = [
            Measure::power_law(1.0, 1.0, 1.0).unwrap(),
            Measure::laguerre(1.0, 0.5, 1.0).unwrap(),
        ];
        for m in &measures {
            let rc = recurrence_coefficients(m, 30).unwrap();
            let g = rc.gauss_rule(20).unwrap();
            for n in 0..=6 {
                for &x in &[0.2, 0.55, 0.9] {
                    let pn = rc.eval_orthonormal(n, x).unwrap();
                    let direct = g.integrate(|t| {
                        if t == x { 0.0 } else { (rc.eval_orthonormal(n, t).unwrap() - pn) / (t - x) }
                    });
                    let rec = rc.eval_secondary(n, x).unwrap();
                    assert_relative_eq!(rec, direct, max_relative = 1e-10, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gauss_rule_examples() {
        let g = semicircle_rc(3).gauss_rule(1).unwrap();
        assert!(g.nodes[0].abs() < 1e-12);
        assert_relative_eq!(g.weights[0], 1.0, max_relative = 1e-12);
        let lin = Measure::new(|x| x, &[Interval::new(0.0, 1.0).unwrap()]).unwrap();
        let rc = recurrence_coefficients(&lin, 12).unwrap();
        let g = rc.gauss_rule(1).unwrap();
        assert_relative_eq!(g.nodes[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.weights[0], 0.5, max_relative = 1e-12);
        let g = rc.gauss_rule(6).unwrap();
        for k in 0..12 {
            let exact = 1.0 / (k as f64 + 2.0);
            assert_relative_eq!(g.integrate(|x| x.powi(k)), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn shift_and_truncate() {
        let rc = recurrence_coefficients(&Measure::power_law(1.0, 1.0, 1.0).unwrap(), 5).unwrap();
        let v = rc.shifted(1).unwrap();
        assert_relative_eq!(v.alpha[0], 8.0 / 15.0, max_relative = 1e-15);
        assert_eq!(v.beta[0], rc.beta[1]);
        assert_eq!(rc.shifted(0).unwrap(), rc);
        assert!(rc.shifted(5).is_err());
        assert_eq!(rc.truncated(2).unwrap().len(), 2);
    }
}
