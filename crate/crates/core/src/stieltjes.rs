//! Stieltjes transform, reducer and related diagnostics.
//!
//! The reducer is `φ(x) = lim_{ε→0} [S(x - iε) + S(x + iε)]`, i.e. twice
//! the principal value of `∫ μ̄(t) / (x - t) dt`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{abs, atanh, exp, expint_ei, ln, pow, Sum, PI};
use crate::measures::{Measure, MeasureFamily};
use crate::orthopoly::RecurrenceCoefficients;
use crate::quad::{self, Resolution, DEFAULT_LAYERS};

/// Relative half-width of the excluded band at the support ends.
pub const GUARD: f64 = 1e-6;

/// Real poles closer than this (relative to the support width) are refused.
const POLE_GUARD: f64 = 1e-8;

/// Effective `[a, b]` used by quadrature; unbounded tails are truncated.
pub(crate) fn effective_hull(m: &Measure) -> Result<(f64, f64)> {
    let (a, _) = m.hull();
    Ok((a, m.effective_upper(0)?))
}

/// `S(z) = ∫ dμ(t) / (z - t)`.
pub fn stieltjes_transform(m: &Measure, z: Complex64) -> Result<Complex64> {
    let (a, b) = effective_hull(m)?;
    let guard = POLE_GUARD * (b - a);
    if z.im == 0.0 {
        let near = m.intervals().iter().any(|iv| z.re >= iv.lo - guard && z.re <= iv.hi + guard)
            || m.point_masses().iter().any(|&(x, _)| abs(z.re - x) <= guard);
        if near {
            return Err(Error::PoleTooClose);
        }
    }
    let res = Resolution::default();
    let w = m.weight_fn();
    let mut total = Complex64::new(0.0, 0.0);
    let last = m.intervals().len() - 1;
    for (k, iv) in m.intervals().iter().enumerate() {
        let hi = if k == last { b } else { iv.hi };
        let (lo, x0) = (iv.lo, z.re);
        let sub = m.clone_single(k, hi);
        if x0 > lo && x0 < hi && abs(z.im) < hi - lo {
            // Subtract the local value so the remaining integrand is regular.
            let w0 = w(x0);
            let depth = libm::ceil(ln((hi - lo) / abs(z.im)) / ln(5.0)) as u32 + 8;
            let depth = depth.clamp(DEFAULT_LAYERS, 200);
            let segs = sub.segments(0, res, &[(x0, depth)])?;
            let inner = quad::integrate_c(&segs, res.points, |t| {
                let d = w(t) - w0;
                if d == 0.0 { Complex64::new(0.0, 0.0) } else { d / (z - t) }
            });
            total += inner + w0 * ((z - lo).ln() - (z - hi).ln());
        } else {
            let segs = sub.segments(0, res, &[])?;
            total += quad::integrate_c(&segs, res.points, |t| {
                let v = w(t);
                if v == 0.0 { Complex64::new(0.0, 0.0) } else { v / (z - t) }
            });
        }
    }
    for &(x, mass) in m.point_masses() {
        total += mass / (z - x);
    }
    Ok(total)
}

/// `(1/π) Im S(x - iε)`, which tends to the density as `ε → 0`.
pub fn perron_invert(m: &Measure, x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::DomainError("ε must be positive"));
    }
    Ok(stieltjes_transform(m, Complex64::new(x, -eps))?.im / PI)
}

/// Zero of `S` in each gap of a gapped measure, found by bisection.
pub fn find_gap_zeros(m: &Measure) -> Result<Vec<f64>> {
    let (a, b) = effective_hull(m)?;
    let mut out = Vec::new();
    for (lo, hi) in m.gaps() {
        let g = 1e-7 * (b - a);
        let (mut l, mut r) = (lo + g, hi - g);
        let s = |x: f64| stieltjes_transform(m, Complex64::new(x, 0.0)).map(|v| v.re);
        let (fl, fr) = (s(l)?, s(r)?);
        if !(fl > 0.0 && fr < 0.0) {
            return Err(Error::BracketFailure);
        }
        for _ in 0..200 {
            let mid = 0.5 * (l + r);
            if mid <= l || mid >= r {
                break;
            }
            if s(mid)? > 0.0 {
                l = mid;
            } else {
                r = mid;
            }
        }
        out.push(0.5 * (l + r));
    }
    Ok(out)
}

/// Zero of `S` in the first gap; `None` for gapless measures.
pub fn find_gap_zero(m: &Measure) -> Result<Option<f64>> {
    Ok(find_gap_zeros(m)?.first().copied())
}

/// Evaluation scheme for the reducer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReducerMethod {
    /// `2μ̄(x) ln((x-a)/(b-x)) - 2∫ (μ̄(t) - μ̄(x)) / (t - x) dt`.
    Lipschitz,
    /// Integrated by parts; needs a C¹ weight.
    Derivative,
    /// Closed form for power-law and Laguerre weights with integer or
    /// half-integer exponent.
    Analytic,
}

#[derive(Clone, Copy, Debug)]
enum Closed {
    Integer { coeff: f64, k: u32, upper: f64 },
    HalfInteger { coeff: f64, m: u32, upper: f64 },
    Laguerre { coeff: f64, k: u32, scale: f64 },
}

impl Closed {
    fn of(m: &Measure) -> Option<Closed> {
        let near_int = |v: f64| abs(v - libm::round(v)) < 1e-14;
        match m.family()? {
            MeasureFamily::PowerLaw { coeff, s, upper } => {
                if s >= 0.0 && near_int(s) {
                    Some(Closed::Integer { coeff, k: libm::round(s) as u32, upper })
                } else if s >= -0.5 && near_int(s + 0.5) {
                    Some(Closed::HalfInteger { coeff, m: libm::round(s + 0.5) as u32, upper })
                } else {
                    None
                }
            }
            MeasureFamily::Laguerre { coeff, s, scale } if s >= 0.0 && near_int(s) => {
                Some(Closed::Laguerre { coeff, k: libm::round(s) as u32, scale })
            }
            MeasureFamily::Laguerre { .. } => None,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match *self {
            Closed::Integer { coeff, k, upper } => {
                let t = x / upper;
                let mut s = Sum::default();
                for j in 0..k {
                    s.add(-crate::math::powi(t, (k - 1 - j) as i32) / (j as f64 + 1.0));
                }
                s.add(crate::math::powi(t, k as i32) * ln(t / (1.0 - t)));
                2.0 * coeff * crate::math::powi(upper, k as i32) * s.value()
            }
            Closed::HalfInteger { coeff, m, upper } => {
                let r = libm::sqrt(x / upper);
                let mut s = Sum::default();
                for j in 0..m {
                    s.add(-crate::math::powi(r, (2 * (m - 1 - j)) as i32) / (2.0 * j as f64 + 1.0));
                }
                s.add(crate::math::powi(r, 2 * m as i32 - 1) * atanh(r));
                let sv = m as f64 - 0.5;
                4.0 * coeff * pow(upper, sv) * s.value()
            }
            Closed::Laguerre { coeff, k, scale } => {
                let t = x / scale;
                let mut s = Sum::default();
                s.add(crate::math::powi(t, k as i32) * exp(-t) * expint_ei(t));
                let mut fact = 1.0;
                // Σ_{j<k} (k-j-1)! t^j, accumulated from the top power down.
                for j in (0..k).rev() {
                    s.add(-fact * crate::math::powi(t, j as i32));
                    fact *= (k - j) as f64;
                }
                2.0 * coeff * crate::math::powi(scale, k as i32) * s.value()
            }
        }
    }
}

/// Reducer of a gapless measure.
#[derive(Clone, Debug)]
pub struct ReducerEvaluator {
    measure: Measure,
    method: ReducerMethod,
    closed: Option<Closed>,
    hull: (f64, f64),
}

impl ReducerEvaluator {
    pub fn new(m: &Measure, method: ReducerMethod) -> Result<Self> {
        if !m.is_gapless() {
            return Err(Error::GappedMeasure);
        }
        if !m.point_masses().is_empty() {
            return Err(Error::PointMasses);
        }
        let closed = if method == ReducerMethod::Analytic {
            Some(Closed::of(m).ok_or(Error::DomainError("no closed-form reducer for this weight"))?)
        } else {
            None
        };
        Ok(ReducerEvaluator { measure: m.clone(), method, closed, hull: effective_hull(m)? })
    }

    /// Closed form when available, Lipschitz form otherwise.
    pub fn auto(m: &Measure) -> Result<Self> {
        let method = if Closed::of(m).is_some() { ReducerMethod::Analytic } else { ReducerMethod::Lipschitz };
        Self::new(m, method)
    }

    pub fn method(&self) -> ReducerMethod {
        self.method
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// Evaluation band `[a + δ, b - δ]`, `δ = GUARD (b - a)`.
    pub fn band(&self) -> (f64, f64) {
        let (a, b) = self.hull;
        let d = GUARD * (b - a);
        let hi = if self.measure.is_bounded() { b - d } else { f64::INFINITY };
        (a + d, hi)
    }

    /// `φ(x)` inside the guard band.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.band();
        if !(x >= lo && x <= hi) {
            return Err(Error::EndpointEvaluation(x));
        }
        self.eval_interior(x)
    }

    /// `φ(x)` for any `x` strictly inside the hull; used by quadrature over
    /// derived densities, which needs values inside the guard band too.
    pub(crate) fn eval_interior(&self, x: f64) -> Result<f64> {
        match (self.method, self.closed) {
            (ReducerMethod::Analytic, Some(c)) => Ok(c.eval(x)),
            (ReducerMethod::Derivative, _) => self.derivative_form(x),
            _ => self.lipschitz_form(x),
        }
    }

    fn lipschitz_form(&self, x: f64) -> Result<f64> {
        let m = &self.measure;
        let (a, b) = self.hull;
        let w = m.weight_fn();
        let wx = w(x);
        let delta = GUARD * (b - a);
        let mut acc = Sum::default();
        if wx != 0.0 {
            acc.add(2.0 * wx * ln((x - a) / (b - x)));
        }
        let mut dwx: Option<f64> = None;
        let segs = m.segments(0, Resolution::default(), &[(x, 12)])?;
        let segs = clip_segments(segs, b);
        let mut slope = || *dwx.get_or_insert_with(|| m.weight_derivative(x));
        let mut inner = Sum::default();
        quad::for_each_node(&segs, Resolution::default().points, |t, qw| {
            let v = if abs(t - x) < delta { slope() } else { (w(t) - wx) / (t - x) };
            inner.add(qw * v);
        });
        acc.add(-2.0 * inner.value());
        Ok(acc.value())
    }

    fn derivative_form(&self, x: f64) -> Result<f64> {
        let m = &self.measure;
        let (a, b) = self.hull;
        let w = m.weight_fn();
        let len = b - a;
        let mut acc = Sum::default();
        let (wa, wb) = (w(a), w(b));
        if wa != 0.0 {
            acc.add(2.0 * wa * ln((x - a) / len));
        }
        if wb != 0.0 && b.is_finite() {
            acc.add(2.0 * wb * ln(len / (b - x)));
        }
        // `w'` is one power more singular than `w` at the ends.
        let extra = m
            .endpoint_exponents()
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .flatten()
            .filter(|&e| e > 0.0)
            .map(|e| quad::layers_for_exponent(e - 1.0).saturating_sub(quad::layers_for_exponent(e)))
            .max()
            .unwrap_or(0);
        let res = Resolution { extra_layers: extra, ..Resolution::default() };
        let mut segs = m.segments(0, res, &[(x, DEFAULT_LAYERS)])?;
        for s in &mut segs {
            for g in [&mut s.grade_lo, &mut s.grade_hi] {
                if g.exponent != 0.0 {
                    g.exponent -= 1.0;
                }
            }
        }
        let segs = clip_segments(segs, b);
        let dw = m.derivative_fn().cloned();
        let inner = quad::integrate(&segs, res.points, |t| {
            let d = match &dw {
                Some(f) => f(t),
                None => m.weight_derivative(t),
            };
            if d == 0.0 { 0.0 } else { d * ln(abs(t - x) / len) }
        });
        acc.add(2.0 * inner);
        Ok(acc.value())
    }
}

/// Trims segments at `b`; a tail cutoff for degree 0 is already `b`, so
/// this only matters when a caller's breaks extend the range.
fn clip_segments(mut segs: Vec<quad::Segment>, b: f64) -> Vec<quad::Segment> {
    segs.retain(|s| s.lo < b);
    if let Some(last) = segs.last_mut() {
        if last.hi > b {
            last.hi = b;
        }
    }
    segs
}

/// `φ(x)` with the default method choice.
pub fn reducer(m: &Measure, x: f64) -> Result<f64> {
    ReducerEvaluator::auto(m)?.eval(x)
}

/// `z^{2n+3} (S(z) - Q_{n+1}(z)/P_{n+1}(z))` for real `z` beyond the support.
///
/// Evaluated through the exact identity
/// `P_{n+1}(z) S(z) - Q_{n+1}(z) = z^{-(n+1)} ∫ P_{n+1}(t) t^{n+1} / (z - t) dμ(t)`,
/// which avoids the cancellation of the direct difference at large `z`.
pub fn pade_remainder_scaled(m: &Measure, rc: &RecurrenceCoefficients, n: usize, z: f64) -> Result<f64> {
    let (a, b) = effective_hull(m)?;
    if z > a - POLE_GUARD * (b - a) && z < b + POLE_GUARD * (b - a) {
        return Err(Error::PoleTooClose);
    }
    let k = n + 1;
    let pz = rc.eval_orthonormal(k, z)?;
    let integral = m.integrate(
        |t| {
            let p = rc.eval_orthonormal(k, t).unwrap_or(f64::NAN);
            p * crate::math::powi(t, k as i32) / (z - t)
        },
        2 * k,
    )?;
    Ok(crate::math::powi(z, (n + 2) as i32) / pz * integral)
}

/// Same quantity from the literal difference; loses digits quickly with `z`.
pub fn pade_remainder_direct(m: &Measure, rc: &RecurrenceCoefficients, n: usize, z: f64) -> Result<f64> {
    let s = stieltjes_transform(m, Complex64::new(z, 0.0))?.re;
    let (p, q) = rc.eval_pq(n + 1, z)?;
    Ok(crate::math::powi(z, (2 * n + 3) as i32) * (s - q / p))
}

impl Measure {
    /// Interval `k` alone, with its upper end replaced by `hi`.
    pub(crate) fn clone_single(&self, k: usize, hi: f64) -> Measure {
        let iv = self.intervals()[k];
        let (elo, ehi) = self.endpoint_exponents()[k];
        let ehi = if iv.is_bounded() { ehi } else { Some(0.0) };
        let hi = if iv.is_bounded() { iv.hi } else { hi };
        let w = self.weight_fn().clone();
        Measure::from_arc(w, &[crate::measures::Interval { lo: iv.lo, hi }])
            .expect("sub-interval of a valid support")
            .with_endpoint_exponents(0, elo, ehi)
            .with_breakpoints(self.breakpoints_in(iv.lo, hi).as_slice())
            .with_knots(self.knots_in(iv.lo, hi).as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Interval;
    use crate::orthopoly::recurrence_coefficients;
    use approx::assert_relative_eq;

    fn semicircle() -> Measure {
        Measure::semicircle(-1.0, 1.0).unwrap()
    }

    fn two_x() -> Measure {
        Measure::new(|x| 2.0 * x, &[Interval::new(0.0, 1.0).unwrap()])
            .unwrap()
            .with_endpoint_exponents(0, Some(1.0), Some(0.0))
    }

    #[test]
    fn transform_examples() {
        let s = stieltjes_transform(&semicircle(), Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(s.re, 2.0 * (2.0 - 3f64.sqrt()), max_relative = 1e-13);
        let s = stieltjes_transform(&two_x(), Complex64::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(s.re, 2.0 * (-1.0 + 2.0 * 2f64.ln()), max_relative = 1e-13);
        let far = stieltjes_transform(&semicircle(), Complex64::new(1e6, 0.0)).unwrap();
        assert_relative_eq!(far.re * 1e6, 1.0, max_relative = 1e-10);
        assert_eq!(
            stieltjes_transform(&semicircle(), Complex64::new(1.0, 0.0)),
            Err(Error::PoleTooClose)
        );
    }

    #[test]
    fn transform_matches_closed_form_near_the_cut() {
        // S(z) = 2(z - sqrt(z-1) sqrt(z+1)) for the normalized semicircle.
        let z = Complex64::new(0.3, -1e-6);
        let exact = 2.0 * (z - (z - 1.0).sqrt() * (z + 1.0).sqrt());
        let s = stieltjes_transform(&semicircle(), z).unwrap();
        assert!((s - exact).norm() < 1e-11, "{s} vs {exact}");
    }

    #[test]
    fn perron_examples() {
        let v = perron_invert(&semicircle(), 0.0, 1e-4).unwrap();
        assert!((v - 2.0 / PI).abs() < 1e-3);
        let v = perron_invert(&two_x(), 0.5, 1e-6).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
        let v = perron_invert(&two_x(), 1.5, 1e-8).unwrap();
        assert!(v.abs() < 1e-7);
    }

    #[test]
    fn reducer_examples() {
        for (method, tol) in [(ReducerMethod::Lipschitz, 1e-11), (ReducerMethod::Derivative, 1e-12)] {
            let r = ReducerEvaluator::new(&semicircle(), method).unwrap();
            for &x in &[-0.7, -0.1, 0.5, 0.93] {
                assert_relative_eq!(r.eval(x).unwrap(), 4.0 * x, epsilon = tol);
            }
        }
        let bump = Measure::new(|x| 30.0 * x * x * (1.0 - x) * (1.0 - x), &[Interval::new(0.0, 1.0).unwrap()])
            .unwrap()
            .with_derivative(|x| 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x))
            .with_endpoint_exponents(0, Some(2.0), Some(2.0));
        let l = ReducerEvaluator::new(&bump, ReducerMethod::Lipschitz).unwrap();
        let d = ReducerEvaluator::new(&bump, ReducerMethod::Derivative).unwrap();
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((l.eval(x).unwrap() - d.eval(x).unwrap()).abs() < 1e-10);
        }
        let flat = Measure::uniform(1.0, &[Interval::new(0.0, 1.0).unwrap()]).unwrap();
        assert!(reducer(&flat, 0.5).unwrap().abs() < 1e-13);
        let lin = Measure::power_law(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(reducer(&lin, 0.5).unwrap(), -2.0, max_relative = 1e-14);
        let t: f64 = 0.3;
        let exact = -2.0 * (1.0 + t * ((1.0 - t) / t).ln());
        for method in [ReducerMethod::Lipschitz, ReducerMethod::Derivative] {
            let r = ReducerEvaluator::new(&lin, method).unwrap();
            assert_relative_eq!(r.eval(t).unwrap(), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn reducer_closed_forms_agree_with_quadrature() {
        let cases = [
            Measure::power_law(0.7, 0.5, 1.0).unwrap(),
            Measure::power_law(1.3, 2.0, 2.0).unwrap(),
            Measure::power_law(1.0, 1.5, 1.0).unwrap(),
            Measure::laguerre(1.0, 1.0, 1.0).unwrap(),
            Measure::laguerre(0.5, 2.0, 2.0).unwrap(),
        ];
        for m in &cases {
            let exact = ReducerEvaluator::new(m, ReducerMethod::Analytic).unwrap();
            let lip = ReducerEvaluator::new(m, ReducerMethod::Lipschitz).unwrap();
            let (a, b) = (m.hull().0, m.effective_upper(0).unwrap().min(6.0));
            for i in 1..8 {
                let x = a + (b - a) * i as f64 / 8.0;
                let e = exact.eval(x).unwrap();
                let l = lip.eval(x).unwrap();
                assert!((e - l).abs() < 1e-9 * (1.0 + e.abs()), "{m:?} x={x}: {e} vs {l}");
            }
        }
    }

    #[test]
    fn reducer_guards() {
        let lin = Measure::power_law(1.0, 1.0, 1.0).unwrap();
        assert_eq!(reducer(&lin, 1.0), Err(Error::EndpointEvaluation(1.0)));
        assert_eq!(reducer(&lin, 1e-9), Err(Error::EndpointEvaluation(1e-9)));
        let gapped = Measure::uniform(
            1.0,
            &[Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap()],
        )
        .unwrap();
        assert_eq!(reducer(&gapped, 0.5).unwrap_err(), Error::GappedMeasure);
    }

    #[test]
    fn gap_zeros() {
        let sym = Measure::uniform(
            1.0,
            &[Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap()],
        )
        .unwrap();
        let z = find_gap_zero(&sym).unwrap().unwrap();
        assert!((z - 1.5).abs() < 1e-10);
        assert_eq!(find_gap_zero(&semicircle()).unwrap(), None);
        let skew = Measure::uniform(
            1.0,
            &[Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 4.0).unwrap()],
        )
        .unwrap();
        let z = find_gap_zero(&skew).unwrap().unwrap();
        assert!(z > 1.0 && z < 2.0);
        // S = ln(z/(z-1)) + ln((z-2)/(z-4)) in closed form.
        let closed = (z / (z - 1.0)).ln() + ((z - 2.0) / (z - 4.0)).ln();
        assert!(closed.abs() < 1e-10);
    }

    #[test]
    fn pade_forms_agree_at_moderate_z() {
        let m = two_x();
        let rc = recurrence_coefficients(&m, 6).unwrap();
        for n in 0..=1 {
            let a = pade_remainder_scaled(&m, &rc, n, 5.0).unwrap();
            let b = pade_remainder_direct(&m, &rc, n, 5.0).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }
}
