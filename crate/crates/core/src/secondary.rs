//! Secondary measures and the sequences generated by iterating them.
//!
//! Given a gapless base `ν₀` with orthonormal polynomials `P_n`, secondary
//! polynomials `Q_n` and reducer `φ`, member `n` of the beta-normalized
//! sequence has density
//!
//! `ν̄_n(x) = ν̄₀(x) / [(P_{n-1} φ/2 - Q_{n-1})² + π² ν̄₀² P_{n-1}²]`
//!
//! and mass `β_n(ν₀)`. The normalized sequence is `μ̄_n = ν̄_n / β_n`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, PI};
use crate::measures::{Measure, MomentSequence, WeightFn};
use crate::orthopoly::{recurrence_coefficients, RecurrenceCoefficients};
use crate::stieltjes::ReducerEvaluator;

/// Normalization of the sequence members.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceMode {
    /// Every member has unit mass.
    Normalized,
    /// Member `n` has mass `β_n` of the base.
    BetaNormalized,
}

#[derive(Debug)]
struct Inner {
    base: Measure,
    rc: RecurrenceCoefficients,
    reducer: ReducerEvaluator,
    mode: SequenceMode,
}

/// Sequence of secondary measures built from one base measure.
///
/// The base, its coefficients and its reducer are computed once and shared
/// by all members.
#[derive(Clone, Debug)]
pub struct SecondarySequence {
    inner: Arc<Inner>,
}

impl SecondarySequence {
    /// Sequence over `base` with members up to `max_n`. In normalized mode
    /// the base is normalized first.
    pub fn new(base: &Measure, mode: SequenceMode, max_n: usize) -> Result<Self> {
        if !base.is_gapless() {
            return Err(Error::GappedMeasure);
        }
        if !base.point_masses().is_empty() {
            return Err(Error::PointMasses);
        }
        let base = match mode {
            SequenceMode::Normalized => base.normalize()?,
            SequenceMode::BetaNormalized => base.clone(),
        };
        let rc = recurrence_coefficients(&base, max_n + 1)?;
        Self::with_coefficients(&base, rc, mode)
    }

    /// Uses precomputed coefficients of `base` (at least `max_n + 1` pairs).
    pub fn with_coefficients(base: &Measure, rc: RecurrenceCoefficients, mode: SequenceMode) -> Result<Self> {
        let reducer = ReducerEvaluator::auto(base)?;
        Ok(SecondarySequence { inner: Arc::new(Inner { base: base.clone(), rc, reducer, mode }) })
    }

    pub fn base(&self) -> &Measure {
        &self.inner.base
    }

    pub fn coefficients(&self) -> &RecurrenceCoefficients {
        &self.inner.rc
    }

    pub fn reducer(&self) -> &ReducerEvaluator {
        &self.inner.reducer
    }

    pub fn mode(&self) -> SequenceMode {
        self.inner.mode
    }

    /// Largest member index available.
    pub fn max_n(&self) -> usize {
        self.inner.rc.len() - 1
    }

    /// Mass of member `n`.
    pub fn member_mass(&self, n: usize) -> Result<f64> {
        if n > self.max_n() {
            return Err(Error::IndexOutOfRange { index: n, available: self.max_n() + 1 });
        }
        Ok(match self.inner.mode {
            SequenceMode::Normalized => 1.0,
            SequenceMode::BetaNormalized => self.inner.rc.beta[n],
        })
    }

    /// Density of member `n` at `x` inside the reducer's guard band.
    pub fn density(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.max_n() {
            return Err(Error::IndexOutOfRange { index: n, available: self.max_n() + 1 });
        }
        let (lo, hi) = self.inner.reducer.band();
        if !(x >= lo && x <= hi) {
            return Err(Error::EndpointEvaluation(x));
        }
        self.density_interior(n, x)
    }

    pub(crate) fn density_interior(&self, n: usize, x: f64) -> Result<f64> {
        let inner = &*self.inner;
        let w = inner.base.weight(x);
        if n == 0 {
            return Ok(w);
        }
        if w == 0.0 {
            return Ok(0.0);
        }
        let phi = inner.reducer.eval_interior(x)?;
        let (p, q) = inner.rc.eval_pq(n - 1, x)?;
        let a = p * phi * 0.5 - q;
        let b = PI * w * p;
        let v = w / (a * a + b * b);
        Ok(match inner.mode {
            SequenceMode::Normalized => v / inner.rc.beta[n],
            SequenceMode::BetaNormalized => v,
        })
    }

    /// Member `n` as a measure on the base support, carrying the base's
    /// endpoint hints.
    pub fn member(&self, n: usize) -> Result<Measure> {
        if n > self.max_n() {
            return Err(Error::IndexOutOfRange { index: n, available: self.max_n() + 1 });
        }
        if n == 0 {
            return Ok(self.inner.base.clone());
        }
        let seq = self.clone();
        let w: WeightFn = Arc::new(move |x| seq.density_interior(n, x).unwrap_or(f64::NAN));
        Ok(self.inner.base.with_weight(w))
    }
}

/// `ρ̄(x) = μ̄(x) / (φ(x)²/4 + π² μ̄(x)²)` for a normalized gapless measure.
pub fn secondary_density(m: &Measure, x: f64) -> Result<f64> {
    SecondaryMeasure::new(m)?.density(x)
}

/// Secondary measure of a normalized gapless measure.
#[derive(Clone, Debug)]
pub struct SecondaryMeasure {
    reducer: ReducerEvaluator,
}

impl SecondaryMeasure {
    pub fn new(m: &Measure) -> Result<Self> {
        let reducer = ReducerEvaluator::auto(m)?;
        let c0 = m.mass()?;
        if abs(c0 - 1.0) > 1e-8 {
            return Err(Error::NotNormalized(c0));
        }
        Ok(SecondaryMeasure { reducer })
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.reducer.band();
        if !(x >= lo && x <= hi) {
            return Err(Error::EndpointEvaluation(x));
        }
        self.density_interior(x)
    }

    fn density_interior(&self, x: f64) -> Result<f64> {
        let w = self.reducer.measure().weight(x);
        if w == 0.0 {
            return Ok(0.0);
        }
        let phi = self.reducer.eval_interior(x)?;
        Ok(w / (0.25 * phi * phi + PI * PI * w * w))
    }

    /// The secondary measure itself, on the support of the original.
    pub fn measure(&self) -> Measure {
        let me = self.clone();
        let w: WeightFn = Arc::new(move |x| me.density_interior(x).unwrap_or(f64::NAN));
        self.reducer.measure().with_weight(w)
    }
}

/// Moments `C_0..=C_n` of the secondary measure from those of a normalized
/// measure: `C_k(ρ) = C_{k+2} - C_1 C_{k+1} - Σ_{s<k} C_s(ρ) C_{k-s}`.
pub fn secondary_moments(c: &MomentSequence, n: usize) -> Result<MomentSequence> {
    let v = &c.values;
    if v.len() < n + 3 {
        return Err(Error::InsufficientMoments { needed: n + 3, got: v.len() });
    }
    if abs(v[0] - 1.0) > 1e-12 {
        return Err(Error::NotNormalized(v[0]));
    }
    let mut out: Vec<f64> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut s = crate::math::Sum::default();
        s.add(v[k + 2]);
        s.add(-v[1] * v[k + 1]);
        for j in 0..k {
            s.add(-out[j] * v[k - j]);
        }
        out.push(s.value());
    }
    Ok(MomentSequence { values: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Interval;
    use approx::assert_relative_eq;

    #[test]
    fn secondary_density_examples() {
        let sc = Measure::semicircle(-1.0, 1.0).unwrap();
        assert_relative_eq!(secondary_density(&sc, 0.0).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-10);
        let two_x = Measure::power_law(2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(secondary_density(&two_x, 0.5).unwrap(), 1.0 / (4.0 + PI * PI), max_relative = 1e-13);
        let lin = Measure::power_law(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(secondary_density(&lin, 0.5), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn secondary_moment_examples() {
        let sc = MomentSequence::new(vec![1.0, 0.0, 0.25, 0.0, 0.125]).unwrap();
        let r = secondary_moments(&sc, 2).unwrap().values;
        assert_relative_eq!(r[0], 0.25, max_relative = 1e-15);
        assert_eq!(r[1], 0.0);
        assert_relative_eq!(r[2], 1.0 / 16.0, max_relative = 1e-15);
        let two_x = MomentSequence::new(vec![1.0, 2.0 / 3.0, 0.5]).unwrap();
        let r = secondary_moments(&two_x, 0).unwrap().values;
        assert_relative_eq!(r[0], 1.0 / 18.0, max_relative = 1e-14);
        assert!(matches!(secondary_moments(&two_x, 1), Err(Error::InsufficientMoments { .. })));
    }

    #[test]
    fn secondary_moments_match_quadrature() {
        let m = Measure::power_law(2.0, 1.0, 1.0).unwrap();
        let c = m.moments(8).unwrap();
        let rho = SecondaryMeasure::new(&m).unwrap().measure();
        let exact = secondary_moments(&c, 4).unwrap().values;
        let numeric = rho.moments(4).unwrap().values;
        for k in 0..=4 {
            assert_relative_eq!(numeric[k], exact[k], max_relative = 1e-9);
        }
    }

    #[test]
    fn ohmic_sequence_values() {
        let nu0 = Measure::power_law(1.0, 1.0, 1.0).unwrap();
        let seq = SecondarySequence::new(&nu0, SequenceMode::BetaNormalized, 4).unwrap();
        assert_relative_eq!(seq.density(1, 0.5).unwrap(), 1.0 / (PI * PI + 4.0), max_relative = 1e-13);
        assert_relative_eq!(
            seq.density(2, 0.5).unwrap(),
            0.5 / (PI * PI / 4.0 + 4.0),
            max_relative = 1e-12
        );
        let norm = SecondarySequence::new(&nu0, SequenceMode::Normalized, 4).unwrap();
        for &x in &[0.1, 0.5, 0.77] {
            for n in 1..=3 {
                let b = seq.coefficients().beta[n];
                assert_relative_eq!(seq.density(n, x).unwrap(), b * norm.density(n, x).unwrap(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn member_masses() {
        let nu0 = Measure::power_law(1.0, 1.0, 1.0).unwrap();
        let seq = SecondarySequence::new(&nu0, SequenceMode::BetaNormalized, 3).unwrap();
        assert_relative_eq!(seq.member(1).unwrap().mass().unwrap(), 1.0 / 18.0, max_relative = 1e-9);
        assert_relative_eq!(seq.member(2).unwrap().mass().unwrap(), 0.06, max_relative = 1e-9);
    }

    #[test]
    fn gapped_base_rejected() {
        let g = Measure::uniform(1.0, &[Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap()])
            .unwrap();
        assert_eq!(
            SecondarySequence::new(&g, SequenceMode::Normalized, 2).unwrap_err(),
            Error::GappedMeasure
        );
    }
}
