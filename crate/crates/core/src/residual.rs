//! Residual spectral densities after embedding chain sites into the system.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::chainmap::{measure_from_sd, Mapping, MappingKernel};
use crate::error::{Error, Result};
use crate::math::{abs, PI};
use crate::measures::{SdFamily, SpectralDensity, WeightFn};
use crate::orthopoly::{recurrence_coefficients, recurrence_coefficients_with, RecurrenceCoefficients, RecurrenceOptions};
use crate::secondary::{SecondarySequence, SequenceMode};

/// All residual densities `J_0..J_max` of one spectral density.
#[derive(Clone, Debug)]
pub struct ResidualFamily {
    base: SpectralDensity,
    mapping: Mapping,
    kernel: MappingKernel,
    seq: SecondarySequence,
}

impl ResidualFamily {
    pub fn new(j: &SpectralDensity, q: f64, max_n: usize) -> Result<Self> {
        let mapping = Mapping::from_q(q)?;
        if !j.is_gapless() {
            return Err(Error::GappedMeasure);
        }
        let m = measure_from_sd(j, q)?;
        let rc = recurrence_coefficients(&m, max_n + 1)?;
        Self::with_coefficients(j, mapping, rc)
    }

    /// Uses precomputed coefficients of `dλ^q` (at least `max_n + 1` pairs).
    pub fn with_coefficients(j: &SpectralDensity, mapping: Mapping, rc: RecurrenceCoefficients) -> Result<Self> {
        if !j.is_gapless() {
            return Err(Error::GappedMeasure);
        }
        let m = measure_from_sd(j, mapping.q())?;
        let seq = SecondarySequence::with_coefficients(&m, rc, SequenceMode::BetaNormalized)?;
        Ok(ResidualFamily { base: j.clone(), mapping, kernel: MappingKernel::new(mapping.q())?, seq })
    }

    pub fn base(&self) -> &SpectralDensity {
        &self.base
    }

    pub fn mapping(&self) -> Mapping {
        self.mapping
    }

    pub fn sequence(&self) -> &SecondarySequence {
        &self.seq
    }

    pub fn max_n(&self) -> usize {
        self.seq.max_n()
    }

    /// Frequencies at which residual densities may be evaluated.
    pub fn band(&self) -> (f64, f64) {
        let (lo, hi) = self.seq.reducer().band();
        let k = self.kernel;
        // Step inward until the round trip through G lands inside the band.
        let mut wl = k.g_inv(lo);
        while k.g(wl) < lo {
            wl = libm::nextafter(wl, f64::INFINITY);
        }
        if !hi.is_finite() {
            return (wl, f64::INFINITY);
        }
        let mut wh = k.g_inv(hi);
        while k.g(wh) > hi {
            wh = libm::nextafter(wh, 0.0);
        }
        (wl, wh)
    }

    /// `J_n(ω)`; `n = 0` returns the base density itself.
    pub fn eval(&self, n: usize, omega: f64) -> Result<f64> {
        if n == 0 {
            return Ok(self.base.eval(omega));
        }
        let x = self.kernel.g(omega);
        Ok(PI * self.seq.density(n, x)?)
    }

    fn eval_interior(&self, n: usize, omega: f64) -> f64 {
        if n == 0 {
            return self.base.eval(omega);
        }
        let x = self.kernel.g(omega);
        PI * self.seq.density_interior(n, x).unwrap_or(f64::NAN)
    }

    pub fn density(&self, n: usize) -> Result<ResidualDensity> {
        if n > self.max_n() {
            return Err(Error::IndexOutOfRange { index: n, available: self.max_n() + 1 });
        }
        Ok(ResidualDensity { family: self.clone(), n })
    }
}

/// `J_n` for one embedding depth.
#[derive(Clone, Debug)]
pub struct ResidualDensity {
    family: ResidualFamily,
    n: usize,
}

impl ResidualDensity {
    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn eval(&self, omega: f64) -> Result<f64> {
        self.family.eval(self.n, omega)
    }

    /// `J_n` as a spectral density on the base support, for feeding back
    /// into the mapping.
    pub fn as_spectral_density(&self) -> Result<SpectralDensity> {
        if self.n == 0 {
            return Ok(self.family.base.clone());
        }
        let me = self.clone();
        let f: WeightFn = Arc::new(move |w| me.family.eval_interior(me.n, w));
        let base = &self.family.base;
        let mut j = SpectralDensity::from_arc(f, base.support(), SdFamily::Custom)?
            .with_breakpoints(base.breakpoints())
            .with_knots(base.knots())
            .with_tail_scale(base.tail_scale());
        for (i, &(lo, hi)) in base.endpoint_exponents().iter().enumerate() {
            j = j.with_endpoint_exponents(i, lo, hi);
        }
        Ok(j)
    }
}

/// `J_n(ω)` in one call.
pub fn residual_sd(j: &SpectralDensity, q: f64, n: usize, omega: f64) -> Result<f64> {
    if n == 0 {
        Mapping::from_q(q)?;
        if !j.is_gapless() {
            return Err(Error::GappedMeasure);
        }
        return Ok(j.eval(omega));
    }
    ResidualFamily::new(j, q, n)?.eval(n, omega)
}

/// Comparison of the coefficients of `J_n` with the shifted coefficients of `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `|α_k(J_n) - α_{n+k}(J)|` for `k = 0..=depth`.
    pub alpha_deviation: Vec<f64>,
    /// `|β_k(J_n) - β_{n+k}(J)|` for `k = 0..=depth`.
    pub beta_deviation: Vec<f64>,
    pub max_deviation: f64,
}

pub fn residual_consistency(j: &SpectralDensity, q: f64, n: usize, depth: usize) -> Result<ConsistencyReport> {
    let mapping = Mapping::from_q(q)?;
    if n == 0 {
        return Ok(ConsistencyReport {
            alpha_deviation: alloc::vec![0.0; depth + 1],
            beta_deviation: alloc::vec![0.0; depth + 1],
            max_deviation: 0.0,
        });
    }
    let m = measure_from_sd(j, q)?;
    let base_rc = recurrence_coefficients(&m, n + depth + 1)?;
    let fam = ResidualFamily::with_coefficients(j, mapping, base_rc.clone())?;
    let jn = fam.density(n)?.as_spectral_density()?;
    let mn = measure_from_sd(&jn, q)?;
    let rc = recurrence_coefficients_with(&mn, depth + 1, RecurrenceOptions::generic())?;
    let mut alpha_deviation = Vec::with_capacity(depth + 1);
    let mut beta_deviation = Vec::with_capacity(depth + 1);
    let mut worst: f64 = 0.0;
    for k in 0..=depth {
        let da = abs(rc.alpha[k] - base_rc.alpha[n + k]);
        let db = abs(rc.beta[k] - base_rc.beta[n + k]);
        worst = worst.max(da).max(db);
        alpha_deviation.push(da);
        beta_deviation.push(db);
    }
    Ok(ConsistencyReport { alpha_deviation, beta_deviation, max_deviation: worst })
}

/// Masses `(1/π)∫ J_n(G⁻¹(x)) dx` of the mapped residual measures for
/// `n = 0..=max_n`, by direct quadrature. For `q = 1` these are the `D_n²`
/// of the oscillator form of the chain.
pub fn residual_masses(j: &SpectralDensity, q: f64, max_n: usize) -> Result<Vec<f64>> {
    let fam = ResidualFamily::new(j, q, max_n)?;
    let mut out = Vec::with_capacity(max_n + 1);
    for n in 0..=max_n {
        let jn = fam.density(n)?.as_spectral_density()?;
        let m = measure_from_sd(&jn, q)?;
        out.push(m.with_weight(m.weight_fn().clone()).integrate(|_| 1.0, 0)?);
    }
    Ok(out)
}
