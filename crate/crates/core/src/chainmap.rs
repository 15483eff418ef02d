//! The q-parametrized chain mapping.
//!
//! `q = 0` is the particle mapping and `q = 1` the phonon mapping; values in
//! between interpolate. A spectral density `J` is turned into the measure
//! `dλ^q`, whose recurrence coefficients give the chain Hamiltonian.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, ln, pow, sqrt, PI};
use crate::measures::{Interval, Measure, SdFamily, SpectralDensity, TailBound, WeightFn};
use crate::orthopoly::{recurrence_coefficients_with, RecurrenceCoefficients, RecurrenceOptions};

/// Residual-density capable mappings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mapping {
    Particle,
    Phonon,
}

impl Mapping {
    /// `0 → Particle`, `1 → Phonon`; anything else is unsupported.
    pub fn from_q(q: f64) -> Result<Self> {
        if q == 0.0 {
            Ok(Mapping::Particle)
        } else if q == 1.0 {
            Ok(Mapping::Phonon)
        } else {
            Err(Error::UnsupportedMapping("residual densities exist only for q = 0 and q = 1"))
        }
    }

    pub fn q(self) -> f64 {
        match self {
            Mapping::Particle => 0.0,
            Mapping::Phonon => 1.0,
        }
    }
}

/// `G_q`, its inverse and `ξ_q` for one value of `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingKernel {
    q: f64,
}

pub fn mapping_kernel(q: f64) -> Result<MappingKernel> {
    MappingKernel::new(q)
}

impl MappingKernel {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::DomainError("q must lie in [0, 1]"));
        }
        Ok(MappingKernel { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `G_q(x)` for `x >= 0`, written without the `1 - q²` denominator so
    /// that `q = 1` needs no special branch.
    pub fn g(&self, x: f64) -> f64 {
        let q = self.q;
        if q == 0.0 {
            return x;
        }
        let q2 = q * q;
        let root = sqrt(q2 * q2 + 4.0 * (1.0 - q2) * x * x);
        (16.0 * x * x - q2 * (1.0 - q2)) / (4.0 * (2.0 * root + q * (1.0 + q2)))
    }

    /// Inverse of `G_q` on `y >= G_q(0)`.
    pub fn g_inv(&self, y: f64) -> f64 {
        let q = self.q;
        let a = q * (1.0 - q) + 4.0 * (1.0 + q) * y;
        let b = q * (1.0 + q) + 4.0 * (1.0 - q) * y;
        let p = a * b;
        if p <= 0.0 { 0.0 } else { 0.25 * sqrt(p) }
    }

    /// `ξ_q(x)`.
    pub fn xi(&self, x: f64) -> f64 {
        let q = self.q;
        let g = self.g(x);
        let num = q * (1.0 - q) + 4.0 * (1.0 + q) * g;
        let den = q * (1.0 + q) + 4.0 * (1.0 - q) * g;
        if num == den {
            return 1.0;
        }
        if den == 0.0 {
            return if num == 0.0 { 1.0 } else { f64::INFINITY };
        }
        pow(num / den, 0.25)
    }

    /// `r_q(x) = ln ξ_q(x)`.
    pub fn r(&self, x: f64) -> f64 {
        ln(self.xi(x))
    }

    /// Jacobian factor in `M^q(y) = J(G⁻¹(y))/π · factor(y)`.
    pub fn density_factor(&self, y: f64) -> f64 {
        let q = self.q;
        if q == 0.0 || q == 1.0 {
            return 1.0;
        }
        ((1.0 + q * q) * q + 4.0 * (1.0 - q * q) * y) / ((1.0 + q) * q + 4.0 * (1.0 - q) * y)
    }
}

/// The measure `dλ^q` of a spectral density.
pub fn measure_from_sd(j: &SpectralDensity, q: f64) -> Result<Measure> {
    let k = MappingKernel::new(q)?;
    let pi_inv = 1.0 / PI;
    match (j.family(), q) {
        (SdFamily::PowerLaw { s, alpha, omega_c }, _) if q == 0.0 => {
            return Measure::power_law(2.0 * alpha * pow(omega_c, 1.0 - s), s, omega_c);
        }
        (SdFamily::PowerLaw { s, alpha, omega_c }, _) if q == 1.0 => {
            return Measure::power_law(2.0 * alpha * pow(omega_c, 1.0 - s), 0.5 * s, omega_c * omega_c);
        }
        (SdFamily::PowerLawExpCutoff { s, alpha, omega_c }, _) if q == 0.0 => {
            return Measure::laguerre(2.0 * alpha * pow(omega_c, 1.0 - s), s, omega_c);
        }
        _ => {}
    }
    let jf = j.eval_fn().clone();
    let support: Vec<Interval> = j.support().to_vec();
    let inside = support.clone();
    let w: WeightFn = if q == 0.0 {
        Arc::new(move |x| if inside.iter().any(|i| i.contains(x)) { jf(x) * pi_inv } else { 0.0 })
    } else {
        Arc::new(move |y| {
            let x = k.g_inv(y);
            if inside.iter().any(|i| i.contains(x)) { jf(x) * pi_inv * k.density_factor(y) } else { 0.0 }
        })
    };
    let mapped: Vec<Interval> = support
        .iter()
        .map(|i| Interval { lo: k.g(i.lo), hi: if i.is_bounded() { k.g(i.hi) } else { f64::INFINITY } })
        .collect();
    let bps: Vec<f64> = j.breakpoints().iter().map(|&b| k.g(b)).collect();
    let knots: Vec<f64> = j.knots().iter().map(|&b| k.g(b)).collect();
    let mut m = Measure::from_arc(w, &mapped)?.with_breakpoints(&bps).with_knots(&knots);
    for (idx, &(elo, ehi)) in j.endpoint_exponents().iter().enumerate() {
        // Near ω = 0 the map is quadratic for q > 0, halving the exponent.
        let lo_is_zero = support[idx].lo == 0.0;
        let elo = match elo {
            Some(e) if q > 0.0 && lo_is_zero => Some(0.5 * e),
            other => other,
        };
        m = m.with_endpoint_exponents(idx, elo, ehi);
    }
    if !j.is_bounded() {
        m = m.with_tail_scale(if q == 0.0 { j.tail_scale() } else { abs(k.g(j.tail_scale())).max(1e-300) });
        let tail = j.tail_bound().and_then(|t| match t {
            TailBound::Exponential { coeff, power, rate } if q == 0.0 => {
                Some(TailBound::Exponential { coeff: coeff * pi_inv, power, rate })
            }
            TailBound::Exponential { coeff, power, rate } if q == 1.0 => {
                Some(TailBound::SqrtExponential { coeff: coeff * pi_inv, power: 0.5 * power, rate })
            }
            TailBound::SqrtExponential { coeff, power, rate } if q == 0.0 => {
                Some(TailBound::SqrtExponential { coeff: coeff * pi_inv, power, rate })
            }
            _ => None,
        });
        if let Some(t) = tail {
            m = m.with_tail_bound(t);
        }
    }
    Ok(m)
}

/// Scalar data of the chain Hamiltonian for a given `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainCoefficients {
    pub q: f64,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub e3: Vec<f64>,
    pub e4: Vec<f64>,
    pub e5: f64,
    /// Recurrence coefficients of `dλ^q` (`N + 1` pairs).
    pub rc: RecurrenceCoefficients,
}

impl ChainCoefficients {
    pub fn from_recurrence(q: f64, rc: RecurrenceCoefficients) -> Result<Self> {
        if rc.len() < 2 {
            return Err(Error::IndexOutOfRange { index: 1, available: rc.len() });
        }
        let n = rc.len() - 1;
        let e1 = (0..n).map(|k| 0.5 * q * rc.alpha[k] - q * q / 8.0).collect();
        let e2 = (0..n).map(|k| rc.alpha[k] + 0.25 * q).collect();
        let e4: Vec<f64> = (0..n).map(|k| sqrt(rc.beta[k + 1])).collect();
        let e3 = e4.iter().map(|v| q * v).collect();
        Ok(ChainCoefficients { q, e1, e2, e3, e4, e5: sqrt(rc.beta[0]), rc })
    }

    /// Number of chain sites.
    pub fn sites(&self) -> usize {
        self.e2.len()
    }
}

/// Chain coefficients for `N` sites.
pub fn chain_coefficients(j: &SpectralDensity, q: f64, n: usize) -> Result<ChainCoefficients> {
    chain_coefficients_with(j, q, n, RecurrenceOptions::default())
}

pub fn chain_coefficients_with(
    j: &SpectralDensity,
    q: f64,
    n: usize,
    opts: RecurrenceOptions,
) -> Result<ChainCoefficients> {
    if n == 0 {
        return Err(Error::DomainError("need at least one site"));
    }
    let m = measure_from_sd(j, q)?;
    let rc = recurrence_coefficients_with(&m, n + 1, opts)?;
    ChainCoefficients::from_recurrence(q, rc)
}

/// Jacobi data with the first `offset` rows and columns removed.
pub fn associated_jacobi(rc: &RecurrenceCoefficients, offset: usize) -> Result<RecurrenceCoefficients> {
    rc.shifted(offset)
}

/// Coefficients of the phonon-mapping chain in harmonic-oscillator form.
#[derive(Clone, Debug, PartialEq)]
pub struct BassanoCoefficients {
    /// `D_n² = β_n(dλ¹)` for `n = 0..N-1`.
    pub d2: Vec<f64>,
    /// `Ω²_{n+1} = α_n(dλ¹)` for `n = 0..N-1`.
    pub omega2: Vec<f64>,
}

pub fn bassano_coefficients(j: &SpectralDensity, n: usize) -> Result<BassanoCoefficients> {
    if !j.is_gapless() {
        return Err(Error::GappedMeasure);
    }
    if n == 0 {
        return Err(Error::DomainError("need at least one coefficient"));
    }
    let m = measure_from_sd(j, 1.0)?;
    let rc = recurrence_coefficients_with(&m, n, RecurrenceOptions::default())?;
    // D_0² against (1/π)∫ J(√ω) dω over the untagged weight.
    let plain = m.with_weight(m.weight_fn().clone());
    let direct = plain.integrate(|_| 1.0, 0)?;
    if abs(direct - rc.beta[0]) > 1e-8 * rc.beta[0] {
        return Err(Error::IllConditioned("D_0² disagrees with direct quadrature"));
    }
    Ok(BassanoCoefficients { d2: rc.beta.clone(), omega2: rc.alpha.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_endpoints() {
        let k0 = MappingKernel::new(0.0).unwrap();
        let k1 = MappingKernel::new(1.0).unwrap();
        for &x in &[0.0, 0.3, 1.0, 7.5] {
            assert_relative_eq!(k0.g(x), x, max_relative = 1e-15);
            assert_eq!(k0.xi(x), 1.0);
            assert_relative_eq!(k1.g(x), x * x, max_relative = 1e-15);
            if x > 0.0 {
                assert_relative_eq!(k1.xi(x), (2.0 * x).sqrt(), max_relative = 1e-15);
            }
        }
        let h = MappingKernel::new(0.5).unwrap();
        assert_relative_eq!(h.g(0.0), -1.0 / 24.0, max_relative = 1e-15);
        assert!(h.g_inv(-1.0 / 24.0).abs() < 1e-8);
        assert!(MappingKernel::new(1.5).is_err());
    }

    #[test]
    fn kernel_inverse_round_trip() {
        for &q in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let k = MappingKernel::new(q).unwrap();
            for i in 1..=50 {
                let x = 0.1 * i as f64;
                assert!((k.g_inv(k.g(x)) - x).abs() < 1e-12 * x.max(1.0), "q={q} x={x}");
            }
        }
    }

    #[test]
    fn kernel_matches_unrationalized_form() {
        for &q in &[0.1, 0.5, 0.9] {
            let k = MappingKernel::new(q).unwrap();
            for &x in &[0.2, 1.0, 3.0] {
                let q2: f64 = q * q;
                let g = (-q * (1.0 + q2) + 2.0 * (q2 * q2 + 4.0 * (1.0 - q2) * x * x).sqrt()) / (4.0 * (1.0 - q2));
                assert_relative_eq!(k.g(x), g, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn measure_examples() {
        let j = SpectralDensity::power_law(1.0, 0.1, 1.0).unwrap();
        let m = measure_from_sd(&j, 0.0).unwrap();
        assert_relative_eq!(m.weight(0.4), 0.2 * 0.4, max_relative = 1e-15);
        let m1 = measure_from_sd(&j, 1.0).unwrap();
        assert_relative_eq!(m1.weight(0.25), j.eval(0.5) / PI, max_relative = 1e-14);
        // Generic path through G_q at q = 0 and 1 agrees with the corollary forms.
        let custom = SpectralDensity::new(|w| 0.3 * w * (2.0 - w), &[Interval::new(0.0, 1.5).unwrap()], SdFamily::Custom)
            .unwrap();
        let g0 = measure_from_sd(&custom, 0.0).unwrap();
        let g1 = measure_from_sd(&custom, 1.0).unwrap();
        assert_eq!(g1.hull(), (0.0, 2.25));
        for &x in &[0.1, 0.7, 1.4] {
            assert_relative_eq!(g0.weight(x), custom.eval(x) / PI, max_relative = 1e-12);
            assert_relative_eq!(g1.weight(x), custom.eval(x.sqrt()) / PI, max_relative = 1e-12);
        }
    }

    #[test]
    fn chain_examples() {
        let j = SpectralDensity::power_law(1.0, 0.1, 1.0).unwrap();
        let c0 = chain_coefficients(&j, 0.0, 5).unwrap();
        assert_relative_eq!(c0.e5, 0.1f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c0.e2[0], 2.0 / 3.0, max_relative = 1e-14);
        assert!(c0.e1.iter().chain(&c0.e3).all(|&v| v == 0.0));
        let c1 = chain_coefficients(&j, 1.0, 5).unwrap();
        assert_relative_eq!(c1.e5, 2.0 * (0.1f64 / 3.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(c1.e2[0], 0.85, max_relative = 1e-14);
        assert_eq!(c1.e3, c1.e4);
        let je = SpectralDensity::power_law_exp_cutoff(1.0, 0.1, 1.0).unwrap();
        let ce = chain_coefficients(&je, 0.0, 3).unwrap();
        assert_relative_eq!(ce.e5, 0.2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(ce.e4[0], 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn intermediate_q_chain() {
        let j = SpectralDensity::power_law(1.0, 0.1, 1.0).unwrap();
        let c = chain_coefficients(&j, 0.5, 6).unwrap();
        let (a, b) = c.rc.support;
        assert_relative_eq!(a, -1.0 / 24.0, max_relative = 1e-14);
        assert!(c.rc.alpha.iter().all(|&x| x > a && x < b));
        let k = MappingKernel::new(0.5).unwrap();
        assert_relative_eq!(b, k.g(1.0), max_relative = 1e-14);
    }

    #[test]
    fn associated_examples() {
        let j = SpectralDensity::power_law(1.0, 0.1, 1.0).unwrap();
        let c = chain_coefficients(&j, 0.0, 4).unwrap();
        let v = associated_jacobi(&c.rc, 1).unwrap();
        assert_relative_eq!(v.alpha[0], 8.0 / 15.0, max_relative = 1e-14);
        assert_eq!(associated_jacobi(&c.rc, 0).unwrap(), c.rc);
    }

    #[test]
    fn bassano_examples() {
        let j = SpectralDensity::power_law(1.0, 0.1, 1.0).unwrap();
        let b = bassano_coefficients(&j, 4).unwrap();
        assert_relative_eq!(b.d2[0], 0.4 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(b.omega2[0], 0.6, max_relative = 1e-12);
        let gapped = SpectralDensity::new(
            |_| 1.0,
            &[Interval::new(0.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap()],
            SdFamily::Custom,
        )
        .unwrap();
        assert_eq!(bassano_coefficients(&gapped, 2).unwrap_err(), Error::GappedMeasure);
    }

    #[test]
    fn rubin_terminal_bassano() {
        // J(ω) = sqrt(ω²(1-ω²))/2 maps under q = 1 to a semicircle on [0, 1].
        let j = SpectralDensity::new(
            |w| 0.5 * (w * w * (1.0 - w * w)).max(0.0).sqrt(),
            &[Interval::new(0.0, 1.0).unwrap()],
            SdFamily::Custom,
        )
        .unwrap()
        .with_endpoint_exponents(0, Some(1.0), Some(0.5));
        let b = bassano_coefficients(&j, 6).unwrap();
        for v in &b.omega2 {
            assert_relative_eq!(*v, 0.5, max_relative = 1e-10);
        }
    }
}
