//! Convergence of chain coefficients and residual densities to their
//! terminal values.

use alloc::vec::Vec;

use crate::chainmap::{measure_from_sd, Mapping, MappingKernel};
use crate::error::{Error, Result};
use crate::math::{abs, ln, sqrt, PI};
use crate::measures::{Interval, Measure, SdFamily, SpectralDensity};
use crate::orthopoly::{recurrence_coefficients, RecurrenceCoefficients};
use crate::quad::{self, Grade, DEFAULT_LAYERS};
use crate::secondary::{SecondarySequence, SequenceMode};

/// Why a density falls outside the class with convergent coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutOfClassReason {
    Unbounded,
    Gapped,
    /// `∫ ln M / √((B-x)(x-A))` diverges.
    LogDivergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SzegoVerdict {
    InClass,
    OutOfClass(OutOfClassReason),
}

impl SzegoVerdict {
    pub fn is_in_class(self) -> bool {
        self == SzegoVerdict::InClass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SzegoVerdict::InClass => "in_class",
            SzegoVerdict::OutOfClass(OutOfClassReason::Unbounded) => "out_of_class(unbounded)",
            SzegoVerdict::OutOfClass(OutOfClassReason::Gapped) => "out_of_class(gapped)",
            SzegoVerdict::OutOfClass(OutOfClassReason::LogDivergent) => "out_of_class(log_divergent)",
        }
    }
}

impl core::fmt::Display for SzegoVerdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

const EXCLUSIONS: core::ops::RangeInclusive<i32> = 2..=10;
const SZEGO_TOL: f64 = 1e-6;

/// Classifies `J` under the mapping `q`.
pub fn szego_check(j: &SpectralDensity, q: f64) -> Result<SzegoVerdict> {
    MappingKernel::new(q)?;
    if !j.is_bounded() {
        return Ok(SzegoVerdict::OutOfClass(OutOfClassReason::Unbounded));
    }
    if !j.is_gapless() {
        return Ok(SzegoVerdict::OutOfClass(OutOfClassReason::Gapped));
    }
    let m = measure_from_sd(j, q)?;
    Ok(log_integral_verdict(&m))
}

/// With `x = A + (B-A) sin²(θ/2)` the weighted log integral becomes
/// `∫₀^π ln M dθ`; it is evaluated with shrinking end exclusions and must
/// settle.
fn log_integral_verdict(m: &Measure) -> SzegoVerdict {
    let (a, b) = m.hull();
    let width = b - a;
    // Nodes whose offset from an end is lost to rounding are skipped; their
    // share of the integral is far below the settling tolerance.
    let x_of = |theta: f64| {
        let (end, off, sign) = if theta <= 0.5 * PI {
            let s = libm::sin(0.5 * theta);
            (a, width * s * s, 1.0)
        } else {
            let s = libm::sin(0.5 * (PI - theta));
            (b, width * s * s, -1.0)
        };
        if off <= 16.0 * f64::EPSILON * abs(end) {
            None
        } else {
            Some(end + sign * off)
        }
    };
    let theta = |x: f64| 2.0 * libm::asin(sqrt(((x - a) / width).clamp(0.0, 1.0)));
    let pts: Vec<(f64, u32)> = m
        .breakpoints_in(a, b)
        .into_iter()
        .map(|x| (theta(x), DEFAULT_LAYERS))
        .chain(m.knots_in(a, b).into_iter().map(|x| (theta(x), 0)))
        .collect();
    let mut prev: Option<f64> = None;
    let mut last_step = f64::INFINITY;
    for k in EXCLUSIONS {
        let d = libm::pow(10.0, -(k as f64));
        let mut segs = Vec::new();
        quad::split_segment(d, 0.5 * PI, Grade::layers(DEFAULT_LAYERS), Grade::NONE, 16, &pts, &mut segs);
        quad::split_segment(0.5 * PI, PI - d, Grade::NONE, Grade::layers(DEFAULT_LAYERS), 16, &pts, &mut segs);
        let mut finite = true;
        let v = quad::integrate(&segs, 30, |t| {
            let Some(x) = x_of(t) else { return 0.0 };
            let l = ln(m.weight(x));
            if !l.is_finite() {
                finite = false;
                return 0.0;
            }
            l
        });
        if !finite || !v.is_finite() {
            return SzegoVerdict::OutOfClass(OutOfClassReason::LogDivergent);
        }
        if let Some(p) = prev {
            last_step = abs(v - p);
        }
        prev = Some(v);
    }
    if last_step < SZEGO_TOL {
        SzegoVerdict::InClass
    } else {
        SzegoVerdict::OutOfClass(OutOfClassReason::LogDivergent)
    }
}

/// `x`-space support `[A, B]` of `dλ^q`.
fn mapped_hull(j: &SpectralDensity, q: f64) -> Result<(f64, f64)> {
    let k = MappingKernel::new(q)?;
    Ok((k.g(j.omega_min()), k.g(j.omega_max())))
}

/// `(α_∞, β_∞) = ((A+B)/2, (B-A)²/16)`.
pub fn asymptotic_limits(j: &SpectralDensity, q: f64) -> Result<(f64, f64)> {
    match szego_check(j, q)? {
        SzegoVerdict::InClass => {}
        SzegoVerdict::OutOfClass(OutOfClassReason::Unbounded) => {
            return Err(Error::NotInSzegoClass("unbounded support"))
        }
        SzegoVerdict::OutOfClass(OutOfClassReason::Gapped) => return Err(Error::NotInSzegoClass("gapped support")),
        SzegoVerdict::OutOfClass(OutOfClassReason::LogDivergent) => {
            return Err(Error::NotInSzegoClass("log integral diverges"))
        }
    }
    let (a, b) = mapped_hull(j, q)?;
    Ok((0.5 * (a + b), (b - a) * (b - a) / 16.0))
}

/// The density whose chain has constant coefficients `(α_∞, β_∞)`.
///
/// For `q = 0` this is `√((ω-a)(b-ω))/2`, for `q = 1`
/// `√((ω²-a²)(b²-ω²))/2`.
pub fn terminal_sd(j: &SpectralDensity, q: f64) -> Result<SpectralDensity> {
    let (_, beta) = asymptotic_limits(j, q)?;
    let k = MappingKernel::new(q)?;
    let (a, b) = mapped_hull(j, q)?;
    let (wa, wb) = (j.omega_min(), j.omega_max());
    let scale = PI * beta * 8.0 / (PI * (b - a) * (b - a));
    let f = move |w: f64| {
        if !(w > wa && w < wb) {
            return 0.0;
        }
        let x = k.g(w);
        let r = (x - a) * (b - x);
        if r <= 0.0 {
            return 0.0;
        }
        scale * sqrt(r) / k.density_factor(x)
    };
    let lo_exp = if wa == 0.0 && q > 0.0 { 1.0 } else { 0.5 };
    Ok(SpectralDensity::new(f, &[Interval::new(wa, wb)?], SdFamily::Custom)?.with_endpoint_exponents(
        0,
        Some(lo_exp),
        Some(0.5),
    ))
}

/// Largest moment order and depth entering the moment gaps.
pub const GAP_MAX_ORDER: usize = 8;
pub const GAP_MAX_DEPTH: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub q: f64,
    pub verdict: SzegoVerdict,
    pub alpha_limit: Option<f64>,
    pub beta_limit: Option<f64>,
    /// `α_n` for `n = 0..N`.
    pub alpha: Vec<f64>,
    /// `β_n` for `n = 1..=N`.
    pub beta: Vec<f64>,
    /// `|α_n - α_∞|`; empty without limits.
    pub alpha_deviation: Vec<f64>,
    /// `|β_n - β_∞|`; empty without limits.
    pub beta_deviation: Vec<f64>,
    /// `α_n / √β_{n+1}`.
    pub ratio: Vec<f64>,
    /// Row `n - 1` holds `|C_k(μ_n) - C_k(μ_T)|` for `k = 0..=8`, where `μ_n`
    /// is the normalized residual measure and `μ_T` the normalized terminal
    /// measure. Empty when out of class or for `0 < q < 1`.
    pub terminal_moment_gap: Vec<Vec<f64>>,
}

pub fn convergence_report(j: &SpectralDensity, q: f64, n: usize) -> Result<ConvergenceReport> {
    if n == 0 {
        return Err(Error::DomainError("need at least one site"));
    }
    let m = measure_from_sd(j, q)?;
    let rc = recurrence_coefficients(&m, n + 1)?;
    convergence_report_from(j, q, &rc)
}

/// Report from precomputed coefficients of `dλ^q` (`N + 1` pairs).
pub fn convergence_report_from(j: &SpectralDensity, q: f64, rc: &RecurrenceCoefficients) -> Result<ConvergenceReport> {
    if rc.len() < 2 {
        return Err(Error::IndexOutOfRange { index: 1, available: rc.len() });
    }
    let n = rc.len() - 1;
    let verdict = szego_check(j, q)?;
    let alpha: Vec<f64> = rc.alpha[..n].to_vec();
    let beta: Vec<f64> = rc.beta[1..=n].to_vec();
    let ratio = alpha.iter().zip(&beta).map(|(a, b)| a / sqrt(*b)).collect();
    let mut report = ConvergenceReport {
        q,
        verdict,
        alpha_limit: None,
        beta_limit: None,
        alpha,
        beta,
        alpha_deviation: Vec::new(),
        beta_deviation: Vec::new(),
        ratio,
        terminal_moment_gap: Vec::new(),
    };
    if !verdict.is_in_class() {
        return Ok(report);
    }
    let (al, bl) = asymptotic_limits(j, q)?;
    report.alpha_limit = Some(al);
    report.beta_limit = Some(bl);
    report.alpha_deviation = report.alpha.iter().map(|a| abs(a - al)).collect();
    report.beta_deviation = report.beta.iter().map(|b| abs(b - bl)).collect();
    if Mapping::from_q(q).is_ok() {
        report.terminal_moment_gap = moment_gaps(j, q, n.min(GAP_MAX_DEPTH))?;
    }
    Ok(report)
}

fn moment_gaps(j: &SpectralDensity, q: f64, depth: usize) -> Result<Vec<Vec<f64>>> {
    let base = measure_from_sd(j, q)?;
    let seq = SecondarySequence::new(&base, SequenceMode::Normalized, depth)?;
    let (a, b) = mapped_hull(j, q)?;
    let target = Measure::semicircle(a, b)?.moments(GAP_MAX_ORDER)?.values;
    let mut rows = Vec::with_capacity(depth);
    for k in 1..=depth {
        let c = seq.member(k)?.moments(GAP_MAX_ORDER)?.values;
        rows.push(c.iter().zip(&target).map(|(x, y)| abs(x - y)).collect());
    }
    Ok(rows)
}

/// Chebyshev moments `∫ cos(kθ) dμ_T` vanish for `k ≥ 1` on the terminal
/// measure in the angle variable; used as a sanity probe in tests.
#[cfg(test)]
fn chebyshev_probe(m: &Measure, k: usize) -> Result<f64> {
    let (a, b) = m.hull();
    m.integrate(
        |x| {
            let t = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0);
            libm::cos(k as f64 * libm::acos(t))
        },
        k,
    )
}
