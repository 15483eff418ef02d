//! Spectral densities, measures and their moments.
//!
//! A [`Measure`] is a nonnegative weight on a sorted list of disjoint
//! intervals, optionally with point masses. Quadrature over it is a composite
//! Gauss-Legendre rule graded toward the interval ends; endpoint exponent
//! hints control how deep the grading goes. Unbounded intervals are truncated
//! inside quadrature only, using a [`TailBound`] when one is known and an
//! empirical decay search otherwise.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

use once_cell::race::OnceBox;

use crate::error::{Error, Result};
use crate::math::{abs, exp, gamma, ln, pow, sqrt, Sum, PI};
use crate::quad::{self, Grade, Resolution, Segment, DEFAULT_LAYERS};

/// Shared scalar function of one real variable.
pub type WeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed interval `[lo, hi]`; `hi` may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi > lo) || hi.is_nan() {
            return Err(Error::DomainError("interval must satisfy finite lo < hi"));
        }
        Ok(Interval { lo, hi })
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn check_intervals(iv: &[Interval]) -> Result<()> {
    if iv.is_empty() {
        return Err(Error::DomainError("support needs at least one interval"));
    }
    for (k, i) in iv.iter().enumerate() {
        Interval::new(i.lo, i.hi)?;
        if k + 1 < iv.len() {
            if !i.is_bounded() {
                return Err(Error::DomainError("only the last interval may be unbounded"));
            }
            if iv[k + 1].lo < i.hi {
                return Err(Error::DomainError("support intervals must be sorted and disjoint"));
            }
        }
    }
    Ok(())
}

/// Merges touching intervals, so `[0,1] ∪ [1,2]` counts as gapless.
fn merge_touching(iv: &[Interval]) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(iv.len());
    for &i in iv {
        match out.last_mut() {
            Some(last) if last.hi == i.lo => last.hi = i.hi,
            _ => out.push(i),
        }
    }
    out
}

/// Upper bound on a weight far out in an unbounded tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailBound {
    /// `w(x) <= coeff * x^power * exp(-rate * x)`.
    Exponential { coeff: f64, power: f64, rate: f64 },
    /// `w(x) <= coeff * x^power * exp(-rate * sqrt(x))`.
    SqrtExponential { coeff: f64, power: f64, rate: f64 },
}

impl TailBound {
    fn scaled(self, c: f64) -> Self {
        match self {
            TailBound::Exponential { coeff, power, rate } => {
                TailBound::Exponential { coeff: coeff * c, power, rate }
            }
            TailBound::SqrtExponential { coeff, power, rate } => {
                TailBound::SqrtExponential { coeff: coeff * c, power, rate }
            }
        }
    }

    /// Bound for `w(x/λ)/λ`.
    fn rescaled(self, lambda: f64) -> Self {
        match self {
            TailBound::Exponential { coeff, power, rate } => TailBound::Exponential {
                coeff: coeff * pow(lambda, -power - 1.0),
                power,
                rate: rate / lambda,
            },
            TailBound::SqrtExponential { coeff, power, rate } => TailBound::SqrtExponential {
                coeff: coeff * pow(lambda, -power - 1.0),
                power,
                rate: rate / sqrt(lambda),
            },
        }
    }

    /// Bound on `∫_T^∞ x^k w(x) dx` together with the smallest `T` for
    /// which it is valid.
    fn tail(self, k: f64, t: f64) -> (f64, f64) {
        match self {
            TailBound::Exponential { coeff, power, rate } => {
                let m = (k + power).max(0.0);
                let tmin = 2.0 * m / rate;
                (2.0 * coeff * exp(m * ln(t) - rate * t) / rate, tmin)
            }
            TailBound::SqrtExponential { coeff, power, rate } => {
                let m = (2.0 * (k + power) + 1.0).max(0.0);
                let u = sqrt(t);
                let umin = 2.0 * m / rate;
                (4.0 * coeff * exp(m * ln(u) - rate * u) / rate, umin * umin)
            }
        }
    }
}

/// Closed-form families with analytic recurrence coefficients and reducers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasureFamily {
    /// `coeff * x^s` on `[0, upper]`.
    PowerLaw { coeff: f64, s: f64, upper: f64 },
    /// `coeff * x^s * exp(-x / scale)` on `[0, ∞)`.
    Laguerre { coeff: f64, s: f64, scale: f64 },
}

impl MeasureFamily {
    fn scaled(self, c: f64) -> Self {
        match self {
            MeasureFamily::PowerLaw { coeff, s, upper } => {
                MeasureFamily::PowerLaw { coeff: coeff * c, s, upper }
            }
            MeasureFamily::Laguerre { coeff, s, scale } => {
                MeasureFamily::Laguerre { coeff: coeff * c, s, scale }
            }
        }
    }

    fn rescaled(self, lambda: f64) -> Self {
        match self {
            MeasureFamily::PowerLaw { coeff, s, upper } => MeasureFamily::PowerLaw {
                coeff: coeff * pow(lambda, -s - 1.0),
                s,
                upper: upper * lambda,
            },
            MeasureFamily::Laguerre { coeff, s, scale } => MeasureFamily::Laguerre {
                coeff: coeff * pow(lambda, -s - 1.0),
                s,
                scale: scale * lambda,
            },
        }
    }

    /// Total mass `∫ w`.
    pub fn mass(&self) -> f64 {
        match *self {
            MeasureFamily::PowerLaw { coeff, s, upper } => coeff * pow(upper, s + 1.0) / (s + 1.0),
            MeasureFamily::Laguerre { coeff, s, scale } => {
                coeff * pow(scale, s + 1.0) * gamma(s + 1.0)
            }
        }
    }
}

#[derive(Default)]
struct CutoffCache {
    slots: Vec<OnceBox<f64>>,
}

impl CutoffCache {
    fn new() -> Arc<Self> {
        let mut slots = Vec::with_capacity(CUTOFF_SLOTS);
        slots.resize_with(CUTOFF_SLOTS, OnceBox::new);
        Arc::new(CutoffCache { slots })
    }
}

const CUTOFF_SLOTS: usize = 512;

/// Target for neglected tail contributions, relative to the retained part.
const TAIL_TOL: f64 = 1e-17;

/// A positive measure `μ̄(x) dx + Σ m_k δ(x - x_k)`.
#[derive(Clone)]
pub struct Measure {
    weight: WeightFn,
    derivative: Option<WeightFn>,
    intervals: Vec<Interval>,
    exponents: Vec<(Option<f64>, Option<f64>)>,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
    point_masses: Vec<(f64, f64)>,
    tail: Option<TailBound>,
    tail_scale: f64,
    family: Option<MeasureFamily>,
    cutoffs: Arc<CutoffCache>,
}

impl core::fmt::Debug for Measure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Measure")
            .field("intervals", &self.intervals)
            .field("exponents", &self.exponents)
            .field("point_masses", &self.point_masses)
            .field("tail", &self.tail)
            .field("family", &self.family)
            .finish()
    }
}

impl Measure {
    /// Measure with weight `w` on the given sorted, disjoint intervals.
    /// Touching intervals are merged.
    pub fn new(w: impl Fn(f64) -> f64 + Send + Sync + 'static, intervals: &[Interval]) -> Result<Self> {
        Self::from_arc(Arc::new(w), intervals)
    }

    pub fn from_arc(w: WeightFn, intervals: &[Interval]) -> Result<Self> {
        check_intervals(intervals)?;
        let intervals = merge_touching(intervals);
        let n = intervals.len();
        let tail_scale = intervals.last().map(|i| i.lo.abs().max(1.0)).unwrap_or(1.0);
        Ok(Measure {
            weight: w,
            derivative: None,
            intervals,
            exponents: alloc::vec![(None, None); n],
            breakpoints: Vec::new(),
            knots: Vec::new(),
            point_masses: Vec::new(),
            tail: None,
            tail_scale,
            family: None,
            cutoffs: CutoffCache::new(),
        })
    }

    /// `coeff * x^s` on `[0, upper]`.
    pub fn power_law(coeff: f64, s: f64, upper: f64) -> Result<Self> {
        if !(s > -1.0 && coeff > 0.0 && upper > 0.0 && upper.is_finite()) {
            return Err(Error::DomainError("power law needs s > -1, coeff > 0, finite upper > 0"));
        }
        let mut m = Measure::new(move |x| if x > 0.0 { coeff * pow(x, s) } else { 0.0 }, &[Interval {
            lo: 0.0,
            hi: upper,
        }])?
        .with_derivative(move |x| if x > 0.0 { coeff * s * pow(x, s - 1.0) } else { 0.0 });
        m.exponents[0] = (Some(s), Some(0.0));
        m.family = Some(MeasureFamily::PowerLaw { coeff, s, upper });
        Ok(m)
    }

    /// `coeff * x^s * exp(-x / scale)` on `[0, ∞)`.
    pub fn laguerre(coeff: f64, s: f64, scale: f64) -> Result<Self> {
        if !(s > -1.0 && coeff > 0.0 && scale > 0.0 && scale.is_finite()) {
            return Err(Error::DomainError("Laguerre weight needs s > -1, coeff > 0, scale > 0"));
        }
        let w = move |x: f64| if x > 0.0 { coeff * pow(x, s) * exp(-x / scale) } else { 0.0 };
        let dw = move |x: f64| {
            if x > 0.0 {
                coeff * pow(x, s - 1.0) * exp(-x / scale) * (s - x / scale)
            } else {
                0.0
            }
        };
        let mut m = Measure::new(w, &[Interval { lo: 0.0, hi: f64::INFINITY }])?.with_derivative(dw);
        m.exponents[0] = (Some(s), None);
        m.tail = Some(TailBound::Exponential { coeff, power: s, rate: 1.0 / scale });
        m.tail_scale = scale;
        m.family = Some(MeasureFamily::Laguerre { coeff, s, scale });
        Ok(m)
    }

    /// Normalized semicircle `8 sqrt((x-a)(b-x)) / (π (b-a)^2)` on `[a, b]`.
    pub fn semicircle(a: f64, b: f64) -> Result<Self> {
        let iv = Interval::new(a, b)?;
        let c = 8.0 / (PI * (b - a) * (b - a));
        let w = move |x: f64| {
            let p = (x - a) * (b - x);
            if p > 0.0 { c * sqrt(p) } else { 0.0 }
        };
        let mid = 0.5 * (a + b);
        let dw = move |x: f64| {
            let p = (x - a) * (b - x);
            if p > 0.0 { c * (mid - x) / sqrt(p) } else { 0.0 }
        };
        let mut m = Measure::new(w, &[iv])?.with_derivative(dw);
        m.exponents[0] = (Some(0.5), Some(0.5));
        Ok(m)
    }

    /// Constant weight `c` on the union of `intervals`.
    pub fn uniform(c: f64, intervals: &[Interval]) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::DomainError("uniform weight must be positive"));
        }
        let iv: Vec<Interval> = intervals.to_vec();
        let inside = iv.clone();
        let mut m = Measure::new(
            move |x| if inside.iter().any(|i| i.contains(x)) { c } else { 0.0 },
            &iv,
        )?
        .with_derivative(|_| 0.0);
        for e in m.exponents.iter_mut() {
            *e = (Some(0.0), Some(0.0));
        }
        Ok(m)
    }

    /// States that the weight behaves like `|x - end|^e` at the ends of
    /// interval `idx`.
    pub fn with_endpoint_exponents(mut self, idx: usize, lo: Option<f64>, hi: Option<f64>) -> Self {
        if let Some(e) = self.exponents.get_mut(idx) {
            *e = (lo, hi);
        }
        self
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// Interior points where the weight may be singular; quadrature splits
    /// there and grades toward them.
    pub fn with_breakpoints(mut self, pts: &[f64]) -> Self {
        self.breakpoints = pts.to_vec();
        self.breakpoints.sort_by(|a, b| a.total_cmp(b));
        self
    }

    /// Interior points where the weight is continuous but not smooth, such as
    /// spline knots; quadrature splits there without grading.
    pub fn with_knots(mut self, pts: &[f64]) -> Self {
        self.knots = pts.to_vec();
        self.knots.sort_by(|a, b| a.total_cmp(b));
        self
    }

    pub fn with_tail_bound(mut self, tail: TailBound) -> Self {
        self.tail = Some(tail);
        self.cutoffs = CutoffCache::new();
        self
    }

    /// Length scale used by the empirical tail search.
    pub fn with_tail_scale(mut self, scale: f64) -> Self {
        if scale > 0.0 && scale.is_finite() {
            self.tail_scale = scale;
            self.cutoffs = CutoffCache::new();
        }
        self
    }

    pub fn with_point_masses(mut self, masses: &[(f64, f64)]) -> Result<Self> {
        if masses.iter().any(|&(x, m)| !(x.is_finite() && m > 0.0)) {
            return Err(Error::DomainError("point masses need finite location and positive mass"));
        }
        self.point_masses = masses.to_vec();
        self.family = None;
        self.cutoffs = CutoffCache::new();
        Ok(self)
    }

    /// Weight with the same support as `self`; all hints are inherited.
    pub(crate) fn with_weight(&self, w: WeightFn) -> Self {
        Measure {
            weight: w,
            derivative: None,
            family: None,
            point_masses: Vec::new(),
            tail: None,
            cutoffs: CutoffCache::new(),
            ..self.clone()
        }
    }

    /// Density value; zero outside the support.
    pub fn weight(&self, x: f64) -> f64 {
        if self.intervals.iter().any(|i| i.contains(x)) {
            (self.weight)(x)
        } else {
            0.0
        }
    }

    pub fn weight_fn(&self) -> &WeightFn {
        &self.weight
    }

    pub(crate) fn derivative_fn(&self) -> Option<&WeightFn> {
        self.derivative.as_ref()
    }

    /// Density derivative, analytic if supplied and numerical otherwise.
    pub fn weight_derivative(&self, x: f64) -> f64 {
        if let Some(d) = &self.derivative {
            return d(x);
        }
        let (a, b) = self.hull();
        let b = if b.is_finite() { b } else { x + self.tail_scale };
        let h = 1e-4 * (b - a).min(self.tail_scale.max(1e-300)).max(1e-300);
        let (lo, hi) = (x - 2.0 * h, x + 2.0 * h);
        let f = |t: f64| (self.weight)(t);
        if lo > a && hi < b {
            (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
        } else if lo <= a {
            (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
        } else {
            (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h)
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub(crate) fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect()
    }

    pub(crate) fn knots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.knots.iter().copied().filter(|&b| b > lo && b < hi).collect()
    }

    pub fn point_masses(&self) -> &[(f64, f64)] {
        &self.point_masses
    }

    pub fn family(&self) -> Option<MeasureFamily> {
        self.family
    }

    pub fn tail_bound(&self) -> Option<TailBound> {
        self.tail
    }

    pub fn endpoint_exponents(&self) -> &[(Option<f64>, Option<f64>)] {
        &self.exponents
    }

    /// Hull `[a, b]` of the continuous part.
    pub fn hull(&self) -> (f64, f64) {
        (self.intervals[0].lo, self.intervals[self.intervals.len() - 1].hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.hull().1.is_finite()
    }

    /// Gap classification uses the continuous part only.
    pub fn is_gapless(&self) -> bool {
        self.intervals.len() == 1
    }

    /// Open gaps `(hi_k, lo_{k+1})` between consecutive intervals.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.intervals.windows(2).map(|w| (w[0].hi, w[1].lo)).collect()
    }

    /// Multiplies the weight (and point masses) by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::DomainError("scale factor must be positive"));
        }
        let w = self.weight.clone();
        let d = self.derivative.clone();
        Ok(Measure {
            weight: Arc::new(move |x| c * w(x)),
            derivative: d.map(|d| Arc::new(move |x| c * d(x)) as WeightFn),
            point_masses: self.point_masses.iter().map(|&(x, m)| (x, c * m)).collect(),
            tail: self.tail.map(|t| t.scaled(c)),
            family: self.family.map(|f| f.scaled(c)),
            cutoffs: CutoffCache::new(),
            ..self.clone()
        })
    }

    /// Push-forward under `x -> λx`: weight `w(x/λ)/λ` on the scaled support.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::DomainError("rescale factor must be positive"));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let w = self.weight.clone();
        let d = self.derivative.clone();
        Ok(Measure {
            weight: Arc::new(move |x| w(x / lambda) / lambda),
            derivative: d.map(|d| Arc::new(move |x| d(x / lambda) / (lambda * lambda)) as WeightFn),
            intervals: self
                .intervals
                .iter()
                .map(|i| Interval { lo: i.lo * lambda, hi: i.hi * lambda })
                .collect(),
            exponents: self.exponents.clone(),
            breakpoints: self.breakpoints.iter().map(|b| b * lambda).collect(),
            knots: self.knots.iter().map(|b| b * lambda).collect(),
            point_masses: self.point_masses.iter().map(|&(x, m)| (x * lambda, m)).collect(),
            tail: self.tail.map(|t| t.rescaled(lambda)),
            tail_scale: self.tail_scale * lambda,
            family: self.family.map(|f| f.rescaled(lambda)),
            cutoffs: CutoffCache::new(),
        })
    }

    /// Divides by the zeroth moment.
    pub fn normalize(&self) -> Result<Self> {
        let c0 = self.mass()?;
        if !(c0 > 1e-300) || !c0.is_finite() {
            return Err(Error::ZeroMass);
        }
        self.scaled(1.0 / c0)
    }

    /// Zeroth moment, closed form for tagged families.
    pub fn mass(&self) -> Result<f64> {
        if let Some(f) = self.family {
            return Ok(f.mass());
        }
        let c0 = self.integrate(|_| 1.0, 0)?;
        if !(c0 > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(c0)
    }

    /// `∫ f dμ`, with `degree` telling the tail search how fast `f` grows.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, degree: usize) -> Result<f64> {
        let segs = self.segments(degree, Resolution::default(), &[])?;
        let w = &self.weight;
        let mut acc = Sum::default();
        acc.add(quad::integrate(&segs, Resolution::default().points, |x| {
            let v = w(x);
            if v == 0.0 { 0.0 } else { v * f(x) }
        }));
        for &(x, m) in &self.point_masses {
            acc.add(m * f(x));
        }
        Ok(acc.value())
    }

    /// Moments `C_0..=C_n`.
    pub fn moments(&self, n: usize) -> Result<MomentSequence> {
        let mut values = Vec::with_capacity(n + 1);
        if self.is_bounded() {
            let (nodes, weights) = self.discretize(n, Resolution { panels: 4 + n as u32 / 2, ..Default::default() })?;
            for k in 0..=n {
                let mut s = Sum::default();
                for (x, w) in nodes.iter().zip(&weights) {
                    s.add(w * crate::math::powi(*x, k as i32));
                }
                values.push(s.value());
            }
        } else {
            for k in 0..=n {
                values.push(self.integrate(|x| crate::math::powi(x, k as i32), k)?);
            }
        }
        if !(values[0] > 0.0) {
            return Err(Error::ZeroMass);
        }
        Ok(MomentSequence { values })
    }

    /// Quadrature nodes and `weight * quadrature-weight` products, point
    /// masses included, accurate for integrands growing like `x^degree`.
    pub(crate) fn discretize(&self, degree: usize, res: Resolution) -> Result<(Vec<f64>, Vec<f64>)> {
        let segs = self.segments(degree, res, &[])?;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let w = &self.weight;
        let mut bad = false;
        quad::for_each_node(&segs, res.points, |x, qw| {
            let v = w(x);
            if !v.is_finite() || v < 0.0 {
                bad = true;
            }
            if v > 0.0 {
                nodes.push(x);
                weights.push(v * qw);
            }
        });
        if bad {
            return Err(Error::DomainError("weight is negative or non-finite on its support"));
        }
        for &(x, m) in &self.point_masses {
            nodes.push(x);
            weights.push(m);
        }
        Ok((nodes, weights))
    }

    fn layers(&self, e: Option<f64>, res: Resolution) -> Grade {
        let layers = e.map(quad::layers_for_exponent).unwrap_or(DEFAULT_LAYERS) + res.extra_layers;
        Grade { layers, exponent: e.unwrap_or(0.0) }
    }

    /// Composite-rule segments over the continuous part, with the unbounded
    /// tail truncated for integrands up to `x^degree`. `breaks` adds interior
    /// split points with their own grading depth.
    pub(crate) fn segments(
        &self,
        degree: usize,
        res: Resolution,
        breaks: &[(f64, u32)],
    ) -> Result<Vec<Segment>> {
        let mut all: Vec<(f64, u32)> = self
            .breakpoints
            .iter()
            .map(|&b| (b, DEFAULT_LAYERS + res.extra_layers))
            .chain(self.knots.iter().map(|&b| (b, 0)))
            .collect();
        all.extend_from_slice(breaks);
        let mut segs = Vec::new();
        for (k, iv) in self.intervals.iter().enumerate() {
            let (elo, ehi) = self.exponents[k];
            let glo = self.layers(elo, res);
            if iv.is_bounded() {
                let ghi = self.layers(ehi, res);
                quad::split_segment(iv.lo, iv.hi, glo, ghi, res.panels, &all, &mut segs);
            } else {
                let t = self.cutoff(degree)?;
                let panels = libm::ceil((t - iv.lo) / self.tail_scale).clamp(1.0, 4096.0) as u32;
                let panels = panels.max(res.panels) * (res.panels / 4).max(1);
                quad::split_segment(iv.lo, t, glo, Grade::NONE, panels, &all, &mut segs);
            }
        }
        Ok(segs)
    }

    /// Effective upper end of quadrature for integrands growing like
    /// `x^degree`; equals `b` for bounded support.
    pub fn effective_upper(&self, degree: usize) -> Result<f64> {
        let (_, b) = self.hull();
        if b.is_finite() { Ok(b) } else { self.cutoff(degree) }
    }

    fn cutoff(&self, degree: usize) -> Result<f64> {
        if degree < CUTOFF_SLOTS {
            if let Some(t) = self.cutoffs.slots[degree].get() {
                return Ok(*t);
            }
        }
        let t = match self.tail {
            Some(bound) => self.bounded_cutoff(bound, degree)?,
            None => self.empirical_cutoff(degree)?,
        };
        if degree < CUTOFF_SLOTS {
            let _ = self.cutoffs.slots[degree].set(Box::new(t));
        }
        Ok(t)
    }

    fn tail_start(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].lo
    }

    fn head_integral(&self, degree: usize, t: f64) -> f64 {
        let lo = self.tail_start();
        let last = self.intervals.len() - 1;
        let (elo, _) = self.exponents[last];
        let panels = libm::ceil((t - lo) / self.tail_scale).clamp(1.0, 4096.0) as u32;
        let segs = [Segment {
            lo,
            hi: t,
            grade_lo: self.layers(elo, Resolution::default()),
            grade_hi: Grade::NONE,
            panels,
        }];
        let w = &self.weight;
        quad::integrate(&segs, 20, |x| abs(w(x)) * crate::math::powi(abs(x), degree as i32))
    }

    /// Scale the tail of `x^degree w` is measured against: the geometric mean
    /// of the zeroth and `degree`-th moments. The plain `degree`-th moment
    /// overstates the norm of orthogonal polynomials by many orders.
    fn tail_reference(&self, degree: usize, t: f64) -> Result<f64> {
        let head = self.head_integral(degree, t);
        if degree == 0 {
            return Ok(head);
        }
        Ok(sqrt(self.head_integral(0, self.cutoff(0)?) * head))
    }

    fn bounded_cutoff(&self, bound: TailBound, degree: usize) -> Result<f64> {
        let k = degree as f64;
        let lo = self.tail_start();
        let (_, tmin) = bound.tail(k, lo.max(1e-300));
        let mut t = tmin.max(lo + self.tail_scale).max(lo + 1e-300);
        if lo > 0.0 {
            t = t.max(2.0 * lo);
        }
        let head = self.tail_reference(degree, t)?;
        if !(head > 0.0 && head.is_finite()) {
            return Err(Error::DivergentMoment { order: degree });
        }
        for _ in 0..4000 {
            let (b, _) = bound.tail(k, t);
            if b <= TAIL_TOL * head {
                return Ok(t);
            }
            t += 0.25 * self.tail_scale.max(t * 0.01);
        }
        Err(Error::DivergentMoment { order: degree })
    }

    fn empirical_cutoff(&self, degree: usize) -> Result<f64> {
        let m0 = if degree == 0 { None } else { Some(self.head_integral(0, self.cutoff(0)?)) };
        let lo = self.tail_start();
        let w = &self.weight;
        let f = |x: f64| abs(w(x)) * crate::math::powi(abs(x), degree as i32);
        let last = self.intervals.len() - 1;
        let (elo, _) = self.exponents[last];
        let mut width = self.tail_scale;
        let mut a = lo;
        let mut total = quad::integrate(
            &[Segment {
                lo: a,
                hi: a + width,
                grade_lo: self.layers(elo, Resolution::default()),
                grade_hi: Grade::NONE,
                panels: 1,
            }],
            20,
            f,
        );
        a += width;
        let m0 = m0.unwrap_or(total);
        let mut quiet = 0;
        let mut prev = f64::INFINITY;
        for _ in 0..600 {
            let seg = [Segment { lo: a, hi: a + width, grade_lo: Grade::NONE, grade_hi: Grade::NONE, panels: 1 }];
            let piece = quad::integrate(&seg, 20, f);
            if !piece.is_finite() {
                return Err(Error::DivergentMoment { order: degree });
            }
            total += piece;
            a += width;
            if piece <= TAIL_TOL * sqrt(m0 * total) && piece <= prev {
                quiet += 1;
                if quiet >= 3 {
                    return Ok(a);
                }
            } else {
                quiet = 0;
            }
            prev = piece;
            width *= 1.25;
        }
        Err(Error::DivergentMoment { order: degree })
    }
}

/// Moments `C_0..=C_N` of a measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    pub values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first().is_none_or(|&c| !(c > 0.0)) {
            return Err(Error::ZeroMass);
        }
        Ok(MomentSequence { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// LDLᵀ pivots of the Hankel matrices `[C_{i+j}]_{i,j<=m}`, `2m <= N`.
    pub fn hankel_pivots(&self) -> Vec<f64> {
        let k = (self.values.len() - 1) / 2 + 1;
        let h = |i: usize, j: usize| self.values[i + j];
        let mut l = alloc::vec![0.0; k * k];
        let mut d = alloc::vec![0.0; k];
        for i in 0..k {
            for j in 0..i {
                let mut s = h(i, j);
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p] * d[p];
                }
                l[i * k + j] = if d[j] != 0.0 { s / d[j] } else { 0.0 };
            }
            let mut s = h(i, i);
            for p in 0..i {
                s -= l[i * k + p] * l[i * k + p] * d[p];
            }
            d[i] = s;
            l[i * k + i] = 1.0;
        }
        d
    }

    /// Every Hankel pivot is at least `-tol` times its diagonal entry.
    pub fn is_hankel_positive(&self, tol: f64) -> bool {
        self.hankel_pivots()
            .iter()
            .enumerate()
            .all(|(i, &p)| p >= -tol * abs(self.values[2 * i]))
    }
}

/// Closed-form spectral-density families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SdFamily {
    /// `2πα ω_c^{1-s} ω^s` on `[0, ω_c]`.
    PowerLaw { s: f64, alpha: f64, omega_c: f64 },
    /// `2πα ω_c^{1-s} ω^s e^{-ω/ω_c}` on `[0, ∞)`.
    PowerLawExpCutoff { s: f64, alpha: f64, omega_c: f64 },
    Tabulated,
    Custom,
}

/// Bath spectral density `J(ω)` on a union of frequency intervals.
#[derive(Clone)]
pub struct SpectralDensity {
    eval: WeightFn,
    support: Vec<Interval>,
    family: SdFamily,
    exponents: Vec<(Option<f64>, Option<f64>)>,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
    tail: Option<TailBound>,
    tail_scale: f64,
}

impl core::fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SpectralDensity")
            .field("support", &self.support)
            .field("family", &self.family)
            .finish()
    }
}

impl SpectralDensity {
    pub fn new(
        j: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: &[Interval],
        family: SdFamily,
    ) -> Result<Self> {
        Self::from_arc(Arc::new(j), support, family)
    }

    pub fn from_arc(j: WeightFn, support: &[Interval], family: SdFamily) -> Result<Self> {
        check_intervals(support)?;
        if support[0].lo < 0.0 {
            return Err(Error::DomainError("spectral density support must lie in ω >= 0"));
        }
        let support = merge_touching(support);
        let n = support.len();
        let tail_scale = support.last().map(|i| i.lo.max(1.0)).unwrap_or(1.0);
        Ok(SpectralDensity {
            eval: j,
            support,
            family,
            exponents: alloc::vec![(None, None); n],
            breakpoints: Vec::new(),
            knots: Vec::new(),
            tail: None,
            tail_scale,
        })
    }

    /// `J(ω) = 2πα ω_c^{1-s} ω^s` on `[0, ω_c]`.
    pub fn power_law(s: f64, alpha: f64, omega_c: f64) -> Result<Self> {
        check_family(s, alpha, omega_c)?;
        let c = 2.0 * PI * alpha * pow(omega_c, 1.0 - s);
        let mut j = SpectralDensity::new(
            move |w| if w > 0.0 && w <= omega_c { c * pow(w, s) } else { 0.0 },
            &[Interval { lo: 0.0, hi: omega_c }],
            SdFamily::PowerLaw { s, alpha, omega_c },
        )?;
        j.exponents[0] = (Some(s), Some(0.0));
        Ok(j)
    }

    /// `J(ω) = 2πα ω_c^{1-s} ω^s e^{-ω/ω_c}` on `[0, ∞)`.
    pub fn power_law_exp_cutoff(s: f64, alpha: f64, omega_c: f64) -> Result<Self> {
        check_family(s, alpha, omega_c)?;
        let c = 2.0 * PI * alpha * pow(omega_c, 1.0 - s);
        let mut j = SpectralDensity::new(
            move |w| if w > 0.0 { c * pow(w, s) * exp(-w / omega_c) } else { 0.0 },
            &[Interval { lo: 0.0, hi: f64::INFINITY }],
            SdFamily::PowerLawExpCutoff { s, alpha, omega_c },
        )?;
        j.exponents[0] = (Some(s), None);
        j.tail = Some(TailBound::Exponential { coeff: c, power: s, rate: 1.0 / omega_c });
        j.tail_scale = omega_c;
        Ok(j)
    }

    pub fn with_endpoint_exponents(mut self, idx: usize, lo: Option<f64>, hi: Option<f64>) -> Self {
        if let Some(e) = self.exponents.get_mut(idx) {
            *e = (lo, hi);
        }
        self
    }

    /// See [`Measure::with_breakpoints`].
    pub fn with_breakpoints(mut self, pts: &[f64]) -> Self {
        self.breakpoints = pts.to_vec();
        self
    }

    /// See [`Measure::with_knots`].
    pub fn with_knots(mut self, pts: &[f64]) -> Self {
        self.knots = pts.to_vec();
        self
    }

    pub fn with_tail_bound(mut self, tail: TailBound) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_tail_scale(mut self, scale: f64) -> Self {
        if scale > 0.0 && scale.is_finite() {
            self.tail_scale = scale;
        }
        self
    }

    /// `J(ω)`; zero outside the support.
    pub fn eval(&self, omega: f64) -> f64 {
        if self.support.iter().any(|i| i.contains(omega)) {
            (self.eval)(omega)
        } else {
            0.0
        }
    }

    pub fn eval_fn(&self) -> &WeightFn {
        &self.eval
    }

    pub fn support(&self) -> &[Interval] {
        &self.support
    }

    pub fn family(&self) -> SdFamily {
        self.family
    }

    pub fn endpoint_exponents(&self) -> &[(Option<f64>, Option<f64>)] {
        &self.exponents
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn tail_bound(&self) -> Option<TailBound> {
        self.tail
    }

    pub fn tail_scale(&self) -> f64 {
        self.tail_scale
    }

    pub fn omega_min(&self) -> f64 {
        self.support[0].lo
    }

    pub fn omega_max(&self) -> f64 {
        self.support[self.support.len() - 1].hi
    }

    pub fn is_bounded(&self) -> bool {
        self.omega_max().is_finite()
    }

    pub fn is_gapless(&self) -> bool {
        self.support.len() == 1
    }
}

fn check_family(s: f64, alpha: f64, omega_c: f64) -> Result<()> {
    if !(s > -1.0 && alpha > 0.0 && omega_c > 0.0 && omega_c.is_finite()) {
        return Err(Error::DomainError("power-law family needs s > -1, α > 0, ω_c > 0"));
    }
    Ok(())
}

/// Root of `f(x) = target` in `[lo, hi]` for monotone `f`, by Brent's method.
pub(crate) fn brent(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if abs(fc) < abs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * abs(b) + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if abs(xm) <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if abs(e) >= tol1 && abs(fa) > abs(fb) {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = abs(p);
            if 2.0 * p < (3.0 * xm * q - abs(tol1 * q)).min(abs(e * q)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if abs(d) > tol1 { d } else { libm::copysign(tol1, xm) };
        fb = f(b);
    }
    None
}

/// Spectral density of modes with dispersion `g` and coupling `h` on
/// `[k_min, k_max]`: `J(ω) = π h²(k) / |g'(k)|` at `k = g⁻¹(ω)`.
///
/// `g_prime` may supply the derivative; otherwise it is taken numerically.
pub fn sd_from_dispersion(
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    k_min: f64,
    k_max: f64,
    g_prime: Option<WeightFn>,
) -> Result<SpectralDensity> {
    if !(k_min.is_finite() && k_max.is_finite() && k_max > k_min) {
        return Err(Error::DomainError("dispersion domain must be a finite interval"));
    }
    const GRID: usize = 257;
    let mut prev = g(k_min);
    let first = g(k_max) - prev;
    if !(first != 0.0) {
        return Err(Error::NonMonotoneDispersion);
    }
    let dir = first.signum();
    for i in 1..GRID {
        let k = k_min + (k_max - k_min) * i as f64 / (GRID - 1) as f64;
        let v = g(k);
        if !((v - prev) * dir > 0.0) {
            return Err(Error::NonMonotoneDispersion);
        }
        prev = v;
    }
    let (g_lo, g_hi) = (g(k_min), g(k_max));
    let (w_min, w_max) = if dir > 0.0 { (g_lo, g_hi) } else { (g_hi, g_lo) };
    if w_min < 0.0 {
        return Err(Error::DomainError("dispersion must map into ω >= 0"));
    }
    let g = Arc::new(g);
    let span = k_max - k_min;
    let gd: WeightFn = match g_prime {
        Some(d) => d,
        None => {
            let g = g.clone();
            Arc::new(move |k: f64| {
                // Richardson-extrapolated central differences, one-sided at the ends.
                let h0 = 1e-3 * span;
                let diff = |s: f64| {
                    if k - s < k_min {
                        (-3.0 * g(k) + 4.0 * g(k + s) - g(k + 2.0 * s)) / (2.0 * s)
                    } else if k + s > k_max {
                        (3.0 * g(k) - 4.0 * g(k - s) + g(k - 2.0 * s)) / (2.0 * s)
                    } else {
                        (g(k + s) - g(k - s)) / (2.0 * s)
                    }
                };
                let d1 = diff(h0);
                let d2 = diff(0.5 * h0);
                (4.0 * d2 - d1) / 3.0
            })
        }
    };
    let ginv = {
        let g = g.clone();
        move |w: f64| -> Result<f64> {
            let tol = 1e-15 * span.max(abs(k_min)).max(abs(k_max));
            brent(|k| g(k) - w, k_min, k_max, tol).ok_or(Error::InversionFailure(w))
        }
    };
    let j = move |w: f64| -> f64 {
        if !(w >= w_min && w <= w_max) {
            return 0.0;
        }
        let k = match ginv(w) {
            Ok(k) => k,
            Err(_) => return f64::NAN,
        };
        let mut d = abs(gd(k));
        let mut kk = k;
        if d == 0.0 {
            // Band edge with vanishing group velocity: step inside by a hair.
            let nudge = 1e-12 * span;
            kk = if k - k_min < k_max - k { k + nudge } else { k - nudge };
            d = abs(gd(kk));
        }
        let hv = h(kk);
        PI * hv * hv / d
    };
    let probe = j(0.5 * (w_min + w_max));
    if !probe.is_finite() {
        return Err(Error::InversionFailure(0.5 * (w_min + w_max)));
    }
    SpectralDensity::new(j, &[Interval::new(w_min, w_max)?], SdFamily::Custom)
}
