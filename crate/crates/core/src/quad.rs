//! Composite Gauss-Legendre quadrature on geometrically graded panels.

use alloc::boxed::Box;
use alloc::vec::Vec;
use num_complex::Complex64;
use once_cell::race::OnceBox;

use crate::math::{abs, cos, Sum, PI};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) struct Rule {
    pub(crate) x: Vec<f64>,
    pub(crate) w: Vec<f64>,
}

const SIZES: [usize; 8] = [10, 16, 20, 24, 30, 40, 50, 64];
static RULES: [OnceBox<Rule>; 8] = [const { OnceBox::new() }; 8];

fn build_rule(n: usize) -> Rule {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if abs(dz) < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Rule { x, w }
}

/// Cached rule with at least `n` points (sizes above 64 are clamped).
pub(crate) fn rule(n: usize) -> &'static Rule {
    let idx = SIZES.iter().position(|&s| s >= n).unwrap_or(SIZES.len() - 1);
    RULES[idx].get_or_init(|| Box::new(build_rule(SIZES[idx])))
}

/// Grading ratio between consecutive layers.
pub(crate) const SIGMA: f64 = 0.2;
const LN_INV_SIGMA: f64 = 1.609_437_912_434_100_3;

/// Layers needed to push the neglected end piece of an `x^e` singularity
/// below roughly `1e-16` relative.
pub(crate) fn layers_for_exponent(e: f64) -> u32 {
    let e1 = (e + 1.0).max(0.05);
    let l = 16.0 * core::f64::consts::LN_10 / (e1 * LN_INV_SIGMA);
    (libm::ceil(l) as u32).clamp(1, 200)
}

/// Default layer count toward a point with no stated singularity type.
pub(crate) const DEFAULT_LAYERS: u32 = 23;

/// Grading toward one end of a segment: layer count and the algebraic
/// exponent of the integrand there (0 when unknown).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Grade {
    pub(crate) layers: u32,
    pub(crate) exponent: f64,
}

impl Grade {
    pub(crate) const NONE: Grade = Grade { layers: 0, exponent: 0.0 };

    pub(crate) fn layers(layers: u32) -> Self {
        Grade { layers, exponent: 0.0 }
    }
}

/// One interval of a composite rule.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Segment {
    pub(crate) lo: f64,
    pub(crate) hi: f64,
    pub(crate) grade_lo: Grade,
    pub(crate) grade_hi: Grade,
    pub(crate) panels: u32,
}

/// Resolution knobs shared by every composite rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Resolution {
    pub(crate) points: usize,
    pub(crate) panels: u32,
    pub(crate) extra_layers: u32,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { points: 20, panels: 4, extra_layers: 0 }
    }
}

impl Resolution {
    pub(crate) fn refined(self) -> Self {
        Resolution {
            points: (self.points + 10).min(64),
            panels: self.panels * 2,
            extra_layers: self.extra_layers + 6,
        }
    }
}

fn cap_layers(layers: u32, h: f64, end: f64) -> (u32, bool) {
    let floor = 8.0 * f64::EPSILON * abs(end);
    let mut l = layers;
    let mut width = h * libm::pow(SIGMA, l as f64);
    while l > 0 && width < floor {
        l -= 1;
        width /= SIGMA;
    }
    (l, l < layers)
}

/// Calls `f(x, w)` for every node of the composite rule over `segs`.
pub(crate) fn for_each_node(segs: &[Segment], points: usize, mut f: impl FnMut(f64, f64)) {
    let r = rule(points);
    // With a known exponent `e` at `anchor`, weights are rescaled by
    // `(intended / actual offset)^e` so that rounding of node positions is
    // exact for `t^e`.
    let panel = |anchor: f64, sign: f64, off_lo: f64, off_hi: f64, e: f64, f: &mut dyn FnMut(f64, f64)| {
        let mid = 0.5 * (off_lo + off_hi);
        let half = 0.5 * (off_hi - off_lo);
        for (t, w) in r.x.iter().zip(r.w.iter()) {
            let off = mid + half * t;
            let x = anchor + sign * off;
            if x == anchor {
                continue;
            }
            let fix = if e == 0.0 { 1.0 } else { libm::pow(off / abs(x - anchor), e) };
            f(x, w * half * fix);
        }
    };
    // Layers shrink by SIGMA toward `anchor`. When they hit the rounding
    // floor at a power-law end, the strip left over gets one node carrying
    // the exact weight of `t^e`.
    let graded = |anchor: f64, sign: f64, g: Grade, h: f64, f: &mut dyn FnMut(f64, f64)| {
        let (l, capped) = cap_layers(g.layers, h, anchor);
        let mut outer = h;
        let power = g.exponent != 0.0;
        for _ in 0..l {
            let mut inner = outer * SIGMA;
            if power {
                inner = abs(anchor + sign * inner - anchor);
            }
            panel(anchor, sign, inner, outer, g.exponent, f);
            outer = inner;
        }
        if capped && power {
            f(anchor + sign * outer, outer / (g.exponent + 1.0).max(1e-3));
        } else {
            panel(anchor, sign, 0.0, outer, g.exponent, f);
        }
    };
    for s in segs {
        let width = s.hi - s.lo;
        if !(width > 0.0) {
            continue;
        }
        let nblocks = s.panels + u32::from(s.grade_lo.layers > 0) + u32::from(s.grade_hi.layers > 0);
        let h = width / nblocks.max(1) as f64;
        let mut start = s.lo;
        let mut end = s.hi;
        if s.grade_lo.layers > 0 {
            graded(s.lo, 1.0, s.grade_lo, h, &mut f);
            start = s.lo + h;
        }
        if s.grade_hi.layers > 0 {
            graded(s.hi, -1.0, s.grade_hi, h, &mut f);
            end = s.hi - h;
        }
        if s.panels > 0 {
            let ph = (end - start) / s.panels as f64;
            for k in 0..s.panels {
                let a = start + ph * k as f64;
                let b = if k + 1 == s.panels { end } else { a + ph };
                panel(a, 1.0, 0.0, b - a, 0.0, &mut f);
            }
        }
    }
}

pub(crate) fn integrate(segs: &[Segment], points: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = Sum::default();
    for_each_node(segs, points, |x, w| acc.add(w * f(x)));
    acc.value()
}

pub(crate) fn integrate_c(
    segs: &[Segment],
    points: usize,
    mut f: impl FnMut(f64) -> Complex64,
) -> Complex64 {
    let (mut re, mut im) = (Sum::default(), Sum::default());
    for_each_node(segs, points, |x, w| {
        let v = f(x);
        re.add(w * v.re);
        im.add(w * v.im);
    });
    Complex64::new(re.value(), im.value())
}

/// Splits `[lo, hi]` at the interior `breaks`, grading toward every break.
/// `grade_lo`/`grade_hi` apply to the outer ends.
pub(crate) fn split_segment(
    lo: f64,
    hi: f64,
    grade_lo: Grade,
    grade_hi: Grade,
    panels: u32,
    breaks: &[(f64, u32)],
    out: &mut Vec<Segment>,
) {
    let mut pts: Vec<(f64, Grade)> = breaks
        .iter()
        .filter(|&&(b, _)| b > lo && b < hi)
        .map(|&(b, l)| (b, Grade::layers(l)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|next, kept| {
        let same = next.0 == kept.0;
        if same && next.1.layers > kept.1.layers {
            kept.1 = next.1;
        }
        same
    });
    let mut left = (lo, grade_lo);
    let width = hi - lo;
    for &(b, g) in &pts {
        let share = libm::ceil((b - left.0) / width * panels as f64).max(1.0) as u32;
        out.push(Segment { lo: left.0, hi: b, grade_lo: left.1, grade_hi: g, panels: share });
        left = (b, g);
    }
    let share = libm::ceil((hi - left.0) / width * panels as f64).max(1.0) as u32;
    out.push(Segment { lo: left.0, hi, grade_lo: left.1, grade_hi, panels: share });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let r = rule(20);
        let s: f64 = r.w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m38: f64 = r.x.iter().zip(&r.w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((m38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_handles_endpoint_singularity() {
        let segs = [Segment {
            lo: 0.0,
            hi: 1.0,
            grade_lo: Grade { layers: layers_for_exponent(-0.5), exponent: -0.5 },
            grade_hi: Grade::layers(DEFAULT_LAYERS),
            panels: 2,
        }];
        let v = integrate(&segs, 20, |x| 1.0 / x.sqrt());
        assert!((v - 2.0).abs() < 1e-13, "{v}");
        let l = integrate(&segs, 20, |x| x.ln());
        assert!((l + 1.0).abs() < 1e-13, "{l}");
    }

    #[test]
    fn breakpoints_resolve_interior_kinks() {
        let mut segs = Vec::new();
        split_segment(-1.0, 2.0, Grade::NONE, Grade::NONE, 4, &[(0.3, DEFAULT_LAYERS)], &mut segs);
        let v = integrate(&segs, 20, |x| (x - 0.3).abs().ln());
        let exact = 1.3 * 1.3f64.ln() - 1.3 + 1.7 * 1.7f64.ln() - 1.7;
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn singularity_at_a_nonzero_end_is_capped_exactly() {
        let e = -0.46;
        let g = Grade { layers: layers_for_exponent(e), exponent: e };
        let segs = [Segment { lo: 0.7, hi: 1.9, grade_lo: g, grade_hi: g, panels: 2 }];
        let v = integrate(&segs, 20, |x| ((x - 0.7) * (1.9 - x)).powf(e));
        let exact = 1.2f64.powf(2.0 * e + 1.0) * crate::math::gamma(e + 1.0).powi(2) / crate::math::gamma(2.0 * e + 2.0);
        assert!((v - exact).abs() < 1e-13 * exact, "{v} vs {exact}");
    }
}
