//! Thin scalar layer over `libm` plus the special functions the crate needs.

pub(crate) use libm::{atanh, cos, exp, fabs as abs, log as ln, pow, sqrt};

pub(crate) const PI: f64 = core::f64::consts::PI;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Exponential integral `Ei(x)` (principal value) for real `x != 0`.
pub fn expint_ei(x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < 0.0 {
        return -expint_e1(-x);
    }
    if x < 50.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= x / k;
            let add = term / k;
            sum += add;
            if add < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        EULER_GAMMA + ln(x) + sum
    } else {
        let mut sum = 1.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * k / x;
            if next > term || next < 1e-17 {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        exp(x) / x * sum
    }
}

/// `E1(x)` for `x > 0`.
fn expint_e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        loop {
            term *= -x / k;
            let add = term / k;
            sum += add;
            if abs(add) < 1e-17 * abs(sum).max(1e-300) {
                break;
            }
            k += 1.0;
        }
        -EULER_GAMMA - ln(x) - sum
    } else {
        // Modified Lentz on the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        loop {
            let an = -i * i;
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if abs(del - 1.0) < 1e-16 || i > 500.0 {
                break;
            }
            i += 1.0;
        }
        h * exp(-x)
    }
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Default, Debug)]
pub(crate) struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.s + x;
        if abs(self.s) >= abs(x) {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_reference_values() {
        // Abramowitz & Stegun table values.
        assert!((expint_ei(1.0) - 1.895_117_816_355_936_8).abs() < 1e-14);
        assert!((expint_ei(0.5) - 0.454_219_904_863_173_6).abs() < 1e-14);
        assert!((expint_ei(5.0) - 40.185_275_355_803_18).abs() < 1e-11);
        assert!((expint_ei(-1.0) + 0.219_383_934_395_520_27).abs() < 1e-15);
        assert!((expint_ei(-3.0) + 0.013_048_381_094_197_04).abs() < 1e-15);
    }

    #[test]
    fn ei_scaled_values_across_switch() {
        let cases = [
            (39.0, 2.633_510_393_558_843e-2),
            (49.999_999, 2.041_704_597_298_955e-2),
            (50.0, 2.041_704_555_594_398_7e-2),
            (60.0, 1.695_420_039_481_328_7e-2),
        ];
        for (x, v) in cases {
            assert!((expint_ei(x) * exp(-x) - v).abs() < 1e-15 * v, "{x}");
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = Sum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-16).abs() < 1e-30);
    }
}
