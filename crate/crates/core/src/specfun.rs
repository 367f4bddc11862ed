//! Special functions used by the schedules and the Rydberg path: the
//! regularized incomplete beta function, the incomplete elliptic integral of
//! the second kind and its inverse in the amplitude.
//!
//! Elliptic integrals use the parameter convention `E(φ, m) = ∫₀^φ √(1 − m sin²t) dt`
//! (Mathematica's `EllipticE[φ, m]`), and negative `m` is supported directly.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument {name} = {value} outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("value {value} exceeds the attainable range [0, {max}]")]
    OutOfRange { value: f64, max: f64 },
}

/// A real number in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Interval01(f64);

impl Interval01 {
    pub const ZERO: Interval01 = Interval01(0.0);
    pub const ONE: Interval01 = Interval01(1.0);

    pub fn new(x: f64) -> Result<Self, SpecFunError> {
        if (0.0..=1.0).contains(&x) {
            Ok(Interval01(x))
        } else {
            Err(SpecFunError::Domain {
                name: "x",
                value: x,
                reason: "must lie in [0, 1]",
            })
        }
    }

    /// Clamps `x` into `[0, 1]`. NaN maps to 0.
    pub fn saturating(x: f64) -> Self {
        if x.is_nan() {
            Interval01(0.0)
        } else {
            Interval01(x.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Interval01 {
    type Error = SpecFunError;
    fn try_from(x: f64) -> Result<Self, Self::Error> {
        Interval01::new(x)
    }
}

impl From<Interval01> for f64 {
    fn from(x: Interval01) -> f64 {
        x.0
    }
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Largest `a + b - 1` handled by the exact binomial sum for integer parameters.
const MAX_BINOMIAL_ORDER: u32 = 60;

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Integer parameters use the exact binomial expansion; everything else goes
/// through the continued fraction with the usual `x > (a+1)/(a+b+2)` symmetry
/// switch.
pub fn regularized_incomplete_beta(x: Interval01, a: f64, b: f64) -> Result<f64, SpecFunError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(SpecFunError::Domain {
            name: "a",
            value: a,
            reason: "must be positive",
        });
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(SpecFunError::Domain {
            name: "b",
            value: b,
            reason: "must be positive",
        });
    }
    let x = x.get();
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if a.fract() == 0.0 && b.fract() == 0.0 && (a + b - 1.0) <= MAX_BINOMIAL_ORDER as f64 {
        return Ok(beta_binomial_sum(x, a as u32, b as u32));
    }
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        beta_front(x, a, b)? * beta_continued_fraction(x, a, b)? / a
    } else {
        1.0 - beta_front(1.0 - x, b, a)? * beta_continued_fraction(1.0 - x, b, a)? / b
    };
    Ok(value.clamp(0.0, 1.0))
}

fn beta_front(x: f64, a: f64, b: f64) -> Result<f64, SpecFunError> {
    Ok((a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp())
}

/// `Σ_{j=a}^{a+b-1} C(a+b-1, j) x^j (1-x)^(a+b-1-j)`; every term is
/// positive, so the sum keeps full relative accuracy in both tails.
fn beta_binomial_sum(x: f64, a: u32, b: u32) -> f64 {
    let order = a + b - 1;
    let y = 1.0 - x;
    let mut binom = 1.0;
    for j in 0..a {
        binom *= (order - j) as f64 / (j + 1) as f64;
    }
    let mut sum = 0.0;
    for j in a..=order {
        if j > a {
            binom *= (order - j + 1) as f64 / j as f64;
        }
        sum += binom * x.powi(j as i32) * y.powi((order - j) as i32);
    }
    sum.clamp(0.0, 1.0)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64, SpecFunError> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(SpecFunError::NoConvergence {
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

/// Carlson's symmetric integral `R_F(x, y, z)`, at most one argument zero.
fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    const ERRTOL: f64 = 0.0008;
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let ave = (x + y + z) / 3.0;
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / ave.sqrt();
        }
    }
}

/// Carlson's `R_D(x, y, z)`, `z > 0` and at most one of `x, y` zero.
fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const ERRTOL: f64 = 0.0005;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let ave = 0.2 * (x + y + 3.0 * z);
        let dx = (ave - x) / ave;
        let dy = (ave - y) / ave;
        let dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let c1 = 3.0 / 14.0;
            let c2 = 1.0 / 6.0;
            let c3 = 9.0 / 22.0;
            let c4 = 3.0 / 26.0;
            let c5 = 0.25 * c3;
            let c6 = 1.5 * c4;
            return 3.0 * sum
                + fac
                    * (1.0
                        + ed * (-c1 + c5 * ed - c6 * dz * ee)
                        + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea)))
                    / (ave * ave.sqrt());
        }
    }
}

/// `E(φ, m)` for `0 ≤ φ ≤ π/2`, integrand assumed nonnegative.
fn elliptic_e_reduced(phi: f64, m: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    if m == 0.0 {
        return phi;
    }
    if m == 1.0 {
        return phi.sin();
    }
    let (s, c) = phi.sin_cos();
    let c2 = c * c;
    let y = (1.0 - m * s * s).max(0.0);
    s * carlson_rf(c2, y, 1.0) - m / 3.0 * s * s * s * carlson_rd(c2, y, 1.0)
}

/// Incomplete elliptic integral of the second kind `E(φ, m) = ∫₀^φ √(1 − m sin²t) dt`.
///
/// Any `φ ≥ 0` is accepted when `m ≤ 1`; for `m > 1` the integrand turns
/// imaginary beyond `φ = asin(1/√m)` and such amplitudes are rejected.
pub fn elliptic_e(phi: f64, m: f64) -> Result<f64, SpecFunError> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(SpecFunError::Domain {
            name: "phi",
            value: phi,
            reason: "must be finite and nonnegative",
        });
    }
    if !m.is_finite() {
        return Err(SpecFunError::Domain {
            name: "m",
            value: m,
            reason: "must be finite",
        });
    }
    if m > 1.0 {
        let limit = (1.0 / m.sqrt()).asin();
        if phi > limit {
            return Err(SpecFunError::Domain {
                name: "phi",
                value: phi,
                reason: "1 - m sin^2(t) becomes negative on [0, phi]",
            });
        }
        return Ok(elliptic_e_reduced(phi, m));
    }
    let k = (phi / PI).round();
    let r = phi - k * PI;
    let complete = if k != 0.0 {
        elliptic_e_reduced(FRAC_PI_2, m)
    } else {
        0.0
    };
    let partial = elliptic_e_reduced(r.abs(), m);
    Ok(2.0 * k * complete + r.signum() * partial)
}

const INVERSE_MAX_ITER: usize = 200;

/// Inverse of `φ ↦ E(φ, m)` on `[0, π]`: returns `φ_u` with `E(φ_u, m) = u`.
///
/// Bracketed Newton iteration: a Newton step on `E(φ) − u` (derivative
/// `√(1 − m sin²φ)`) is taken when it stays inside the current bracket,
/// otherwise the bracket is bisected.
pub fn elliptic_e_inv(u: f64, m: f64) -> Result<f64, SpecFunError> {
    if !(u >= 0.0 && u.is_finite()) {
        return Err(SpecFunError::Domain {
            name: "u",
            value: u,
            reason: "must be finite and nonnegative",
        });
    }
    if m > 1.0 {
        return Err(SpecFunError::Domain {
            name: "m",
            value: m,
            reason: "inverse requires m <= 1",
        });
    }
    if m == 0.0 {
        if u > PI {
            return Err(SpecFunError::OutOfRange { value: u, max: PI });
        }
        return Ok(u);
    }
    let max = elliptic_e(PI, m)?;
    let tol = 1e-14 * max.max(1.0);
    if u > max + tol {
        return Err(SpecFunError::OutOfRange { value: u, max });
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u >= max {
        return Ok(PI);
    }

    let (mut lo, mut hi) = (0.0_f64, PI);
    let mut phi = PI * u / max;
    let mut residual = f64::INFINITY;
    for _ in 0..INVERSE_MAX_ITER {
        let value = elliptic_e(phi, m)?;
        residual = value - u;
        if residual.abs() <= tol {
            return Ok(phi);
        }
        if residual > 0.0 {
            hi = phi;
        } else {
            lo = phi;
        }
        let slope = (1.0 - m * phi.sin().powi(2)).max(0.0).sqrt();
        let newton = if slope > 0.0 {
            phi - residual / slope
        } else {
            f64::NAN
        };
        phi = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * PI {
            return Ok(phi);
        }
    }
    Err(SpecFunError::NoConvergence {
        iterations: INVERSE_MAX_ITER,
        residual: residual.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(x: f64) -> Interval01 {
        Interval01::new(x).unwrap()
    }

    #[test]
    fn interval_rejects_outside() {
        assert!(Interval01::new(-1e-12).is_err());
        assert!(Interval01::new(1.0 + 1e-12).is_err());
        assert!(Interval01::new(f64::NAN).is_err());
        assert_eq!(Interval01::saturating(2.0).get(), 1.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(0.5), PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn incomplete_beta_trivial_cases() {
        assert_eq!(regularized_incomplete_beta(unit(0.0), 2.0, 2.0).unwrap(), 0.0);
        for n in 0..6 {
            let a = (n + 1) as f64;
            assert_abs_diff_eq!(
                regularized_incomplete_beta(unit(0.5), a, a).unwrap(),
                0.5,
                epsilon = 1e-15
            );
        }
        // closed form x^2 (3 - 2x)
        assert_abs_diff_eq!(
            regularized_incomplete_beta(unit(0.25), 2.0, 2.0).unwrap(),
            0.15625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn incomplete_beta_continued_fraction_matches_binomial_sum() {
        for &(a, b) in &[(2.0, 3.0), (4.0, 4.0), (7.0, 2.0)] {
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let exact = beta_binomial_sum(x, a as u32, b as u32);
                let cf = if x < (a + 1.0) / (a + b + 2.0) {
                    beta_front(x, a, b).unwrap() * beta_continued_fraction(x, a, b).unwrap() / a
                } else {
                    1.0 - beta_front(1.0 - x, b, a).unwrap()
                        * beta_continued_fraction(1.0 - x, b, a).unwrap()
                        / b
                };
                assert_abs_diff_eq!(exact, cf, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn incomplete_beta_domain_errors() {
        assert!(regularized_incomplete_beta(unit(0.3), 0.0, 1.0).is_err());
        assert!(regularized_incomplete_beta(unit(0.3), 1.0, -2.0).is_err());
    }

    #[test]
    fn elliptic_e_special_values() {
        for &phi in &[0.0, 0.3, 1.2, 2.9, 7.0] {
            assert_abs_diff_eq!(elliptic_e(phi, 0.0).unwrap(), phi, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(elliptic_e(FRAC_PI_2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(elliptic_e(PI, 1.0).unwrap(), 2.0, epsilon = 1e-15);
        // complete integral E(1/2), reference value from A&S table 17.1
        assert_abs_diff_eq!(
            elliptic_e(FRAC_PI_2, 0.5).unwrap(),
            1.350_643_881_047_675_5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn elliptic_e_half_period_doubling() {
        for &m in &[-10.0, -0.5, 0.0, 0.3, 0.99] {
            let half = elliptic_e(FRAC_PI_2, m).unwrap();
            assert_abs_diff_eq!(elliptic_e(PI, m).unwrap(), 2.0 * half, epsilon = 1e-13);
        }
    }

    #[test]
    fn elliptic_e_domain() {
        assert!(elliptic_e(-0.1, 0.5).is_err());
        assert!(elliptic_e(1.0, 2.0).is_err());
        assert!(elliptic_e(0.5, 2.0).is_ok());
    }

    #[test]
    fn elliptic_inverse_cases() {
        assert_abs_diff_eq!(elliptic_e_inv(1.234, 0.0).unwrap(), 1.234, epsilon = 1e-15);
        let u = elliptic_e(FRAC_PI_2, -0.5).unwrap();
        assert_abs_diff_eq!(elliptic_e_inv(u, -0.5).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        let max = elliptic_e(PI, -3.0).unwrap();
        assert!(matches!(
            elliptic_e_inv(max * 1.01, -3.0),
            Err(SpecFunError::OutOfRange { .. })
        ));
        assert_abs_diff_eq!(elliptic_e_inv(max, -3.0).unwrap(), PI, epsilon = 1e-15);
        // m = 1: slope vanishes at π/2 and bisection has to carry the iteration.
        assert_abs_diff_eq!(elliptic_e_inv(1.0, 1.0).unwrap(), FRAC_PI_2, epsilon = 1e-7);
    }
}
