//! Schedule functions `s: [0,1] → [0,1]` with controlled behaviour of their
//! derivatives at the two endpoints.
//!
//! A [`Schedule`] is an immutable expression tree: the beta ramps, the
//! piecewise construction that splices a transition function onto a reference
//! schedule near the endpoints, the square-root construction with diverging
//! endpoint slope, and the gap-informed polynomial reference.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{regularized_incomplete_beta, Interval01, SpecFunError};

/// Default smoothing width for the piecewise and square-root constructions.
pub const DEFAULT_SMOOTHING_WIDTH: f64 = 0.1;
/// Default polynomial degree of the gap-informed schedule.
pub const DEFAULT_GAP_FIT_DEGREE: usize = 10;

const GAP_ODE_STEPS: usize = 10_000;
const GAP_FIT_POINTS: usize = 1_000;
const MONOTONE_CHECK_POINTS: usize = 10_000;
const SHOOTING_TOL: f64 = 1e-10;
const SHOOTING_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("smoothing width d = {d} outside {allowed}")]
    Width { d: f64, allowed: &'static str },
    #[error("invalid gap data: {0}")]
    GapData(String),
    #[error("shooting for the normalization constant did not converge (|s(1) - 1| = {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("fitted schedule decreases near x = {x:.4}")]
    NotMonotone { x: f64 },
    #[error("transition function must have sigma(0) = 0 and sigma(1) = 1")]
    BadTransition,
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Number of vanishing endpoint derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryOrder {
    /// Derivatives `1..=n` vanish at both ends.
    Finite(u32),
    /// The first derivative is unbounded at an endpoint.
    Diverging,
    /// Every derivative vanishes.
    Infinite,
}

impl fmt::Display for BoundaryOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryOrder::Finite(n) => write!(f, "{n}"),
            BoundaryOrder::Diverging => f.write_str("diverging"),
            BoundaryOrder::Infinite => f.write_str("infinite"),
        }
    }
}

/// `σ_∞(x) = h(x) / (h(x) + h(1 − x))` with `h(y) = exp(−1/y)`; every
/// derivative vanishes at both ends.
pub fn smooth_transition_inf(x: Interval01) -> f64 {
    let x = x.get();
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

fn smooth_transition_inf_derivative(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    let da = a / (x * x);
    let db = b / ((1.0 - x) * (1.0 - x));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// `g(x) = (1.5πx + cos(πx) − 1) / (1.5π − 2)`.
pub fn truncated_cosine(x: Interval01) -> f64 {
    use std::f64::consts::PI;
    let x = x.get();
    (1.5 * PI * x + (PI * x).cos() - 1.0) / (1.5 * PI - 2.0)
}

/// Discriminant of a [`Schedule`], without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKindName {
    Linear,
    Beta,
    Piecewise,
    Sqrt,
    GapInformed,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Linear,
    Beta {
        n: u32,
        /// `∫₀¹ yⁿ(1−y)ⁿ dy`
        norm: f64,
    },
    Piecewise {
        sigma: Box<Schedule>,
        reference: Box<Schedule>,
        d: f64,
    },
    Sqrt {
        reference: Box<Schedule>,
        d: f64,
    },
    GapInformed(GapPolynomial),
}

/// A monotone reparametrization of `[0, 1]` with `s(0) = 0`, `s(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: Kind,
    declared_order: BoundaryOrder,
}

impl Schedule {
    /// `s(x)`. Arguments outside `[0, 1]` are clamped.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Linear => x,
            Kind::Beta { n, .. } => {
                let a = (*n + 1) as f64;
                regularized_incomplete_beta(Interval01::saturating(x), a, a)
                    .expect("beta parameters are positive")
            }
            Kind::Piecewise {
                sigma,
                reference,
                d,
            } => {
                let d = *d;
                if x <= d {
                    sigma.value(x / d) * reference.value(x)
                } else if x < 1.0 - d {
                    reference.value(x)
                } else {
                    let w = sigma.value((x - 1.0 + d) / d);
                    w + (1.0 - w) * reference.value(x)
                }
            }
            Kind::Sqrt { reference, d } => {
                let d = *d;
                if x <= 2.0 * d {
                    let w = smooth_transition_inf(Interval01::saturating(x / (2.0 * d)));
                    (1.0 - w) * d * (x / d).sqrt() + w * reference.value(x)
                } else if x < 1.0 - 2.0 * d {
                    reference.value(x)
                } else {
                    let w = smooth_transition_inf(Interval01::saturating(
                        (x - 1.0 + 2.0 * d) / (2.0 * d),
                    ));
                    w * (1.0 - d * ((1.0 - x) / d).sqrt()) + (1.0 - w) * reference.value(x)
                }
            }
            Kind::GapInformed(p) => p.value(x),
        }
        .clamp(0.0, 1.0)
    }

    /// `ds/dx`, analytic for every construction. Infinite where the
    /// square-root construction diverges.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Linear => 1.0,
            Kind::Beta { n, norm } => {
                let n = *n as i32;
                (x * (1.0 - x)).powi(n) / norm
            }
            Kind::Piecewise {
                sigma,
                reference,
                d,
            } => {
                let d = *d;
                if x <= d {
                    let y = x / d;
                    sigma.derivative(y) / d * reference.value(x)
                        + sigma.value(y) * reference.derivative(x)
                } else if x < 1.0 - d {
                    reference.derivative(x)
                } else {
                    let y = (x - 1.0 + d) / d;
                    let w = sigma.value(y);
                    let dw = sigma.derivative(y) / d;
                    dw * (1.0 - reference.value(x)) + (1.0 - w) * reference.derivative(x)
                }
            }
            Kind::Sqrt { reference, d } => {
                let d = *d;
                if x <= 2.0 * d {
                    let y = x / (2.0 * d);
                    let w = smooth_transition_inf(Interval01::saturating(y));
                    let dw = smooth_transition_inf_derivative(y) / (2.0 * d);
                    let root = d * (x / d).sqrt();
                    let droot = if x > 0.0 { 0.5 * (d / x).sqrt() } else { f64::INFINITY };
                    if w == 0.0 {
                        return droot;
                    }
                    -dw * root + (1.0 - w) * droot + dw * reference.value(x)
                        + w * reference.derivative(x)
                } else if x < 1.0 - 2.0 * d {
                    reference.derivative(x)
                } else {
                    let y = (x - 1.0 + 2.0 * d) / (2.0 * d);
                    let w = smooth_transition_inf(Interval01::saturating(y));
                    let dw = smooth_transition_inf_derivative(y) / (2.0 * d);
                    let root = 1.0 - d * ((1.0 - x) / d).sqrt();
                    let droot = if x < 1.0 {
                        0.5 * (d / (1.0 - x)).sqrt()
                    } else {
                        f64::INFINITY
                    };
                    if w == 1.0 {
                        return droot;
                    }
                    dw * root + w * droot - dw * reference.value(x)
                        + (1.0 - w) * reference.derivative(x)
                }
            }
            Kind::GapInformed(p) => p.derivative(x),
        }
    }

    /// `1 − s(1 − h)`, evaluated without cancellation near `h = 0`.
    pub fn complement(&self, h: f64) -> f64 {
        let h = h.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Linear => h,
            Kind::Beta { .. } => self.value(h),
            Kind::Piecewise {
                sigma,
                reference,
                d,
            } => {
                let d = *d;
                if h <= d {
                    sigma.complement(h / d) * reference.complement(h)
                } else if h < 1.0 - d {
                    reference.complement(h)
                } else {
                    1.0 - self.value(1.0 - h)
                }
            }
            Kind::Sqrt { reference, d } => {
                let d = *d;
                if h <= 2.0 * d {
                    let w = smooth_transition_inf(Interval01::saturating(h / (2.0 * d)));
                    (1.0 - w) * d * (h / d).sqrt() + w * reference.complement(h)
                } else if h < 1.0 - 2.0 * d {
                    reference.complement(h)
                } else {
                    1.0 - self.value(1.0 - h)
                }
            }
            Kind::GapInformed(_) => 1.0 - self.value(1.0 - h),
        }
    }

    pub fn declared_order(&self) -> BoundaryOrder {
        self.declared_order
    }

    pub fn kind(&self) -> ScheduleKindName {
        match self.kind {
            Kind::Linear => ScheduleKindName::Linear,
            Kind::Beta { .. } => ScheduleKindName::Beta,
            Kind::Piecewise { .. } => ScheduleKindName::Piecewise,
            Kind::Sqrt { .. } => ScheduleKindName::Sqrt,
            Kind::GapInformed(_) => ScheduleKindName::GapInformed,
        }
    }

    /// Order `n` of the beta ramp, used directly or as the transition of a
    /// piecewise construction.
    pub fn beta_order(&self) -> Option<u32> {
        match &self.kind {
            Kind::Beta { n, .. } => Some(*n),
            Kind::Piecewise { sigma, .. } => sigma.beta_order(),
            _ => None,
        }
    }

    /// Interior points where the piecewise definition switches branch; the
    /// schedule is not analytic there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match &self.kind {
            Kind::Piecewise { reference, d, .. } => {
                let mut v = vec![*d, 1.0 - *d];
                v.extend(reference.breakpoints());
                v
            }
            Kind::Sqrt { reference, d } => {
                let mut v = vec![2.0 * *d, 1.0 - 2.0 * *d];
                v.extend(reference.breakpoints());
                v
            }
            _ => Vec::new(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Smoothing width of the piecewise and square-root constructions.
    pub fn smoothing_width(&self) -> Option<f64> {
        match &self.kind {
            Kind::Piecewise { d, .. } | Kind::Sqrt { d, .. } => Some(*d),
            _ => None,
        }
    }

    /// Gap-informed polynomial, if this is (or wraps) one as its reference.
    pub fn gap_polynomial(&self) -> Option<&GapPolynomial> {
        match &self.kind {
            Kind::GapInformed(p) => Some(p),
            Kind::Piecewise { reference, .. } | Kind::Sqrt { reference, .. } => {
                reference.gap_polynomial()
            }
            _ => None,
        }
    }

    /// Short human-readable label, e.g. `s_beta2[linear](d=0.1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Linear => "linear".to_string(),
            Kind::Beta { n, .. } => format!("beta{n}"),
            Kind::Piecewise {
                sigma,
                reference,
                d,
            } => format!("s_{}[{}](d={d})", sigma.label(), reference.label()),
            Kind::Sqrt { reference, d } => format!("sqrt[{}](d={d})", reference.label()),
            Kind::GapInformed(p) => format!("gap_informed(deg={})", p.degree()),
        }
    }

    /// Writes `x, s, ds_dx` rows on a uniform grid of `points` samples.
    pub fn write_csv<W: Write>(&self, points: usize, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "s", "ds_dx"])?;
        let points = points.max(2);
        for i in 0..points {
            let x = i as f64 / (points - 1) as f64;
            w.write_record(&[
                format!("{x:.17e}"),
                format!("{:.17e}", self.value(x)),
                format!("{:.17e}", self.derivative(x)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `s(x) = x`.
pub fn linear_schedule() -> Schedule {
    Schedule {
        kind: Kind::Linear,
        declared_order: BoundaryOrder::Finite(0),
    }
}

/// `β_n(x) = I_x(n+1, n+1)`.
pub fn beta_schedule(n: u32) -> Schedule {
    // ∫₀¹ yⁿ(1−y)ⁿ dy = (n!)² / (2n+1)!
    let norm = (1..=n).fold(1.0 / (2 * n + 1) as f64, |acc, k| {
        acc * k as f64 / (n + k) as f64
    });
    Schedule {
        kind: Kind::Beta { n, norm },
        declared_order: BoundaryOrder::Finite(n),
    }
}

/// Splices the transition `sigma` onto `reference` within `d` of each end:
/// `σ(x/d) f(x)` on `[0, d]`, `f(x)` in the middle and
/// `σ(y) + (1 − σ(y)) f(x)`, `y = (x − 1 + d)/d`, on `[1 − d, 1]`.
///
/// The declared order is the transition's order; with `f(0) = 0` the product
/// on `[0, d]` gains one extra vanishing derivative at each end.
pub fn piecewise_schedule(
    sigma: Schedule,
    reference: Schedule,
    d: f64,
) -> Result<Schedule, ScheduleError> {
    if !(d > 0.0 && d < 0.5) {
        return Err(ScheduleError::Width {
            d,
            allowed: "(0, 0.5)",
        });
    }
    if sigma.value(0.0) != 0.0 || sigma.value(1.0) != 1.0 {
        return Err(ScheduleError::BadTransition);
    }
    let declared_order = sigma.declared_order;
    Ok(Schedule {
        kind: Kind::Piecewise {
            sigma: Box::new(sigma),
            reference: Box::new(reference),
            d,
        },
        declared_order,
    })
}

/// `s_{β_n, f}` with the default width.
pub fn smoothed_beta_schedule(n: u32, reference: Schedule, d: f64) -> Result<Schedule, ScheduleError> {
    piecewise_schedule(beta_schedule(n), reference, d)
}

/// Square-root construction with diverging endpoint slope, blended into
/// `reference` by `σ_∞` over `[0, 2d]` and `[1 − 2d, 1]`.
pub fn sqrt_schedule(reference: Schedule, d: f64) -> Result<Schedule, ScheduleError> {
    if !(d > 0.0 && d <= 0.25) {
        return Err(ScheduleError::Width {
            d,
            allowed: "(0, 0.25]",
        });
    }
    Ok(Schedule {
        kind: Kind::Sqrt {
            reference: Box::new(reference),
            d,
        },
        declared_order: BoundaryOrder::Diverging,
    })
}

/// Degree-`n` polynomial on `[0, 1]` in the shifted Chebyshev basis
/// `T_k(2x − 1)`, affinely normalized so that `p(0) = 0` and `p(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPolynomial {
    /// Coefficients of `T_k(2x − 1)`, before normalization.
    pub chebyshev: Vec<f64>,
    /// Normalization: `s(x) = (p(x) − offset) / scale`.
    pub offset: f64,
    pub scale: f64,
    /// Shooting constant `c` of `s'(x) = c g(x) Δ(s(x))`.
    pub normalization_constant: f64,
    /// RMS deviation of the fit from the integrated schedule.
    pub fit_rms: f64,
}

impl GapPolynomial {
    pub fn degree(&self) -> usize {
        self.chebyshev.len().saturating_sub(1)
    }

    fn raw(&self, x: f64) -> f64 {
        chebyshev_sum(&self.chebyshev, 2.0 * x - 1.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        if x == 1.0 {
            return 1.0;
        }
        (self.raw(x) - self.offset) / self.scale
    }

    pub fn derivative(&self, x: f64) -> f64 {
        2.0 * chebyshev_derivative_sum(&self.chebyshev, 2.0 * x - 1.0) / self.scale
    }

    /// Monomial coefficients of the normalized polynomial in `x`, lowest
    /// degree first.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let n = self.chebyshev.len();
        // T_k(t) in powers of t, then substitute t = 2x − 1.
        let mut t_prev = vec![1.0];
        let mut t_cur = vec![-1.0, 2.0];
        let mut out = vec![0.0; n];
        for (k, c) in self.chebyshev.iter().enumerate() {
            let tk: &Vec<f64> = match k {
                0 => &t_prev,
                _ => &t_cur,
            };
            for (i, v) in tk.iter().enumerate() {
                out[i] += c * v;
            }
            if k >= 1 {
                // T_{k+1} = 2(2x−1) T_k − T_{k−1}
                let mut next = vec![0.0; t_cur.len() + 1];
                for (i, v) in t_cur.iter().enumerate() {
                    next[i + 1] += 4.0 * v;
                    next[i] -= 2.0 * v;
                }
                for (i, v) in t_prev.iter().enumerate() {
                    next[i] -= v;
                }
                t_prev = std::mem::replace(&mut t_cur, next);
            }
        }
        out[0] -= self.offset;
        out.iter().map(|v| v / self.scale).collect()
    }
}

fn chebyshev_sum(coeffs: &[f64], t: f64) -> f64 {
    // Clenshaw
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

fn chebyshev_derivative_sum(coeffs: &[f64], t: f64) -> f64 {
    // d/dt T_k = k U_{k-1}
    let (mut u_prev, mut u_cur) = (0.0, 1.0);
    let mut acc = 0.0;
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        acc += c * k as f64 * u_cur;
        let next = 2.0 * t * u_cur - u_prev;
        u_prev = u_cur;
        u_cur = next;
    }
    acc
}

/// Tabulated positive gap with monotone piecewise-cubic (Fritsch–Carlson)
/// interpolation; held constant outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedGap {
    s: Vec<f64>,
    gap: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl TabulatedGap {
    pub fn new(s: Vec<f64>, gap: Vec<f64>) -> Result<Self, ScheduleError> {
        if s.len() != gap.len() || s.len() < 2 {
            return Err(ScheduleError::GapData(
                "need at least two (s, gap) samples of equal length".into(),
            ));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ScheduleError::GapData("grid must be strictly increasing".into()));
        }
        if let Some(g) = gap.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(ScheduleError::GapData(format!("non-positive gap value {g}")));
        }
        let slopes = monotone_slopes(&s, &gap);
        Ok(TabulatedGap { s, gap, slopes })
    }

    pub fn constant(value: f64) -> Result<Self, ScheduleError> {
        TabulatedGap::new(vec![0.0, 1.0], vec![value, value])
    }

    pub fn grid(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.gap
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.s.len();
        if x <= self.s[0] {
            return self.gap[0];
        }
        if x >= self.s[n - 1] {
            return self.gap[n - 1];
        }
        let k = self.s.partition_point(|&v| v <= x) - 1;
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.gap[k] + h10 * h * self.slopes[k] + h01 * self.gap[k + 1] + h11 * h * self.slopes[k + 1]
    }

    pub fn min(&self) -> (f64, f64) {
        let k = (0..self.gap.len())
            .min_by(|&a, &b| self.gap[a].total_cmp(&self.gap[b]))
            .unwrap();
        (self.s[k], self.gap[k])
    }
}

fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for k in 1..n - 1 {
        m[k] = if secants[k - 1] * secants[k] <= 0.0 {
            0.0
        } else {
            0.5 * (secants[k - 1] + secants[k])
        };
    }
    for k in 0..n - 1 {
        if secants[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / secants[k];
        let b = m[k + 1] / secants[k];
        let r = a * a + b * b;
        if r > 9.0 {
            let t = 3.0 / r.sqrt();
            m[k] = t * a * secants[k];
            m[k + 1] = t * b * secants[k];
        }
    }
    m
}

/// Integrates `s'(x) = c g(x) Δ(s)` from `s(0) = 0` with classic RK4 on a
/// uniform grid; returns the trajectory.
fn integrate_gap_ode(
    c: f64,
    gap: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    steps: usize,
) -> Vec<f64> {
    let h = 1.0 / steps as f64;
    let mut s = 0.0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s);
    for i in 0..steps {
        let x = i as f64 * h;
        let f = |x: f64, s: f64| c * g(x) * gap(s);
        let k1 = f(x, s);
        let k2 = f(x + 0.5 * h, s + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h, s + 0.5 * h * k2);
        let k4 = f(x + h, s + h * k3);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(s);
    }
    out
}

/// Solution of `s'(x) = c g(x) Δ(s(x))`, `s(0) = 0`, `s(1) = 1`, sampled on
/// the integration grid, together with the constant `c`.
pub fn solve_gap_ode(
    gap: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    steps: usize,
) -> Result<(f64, Vec<f64>), ScheduleError> {
    let endpoint = |c: f64| *integrate_gap_ode(c, gap, g, steps).last().unwrap();
    // bracket c
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut guard = 0;
    while endpoint(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(ScheduleError::NoConvergence {
                residual: (endpoint(hi) - 1.0).abs(),
            });
        }
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..SHOOTING_MAX_ITER {
        c = 0.5 * (lo + hi);
        let r = endpoint(c) - 1.0;
        if r.abs() < SHOOTING_TOL {
            return Ok((c, integrate_gap_ode(c, gap, g, steps)));
        }
        if r > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
    }
    let residual = (endpoint(c) - 1.0).abs();
    if residual < 1e-8 {
        return Ok((c, integrate_gap_ode(c, gap, g, steps)));
    }
    Err(ScheduleError::NoConvergence { residual })
}

/// Reference schedule that slows down where the gap is small:
/// `s'(x) = c g(x) Δ(s(x))`, integrated numerically, then replaced by a
/// least-squares polynomial of the given degree rescaled to hit 0 and 1
/// exactly.
pub fn gap_informed_schedule(
    gap: &TabulatedGap,
    g: &dyn Fn(f64) -> f64,
    degree: usize,
) -> Result<Schedule, ScheduleError> {
    if degree < 1 {
        return Err(ScheduleError::GapData("polynomial degree must be >= 1".into()));
    }
    let gap_fn = |s: f64| gap.eval(s);
    let (c, traj) = solve_gap_ode(&gap_fn, g, GAP_ODE_STEPS)?;
    let sample = |x: f64| {
        // linear interpolation on the fine RK4 grid
        let pos = x * GAP_ODE_STEPS as f64;
        let k = (pos.floor() as usize).min(GAP_ODE_STEPS - 1);
        let t = pos - k as f64;
        traj[k] * (1.0 - t) + traj[k + 1] * t
    };
    let xs: Vec<f64> = (0..GAP_FIT_POINTS)
        .map(|i| i as f64 / (GAP_FIT_POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| sample(x)).collect();
    let chebyshev = chebyshev_least_squares(&xs, &ys, degree)?;
    let fit_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (chebyshev_sum(&chebyshev, 2.0 * x - 1.0) - y).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    let offset = chebyshev_sum(&chebyshev, -1.0);
    let scale = chebyshev_sum(&chebyshev, 1.0) - offset;
    if !(scale > 0.0) {
        return Err(ScheduleError::NotMonotone { x: 0.0 });
    }
    let poly = GapPolynomial {
        chebyshev,
        offset,
        scale,
        normalization_constant: c,
        fit_rms,
    };
    let mut prev = 0.0;
    for i in 1..=MONOTONE_CHECK_POINTS {
        let x = i as f64 / MONOTONE_CHECK_POINTS as f64;
        let v = poly.value(x).clamp(0.0, 1.0);
        if v < prev {
            return Err(ScheduleError::NotMonotone { x });
        }
        prev = v;
    }
    Ok(Schedule {
        kind: Kind::GapInformed(poly),
        declared_order: BoundaryOrder::Finite(0),
    })
}

fn chebyshev_least_squares(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>, ScheduleError> {
    use nalgebra::{DMatrix, DVector};
    let cols = degree + 1;
    let mut a = DMatrix::<f64>::zeros(xs.len(), cols);
    for (r, &x) in xs.iter().enumerate() {
        let t = 2.0 * x - 1.0;
        let (mut prev, mut cur) = (1.0, t);
        a[(r, 0)] = 1.0;
        if cols > 1 {
            a[(r, 1)] = t;
        }
        for k in 2..cols {
            let next = 2.0 * t * cur - prev;
            a[(r, k)] = next;
            prev = cur;
            cur = next;
        }
    }
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| ScheduleError::GapData(format!("least-squares fit failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

/// Estimated endpoint smoothness of a schedule.
///
/// Derivatives of order `k = 1, 2, …` at `x = 0` (forward differences of
/// `s(h)`) and `x = 1` (forward differences of `1 − s(1 − h)`) are
/// Richardson-extrapolated from a halving step sequence; the result is the
/// largest `k` for which every order up to `k` is below `tol` at both ends.
/// If the first difference quotient keeps growing as the step shrinks, the
/// slope diverges.
pub fn measure_boundary_order(s: &Schedule, tol: f64) -> BoundaryOrder {
    const MAX_ORDER: u32 = 8;
    if first_difference_diverges(s) {
        return BoundaryOrder::Diverging;
    }
    // keep every stencil inside the smoothing window
    let window = s.smoothing_width().unwrap_or(0.1);
    for k in 1..=MAX_ORDER {
        let h0 = 0.01 * window;
        let left = extrapolated_derivative(|h| s.value(h), k, h0);
        let right = extrapolated_derivative(|h| s.complement(h), k, h0);
        if left.abs() > tol || right.abs() > tol {
            return BoundaryOrder::Finite(k - 1);
        }
    }
    BoundaryOrder::Infinite
}

fn first_difference_diverges(s: &Schedule) -> bool {
    let check = |f: &dyn Fn(f64) -> f64| {
        let quotients: Vec<f64> = (0..12)
            .map(|j| {
                let h = 1e-3 / 4f64.powi(j);
                f(h) / h
            })
            .collect();
        quotients.windows(2).all(|w| w[1] > 1.5 * w[0])
    };
    check(&|h| s.value(h)) || check(&|h| s.complement(h))
}

/// k-th derivative at the origin of `f` (with `f(0) = 0`) from one-sided
/// differences with steps `h0/2^j`, Richardson-extrapolated assuming an
/// error expansion in integer powers of `h`.
fn extrapolated_derivative(f: impl Fn(f64) -> f64, k: u32, h0: f64) -> f64 {
    const LEVELS: usize = 6;
    let binom = |n: u32, r: u32| (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let mut table: Vec<f64> = (0..LEVELS)
        .map(|j| {
            let h = h0 / 2f64.powi(j as i32);
            let diff: f64 = (1..=k)
                .map(|i| {
                    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binom(k, i) * f(i as f64 * h)
                })
                .sum();
            diff / h.powi(k as i32)
        })
        .collect();
    for level in 1..LEVELS {
        let factor = 2f64.powi(level as i32);
        for j in (level..LEVELS).rev() {
            table[j] = (factor * table[j] - table[j - 1]) / (factor - 1.0);
        }
    }
    table[LEVELS - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid_check(s: &Schedule) {
        assert_eq!(s.value(0.0), 0.0, "{}", s.label());
        assert_eq!(s.value(1.0), 1.0, "{}", s.label());
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let v = s.value(i as f64 / 10_000.0);
            assert!(v >= prev, "{} decreases at {}", s.label(), i);
            assert!(v - prev < 1e-2, "{} jumps at {}", s.label(), i);
            prev = v;
        }
    }

    #[test]
    fn linear_values() {
        let s = linear_schedule();
        assert_eq!(s.value(0.3), 0.3);
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 1.0);
        assert_eq!(s.declared_order(), BoundaryOrder::Finite(0));
    }

    #[test]
    fn beta_values() {
        let b0 = beta_schedule(0);
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert_abs_diff_eq!(b0.value(x), x, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(beta_schedule(1).value(0.25), 0.15625, epsilon = 1e-15);
        for n in 0..=5 {
            assert_abs_diff_eq!(beta_schedule(n).value(0.5), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn beta_derivative_formula() {
        for n in 0..=4 {
            let s = beta_schedule(n);
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let h = 1e-5;
                let fd = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, s.derivative(x), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn piecewise_examples() {
        let s = piecewise_schedule(beta_schedule(1), linear_schedule(), 0.1).unwrap();
        assert_eq!(s.value(0.5), 0.5);
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 1.0);
        assert_abs_diff_eq!(s.value(0.05), 0.025, epsilon = 1e-15);
        for i in 0..=800 {
            let x = 0.1 + 0.8 * i as f64 / 800.0;
            assert_eq!(s.value(x), x);
        }
        assert_eq!(s.declared_order(), BoundaryOrder::Finite(1));
        assert!(piecewise_schedule(beta_schedule(1), linear_schedule(), 0.5).is_err());
        assert!(piecewise_schedule(beta_schedule(1), linear_schedule(), 0.0).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let d = 0.1;
        let s = sqrt_schedule(linear_schedule(), d).unwrap();
        assert_eq!(s.value(0.5), 0.5);
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 1.0);
        let w = smooth_transition_inf(Interval01::new(0.05).unwrap());
        let expected = (1.0 - w) * 0.1 * 0.1f64.sqrt() + w * 0.01;
        assert_abs_diff_eq!(s.value(0.01), expected, epsilon = 1e-16);
        assert!(sqrt_schedule(linear_schedule(), 0.3).is_err());
        assert_eq!(s.declared_order(), BoundaryOrder::Diverging);
    }

    #[test]
    fn smooth_transition_values() {
        let at = |x| smooth_transition_inf(Interval01::new(x).unwrap());
        assert_eq!(at(0.0), 0.0);
        assert_eq!(at(1.0), 1.0);
        assert_abs_diff_eq!(at(0.5), 0.5, epsilon = 1e-16);
        for i in 1..50 {
            let x = i as f64 / 50.0;
            let h = 1e-6;
            let fd = (at(x + h) - at(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, smooth_transition_inf_derivative(x), epsilon = 1e-7);
        }
    }

    #[test]
    fn truncated_cosine_values() {
        let at = |x| truncated_cosine(Interval01::new(x).unwrap());
        assert_eq!(at(0.0), 0.0);
        assert_abs_diff_eq!(at(1.0), 1.0, epsilon = 1e-15);
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(at(0.5), (0.75 * pi - 1.0) / (1.5 * pi - 2.0), epsilon = 1e-15);
    }

    #[test]
    fn constructed_schedules_are_monotone() {
        let schedules = vec![
            linear_schedule(),
            beta_schedule(0),
            beta_schedule(3),
            smoothed_beta_schedule(0, linear_schedule(), 0.1).unwrap(),
            smoothed_beta_schedule(2, linear_schedule(), 0.25).unwrap(),
            smoothed_beta_schedule(3, beta_schedule(1), 0.1).unwrap(),
            sqrt_schedule(linear_schedule(), 0.1).unwrap(),
            sqrt_schedule(linear_schedule(), 0.25).unwrap(),
        ];
        for s in &schedules {
            grid_check(s);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let schedules = vec![
            smoothed_beta_schedule(2, linear_schedule(), 0.1).unwrap(),
            sqrt_schedule(linear_schedule(), 0.1).unwrap(),
            sqrt_schedule(beta_schedule(1), 0.2).unwrap(),
        ];
        for s in &schedules {
            for i in 1..200 {
                let x = i as f64 / 200.0;
                let h = 1e-6;
                let fd = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
                let an = s.derivative(x);
                assert!((fd - an).abs() < 1e-5 * an.abs().max(1.0), "{} at {x}: {fd} vs {an}", s.label());
            }
        }
    }

    #[test]
    fn boundary_order_of_basic_schedules() {
        assert_eq!(measure_boundary_order(&linear_schedule(), 1e-6), BoundaryOrder::Finite(0));
        for n in 0..=4 {
            assert_eq!(
                measure_boundary_order(&beta_schedule(n), 1e-6),
                BoundaryOrder::Finite(n),
                "beta{n}"
            );
        }
        let sqrt = sqrt_schedule(linear_schedule(), 0.1).unwrap();
        assert_eq!(measure_boundary_order(&sqrt, 1e-6), BoundaryOrder::Diverging);
    }

    #[test]
    fn boundary_order_of_spliced_linear_ramp() {
        // σ(x/d)·x on [0, d] is O(x^{n+2}): one more flat derivative than σ.
        for n in 0..=3 {
            let s = smoothed_beta_schedule(n, linear_schedule(), 0.1).unwrap();
            assert_eq!(
                measure_boundary_order(&s, 1e-6),
                BoundaryOrder::Finite(n + 1),
                "s_beta{n}"
            );
        }
        let s = piecewise_schedule(beta_schedule(2), beta_schedule(1), 0.1).unwrap();
        assert_eq!(measure_boundary_order(&s, 1e-6), BoundaryOrder::Finite(4));
    }

    #[test]
    fn gap_informed_constant_gap_is_identity() {
        let gap = TabulatedGap::constant(1.0).unwrap();
        let s = gap_informed_schedule(&gap, &|_| 1.0, DEFAULT_GAP_FIT_DEGREE).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_abs_diff_eq!(s.value(x), x, epsilon = 1e-8);
        }
        grid_check(&s);
    }

    #[test]
    fn gap_table_validation() {
        assert!(TabulatedGap::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(TabulatedGap::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TabulatedGap::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn monotone_interpolation_preserves_shape() {
        let s: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let gap: Vec<f64> = s.iter().map(|x| 0.2 + (x - 0.6f64).abs()).collect();
        let t = TabulatedGap::new(s.clone(), gap.clone()).unwrap();
        for (x, g) in s.iter().zip(&gap) {
            assert_abs_diff_eq!(t.eval(*x), *g, epsilon = 1e-14);
        }
        // no overshoot below the smallest sample
        for i in 0..=1000 {
            assert!(t.eval(i as f64 / 1000.0) >= 0.2 - 1e-14);
        }
        assert_abs_diff_eq!(t.min().0, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn monomial_coefficients_reproduce_values() {
        let gap: Vec<f64> = (0..=20).map(|i| 1.0 + (i as f64 / 20.0 - 0.5).powi(2)).collect();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let table = TabulatedGap::new(grid, gap).unwrap();
        let s = gap_informed_schedule(&table, &|x| truncated_cosine(Interval01::saturating(x)), 6)
            .unwrap();
        let poly = s.gap_polynomial().unwrap();
        let mono = poly.monomial_coefficients();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let v: f64 = mono.iter().rev().fold(0.0, |acc, c| acc * x + c);
            assert_abs_diff_eq!(v, s.value(x), epsilon = 1e-10);
        }
    }
}
