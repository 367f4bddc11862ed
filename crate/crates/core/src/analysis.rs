//! Fits of final infidelity against `ε = 1/T`: power law `δ ∝ ε^p` at small
//! `ε`, exponential `δ ∝ e^{−c/ε}` at large `ε`, the changepoint between the
//! two, and the size dependence of the exponential rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Infidelities below this are treated as integrator noise and dropped.
pub const INFIDELITY_FLOOR: f64 = 1e-12;
/// Minimum number of points in any fit.
pub const MIN_FIT_POINTS: usize = 4;
/// Minimum number of points for a regime split.
pub const MIN_SPLIT_POINTS: usize = 8;
/// Minimum `log10(ε_max / ε_min)` for a regime split.
pub const MIN_SPLIT_DECADES: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("need at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("epsilon range spans {decades:.2} decades; at least {MIN_SPLIT_DECADES} required")]
    InsufficientSpan { decades: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Polynomial,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub regime: Regime,
    /// Slope `p` of `δ ∝ ε^p`, or rate `c` of `δ ∝ e^{−c/ε}`.
    pub exponent_or_rate: f64,
    pub prefactor: f64,
    /// RMS of the natural-log residuals.
    pub residual: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub points: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, sum of squared residuals)`.
fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), AnalysisError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(AnalysisError::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    Ok((a, b, ssr))
}

/// Validates points and drops those below [`INFIDELITY_FLOOR`].
fn usable(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let mut out = Vec::with_capacity(points.len());
    for &(e, d) in points {
        if !(e > 0.0 && e.is_finite()) {
            return Err(AnalysisError::Degenerate(format!("epsilon {e} is not positive")));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(AnalysisError::Degenerate(format!("infidelity {d} is not a nonnegative number")));
        }
        if d >= INFIDELITY_FLOOR {
            out.push((e, d));
        }
    }
    if out.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: out.len(),
        });
    }
    Ok(out)
}

fn fit_in(points: &[(f64, f64)], regime: Regime) -> Result<(ScalingFit, f64), AnalysisError> {
    let xs: Vec<f64> = points
        .iter()
        .map(|&(e, _)| match regime {
            Regime::Polynomial => e.ln(),
            Regime::Exponential => 1.0 / e,
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let (a, b, ssr) = line_fit(&xs, &ys)?;
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
    let fit = ScalingFit {
        regime,
        exponent_or_rate: match regime {
            Regime::Polynomial => b,
            Regime::Exponential => -b,
        },
        prefactor: a.exp(),
        residual: (ssr / points.len() as f64).sqrt(),
        epsilon_min: lo,
        epsilon_max: hi,
        points: points.len(),
    };
    Ok((fit, ssr))
}

/// Least-squares line in `(ln ε, ln δ)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit, AnalysisError> {
    Ok(fit_in(&usable(points)?, Regime::Polynomial)?.0)
}

/// Least-squares line in `(1/ε, ln δ)`; the rate is minus the slope.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ScalingFit, AnalysisError> {
    Ok(fit_in(&usable(points)?, Regime::Exponential)?.0)
}

/// Result of [`split_regimes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSplit {
    /// Large-`ε` side, ascending in `ε`; empty when no split beats a single
    /// power law.
    pub exponential: Vec<(f64, f64)>,
    /// Small-`ε` side, ascending in `ε`.
    pub polynomial: Vec<(f64, f64)>,
    /// Largest `ε` assigned to the polynomial regime.
    pub crossover: f64,
    /// True when a single power law over all points fits best.
    pub degenerate: bool,
    pub polynomial_fit: ScalingFit,
    pub exponential_fit: Option<ScalingFit>,
    /// Pooled RMS log-residual of the chosen split.
    pub residual: f64,
}

/// Exhaustive changepoint search. Every split that leaves at least
/// [`MIN_FIT_POINTS`] on each side is scored by the pooled RMS log-residual
/// of a power-law fit below and an exponential fit above; a single power law
/// over all points competes as the degenerate candidate.
pub fn split_regimes(points: &[(f64, f64)]) -> Result<RegimeSplit, AnalysisError> {
    let mut pts = usable(points)?;
    if pts.len() < MIN_SPLIT_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_SPLIT_POINTS,
            got: pts.len(),
        });
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = pts.len();
    let decades = (pts[n - 1].0 / pts[0].0).log10();
    if decades < MIN_SPLIT_DECADES {
        return Err(AnalysisError::InsufficientSpan { decades });
    }

    let (all_fit, all_ssr) = fit_in(&pts, Regime::Polynomial)?;
    let mut best = RegimeSplit {
        exponential: Vec::new(),
        polynomial: pts.clone(),
        crossover: pts[n - 1].0,
        degenerate: true,
        polynomial_fit: all_fit,
        exponential_fit: None,
        residual: (all_ssr / n as f64).sqrt(),
    };
    for k in MIN_FIT_POINTS..=n - MIN_FIT_POINTS {
        let (low, high) = pts.split_at(k);
        // equal abscissae on one side make that side unfittable
        let (Ok((pf, pssr)), Ok((ef, essr))) = (
            fit_in(low, Regime::Polynomial),
            fit_in(high, Regime::Exponential),
        ) else {
            continue;
        };
        let residual = ((pssr + essr) / n as f64).sqrt();
        if residual < best.residual {
            best = RegimeSplit {
                exponential: high.to_vec(),
                polynomial: low.to_vec(),
                crossover: low[k - 1].0,
                degenerate: false,
                polynomial_fit: pf,
                exponential_fit: Some(ef),
                residual,
            };
        }
    }
    Ok(best)
}

/// Power law `c = A · L^b` through `(L, c)` pairs; returns `(A, b)`.
pub fn fit_rate_vs_size(rates: &[(f64, f64)]) -> Result<(f64, f64), AnalysisError> {
    if rates.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            needed: 3,
            got: rates.len(),
        });
    }
    if let Some(&(l, c)) = rates.iter().find(|(l, c)| !(*l > 0.0 && *c > 0.0)) {
        return Err(AnalysisError::Degenerate(format!(
            "size {l} and rate {c} must both be positive"
        )));
    }
    let xs: Vec<f64> = rates.iter().map(|(l, _)| l.ln()).collect();
    let ys: Vec<f64> = rates.iter().map(|(_, c)| c.ln()).collect();
    let (a, b, _) = line_fit(&xs, &ys)?;
    Ok((a.exp(), b))
}
