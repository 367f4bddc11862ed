//! Schrödinger evolution `iε ∂_τ ψ = H(s(τ)) ψ` along a scheduled path.
//!
//! Stepping uses the fourth-order commutator-free Magnus scheme with two
//! exponentials per step; each exponential of the sparse generator is
//! applied by a Lanczos (Krylov) approximation. The step count doubles until
//! the final state no longer changes by more than the configured tolerance.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{HamiltonianPath, ModelError, SparseOperator};
use crate::schedules::{BoundaryOrder, Schedule, ScheduleKindName};
use crate::specfun::Interval01;
use crate::spectral::{lowest_eigenpairs_from, SpectralError, DEGENERACY_THRESHOLD};
use crate::state::{inner, vector_norm};

pub use crate::state::QuantumState;

/// Default trajectory sample count.
pub const DEFAULT_SAMPLES: usize = 200;
/// Default bound on the change of the final state under step halving.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Default ceiling on the number of Magnus steps.
pub const DEFAULT_MAX_STEPS: usize = 1 << 24;

const KRYLOV_MAX_DIM: usize = 40;
const KRYLOV_MAX_SPLITS: u32 = 24;
/// Geometric levels added toward each end for singular schedules.
const GRADING_LEVELS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution settings: {0}")]
    InvalidConfig(String),
    #[error("step halving did not reach tolerance {tolerance:.1e} within {steps} steps (last change {difference:.3e})")]
    StepUnderflow {
        steps: usize,
        difference: f64,
        tolerance: f64,
    },
    #[error("ground state at s = 0 is degenerate (gap {gap:.3e})")]
    DegenerateStart { gap: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Numerical settings of one evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Total time `T = 1/ε`.
    pub total_time: f64,
    /// Bound on `‖ψ_N(1) − ψ_{2N}(1)‖` accepted by step halving.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Number of trajectory intervals; eigenstates are solved at the
    /// `samples + 1` points `τ = j / samples`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// First step count tried; derived from `T ‖H‖` when absent.
    #[serde(default)]
    pub initial_steps: Option<usize>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

impl EvolutionConfig {
    pub fn new(total_time: f64) -> Self {
        EvolutionConfig {
            total_time,
            tolerance: DEFAULT_TOLERANCE,
            samples: DEFAULT_SAMPLES,
            initial_steps: None,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.total_time
    }

    fn validate(&self) -> Result<(), EvolutionError> {
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(EvolutionError::InvalidConfig(format!(
                "total time must be positive and finite, got {}",
                self.total_time
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(EvolutionError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.samples == 0 {
            return Err(EvolutionError::InvalidConfig("samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub tau: f64,
    /// Instantaneous infidelity `δ(τ)` against the solved ground state.
    pub delta: f64,
    /// `|⟨ψ(τ)|Φ0(τ)⟩|`.
    pub overlap: f64,
    pub norm: f64,
    /// `∫₀^τ E0(s(τ')) dτ'` by the trapezoidal rule over the samples.
    pub phase: f64,
}

/// Sampled diagnostics of one evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub points: Vec<TrajectoryPoint>,
    /// Magnus steps of the accepted run.
    pub steps: usize,
    /// `‖ψ_N(1) − ψ_{N/2}(1)‖` at acceptance.
    pub step_difference: f64,
}

impl TrajectoryRecord {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least two points")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.norm - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `tau, delta, overlap, norm, phase` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "delta", "overlap", "norm", "phase"])?;
        for p in &self.points {
            w.write_record(&[
                format!("{:.17e}", p.tau),
                format!("{:.17e}", p.delta),
                format!("{:.17e}", p.overlap),
                format!("{:.17e}", p.norm),
                format!("{:.17e}", p.phase),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `√(1 − |⟨ψ|Φ⟩|²)`, evaluated as the norm of the component of `ψ`
/// orthogonal to `Φ` so that small values keep full relative accuracy.
pub fn instantaneous_infidelity(psi: &QuantumState, phi: &QuantumState) -> f64 {
    let ov = phi.inner(psi);
    let orth_sq: f64 = psi
        .amplitudes()
        .iter()
        .zip(phi.amplitudes())
        .map(|(p, f)| (p - f * ov).norm_sqr())
        .sum();
    (orth_sq.sqrt() / psi.norm()).min(1.0)
}

/// `‖ψ − e^{−i phase} Φ‖`.
pub fn adiabatic_distance(psi: &QuantumState, phi: &QuantumState, phase: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, -phase);
    psi.amplitudes()
        .iter()
        .zip(phi.amplitudes())
        .map(|(p, f)| (p - f * rot).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// State the final infidelity is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Ground state of `H(s(1))`, solved numerically.
    SolvedGround,
    /// A given state, for example the analytic antiferromagnetic product.
    State(QuantumState),
}

/// Reusable buffers for the Krylov exponential.
struct KrylovWorkspace {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    matvecs: usize,
}

impl KrylovWorkspace {
    fn new(dim: usize) -> Self {
        KrylovWorkspace {
            basis: vec![vec![Complex64::new(0.0, 0.0); dim]; KRYLOV_MAX_DIM + 1],
            w: vec![Complex64::new(0.0, 0.0); dim],
            matvecs: 0,
        }
    }
}

/// `v ← exp(−i h A) v` for Hermitian `A`. Falls back to substeps when the
/// Krylov space would exceed its maximum dimension.
fn expm_apply(a: &SparseOperator, v: &mut [Complex64], h: f64, tol: f64, ws: &mut KrylovWorkspace) {
    fn go(a: &SparseOperator, v: &mut [Complex64], h: f64, tol: f64, ws: &mut KrylovWorkspace, depth: u32) {
        if krylov_step(a, v, h, tol, ws) {
            return;
        }
        assert!(depth < KRYLOV_MAX_SPLITS, "Krylov exponential failed to converge");
        go(a, v, 0.5 * h, 0.5 * tol, ws, depth + 1);
        go(a, v, 0.5 * h, 0.5 * tol, ws, depth + 1);
    }
    go(a, v, h, tol, ws, 0);
}

/// One Krylov approximation of `exp(−i h A) v`; returns false (leaving `v`
/// untouched) if the error estimate stays above `tol`.
fn krylov_step(a: &SparseOperator, v: &mut [Complex64], h: f64, tol: f64, ws: &mut KrylovWorkspace) -> bool {
    let beta0 = vector_norm(v);
    if beta0 == 0.0 {
        return true;
    }
    for (b, x) in ws.basis[0].iter_mut().zip(v.iter()) {
        *b = x / beta0;
    }
    let mut alphas = Vec::with_capacity(KRYLOV_MAX_DIM);
    let mut betas = Vec::with_capacity(KRYLOV_MAX_DIM);
    for j in 0..KRYLOV_MAX_DIM {
        a.apply_into(&ws.basis[j], &mut ws.w);
        ws.matvecs += 1;
        let alpha = inner(&ws.basis[j], &ws.w).re;
        if j > 0 {
            let beta_prev = betas[j - 1];
            let (done, rest) = ws.basis.split_at(j);
            for ((wi, cur), prev) in ws.w.iter_mut().zip(&rest[0]).zip(&done[j - 1]) {
                *wi -= cur * alpha + prev * beta_prev;
            }
        } else {
            for (wi, cur) in ws.w.iter_mut().zip(&ws.basis[0]) {
                *wi -= cur * alpha;
            }
        }
        // one local correction against the newest vector
        let c = inner(&ws.basis[j], &ws.w);
        for (wi, bi) in ws.w.iter_mut().zip(&ws.basis[j]) {
            *wi -= bi * c;
        }
        alphas.push(alpha);
        let beta = vector_norm(&ws.w);
        let m = j + 1;
        let breakdown = beta <= 1e-14 * alpha.abs().max(1.0);
        if breakdown || (m >= 4 && m % 2 == 0) || m == KRYLOV_MAX_DIM {
            let y = tridiagonal_exp_first_column(&alphas, &betas, h);
            let estimate = if breakdown { 0.0 } else { beta0 * beta * y[m - 1].norm() };
            if estimate <= tol {
                for x in v.iter_mut() {
                    *x = Complex64::new(0.0, 0.0);
                }
                for (b, yk) in ws.basis[..m].iter().zip(&y) {
                    let c = yk * beta0;
                    for (x, bi) in v.iter_mut().zip(b) {
                        *x += bi * c;
                    }
                }
                return true;
            }
        }
        if m == KRYLOV_MAX_DIM {
            break;
        }
        betas.push(beta);
        for (b, wi) in ws.basis[j + 1].iter_mut().zip(&ws.w) {
            *b = wi / beta;
        }
    }
    false
}

/// `exp(−i h T) e₁` for the real symmetric tridiagonal `T`.
fn tridiagonal_exp_first_column(alphas: &[f64], betas: &[f64], h: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let q = &eig.eigenvectors;
    let phases: Vec<Complex64> = (0..m)
        .map(|i| Complex64::from_polar(q[(0, i)], -h * eig.eigenvalues[i]))
        .collect();
    (0..m)
        .map(|r| (0..m).map(|i| phases[i] * q[(r, i)]).sum())
        .collect()
}

/// Bound on `‖H(s)‖` from row sums at a few points along the path.
fn path_norm_bound(path: &dyn HamiltonianPath) -> Result<f64, ModelError> {
    let mut worst = 0.0f64;
    for i in 0..=8 {
        let h = path.hamiltonian(Interval01::saturating(i as f64 / 8.0))?;
        worst = worst.max(h.norm_bound());
    }
    Ok(worst)
}

/// States at `τ = j / samples` from one fixed-step run.
struct Run {
    samples: Vec<Vec<Complex64>>,
    steps: usize,
    matvecs: usize,
}

/// Step edges on `[0, 1]`: each interval between consecutive sample points
/// and schedule breakpoints is split uniformly into `2^level` times its
/// share of `density` steps per unit `τ`, so successive levels are nested.
/// Returns the edges and, for every sample point, its edge index.
fn step_grid(schedule: &Schedule, samples: usize, density: usize, level: u32) -> (Vec<f64>, Vec<usize>) {
    let mut knots: Vec<(f64, bool)> = (0..=samples)
        .map(|j| (j as f64 / samples as f64, true))
        .collect();
    knots.extend(
        schedule
            .breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b < 1.0)
            .map(|b| (b, false)),
    );
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(knots.len());
    for (x, is_sample) in knots {
        match merged.last_mut() {
            Some(last) if (x - last.0).abs() < 1e-12 => last.1 |= is_sample,
            _ => merged.push((x, is_sample)),
        }
    }
    if schedule.declared_order() == BoundaryOrder::Diverging && merged.len() > 1 {
        // geometric refinement toward each end restores the order of the
        // method against the square-root singularity
        let first = merged[1].0;
        let last = merged[merged.len() - 2].0;
        let mut graded = Vec::with_capacity(2 * GRADING_LEVELS);
        for k in 1..=GRADING_LEVELS as i32 {
            let f = 0.5f64.powi(k);
            graded.push((first * f, false));
            graded.push((1.0 - (1.0 - last) * f, false));
        }
        merged.extend(graded);
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut edges = vec![0.0];
    let mut sample_edges = vec![0];
    for w in merged.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        let n = (((b - a) * density as f64).ceil() as usize).max(1) << level;
        for i in 1..=n {
            edges.push(if i == n { b } else { a + (b - a) * i as f64 / n as f64 });
        }
        if w[1].1 {
            sample_edges.push(edges.len() - 1);
        }
    }
    (edges, sample_edges)
}

fn magnus_run(
    path: &dyn HamiltonianPath,
    schedule: &Schedule,
    initial: &[Complex64],
    total_time: f64,
    grid: &(Vec<f64>, Vec<usize>),
    krylov_tol: f64,
) -> Result<Run, EvolutionError> {
    const NODE_OFFSET: f64 = 0.288_675_134_594_812_9; // √3/6
    let a1 = 0.25 + NODE_OFFSET;
    let a2 = 0.25 - NODE_OFFSET;
    let (edges, sample_edges) = grid;
    let terms = path.terms();
    let mut generator = terms.combine(&vec![0.0; terms.num_terms()]);
    let mut ws = KrylovWorkspace::new(path.dim());
    let mut psi = initial.to_vec();
    let mut out = Vec::with_capacity(sample_edges.len());
    out.push(psi.clone());
    let mut next_sample = 1;
    let coefficients = |tau: f64| path.coefficients(Interval01::saturating(schedule.value(tau)));
    for (n, w) in edges.windows(2).enumerate() {
        let (tau, dtau) = (w[0], w[1] - w[0]);
        let h = total_time * dtau;
        let c1 = coefficients(tau + (0.5 - NODE_OFFSET) * dtau)?;
        let c2 = coefficients(tau + (0.5 + NODE_OFFSET) * dtau)?;
        let first: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a1 * x + a2 * y).collect();
        let second: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a2 * x + a1 * y).collect();
        terms.combine_into(&first, &mut generator);
        expm_apply(&generator, &mut psi, h, krylov_tol, &mut ws);
        terms.combine_into(&second, &mut generator);
        expm_apply(&generator, &mut psi, h, krylov_tol, &mut ws);
        if next_sample < sample_edges.len() && sample_edges[next_sample] == n + 1 {
            out.push(psi.clone());
            next_sample += 1;
        }
    }
    Ok(Run {
        samples: out,
        steps: edges.len() - 1,
        matvecs: ws.matvecs,
    })
}

fn difference_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `min_φ ‖a − e^{iφ} b‖`.
fn difference_up_to_phase(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ov = inner(b, a);
    let rot = if ov.norm() > 0.0 { ov / ov.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x - y * rot).norm_sqr()).sum::<f64>().sqrt()
}

/// Integrates from the ground state of `H(s(0))` to `τ = 1`.
pub fn evolve(
    path: &dyn HamiltonianPath,
    schedule: &Schedule,
    cfg: &EvolutionConfig,
) -> Result<(QuantumState, TrajectoryRecord), EvolutionError> {
    cfg.validate()?;
    let h0 = path.hamiltonian(Interval01::saturating(schedule.value(0.0)))?;
    let start = lowest_eigenpairs_from(&h0, 2.min(path.dim()), None)?;
    if let Some(gap) = start.gap() {
        if gap < DEGENERACY_THRESHOLD {
            return Err(EvolutionError::DegenerateStart { gap });
        }
    }
    let initial = start.ground_state().amplitudes().to_vec();

    let samples = cfg.samples;
    let density = match cfg.initial_steps {
        Some(n) => n.max(1),
        None => {
            let norm = path_norm_bound(path)?;
            ((cfg.total_time * norm / 32.0).ceil() as usize).max(8)
        }
    };
    let mut previous: Option<Run> = None;
    let mut level = 0;
    let (run, difference) = loop {
        let grid = step_grid(schedule, samples, density, level);
        let steps = grid.0.len() - 1;
        if steps > cfg.max_steps {
            return Err(EvolutionError::StepUnderflow {
                steps: previous.map_or(0, |p| p.steps),
                difference: f64::INFINITY,
                tolerance: cfg.tolerance,
            });
        }
        let krylov_tol = (0.1 * cfg.tolerance / steps as f64).max(1e-15);
        let run = magnus_run(path, schedule, &initial, cfg.total_time, &grid, krylov_tol)?;
        if let Some(prev) = previous.take() {
            let diff = difference_norm(prev.samples.last().unwrap(), run.samples.last().unwrap());
            log::debug!(
                "T = {} steps {steps}: change {diff:.3e} phase-free {:.3e} ({} matvecs)",
                cfg.total_time,
                difference_up_to_phase(prev.samples.last().unwrap(), run.samples.last().unwrap()),
                run.matvecs
            );
            if diff <= cfg.tolerance {
                break (run, diff);
            }
            if steps * 2 > cfg.max_steps {
                return Err(EvolutionError::StepUnderflow {
                    steps,
                    difference: diff,
                    tolerance: cfg.tolerance,
                });
            }
        }
        previous = Some(run);
        level += 1;
    };

    let mut points = Vec::with_capacity(samples + 1);
    let mut guess: Option<QuantumState> = None;
    let mut phase = 0.0;
    let mut last_energy = 0.0;
    for (j, amps) in run.samples.iter().enumerate() {
        let tau = j as f64 / samples as f64;
        let h = path.hamiltonian(Interval01::saturating(schedule.value(tau)))?;
        let data = lowest_eigenpairs_from(&h, 1, guess.as_ref())?;
        let phi = data.ground_state().clone();
        let psi = QuantumState::from_raw(amps.clone());
        let energy = data.ground_energy();
        if j > 0 {
            phase += 0.5 * (energy + last_energy) / samples as f64;
        }
        last_energy = energy;
        points.push(TrajectoryPoint {
            tau,
            delta: instantaneous_infidelity(&psi, &phi),
            overlap: phi.inner(&psi).norm(),
            norm: psi.norm(),
            phase,
        });
        guess = Some(phi);
    }
    let final_state = QuantumState::from_raw(run.samples.last().unwrap().clone());
    Ok((
        final_state,
        TrajectoryRecord {
            points,
            steps: run.steps,
            step_difference: difference,
        },
    ))
}

/// `δ = √(1 − |⟨ψ(1)|target⟩|²)` after a full evolution.
pub fn final_infidelity(
    path: &dyn HamiltonianPath,
    schedule: &Schedule,
    cfg: &EvolutionConfig,
    target: &Target,
) -> Result<f64, EvolutionError> {
    let (state, record) = evolve(path, schedule, cfg)?;
    Ok(match target {
        Target::SolvedGround => record.final_point().delta,
        Target::State(t) => {
            if t.dim() != state.dim() {
                return Err(EvolutionError::InvalidConfig(format!(
                    "target dimension {} differs from state dimension {}",
                    t.dim(),
                    state.dim()
                )));
            }
            instantaneous_infidelity(&state, t)
        }
    })
}

/// One `(schedule, ε)` result of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schedule_index: usize,
    pub schedule_label: String,
    pub schedule_kind: ScheduleKindName,
    pub n: Option<u32>,
    pub d: Option<f64>,
    pub epsilon: f64,
    pub total_time: f64,
    /// Final infidelity, or the error message of a failed run.
    pub result: Result<f64, String>,
    pub steps: Option<usize>,
    pub runtime_s: f64,
}

/// Every `(schedule, ε)` combination, evaluated concurrently on the current
/// rayon pool. Rows are ordered schedule-major, then by the given ε order.
pub fn sweep(
    path: &dyn HamiltonianPath,
    schedules: &[Schedule],
    epsilons: &[f64],
    template: &EvolutionConfig,
    target: &Target,
) -> Result<Vec<SweepRow>, EvolutionError> {
    if schedules.is_empty() || epsilons.is_empty() {
        return Err(EvolutionError::InvalidConfig(
            "sweep needs at least one schedule and one epsilon".into(),
        ));
    }
    let jobs: Vec<(usize, f64)> = (0..schedules.len())
        .flat_map(|i| epsilons.iter().map(move |&e| (i, e)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(i, epsilon)| {
            let schedule = &schedules[i];
            let cfg = EvolutionConfig {
                total_time: 1.0 / epsilon,
                ..template.clone()
            };
            let clock = Instant::now();
            let outcome = evolve(path, schedule, &cfg).and_then(|(state, record)| {
                let delta = match target {
                    Target::SolvedGround => record.final_point().delta,
                    Target::State(t) => instantaneous_infidelity(&state, t),
                };
                Ok((delta, record.steps))
            });
            let runtime_s = clock.elapsed().as_secs_f64();
            if let Err(e) = &outcome {
                log::warn!("{} at epsilon {epsilon}: {e}", schedule.label());
            }
            SweepRow {
                schedule_index: i,
                schedule_label: schedule.label(),
                schedule_kind: schedule.kind(),
                n: schedule.beta_order(),
                d: schedule.smoothing_width(),
                epsilon,
                total_time: cfg.total_time,
                steps: outcome.as_ref().ok().map(|o| o.1),
                result: outcome.map(|o| o.0).map_err(|e| e.to_string()),
                runtime_s,
            }
        })
        .collect())
}
