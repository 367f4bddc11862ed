use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_memory, site_bit, AffineOperator, HamiltonianPath, ModelError, SparseOperator};
use crate::specfun::{elliptic_e, elliptic_e_inv, Interval01};

/// Van der Waals coefficient, `862690 · 2π` rad/µs · µm⁶.
pub const C6_RAD_PER_US_UM6: f64 = 862_690.0 * 2.0 * PI;
/// Maximum Rabi frequency of the elliptical path, rad/µs.
pub const DEFAULT_OMEGA_R: f64 = 2.5 * 2.0 * PI;
/// Detuning amplitude of the elliptical path, rad/µs.
pub const DEFAULT_DELTA_R: f64 = 8.75 * 2.0 * PI;
pub const DEFAULT_SPACING_UM: f64 = 5.6;

/// Instantaneous drive of a Rydberg array:
/// `H = (Ω/2) Σ (e^{iφ}|0⟩⟨1| + h.c.) − Δ Σ n_i + Σ_{i<j} C6/r_ij⁶ n_i n_j`.
/// Frequencies in rad/µs, positions in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct RydbergParams {
    pub positions: Vec<[f64; 2]>,
    pub omega: f64,
    pub phase: f64,
    pub detuning: f64,
}

/// Which way the detuning is swept along the ellipse.
///
/// `AsPrinted` follows `Δ(τ) = Δ_R cos θ(τ)`, which starts at `+Δ_R` where the
/// Rydberg-blockaded (antiferromagnetic) state is the ground state.
/// `Reversed` negates the detuning, starting in the all-ground
/// (ferromagnetic) state and ending antiferromagnetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningOrientation {
    AsPrinted,
    #[default]
    Reversed,
}

impl DetuningOrientation {
    fn sign(self) -> f64 {
        match self {
            DetuningOrientation::AsPrinted => 1.0,
            DetuningOrientation::Reversed => -1.0,
        }
    }
}

fn pair_interactions(positions: &[[f64; 2]]) -> Result<Vec<(usize, usize, f64)>, ModelError> {
    let mut out = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let r2 = dx * dx + dy * dy;
            if r2 <= 0.0 || !r2.is_finite() {
                return Err(ModelError::CoincidentAtoms(i, j));
            }
            out.push((i, j, C6_RAD_PER_US_UM6 / (r2 * r2 * r2)));
        }
    }
    Ok(out)
}

/// `[½ Σ (e^{iφ}|0⟩⟨1| + h.c.), Σ n_i, Σ V_ij n_i n_j]`.
fn rydberg_terms(positions: &[[f64; 2]], phase: f64) -> Result<[SparseOperator; 3], ModelError> {
    let sites = positions.len();
    let dim = 1usize << sites;
    let pairs = pair_interactions(positions)?;
    let mut number = vec![0.0; dim];
    let mut interaction = vec![0.0; dim];
    let mut flips = Vec::with_capacity(dim * sites);
    let lower = Complex64::from_polar(0.5, phase);
    for b in 0..dim {
        for i in 0..sites {
            let mask = 1 << (sites - 1 - i);
            if site_bit(b, i, sites) == 1 {
                number[b] += 1.0;
                // ⟨b with i→0| e^{iφ}|0⟩⟨1| |b⟩ and its conjugate
                flips.push((b ^ mask, b, lower));
                flips.push((b, b ^ mask, lower.conj()));
            }
        }
        interaction[b] = pairs
            .iter()
            .filter(|&&(i, j, _)| site_bit(b, i, sites) == 1 && site_bit(b, j, sites) == 1)
            .map(|&(_, _, v)| v)
            .sum();
    }
    Ok([
        SparseOperator::from_triplets(dim, flips),
        SparseOperator::from_diagonal(&number),
        SparseOperator::from_diagonal(&interaction),
    ])
}

pub fn rydberg_hamiltonian(p: &RydbergParams) -> Result<SparseOperator, ModelError> {
    if p.positions.is_empty() {
        return Err(ModelError::InvalidParameter("no atoms".into()));
    }
    check_memory(p.positions.len(), p.positions.len() + 1, 1, super::DEFAULT_MEMORY_CAP)?;
    let terms = rydberg_terms(&p.positions, p.phase)?;
    Ok(AffineOperator::new(&terms).combine(&[p.omega, -p.detuning, 1.0]))
}

/// Constant-speed parametrization of the ellipse `(Δ_R cos θ, Ω_R sin θ)`,
/// `θ ∈ [0, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticPath {
    pub omega_r: f64,
    pub delta_r: f64,
    /// Eccentricity `√(1 − Ω_R²/Δ_R²)`.
    pub eccentricity: f64,
    /// Parameter `e²/(e² − 1)` (negative).
    pub m: f64,
    /// Perimeter `4 Δ_R E(π/2, e²)`.
    pub perimeter: f64,
}

impl EllipticPath {
    pub fn new(omega_r: f64, delta_r: f64) -> Result<Self, ModelError> {
        if !(omega_r > 0.0 && omega_r < delta_r && delta_r.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "elliptical path needs 0 < omega_r < delta_r, got {omega_r}, {delta_r}"
            )));
        }
        let e2 = 1.0 - (omega_r / delta_r).powi(2);
        let m = e2 / (e2 - 1.0);
        let perimeter = 4.0 * delta_r * elliptic_e(FRAC_PI_2, e2)?;
        Ok(EllipticPath {
            omega_r,
            delta_r,
            eccentricity: e2.sqrt(),
            m,
            perimeter,
        })
    }

    /// Ellipse angle reached at `τ`.
    pub fn angle(&self, tau: Interval01) -> Result<f64, ModelError> {
        let target = self.perimeter * tau.get() / (2.0 * self.omega_r);
        // the half-perimeter identity holds only to rounding; do not let the
        // last ulp push τ = 1 out of range
        let max = elliptic_e(PI, self.m)?;
        Ok(elliptic_e_inv(target.min(max), self.m)?)
    }

    /// `(Δ, Ω)` at `τ`.
    pub fn evaluate(&self, tau: Interval01) -> Result<(f64, f64), ModelError> {
        let theta = self.angle(tau)?;
        Ok((self.delta_r * theta.cos(), self.omega_r * theta.sin()))
    }
}

impl Default for EllipticPath {
    fn default() -> Self {
        EllipticPath::new(DEFAULT_OMEGA_R, DEFAULT_DELTA_R).expect("default path parameters")
    }
}

pub fn elliptic_path(tau: Interval01, p: &EllipticPath) -> Result<(f64, f64), ModelError> {
    p.evaluate(tau)
}

/// A Rydberg array driven along an [`EllipticPath`].
#[derive(Debug, Clone)]
pub struct RydbergChain {
    positions: Vec<[f64; 2]>,
    path: EllipticPath,
    orientation: DetuningOrientation,
    terms: AffineOperator,
}

impl RydbergChain {
    pub fn new(
        positions: Vec<[f64; 2]>,
        path: EllipticPath,
        orientation: DetuningOrientation,
        phase: f64,
        memory_cap: usize,
    ) -> Result<Self, ModelError> {
        if positions.is_empty() {
            return Err(ModelError::InvalidParameter("no atoms".into()));
        }
        check_memory(positions.len(), positions.len() + 1, 3, memory_cap)?;
        let terms = AffineOperator::new(&rydberg_terms(&positions, phase)?);
        Ok(RydbergChain {
            positions,
            path,
            orientation,
            terms,
        })
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn path(&self) -> &EllipticPath {
        &self.path
    }

    /// Signed `(Δ, Ω)` actually applied at `s`.
    pub fn drive(&self, s: Interval01) -> Result<(f64, f64), ModelError> {
        let (delta, omega) = self.path.evaluate(s)?;
        Ok((self.orientation.sign() * delta, omega))
    }
}

impl HamiltonianPath for RydbergChain {
    fn num_sites(&self) -> usize {
        self.positions.len()
    }

    fn terms(&self) -> &AffineOperator {
        &self.terms
    }

    fn coefficients(&self, s: Interval01) -> Result<Vec<f64>, ModelError> {
        let (delta, omega) = self.drive(s)?;
        Ok(vec![omega, -delta, 1.0])
    }
}
