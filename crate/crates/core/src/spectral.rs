//! Instantaneous eigenpairs, gap profiles and the first-order leakage
//! estimate.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::models::{HamiltonianPath, ModelError, SparseOperator};
use crate::schedules::{ScheduleError, TabulatedGap};
use crate::specfun::Interval01;
use crate::state::{inner, vector_norm, QuantumState};

/// Largest dimension diagonalized densely; Lanczos above.
pub const DENSE_DIM_LIMIT: usize = 256;
/// Default finite-difference step for [`gamma0`].
pub const DEFAULT_GAMMA_STEP: f64 = 1e-5;
/// Gaps below this are reported as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

const LANCZOS_MAX_ITER: usize = 600;
const LANCZOS_CHECK_EVERY: usize = 4;
const LANCZOS_TARGET: f64 = 1e-14;
const RESIDUAL_CONTRACT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("requested {requested} eigenpairs of a {dim}-dimensional operator")]
    InvalidRequest { requested: usize, dim: usize },
    #[error("eigensolver stopped after {iterations} iterations with relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("ground state is degenerate at s = {s} (gap {gap:.3e})")]
    Degenerate { s: f64, gap: f64 },
    #[error("invalid gap table: {0}")]
    Table(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// The lowest eigenpairs of one Hamiltonian, ascending in energy.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub energies: Vec<f64>,
    pub states: Vec<QuantumState>,
    /// Largest `‖HΦ − EΦ‖ / ‖H‖` over the returned pairs.
    pub relative_residual: f64,
    /// Lanczos iterations used; zero for dense diagonalization.
    pub iterations: usize,
}

impl SpectralData {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn ground_state(&self) -> &QuantumState {
        &self.states[0]
    }

    /// `E1 − E0`, or `None` when only one pair was computed.
    pub fn gap(&self) -> Option<f64> {
        (self.energies.len() > 1).then(|| self.energies[1] - self.energies[0])
    }
}

/// The `k` lowest eigenpairs of a Hermitian operator.
///
/// Dense diagonalization up to [`DENSE_DIM_LIMIT`], Lanczos with full
/// reorthogonalization above. Eigenvector phases are fixed so that the
/// largest-magnitude amplitude is real and positive.
pub fn lowest_eigenpairs(h: &SparseOperator, k: usize) -> Result<SpectralData, SpectralError> {
    lowest_eigenpairs_from(h, k, None)
}

/// As [`lowest_eigenpairs`], seeding the iterative solver with a nearby
/// ground-state guess (for example the solution at a neighbouring `s`).
pub fn lowest_eigenpairs_from(
    h: &SparseOperator,
    k: usize,
    guess: Option<&QuantumState>,
) -> Result<SpectralData, SpectralError> {
    let dim = h.dim();
    if k == 0 || k > dim || guess.is_some_and(|g| g.dim() != dim) {
        return Err(SpectralError::InvalidRequest { requested: k, dim });
    }
    let (energies, vectors, iterations) = if dim <= DENSE_DIM_LIMIT {
        let (e, v) = dense_lowest(h, k);
        (e, v, 0)
    } else {
        lanczos_lowest(h, k, guess)?
    };
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    let mut states = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for (e, v) in energies.iter().zip(vectors) {
        let mut state = QuantumState::normalized(v).expect("eigenvector is nonzero");
        state.fix_phase();
        let hv = h.apply(state.amplitudes());
        let res = hv
            .iter()
            .zip(state.amplitudes())
            .map(|(a, b)| (a - b * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res / scale);
        states.push(state);
    }
    if worst > RESIDUAL_CONTRACT {
        return Err(SpectralError::NoConvergence {
            iterations: 0,
            residual: worst,
        });
    }
    if k > 1 && energies[1] - energies[0] < DEGENERACY_THRESHOLD {
        log::warn!(
            "near-degenerate ground state: gap {:.3e}",
            energies[1] - energies[0]
        );
    }
    Ok(SpectralData {
        energies,
        states,
        relative_residual: worst,
        iterations,
    })
}

fn dense_lowest(h: &SparseOperator, k: usize) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let dim = h.dim();
    if h.is_real() {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for r in 0..dim {
            for (c, v) in h.row(r) {
                m[(r, c)] = v.re;
            }
        }
        let eig = SymmetricEigen::new(m);
        let order = ascending(eig.eigenvalues.as_slice());
        let energies = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order[..k]
            .iter()
            .map(|&i| {
                eig.eigenvectors
                    .column(i)
                    .iter()
                    .map(|&x| Complex64::new(x, 0.0))
                    .collect()
            })
            .collect();
        (energies, vectors)
    } else {
        let eig = SymmetricEigen::new(h.to_dense());
        let order = ascending(eig.eigenvalues.as_slice());
        let energies = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order[..k]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (energies, vectors)
    }
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Fixed start vector with no structure aligned to any lattice symmetry.
fn start_vector(dim: usize) -> Vec<Complex64> {
    let golden = 0.618_033_988_749_894_9;
    let v: Vec<Complex64> = (0..dim)
        .map(|i| {
            let x = ((i + 1) as f64 * golden).fract();
            Complex64::new(0.5 + x, 0.0)
        })
        .collect();
    let n = vector_norm(&v);
    v.into_iter().map(|a| a / n).collect()
}

type LanczosResult = (Vec<f64>, Vec<Vec<Complex64>>, usize);

fn lanczos_lowest(
    h: &SparseOperator,
    k: usize,
    guess: Option<&QuantumState>,
) -> Result<LanczosResult, SpectralError> {
    let dim = h.dim();
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    let max_iter = dim.min(LANCZOS_MAX_ITER);
    let mut start = start_vector(dim);
    if let Some(g) = guess {
        // excited levels need a generic component to stay reachable
        let mix = if k > 1 { 1e-3 } else { 0.0 };
        for (s, a) in start.iter_mut().zip(g.amplitudes()) {
            *s = a + *s * mix;
        }
        let n = vector_norm(&start);
        start.iter_mut().for_each(|a| *a /= n);
    }
    let mut basis: Vec<Vec<Complex64>> = vec![start];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut best: Option<(f64, Vec<f64>, DMatrix<f64>)> = None;

    loop {
        let j = alphas.len();
        h.apply_into(&basis[j], &mut w);
        let alpha = inner(&basis[j], &w).re;
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * alpha;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b;
            }
        }
        for _ in 0..2 {
            for v in &basis {
                let c = inner(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
        }
        alphas.push(alpha);
        let beta = vector_norm(&w);
        let m = alphas.len();
        let exhausted = beta <= 1e-13 * scale || m >= max_iter;
        if m >= k && (m % LANCZOS_CHECK_EVERY == 0 || exhausted) {
            let t = tridiagonal(&alphas, &betas);
            let eig = SymmetricEigen::new(t);
            let order = ascending(eig.eigenvalues.as_slice());
            let residual = order[..k]
                .iter()
                .map(|&i| beta * eig.eigenvectors[(m - 1, i)].abs() / scale)
                .fold(0.0, f64::max);
            let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut coeffs = DMatrix::<f64>::zeros(m, k);
            for (col, &i) in order[..k].iter().enumerate() {
                coeffs.set_column(col, &eig.eigenvectors.column(i));
            }
            let improves = best.as_ref().is_none_or(|(r, _, _)| residual < *r);
            if improves {
                best = Some((residual, values, coeffs));
            }
            if residual <= LANCZOS_TARGET || exhausted {
                break;
            }
        }
        if exhausted {
            if m < k {
                return Err(SpectralError::NoConvergence {
                    iterations: m,
                    residual: f64::INFINITY,
                });
            }
            break;
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }

    let (residual, values, coeffs) = best.expect("at least one Ritz check ran");
    if residual > RESIDUAL_CONTRACT {
        return Err(SpectralError::NoConvergence {
            iterations: alphas.len(),
            residual,
        });
    }
    let vectors = (0..k)
        .map(|col| {
            let mut x = vec![Complex64::new(0.0, 0.0); dim];
            for (j, v) in basis.iter().enumerate().take(coeffs.nrows()) {
                let c = coeffs[(j, col)];
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += vi * c;
                }
            }
            x
        })
        .collect();
    Ok((values, vectors, alphas.len()))
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

/// Eigenpairs of `H(s)` on a path.
pub fn path_eigenpairs(
    path: &dyn HamiltonianPath,
    s: f64,
    k: usize,
) -> Result<SpectralData, SpectralError> {
    let h = path.hamiltonian(Interval01::saturating(s))?;
    lowest_eigenpairs(&h, k)
}

/// Tabulated gap `Δ01(s)` with monotone-cubic interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    table: TabulatedGap,
}

impl GapProfile {
    pub fn new(s: Vec<f64>, gap: Vec<f64>) -> Result<Self, SpectralError> {
        Ok(GapProfile {
            table: TabulatedGap::new(s, gap)?,
        })
    }

    pub fn grid(&self) -> &[f64] {
        self.table.grid()
    }

    pub fn gaps(&self) -> &[f64] {
        self.table.values()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.table.eval(s)
    }

    /// `(s, Δ)` at the smallest tabulated gap.
    pub fn minimum(&self) -> (f64, f64) {
        self.table.min()
    }

    pub fn as_table(&self) -> &TabulatedGap {
        &self.table
    }

    /// Writes `s, gap` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "gap"])?;
        for (s, g) in self.grid().iter().zip(self.gaps()) {
            w.write_record(&[format!("{s:.17e}"), format!("{g:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`GapProfile::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self, SpectralError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = r
            .headers()
            .map_err(|e| SpectralError::Table(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| SpectralError::Table(format!("missing column {name:?}")))
        };
        let (si, gi) = (col("s")?, col("gap")?);
        let (mut s, mut gap) = (Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| SpectralError::Table(e.to_string()))?;
            let parse = |i: usize| {
                rec.get(i)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| SpectralError::Table(format!("bad number on data row {}", line + 1)))
            };
            s.push(parse(si)?);
            gap.push(parse(gi)?);
        }
        GapProfile::new(s, gap)
    }
}

/// `Δ01` at `grid_size` uniform values of `s` in `[0, 1]`, solved in
/// parallel.
pub fn gap_profile(path: &dyn HamiltonianPath, grid_size: usize) -> Result<GapProfile, SpectralError> {
    if grid_size < 2 {
        return Err(SpectralError::Table("gap grid needs at least 2 points".into()));
    }
    let s: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();
    let gaps = s
        .par_iter()
        .map(|&x| {
            let data = path_eigenpairs(path, x, 2)?;
            let gap = data.gap().unwrap();
            if gap < DEGENERACY_THRESHOLD {
                return Err(SpectralError::Degenerate { s: x, gap });
            }
            Ok(gap)
        })
        .collect::<Result<Vec<f64>, SpectralError>>()?;
    GapProfile::new(s, gaps)
}

/// `Φ` multiplied by the phase that makes `⟨reference|Φ⟩` real and positive.
fn transported(reference: &QuantumState, state: &QuantumState) -> Vec<Complex64> {
    let overlap = reference.inner(state);
    let rot = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    state.amplitudes().iter().map(|a| a * rot).collect()
}

/// `‖(1 − |Φ0⟩⟨Φ0|) ∂_τ Φ0‖` by central differences of phase-aligned ground
/// states at `τ ± dτ` (one-sided at the ends of `[0, 1]`).
fn gamma0_at_step(path: &dyn HamiltonianPath, tau: f64, dtau: f64) -> Result<f64, SpectralError> {
    let centre = path_eigenpairs(path, tau, 2)?;
    let gap = centre.gap().unwrap();
    if gap < DEGENERACY_THRESHOLD {
        return Err(SpectralError::Degenerate { s: tau, gap });
    }
    let phi0 = centre.ground_state();
    let (lo, hi) = ((tau - dtau).max(0.0), (tau + dtau).min(1.0));
    let ground = |x: f64| -> Result<Vec<Complex64>, SpectralError> {
        if x == tau {
            return Ok(phi0.amplitudes().to_vec());
        }
        let data = path_eigenpairs(path, x, 1)?;
        Ok(transported(phi0, data.ground_state()))
    };
    let (plus, minus) = (ground(hi)?, ground(lo)?);
    let width = hi - lo;
    let deriv: Vec<Complex64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / width).collect();
    let along = inner(phi0.amplitudes(), &deriv);
    let orth: Vec<Complex64> = deriv
        .iter()
        .zip(phi0.amplitudes())
        .map(|(d, p)| d - p * along)
        .collect();
    Ok(vector_norm(&orth))
}

/// Nonadiabatic coupling `γ0(τ) = ‖(1 − P0) ∂_τ Φ0(τ)‖` along the path.
///
/// Evaluated at `dτ` and `dτ/2`; the finer value is returned and a warning
/// logged when the two disagree by more than `1e-6` relative.
pub fn gamma0(path: &dyn HamiltonianPath, tau: Interval01, dtau: f64) -> Result<f64, SpectralError> {
    if !(dtau > 0.0 && dtau < 0.5) {
        return Err(SpectralError::Table(format!("finite-difference step {dtau} outside (0, 0.5)")));
    }
    let coarse = gamma0_at_step(path, tau.get(), dtau)?;
    let fine = gamma0_at_step(path, tau.get(), 0.5 * dtau)?;
    if (coarse - fine).abs() > 1e-6 * fine.max(1.0) {
        log::warn!(
            "gamma0 at tau = {} not converged in the step: {coarse:.9e} vs {fine:.9e}",
            tau.get()
        );
    }
    Ok(fine)
}

/// First-order leakage estimate `ε γ0(τ) / Δ01(τ)`.
pub fn first_order_infidelity(
    path: &dyn HamiltonianPath,
    tau: Interval01,
    epsilon: f64,
) -> Result<f64, SpectralError> {
    if !(epsilon > 0.0) {
        return Err(SpectralError::Table(format!("epsilon must be positive, got {epsilon}")));
    }
    let g = gamma0(path, tau, DEFAULT_GAMMA_STEP)?;
    let gap = path_eigenpairs(path, tau.get(), 2)?.gap().unwrap();
    Ok(epsilon * g / gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ising_hamiltonian, AffinePath, IsingChain, IsingParams, DEFAULT_MEMORY_CAP};

    #[test]
    fn two_spin_ground_energy() {
        let h = ising_hamiltonian(&IsingParams::new(2, 0.0, -1.5).unwrap()).unwrap();
        let d = lowest_eigenpairs(&h, 2).unwrap();
        assert!((d.ground_energy() + 1.25).abs() < 1e-14);
        assert!((d.ground_state().amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense() {
        for sites in [5, 6] {
            let h = ising_hamiltonian(&IsingParams::new(sites, 0.41, -1.07).unwrap()).unwrap();
            let (de, dv) = dense_lowest(&h, 3);
            let (le, lv, _) = lanczos_lowest(&h, 3, None).unwrap();
            for i in 0..3 {
                assert!((de[i] - le[i]).abs() < 1e-10, "L={sites} level {i}");
                let a = QuantumState::normalized(dv[i].clone()).unwrap();
                let b = QuantumState::normalized(lv[i].clone()).unwrap();
                assert!((a.inner(&b).norm() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn request_bounds() {
        let h = SparseOperator::from_diagonal(&[1.0, 2.0]);
        assert!(lowest_eigenpairs(&h, 0).is_err());
        assert!(lowest_eigenpairs(&h, 3).is_err());
    }

    #[test]
    fn gap_profile_of_constant_path_is_constant() {
        let path = AffinePath::constant(2, SparseOperator::from_diagonal(&[0.0, 1.5, 2.0, 3.0]));
        let p = gap_profile(&path, 11).unwrap();
        assert!(p.gaps().iter().all(|g| (g - 1.5).abs() < 1e-14));
        assert_eq!(gamma0(&path, Interval01::new(0.3).unwrap(), 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn gap_csv_round_trip() {
        // even chains are degenerate at the classical endpoint
        let chain = IsingChain::new(5, DEFAULT_MEMORY_CAP).unwrap();
        let p = gap_profile(&chain, 21).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = GapProfile::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        assert!(GapProfile::read_csv("s,gap\n0,1\n1,-1\n".as_bytes()).is_err());
        assert!(GapProfile::read_csv("x,y\n0,1\n".as_bytes()).is_err());
    }
}
