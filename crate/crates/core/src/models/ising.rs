use std::f64::consts::PI;

use num_complex::Complex64;

use super::{check_memory, site_bit, AffineOperator, HamiltonianPath, ModelError, SparseOperator};
use crate::specfun::Interval01;

/// Parameters of the open mixed-field Ising chain
/// `H = Σ S^z_i S^z_{i+1} + Σ (g S^x_i + h S^z_i)` with `S = σ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    pub sites: usize,
    /// Transverse field.
    pub g: f64,
    /// Longitudinal field.
    pub h: f64,
}

impl IsingParams {
    pub fn new(sites: usize, g: f64, h: f64) -> Result<Self, ModelError> {
        if sites < 2 {
            return Err(ModelError::InvalidParameter(format!(
                "Ising chain needs at least 2 sites, got {sites}"
            )));
        }
        Ok(IsingParams { sites, g, h })
    }
}

/// `(g, h)` along the semicircle from `(0, −1.5)` to `(0, −0.5)`.
pub fn semicircle_path(tau: Interval01) -> (f64, f64) {
    let t = tau.get();
    let g = 0.5 * (PI * t).sin();
    let h = -(1.0 + 0.5 * (PI * t).cos());
    (g, h)
}

#[inline]
fn spin_z(index: usize, site: usize, sites: usize) -> f64 {
    if site_bit(index, site, sites) == 0 {
        0.5
    } else {
        -0.5
    }
}

/// `[Σ S^z_i S^z_{i+1}, Σ S^x_i, Σ S^z_i]`.
fn ising_terms(sites: usize) -> [SparseOperator; 3] {
    let dim = 1usize << sites;
    let mut zz = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut flips = Vec::with_capacity(dim * sites);
    for (b, (zz_b, z_b)) in zz.iter_mut().zip(z.iter_mut()).enumerate() {
        for i in 0..sites {
            let si = spin_z(b, i, sites);
            *z_b += si;
            if i + 1 < sites {
                *zz_b += si * spin_z(b, i + 1, sites);
            }
            flips.push((b, b ^ (1 << (sites - 1 - i)), Complex64::new(0.5, 0.0)));
        }
    }
    [
        SparseOperator::from_diagonal(&zz),
        SparseOperator::from_triplets(dim, flips),
        SparseOperator::from_diagonal(&z),
    ]
}

pub fn ising_hamiltonian(p: &IsingParams) -> Result<SparseOperator, ModelError> {
    check_memory(p.sites, p.sites + 1, 1, super::DEFAULT_MEMORY_CAP)?;
    let terms = ising_terms(p.sites);
    Ok(AffineOperator::new(&terms).combine(&[1.0, p.g, p.h]))
}

/// The Ising chain driven along the semicircle path.
#[derive(Debug, Clone)]
pub struct IsingChain {
    sites: usize,
    terms: AffineOperator,
}

impl IsingChain {
    pub fn new(sites: usize, memory_cap: usize) -> Result<Self, ModelError> {
        IsingParams::new(sites, 0.0, 0.0)?;
        check_memory(sites, sites + 1, 3, memory_cap)?;
        Ok(IsingChain {
            sites,
            terms: AffineOperator::new(&ising_terms(sites)),
        })
    }
}

impl HamiltonianPath for IsingChain {
    fn num_sites(&self) -> usize {
        self.sites
    }

    fn terms(&self) -> &AffineOperator {
        &self.terms
    }

    fn coefficients(&self, s: Interval01) -> Result<Vec<f64>, ModelError> {
        let (g, h) = semicircle_path(s);
        Ok(vec![1.0, g, h])
    }
}
