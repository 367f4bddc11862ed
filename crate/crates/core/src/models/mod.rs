//! Spin-chain Hamiltonians and their parameter-space paths.
//!
//! Basis convention: basis index `b` encodes the chain as a bitstring with
//! site 0 in the most significant position, so the ket `|0101…0⟩` is the
//! index whose binary digits read `0101…0`. Bit value 0 is spin up
//! (`S^z = +½`) for the Ising chain and the atomic ground state for the
//! Rydberg chain.

mod ising;
mod operator;
mod rydberg;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{Interval01, SpecFunError};

pub use ising::{ising_hamiltonian, semicircle_path, IsingChain, IsingParams};
pub use operator::{AffineOperator, SparseOperator};
pub use rydberg::{
    elliptic_path, rydberg_hamiltonian, DetuningOrientation, EllipticPath, RydbergChain,
    RydbergParams, C6_RAD_PER_US_UM6, DEFAULT_DELTA_R, DEFAULT_OMEGA_R, DEFAULT_SPACING_UM,
};

/// Default memory ceiling for operator storage, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("chain of {sites} sites needs about {required} bytes, above the cap of {cap}")]
    Resource {
        sites: usize,
        required: usize,
        cap: usize,
    },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("atoms {0} and {1} coincide")]
    CoincidentAtoms(usize, usize),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Value (0 or 1) of `site` in basis state `index` of an `num_sites` chain.
#[inline]
pub fn site_bit(index: usize, site: usize, num_sites: usize) -> usize {
    (index >> (num_sites - 1 - site)) & 1
}

/// Basis index of a ket string such as `"0101"`.
pub fn basis_index(bits: &str) -> Result<usize, ModelError> {
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        other => Err(ModelError::InvalidParameter(format!(
            "basis string contains {other:?}"
        ))),
    })
}

/// The alternating product state `|0101…⟩` on `num_sites` sites.
pub fn neel_index(num_sites: usize) -> usize {
    (0..num_sites).fold(0, |acc, site| (acc << 1) | (site % 2))
}

pub(crate) fn check_memory(
    num_sites: usize,
    nnz_per_row: usize,
    terms: usize,
    cap: usize,
) -> Result<usize, ModelError> {
    if num_sites == 0 || num_sites >= usize::BITS as usize - 8 {
        return Err(ModelError::InvalidParameter(format!(
            "unsupported number of sites {num_sites}"
        )));
    }
    let dim = 1usize << num_sites;
    // pattern (col index) + one complex value per term + combined copy, per nonzero
    let required = dim
        .saturating_mul(nnz_per_row)
        .saturating_mul(8 + 16 * (terms + 1));
    if required > cap {
        return Err(ModelError::Resource {
            sites: num_sites,
            required,
            cap,
        });
    }
    Ok(dim)
}

/// A path `s ↦ H(s) = Σ_k c_k(s) A_k` through a fixed set of operators.
pub trait HamiltonianPath: Send + Sync {
    fn num_sites(&self) -> usize;

    fn terms(&self) -> &AffineOperator;

    /// Expansion coefficients of `H(s)` in [`HamiltonianPath::terms`].
    fn coefficients(&self, s: Interval01) -> Result<Vec<f64>, ModelError>;

    fn dim(&self) -> usize {
        self.terms().dim()
    }

    fn hamiltonian(&self, s: Interval01) -> Result<SparseOperator, ModelError> {
        Ok(self.terms().combine(&self.coefficients(s)?))
    }
}

type CoefficientFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// A path given by explicit operator terms and a coefficient function.
/// Used for small test systems (two-level crossings, constant Hamiltonians).
pub struct AffinePath {
    num_sites: usize,
    terms: AffineOperator,
    coefficients: Box<CoefficientFn>,
}

impl AffinePath {
    pub fn new(
        num_sites: usize,
        terms: &[SparseOperator],
        coefficients: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        AffinePath {
            num_sites,
            terms: AffineOperator::new(terms),
            coefficients: Box::new(coefficients),
        }
    }

    /// A path whose Hamiltonian does not depend on `s`.
    pub fn constant(num_sites: usize, h: SparseOperator) -> Self {
        AffinePath::new(num_sites, &[h], |_| vec![1.0])
    }
}

impl HamiltonianPath for AffinePath {
    fn num_sites(&self) -> usize {
        self.num_sites
    }

    fn terms(&self) -> &AffineOperator {
        &self.terms
    }

    fn coefficients(&self, s: Interval01) -> Result<Vec<f64>, ModelError> {
        let c = (self.coefficients)(s.get());
        if c.len() != self.terms.num_terms() {
            return Err(ModelError::InvalidParameter(format!(
                "coefficient function returned {} values for {} terms",
                c.len(),
                self.terms.num_terms()
            )));
        }
        Ok(c)
    }
}

/// Model selection as it appears in experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// Mixed-field Ising chain on the semicircle path.
    Ising {
        #[serde(rename = "L")]
        sites: usize,
    },
    /// Uniform Rydberg chain on the constant-speed elliptical path.
    Rydberg {
        #[serde(rename = "L")]
        sites: usize,
        #[serde(default = "default_spacing")]
        spacing_um: f64,
        /// Maximum Rabi frequency in rad/µs.
        #[serde(default = "default_omega_r")]
        omega_r: f64,
        /// Detuning amplitude in rad/µs.
        #[serde(default = "default_delta_r")]
        delta_r: f64,
        #[serde(default)]
        orientation: DetuningOrientation,
    },
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING_UM
}
fn default_omega_r() -> f64 {
    DEFAULT_OMEGA_R
}
fn default_delta_r() -> f64 {
    DEFAULT_DELTA_R
}

impl ModelSpec {
    pub fn ising(sites: usize) -> Self {
        ModelSpec::Ising { sites }
    }

    /// Rydberg chain with the default spacing and path amplitudes, oriented to
    /// start in the all-ground (ferromagnetic) state.
    pub fn rydberg(sites: usize) -> Self {
        ModelSpec::Rydberg {
            sites,
            spacing_um: DEFAULT_SPACING_UM,
            omega_r: DEFAULT_OMEGA_R,
            delta_r: DEFAULT_DELTA_R,
            orientation: DetuningOrientation::default(),
        }
    }

    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::Ising { sites } | ModelSpec::Rydberg { sites, .. } => *sites,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Ising { .. } => "ising",
            ModelSpec::Rydberg { .. } => "rydberg",
        }
    }

    pub fn build(&self, memory_cap: usize) -> Result<Arc<dyn HamiltonianPath>, ModelError> {
        Ok(match self {
            ModelSpec::Ising { sites } => Arc::new(IsingChain::new(*sites, memory_cap)?),
            ModelSpec::Rydberg {
                sites,
                spacing_um,
                omega_r,
                delta_r,
                orientation,
            } => {
                let positions = (0..*sites)
                    .map(|i| [i as f64 * spacing_um, 0.0])
                    .collect::<Vec<_>>();
                let path = EllipticPath::new(*omega_r, *delta_r)?;
                Arc::new(RydbergChain::new(
                    positions,
                    path,
                    *orientation,
                    0.0,
                    memory_cap,
                )?)
            }
        })
    }
}

/// `H(s)` for a configured model: the semicircle path into the Ising
/// Hamiltonian, or the elliptical path into the Rydberg Hamiltonian with zero
/// laser phase.
pub fn path_hamiltonian(model: &ModelSpec, s: Interval01) -> Result<SparseOperator, ModelError> {
    model.build(DEFAULT_MEMORY_CAP)?.hamiltonian(s)
}
