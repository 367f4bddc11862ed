//! Simulation of adiabatic state preparation along boundary-smooth schedules.
//!
//! Modules follow the data flow: special functions feed [`schedules`], which
//! reparametrize the Hamiltonian paths in [`models`]; [`spectral`] supplies
//! eigenstates and gaps, [`evolution`] integrates the Schrödinger equation,
//! and [`analysis`] fits the resulting infidelities.

pub mod analysis;
pub mod evolution;
pub mod models;
pub mod schedules;
pub mod specfun;
pub mod spectral;
pub mod state;

pub use state::QuantumState;

/// Union of the module error types.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    SpecFun(#[from] specfun::SpecFunError),
    #[error(transparent)]
    Schedule(#[from] schedules::ScheduleError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Evolution(#[from] evolution::EvolutionError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}
