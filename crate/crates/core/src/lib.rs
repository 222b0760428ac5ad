//! Reduced-order steepest-entropy-ascent (SEA) dynamics on hypoequilibrium
//! state families of diagonal quantum systems.
//!
//! A declared energy spectrum is partitioned into spectral sectors; each
//! sector carries a canonical distribution with its own constraint potentials
//! `(alpha_K, beta_K)`. The crate provides:
//!
//! * the 2M-parameter sector-canonical state family and its thermodynamic
//!   functionals ([`he_state`]),
//! * full N-population states, sector aggregation, the affine
//!   entropy-vs-energy fingerprint, and the constrained maximum-entropy
//!   projection with a brute-force oracle ([`full_state`]),
//! * the SEA nonequilibrium potentials, Massieu eigenvalues, and entropy
//!   production ([`sea`]),
//! * time evolution of both the full populations and the reduced potentials,
//!   with equilibrium solvers ([`dynamics`]),
//! * non-Hamiltonian composite models of heat interaction between subsystems
//!   ([`nh`]).

pub mod dynamics;
pub mod error;
pub mod full_state;
pub mod he_state;
pub mod nh;
pub mod sea;
pub mod spectrum;

pub use dynamics::{
    equilibrium_state, full_rhs, integrate, reduced_rhs, sector_rates, Direction, EquilibriumState,
    InitialState, IntegratorConfig, Method, SectorRate, SectorSummary, StateSnapshot, Trajectory,
    TrajectorySample,
};
pub use error::Error;
pub use full_state::{
    affine_fit, brute_force_maxent, rcce_project, rcce_project_aggregates, sector_aggregates,
    AffineFit, FullState, SectorAggregates,
};
pub use he_state::{log_partition_function, HEState, SectorThermo};
pub use nh::{
    independent_composite_rates, mutual_equilibrium_beta, nh_potentials, nh_rhs, steady_state_beta,
    three_system_flows,
    three_system_potentials, three_system_rhs, two_system_report, FlowReport, NHPotentials,
    Subsystem, ThreeSystemModel, ThreeSystemPotentials, TwoSystemModel,
};
pub use sea::{
    beta_decomposition, entropy_production, massieu_eigenvalues, solve_potentials,
    weighted_moments, BetaDecomposition, DegeneratePolicy, RelaxationTimes, SeaPotentials,
    WeightedMoments,
};
pub use spectrum::{EnergyLevel, SectorPartition, Spectrum};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
