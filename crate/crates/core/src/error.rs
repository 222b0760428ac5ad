//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by spectrum construction, state construction, solvers, and
/// integrators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spectrum must contain at least one level")]
    EmptySpectrum,

    #[error("duplicate energy eigenvalue {energy}")]
    DuplicateEnergy { energy: f64 },

    #[error("degeneracy of level {index} must be >= 1")]
    NonPositiveDegeneracy { index: usize },

    #[error("cut {cut} invalid for {n} levels (cuts must be strictly increasing, in 1..={max})", max = n - 1)]
    InvalidCut { cut: usize, n: usize },

    #[error("sector {label} is empty")]
    EmptySector { label: usize },

    #[error("sector labels must be contiguous 1..=M; label {label} breaks the sequence")]
    LabelGap { label: usize },

    #[error("assignment has {got} entries, spectrum has {expected} levels")]
    AssignmentLength { expected: usize, got: usize },

    #[error("sector {sector} has zero probability; the reduced parameterization cannot represent it — drop it from the partition")]
    ZeroSectorProbability { sector: usize },

    #[error("probabilities sum to {sum}, expected 1 within {tol}")]
    NotNormalized { sum: f64, tol: f64 },

    #[error("negative population {value} at level {index}")]
    NegativePopulation { index: usize, value: f64 },

    #[error("target proper energy {target} of sector {sector} outside its spectral range ({min}, {max}); no finite inverse temperature exists")]
    EnergyOutOfRange {
        sector: usize,
        target: f64,
        min: f64,
        max: f64,
    },

    #[error("{solver} did not converge within {iterations} iterations (residual {residual})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("sector {sector} has multiple levels with equal energies; affine fit is degenerate")]
    DegenerateSectorEnergies { sector: usize },

    #[error("weighted energy variance {variance} is degenerate; the SEA potentials are not determined (pass DegeneratePolicy::ZeroBeta to accept beta = 0)")]
    DegenerateVariance { variance: f64 },

    #[error("total population is zero")]
    ZeroPopulationTotal,

    #[error("relaxation time of sector {sector} must be positive, got {tau}")]
    NonPositiveTau { sector: usize, tau: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("invalid integrator configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("{context}: expected {expected} sectors, got {got}")]
    SectorCountMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
}
