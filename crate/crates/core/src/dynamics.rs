//! Time evolution: the full-population dissipative ODE, the reduced
//! differential-algebraic system in the constraint potentials, adaptive
//! integration forward and backward, equilibrium solvers, and sector rate
//! reports.
//!
//! The reduced system is treated as an explicit ODE in `(alpha_K, beta_K)`:
//! the algebraic SEA potentials have a closed-form solution and are
//! recomputed at every right-hand-side evaluation, so no implicit DAE solver
//! is involved. No normalization correction is applied during integration;
//! conservation must emerge from the equations (and is tested).

use crate::error::Error;
use crate::full_state::{affine_fit, sector_aggregates, solve_sector_beta, FullState};
use crate::he_state::{log_partition_function, sector_ln_z, HEState};
use crate::sea::{
    entropy_production, massieu_eigenvalues, solve_potentials, weighted_moments, DegeneratePolicy,
    RelaxationTimes, SeaPotentials,
};
use crate::spectrum::{SectorPartition, Spectrum};
use crate::Result;

pub(crate) mod rk;

/// Integration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4) with per-component error control.
    #[default]
    Rk45Adaptive,
    /// Fixed-step classical RK4 (convergence studies; requires `dt_init`).
    Rk4Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

/// Integrator settings. `dt_init` defaults to `tau_min/100` and the step cap
/// to `tau_min`; both can be overridden per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: Option<f64>,
    pub max_step: Option<f64>,
    pub t_end: f64,
    pub direction: Direction,
    pub sample_every: f64,
    /// Post-hoc renormalization of recorded samples (off by default).
    pub renormalize: bool,
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            dt_init: None,
            max_step: None,
            t_end,
            direction: Direction::Forward,
            sample_every: t_end / 100.0,
            renormalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    reason: reason.to_string(),
                })
            }
        };
        check(self.rel_tol > 0.0, "rel_tol must be > 0")?;
        check(self.abs_tol > 0.0, "abs_tol must be > 0")?;
        check(self.t_end > 0.0, "t_end must be > 0")?;
        check(self.sample_every > 0.0, "sample_every must be > 0")?;
        check(
            self.dt_init.map_or(true, |h| h > 0.0),
            "dt_init must be > 0",
        )?;
        check(
            self.max_step.map_or(true, |h| h > 0.0),
            "max_step must be > 0",
        )?;
        if self.method == Method::Rk4Fixed {
            check(self.dt_init.is_some(), "rk4_fixed requires dt_init")?;
        }
        Ok(())
    }
}

/// Initial state for [`integrate`]: the mode is implied by the variant.
#[derive(Debug, Clone)]
pub enum InitialState {
    Reduced(HEState),
    Full(FullState),
}

/// The evolving state recorded at a sample instant.
#[derive(Debug, Clone)]
pub enum StateSnapshot {
    Reduced(HEState),
    Full(FullState),
}

/// Per-sector observables at a sample instant. In full mode `alpha`/`beta`
/// are the affine-fit values.
#[derive(Debug, Clone, Copy)]
pub struct SectorSummary {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub energy: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: StateSnapshot,
    pub potentials: SeaPotentials,
    pub energy: f64,
    pub entropy: f64,
    pub entropy_production: f64,
    pub sectors: Vec<SectorSummary>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }
}

/// The stable-equilibrium attractor fixed by the conserved mean energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub beta: f64,
    pub alpha: f64,
    /// p_K^SE = Z_K(beta^SE) / Σ_L Z_L(beta^SE).
    pub sector_p: Vec<f64>,
}

/// Relaxation rates of the reduced system:
/// `dalpha_K/dt = (alpha - alpha_K)/tau_K`, `dbeta_K/dt = (beta - beta_K)/tau_K`
/// with the algebraic `(alpha, beta)` recomputed from the current populations.
pub fn reduced_rhs(
    state: &HEState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let fs = state.to_full_populations(spectrum, partition);
    let moments = weighted_moments(&fs.p, state.kb, spectrum, partition, taus)?;
    let pots = solve_potentials(&moments, DegeneratePolicy::Error)?;
    let dalpha = state
        .alpha
        .iter()
        .zip(&taus.tau)
        .map(|(&a, &tau)| (pots.alpha - a) / tau)
        .collect();
    let dbeta = state
        .beta
        .iter()
        .zip(&taus.tau)
        .map(|(&b, &tau)| (pots.beta - b) / tau)
        .collect();
    Ok((dalpha, dbeta))
}

/// Population rates `dp_i/dt = p_i m_i / (kB tau_K(i))`. Levels with
/// `p_i = 0` have rate exactly 0 at all times; the weighted Massieu
/// identities make `Σ g dp = 0` and `Σ g eps dp = 0` hold for any
/// populations, on or off the manifold.
pub fn full_rhs(
    fs: &FullState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
) -> Result<Vec<f64>> {
    let moments = weighted_moments(&fs.p, fs.kb, spectrum, partition, taus)?;
    let pots = solve_potentials(&moments, DegeneratePolicy::Error)?;
    let m = massieu_eigenvalues(&fs.p, fs.kb, spectrum, &pots);
    Ok(fs
        .p
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            if pi > 0.0 {
                pi * m[i] / (fs.kb * taus.tau[partition.sector_of(i)])
            } else {
                0.0
            }
        })
        .collect())
}

/// Sector energy and entropy rates implied by the reduced relaxation rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorRate {
    pub energy_rate: f64,
    pub entropy_rate: f64,
}

/// `dE_K/dt = -⟨H_K⟩ dalpha_K - ⟨H_K H_K⟩ dbeta_K` and the matching entropy
/// rate; the energy rates sum to zero.
pub fn sector_rates(
    state: &HEState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
) -> Result<Vec<SectorRate>> {
    let (dalpha, dbeta) = reduced_rhs(state, spectrum, partition, taus)?;
    Ok((0..state.num_sectors())
        .map(|k| {
            let t = state.sector_thermo(spectrum, partition, k);
            let kb = state.kb;
            SectorRate {
                energy_rate: -t.energy * dalpha[k] - t.energy_sq * dbeta[k],
                entropy_rate: kb * (t.p - t.entropy / kb) * dalpha[k]
                    + kb * (t.energy - t.entropy_energy / kb) * dbeta[k],
            }
        })
        .collect())
}

/// Solve for the canonical state with mean energy `e0`:
/// `beta^SE` from the full-spectrum Gibbs mean, `alpha^SE = ln Σ_K Z_K`.
pub fn equilibrium_state(
    spectrum: &Spectrum,
    partition: &SectorPartition,
    e0: f64,
) -> Result<EquilibriumState> {
    let all: Vec<usize> = (0..spectrum.len()).collect();
    let beta = if spectrum.len() == 1 {
        0.0
    } else {
        solve_sector_beta(spectrum, &all, e0, 0)?
    };
    let ln_z_total = log_partition_function(spectrum.levels().iter().copied(), beta);
    let sector_p = (0..partition.num_sectors())
        .map(|k| (sector_ln_z(spectrum, partition, k, beta) - ln_z_total).exp())
        .collect();
    Ok(EquilibriumState {
        beta,
        alpha: ln_z_total,
        sector_p,
    })
}

fn reduced_sample(
    t: f64,
    y: &[f64],
    kb: f64,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
    renormalize: bool,
) -> Result<TrajectorySample> {
    let m = partition.num_sectors();
    let mut state = HEState {
        alpha: y[..m].to_vec(),
        beta: y[m..].to_vec(),
        kb,
    };
    if renormalize {
        let total: f64 = state.sector_probabilities(spectrum, partition).iter().sum();
        for a in state.alpha.iter_mut() {
            *a += total.ln();
        }
    }
    let fs = state.to_full_populations(spectrum, partition);
    let moments = weighted_moments(&fs.p, kb, spectrum, partition, taus)?;
    let potentials = solve_potentials(&moments, DegeneratePolicy::Error)?;
    let meig = massieu_eigenvalues(&fs.p, kb, spectrum, &potentials);
    let production = entropy_production(&meig, &moments);
    let sectors: Vec<SectorSummary> = (0..m)
        .map(|k| {
            let th = state.sector_thermo(spectrum, partition, k);
            SectorSummary {
                alpha: state.alpha[k],
                beta: state.beta[k],
                p: th.p,
                energy: th.energy,
                entropy: th.entropy,
            }
        })
        .collect();
    Ok(TrajectorySample {
        t,
        energy: sectors.iter().map(|s| s.energy).sum(),
        entropy: sectors.iter().map(|s| s.entropy).sum(),
        state: StateSnapshot::Reduced(state),
        potentials,
        entropy_production: production,
        sectors,
    })
}

fn full_sample(
    t: f64,
    y: &[f64],
    kb: f64,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
    renormalize: bool,
) -> Result<TrajectorySample> {
    let mut fs = FullState { p: y.to_vec(), kb };
    if renormalize {
        let norm = fs.norm(spectrum);
        for p in fs.p.iter_mut() {
            *p /= norm;
        }
    }
    let moments = weighted_moments(&fs.p, kb, spectrum, partition, taus)?;
    let potentials = solve_potentials(&moments, DegeneratePolicy::Error)?;
    let meig = massieu_eigenvalues(&fs.p, kb, spectrum, &potentials);
    let production = entropy_production(&meig, &moments);
    let agg = sector_aggregates(&fs, spectrum, partition);
    let fit = affine_fit(&fs, spectrum, partition)?;
    let sectors = (0..partition.num_sectors())
        .map(|k| SectorSummary {
            alpha: fit.alpha[k],
            beta: fit.beta[k],
            p: agg.p[k],
            energy: agg.energy[k],
            entropy: agg.entropy[k],
        })
        .collect();
    Ok(TrajectorySample {
        t,
        energy: fs.total_energy(spectrum),
        entropy: fs.entropy(spectrum),
        state: StateSnapshot::Full(fs),
        potentials,
        entropy_production: production,
        sectors,
    })
}

/// Integrate either representation of the isolated system and sample the
/// trajectory every `sample_every` time units. Backward direction integrates
/// the same right-hand side with negated time; timestamps then decrease.
pub fn integrate(
    initial: &InitialState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if taus.tau.len() != partition.num_sectors() {
        return Err(Error::SectorCountMismatch {
            context: "relaxation times",
            expected: partition.num_sectors(),
            got: taus.tau.len(),
        });
    }
    let mut samples = Vec::new();
    match initial {
        InitialState::Reduced(state) => {
            let kb = state.kb;
            let m = partition.num_sectors();
            if state.num_sectors() != m {
                return Err(Error::SectorCountMismatch {
                    context: "initial state",
                    expected: m,
                    got: state.num_sectors(),
                });
            }
            let y0: Vec<f64> = state
                .alpha
                .iter()
                .chain(state.beta.iter())
                .copied()
                .collect();
            let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let s = HEState {
                    alpha: y[..m].to_vec(),
                    beta: y[m..].to_vec(),
                    kb,
                };
                let (da, db) = reduced_rhs(&s, spectrum, partition, taus)?;
                dy[..m].copy_from_slice(&da);
                dy[m..].copy_from_slice(&db);
                Ok(())
            };
            let mut on_sample = |t: f64, y: &[f64]| -> Result<()> {
                samples.push(reduced_sample(
                    t,
                    y,
                    kb,
                    spectrum,
                    partition,
                    taus,
                    config.renormalize,
                )?);
                Ok(())
            };
            rk::drive(&mut rhs, &y0, config, taus.min(), &mut on_sample)?;
        }
        InitialState::Full(fs) => {
            let kb = fs.kb;
            let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let s = FullState { p: y.to_vec(), kb };
                let rates = full_rhs(&s, spectrum, partition, taus)?;
                dy.copy_from_slice(&rates);
                Ok(())
            };
            let mut on_sample = |t: f64, y: &[f64]| -> Result<()> {
                samples.push(full_sample(
                    t,
                    y,
                    kb,
                    spectrum,
                    partition,
                    taus,
                    config.renormalize,
                )?);
                Ok(())
            };
            rk::drive(&mut rhs, &fs.p, config, taus.min(), &mut on_sample)?;
        }
    }
    Ok(Trajectory { samples })
}
