//! Non-Hamiltonian composite models: energy and entropy exchange between
//! subsystems driven by the dissipative term itself (entropic coupling),
//! with per-subsystem normalization but a shared energy constraint.
//!
//! Three couplings are provided: the general M-subsystem model with one
//! global nonequilibrium inverse temperature, the two-system heat
//! interaction, and the three-system model where a structured system sits
//! between two single-sector systems (heat baths in the large-capacity
//! limit). The noninteracting composite, where each subsystem relaxes
//! independently toward its own Gibbs state, is included for contrast.

use crate::dynamics::{rk, IntegratorConfig, SectorSummary};
use crate::error::Error;
use crate::he_state::HEState;
use crate::sea::{weighted_moments, RelaxationTimes, WeightedMoments};
use crate::spectrum::{SectorPartition, Spectrum};
use crate::Result;

/// One subsystem of a composite: its spectrum, partition, current state, and
/// per-sector relaxation times. The effective time `tilde_tau` is
/// state-dependent and recomputed on demand, never cached.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub label: String,
    pub spectrum: Spectrum,
    pub partition: SectorPartition,
    pub state: HEState,
    pub taus: RelaxationTimes,
}

impl Subsystem {
    pub fn new(
        label: impl Into<String>,
        spectrum: Spectrum,
        partition: SectorPartition,
        state: HEState,
        taus: RelaxationTimes,
    ) -> Result<Self> {
        let m = partition.num_sectors();
        if state.num_sectors() != m {
            return Err(Error::SectorCountMismatch {
                context: "subsystem state",
                expected: m,
                got: state.num_sectors(),
            });
        }
        if taus.tau.len() != m {
            return Err(Error::SectorCountMismatch {
                context: "subsystem relaxation times",
                expected: m,
                got: taus.tau.len(),
            });
        }
        Ok(Self {
            label: label.into(),
            spectrum,
            partition,
            state,
            taus,
        })
    }

    pub fn num_sectors(&self) -> usize {
        self.partition.num_sectors()
    }

    pub fn moments(&self) -> Result<WeightedMoments> {
        let fs = self.state.to_full_populations(&self.spectrum, &self.partition);
        weighted_moments(&fs.p, self.state.kb, &self.spectrum, &self.partition, &self.taus)
    }

    /// `tilde_tau = (Σ_K p_K/tau_K)^-1` at the current state.
    pub fn tilde_tau(&self) -> Result<f64> {
        Ok(self.moments()?.tilde_tau)
    }

    pub fn energy(&self) -> f64 {
        self.state.total_energy(&self.spectrum, &self.partition)
    }

    pub fn entropy(&self) -> f64 {
        self.state.overall_entropy(&self.spectrum, &self.partition)
    }

    /// Leverage `v_J = (B_HH - B_H²)/tilde_tau` and the effective inverse
    /// temperature `beta_J^eff` (the w-weighted regression slope / kB),
    /// evaluated on current populations.
    pub fn v_and_beta_eff(&self) -> Result<(f64, f64)> {
        let m = self.moments()?;
        if m.var_e <= 1e-14 * f64::max(1.0, m.b_hh) {
            return Err(Error::DegenerateVariance { variance: m.var_e });
        }
        Ok((m.var_e / m.tilde_tau, m.cov_se / m.var_e / self.state.kb))
    }
}

fn common_kb(subsystems: &[Subsystem]) -> Result<f64> {
    let kb = subsystems[0].state.kb;
    for s in subsystems {
        if s.state.kb != kb {
            return Err(Error::InvalidConfig {
                reason: "subsystems carry different Boltzmann constants".into(),
            });
        }
    }
    Ok(kb)
}

/// Multipliers of the general model: per-subsystem `alpha_J` from the local
/// normalization constraint, one global `beta` as the v-weighted mean of the
/// effective inverse temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct NHPotentials {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub v: Vec<f64>,
    pub beta_eff: Vec<f64>,
}

/// Solve the less-constrained maximization: local normalization per
/// subsystem, global mean-energy conservation.
pub fn nh_potentials(subsystems: &[Subsystem]) -> Result<NHPotentials> {
    assert!(subsystems.len() >= 2, "composite needs at least two subsystems");
    let kb = common_kb(subsystems)?;
    let mut v = Vec::with_capacity(subsystems.len());
    let mut beta_eff = Vec::with_capacity(subsystems.len());
    let mut moments = Vec::with_capacity(subsystems.len());
    for s in subsystems {
        let m = s.moments()?;
        if m.var_e <= 1e-14 * f64::max(1.0, m.b_hh) {
            return Err(Error::DegenerateVariance { variance: m.var_e });
        }
        v.push(m.var_e / m.tilde_tau);
        beta_eff.push(m.cov_se / m.var_e / kb);
        moments.push(m);
    }
    let beta: f64 = v.iter().zip(&beta_eff).map(|(vi, bi)| vi * bi).sum::<f64>()
        / v.iter().sum::<f64>();
    let alpha = moments
        .iter()
        .map(|m| (m.b_s - kb * beta * m.b_h) / kb)
        .collect();
    Ok(NHPotentials { alpha, beta, v, beta_eff })
}

/// Per-subsystem per-sector relaxation rates of the general model:
/// `dbeta_K^J/dt = (beta - beta_K^J)/tau_K^J`,
/// `dalpha_K^J/dt = (alpha_J - alpha_K^J)/tau_K^J`.
pub fn nh_rhs(subsystems: &[Subsystem]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let pots = nh_potentials(subsystems)?;
    Ok(subsystems
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let dalpha = s
                .state
                .alpha
                .iter()
                .zip(&s.taus.tau)
                .map(|(&a, &tau)| (pots.alpha[j] - a) / tau)
                .collect();
            let dbeta = s
                .state
                .beta
                .iter()
                .zip(&s.taus.tau)
                .map(|(&b, &tau)| (pots.beta - b) / tau)
                .collect();
            (dalpha, dbeta)
        })
        .collect())
}

/// Isolated relaxation of each subsystem (no coupling): every subsystem uses
/// its own SEA potentials and conserves its own energy.
pub fn independent_composite_rates(subsystems: &[Subsystem]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    subsystems
        .iter()
        .map(|s| crate::dynamics::reduced_rhs(&s.state, &s.spectrum, &s.partition, &s.taus))
        .collect()
}

/// A directed energy/entropy flow between two named parties.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedFlow {
    pub from: String,
    pub to: String,
    pub energy_rate: f64,
    pub entropy_rate: f64,
}

/// Flow and balance report of a heat-interaction model. Flows are stored once
/// per ordered pair; lookups in the opposite direction negate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowReport {
    pub flows: Vec<DirectedFlow>,
    /// Per-subsystem entropy production rates, each nonnegative.
    pub irreversibility: Vec<(String, f64)>,
    /// Effective heat-interaction temperatures T_Q, keyed by pair label.
    pub effective_temperature: Vec<(String, f64)>,
    /// Total dS/dt (= the sum of the irreversibilities; flows cancel).
    pub total_entropy_rate: f64,
}

impl FlowReport {
    /// Signed energy flow from `from` to `to`; antisymmetric by construction.
    pub fn energy_flow(&self, from: &str, to: &str) -> f64 {
        for f in &self.flows {
            if f.from == from && f.to == to {
                return f.energy_rate;
            }
            if f.from == to && f.to == from {
                return -f.energy_rate;
            }
        }
        0.0
    }

    pub fn entropy_flow(&self, from: &str, to: &str) -> f64 {
        for f in &self.flows {
            if f.from == from && f.to == to {
                return f.entropy_rate;
            }
            if f.from == to && f.to == from {
                return -f.entropy_rate;
            }
        }
        0.0
    }

    pub fn irreversibility_of(&self, label: &str) -> f64 {
        self.irreversibility
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }
}

/// Two single-sector systems exchanging heat through the shared-energy
/// constraint.
#[derive(Debug, Clone)]
pub struct TwoSystemModel {
    pub a: Subsystem,
    pub b: Subsystem,
}

impl TwoSystemModel {
    pub fn new(a: Subsystem, b: Subsystem) -> Result<Self> {
        for s in [&a, &b] {
            if s.num_sectors() != 1 {
                return Err(Error::SectorCountMismatch {
                    context: "two-system heat model subsystem",
                    expected: 1,
                    got: s.num_sectors(),
                });
            }
        }
        common_kb(&[a.clone(), b.clone()])?;
        Ok(Self { a, b })
    }

    /// Leverage of one side, computed from proper canonical moments
    /// (independent of the weighted-moments machinery):
    /// `v = p (E2/p - (E/p)²) / tau`.
    fn side_v(s: &Subsystem) -> f64 {
        let t = s.state.sector_thermo(&s.spectrum, &s.partition, 0);
        let proper_var = t.energy_sq / t.p - (t.energy / t.p) * (t.energy / t.p);
        t.p * proper_var / s.taus.tau[0]
    }
}

/// The closed-form two-system report: the Fourier-like flow law, the
/// entropy flow at the effective temperature `T_Q = 1/(kB beta)`, and the two
/// quadratic irreversibilities.
pub fn two_system_report(model: &TwoSystemModel) -> Result<FlowReport> {
    let kb = model.a.state.kb;
    let (beta_a, beta_b) = (model.a.state.beta[0], model.b.state.beta[0]);
    let v_a = TwoSystemModel::side_v(&model.a);
    let v_b = TwoSystemModel::side_v(&model.b);
    if v_a <= 0.0 || v_b <= 0.0 {
        return Err(Error::DegenerateVariance {
            variance: v_a.min(v_b),
        });
    }
    let beta = (v_a * beta_a + v_b * beta_b) / (v_a + v_b);
    let energy_rate = v_a * v_b / (v_a + v_b) * (beta_b - beta_a);
    let entropy_rate = kb * beta * energy_rate;
    let irr_a = kb * (beta_a - beta) * (beta_a - beta) * v_a;
    let irr_b = kb * (beta_b - beta) * (beta_b - beta) * v_b;
    let label_a = model.a.label.clone();
    let label_b = model.b.label.clone();
    Ok(FlowReport {
        flows: vec![DirectedFlow {
            from: label_a.clone(),
            to: label_b.clone(),
            energy_rate,
            entropy_rate,
        }],
        irreversibility: vec![(label_a.clone(), irr_a), (label_b.clone(), irr_b)],
        effective_temperature: vec![(format!("{label_a}{label_b}"), 1.0 / (kb * beta))],
        total_entropy_rate: kb * v_a * v_b / (v_a + v_b) * (beta_b - beta_a) * (beta_b - beta_a),
    })
}

/// A structured system J coupled separately to two single-sector systems.
/// The couplings `omega = tilde_tau_J / tau_J^X` are recomputed from the
/// state-dependent `tilde_tau_J` at every evaluation unless a constant
/// override is supplied.
#[derive(Debug, Clone)]
pub struct ThreeSystemModel {
    pub a: Subsystem,
    pub j: Subsystem,
    pub b: Subsystem,
    pub tau_j_a: f64,
    pub tau_j_b: f64,
    pub omega_override: Option<(f64, f64)>,
}

impl ThreeSystemModel {
    pub fn new(
        a: Subsystem,
        j: Subsystem,
        b: Subsystem,
        tau_j_a: f64,
        tau_j_b: f64,
        omega_override: Option<(f64, f64)>,
    ) -> Result<Self> {
        for s in [&a, &b] {
            if s.num_sectors() != 1 {
                return Err(Error::SectorCountMismatch {
                    context: "three-system bath",
                    expected: 1,
                    got: s.num_sectors(),
                });
            }
        }
        if !(tau_j_a > 0.0) || !(tau_j_b > 0.0) {
            return Err(Error::InvalidConfig {
                reason: "coupling times must be positive".into(),
            });
        }
        common_kb(&[a.clone(), j.clone(), b.clone()])?;
        Ok(Self {
            a,
            j,
            b,
            tau_j_a,
            tau_j_b,
            omega_override,
        })
    }
}

/// All multipliers of the three-system model at the current state.
///
/// The channel leverages are `v_j_a = omega_a v_j` and `v_j_b = omega_b v_j`;
/// with them the pairwise splits `beta_j_a`, `beta_j_b` conserve each
/// pair's energy exactly for any couplings, and reduce to the plain
/// `(v_a beta_a + v_j beta_eff)/(v_a + v_j)` convex combination at omega = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSystemPotentials {
    pub alpha_a: f64,
    pub alpha_j: f64,
    pub alpha_b: f64,
    pub beta_j_a: f64,
    pub beta_j_b: f64,
    pub beta_j_ab: f64,
    pub beta_j_eff: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub v_j: f64,
    pub v_j_a: f64,
    pub v_j_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
}

/// Solve the three-system multipliers from the current state.
pub fn three_system_potentials(model: &ThreeSystemModel) -> Result<ThreeSystemPotentials> {
    let kb = model.j.state.kb;
    let mj = model.j.moments()?;
    if mj.var_e <= 1e-14 * f64::max(1.0, mj.b_hh) {
        return Err(Error::DegenerateVariance { variance: mj.var_e });
    }
    let v_j = mj.var_e / mj.tilde_tau;
    let beta_j_eff = mj.cov_se / mj.var_e / kb;
    let (omega_a, omega_b) = match model.omega_override {
        Some(pair) => pair,
        None => (mj.tilde_tau / model.tau_j_a, mj.tilde_tau / model.tau_j_b),
    };
    let v_a = TwoSystemModel::side_v(&model.a);
    let v_b = TwoSystemModel::side_v(&model.b);
    if v_a <= 0.0 || v_b <= 0.0 {
        return Err(Error::DegenerateVariance {
            variance: v_a.min(v_b),
        });
    }
    let v_j_a = omega_a * v_j;
    let v_j_b = omega_b * v_j;
    let beta_a = model.a.state.beta[0];
    let beta_b = model.b.state.beta[0];
    let beta_j_a = if v_j_a > 0.0 {
        (v_a * beta_a + v_j_a * beta_j_eff) / (v_a + v_j_a)
    } else {
        beta_a
    };
    let beta_j_b = if v_j_b > 0.0 {
        (v_j_b * beta_j_eff + v_b * beta_b) / (v_j_b + v_b)
    } else {
        beta_b
    };
    let beta_j_ab = if omega_a + omega_b > 0.0 {
        (omega_a * beta_j_a + omega_b * beta_j_b) / (omega_a + omega_b)
    } else {
        beta_j_eff
    };
    let alpha_j = (mj.b_s - kb * beta_j_ab * mj.b_h) / kb;
    let ta = model.a.state.sector_thermo(&model.a.spectrum, &model.a.partition, 0);
    let tb = model.b.state.sector_thermo(&model.b.spectrum, &model.b.partition, 0);
    let alpha_a = model.a.state.alpha[0] + (beta_a - beta_j_a) * ta.energy;
    let alpha_b = model.b.state.alpha[0] + (beta_b - beta_j_b) * tb.energy;
    Ok(ThreeSystemPotentials {
        alpha_a,
        alpha_j,
        alpha_b,
        beta_j_a,
        beta_j_b,
        beta_j_ab,
        beta_j_eff,
        v_a,
        v_b,
        v_j,
        v_j_a,
        v_j_b,
        omega_a,
        omega_b,
    })
}

/// Relaxation rates: J's sector potentials relax at rate
/// `(omega_a + omega_b)/tau_K` toward `(alpha_J, beta_J^AB)`; each bath's
/// `beta_1` relaxes toward its channel split at rate `1/tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeSystemRates {
    pub a_alpha: f64,
    pub a_beta: f64,
    pub b_alpha: f64,
    pub b_beta: f64,
    pub j_alpha: Vec<f64>,
    pub j_beta: Vec<f64>,
}

pub fn three_system_rhs(model: &ThreeSystemModel) -> Result<ThreeSystemRates> {
    let pots = three_system_potentials(model)?;
    let c = pots.omega_a + pots.omega_b;
    let j_alpha = model
        .j
        .state
        .alpha
        .iter()
        .zip(&model.j.taus.tau)
        .map(|(&a, &tau)| c * (pots.alpha_j - a) / tau)
        .collect();
    let j_beta = model
        .j
        .state
        .beta
        .iter()
        .zip(&model.j.taus.tau)
        .map(|(&b, &tau)| c * (pots.beta_j_ab - b) / tau)
        .collect();
    let tau_a = model.a.taus.tau[0];
    let tau_b = model.b.taus.tau[0];
    Ok(ThreeSystemRates {
        a_alpha: (pots.alpha_a - model.a.state.alpha[0]) / tau_a,
        a_beta: (pots.beta_j_a - model.a.state.beta[0]) / tau_a,
        b_alpha: (pots.alpha_b - model.b.state.alpha[0]) / tau_b,
        b_beta: (pots.beta_j_b - model.b.state.beta[0]) / tau_b,
        j_alpha,
        j_beta,
    })
}

/// Flows, effective temperatures, and entropy balances of the three-system
/// model. `S_irr^J` carries the two channel quadratics plus J's internal
/// equilibration term `(omega_a+omega_b)(Var_w s - Cov² / Var_w eps)/(kB
/// tilde_tau)`, each nonnegative, so the balances close against the direct
/// derivatives exactly.
pub fn three_system_flows(model: &ThreeSystemModel) -> Result<FlowReport> {
    let kb = model.j.state.kb;
    let pots = three_system_potentials(model)?;
    let beta_a = model.a.state.beta[0];
    let beta_b = model.b.state.beta[0];
    let e_a_to_j = if pots.v_j_a > 0.0 {
        pots.v_a * pots.v_j_a / (pots.v_a + pots.v_j_a) * (pots.beta_j_eff - beta_a)
    } else {
        0.0
    };
    let e_j_to_b = if pots.v_j_b > 0.0 {
        -pots.v_b * pots.v_j_b / (pots.v_b + pots.v_j_b) * (pots.beta_j_eff - beta_b)
    } else {
        0.0
    };
    let s_a_to_j = kb * pots.beta_j_a * e_a_to_j;
    let s_j_to_b = kb * pots.beta_j_b * e_j_to_b;
    let irr_a = kb * (beta_a - pots.beta_j_a).powi(2) * pots.v_a;
    let irr_b = kb * (beta_b - pots.beta_j_b).powi(2) * pots.v_b;
    let mj = model.j.moments()?;
    let internal = (pots.omega_a + pots.omega_b) / (kb * mj.tilde_tau)
        * (mj.var_s - mj.cov_se * mj.cov_se / mj.var_e).max(0.0);
    let irr_j = kb * pots.v_j_a * (pots.beta_j_eff - pots.beta_j_a).powi(2)
        + kb * pots.v_j_b * (pots.beta_j_eff - pots.beta_j_b).powi(2)
        + internal;
    let (la, lj, lb) = (
        model.a.label.clone(),
        model.j.label.clone(),
        model.b.label.clone(),
    );
    Ok(FlowReport {
        flows: vec![
            DirectedFlow {
                from: la.clone(),
                to: lj.clone(),
                energy_rate: e_a_to_j,
                entropy_rate: s_a_to_j,
            },
            DirectedFlow {
                from: lj.clone(),
                to: lb.clone(),
                energy_rate: e_j_to_b,
                entropy_rate: s_j_to_b,
            },
        ],
        irreversibility: vec![(la.clone(), irr_a), (lj.clone(), irr_j), (lb.clone(), irr_b)],
        effective_temperature: vec![
            (format!("{la}{lj}"), 1.0 / (kb * pots.beta_j_a)),
            (format!("{lj}{lb}"), 1.0 / (kb * pots.beta_j_b)),
        ],
        total_entropy_rate: irr_a + irr_j + irr_b,
    })
}

/// Steady-state effective inverse temperature of the middle system:
/// `[(v_B+v_J)v_A beta_A + (v_A+v_J)v_B beta_B] / [(v_B+v_J)v_A + (v_A+v_J)v_B]`.
pub fn steady_state_beta(v_a: f64, v_b: f64, v_j: f64, beta_a: f64, beta_b: f64) -> f64 {
    let wa = (v_b + v_j) * v_a;
    let wb = (v_a + v_j) * v_b;
    (wa * beta_a + wb * beta_b) / (wa + wb)
}

/// The common inverse temperature every energy-sharing composite relaxes to:
/// solves `Σ_J ⟨H_J⟩_Gibbs(beta) = total_energy` over the union of the
/// subsystems' spectra (safeguarded Newton, like the single-system solve).
pub fn mutual_equilibrium_beta(subsystems: &[Subsystem], total_energy: f64) -> Result<f64> {
    let mean = |beta: f64| -> f64 {
        subsystems
            .iter()
            .map(|s| {
                let shift = s
                    .spectrum
                    .levels()
                    .iter()
                    .map(|l| -beta * l.energy)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                let mut ze = 0.0;
                for l in s.spectrum.levels() {
                    let t = f64::from(l.degeneracy) * (-beta * l.energy - shift).exp();
                    z += t;
                    ze += t * l.energy;
                }
                ze / z
            })
            .sum()
    };
    let min: f64 = subsystems.iter().map(|s| s.spectrum.min_energy()).sum();
    let max: f64 = subsystems.iter().map(|s| s.spectrum.max_energy()).sum();
    if !(total_energy > min && total_energy < max) {
        return Err(Error::EnergyOutOfRange {
            sector: 0,
            target: total_energy,
            min,
            max,
        });
    }
    let mut bracket = 1.0;
    let (mut lo, mut hi) = loop {
        if mean(-bracket) > total_energy && mean(bracket) < total_energy {
            break (-bracket, bracket);
        }
        bracket *= 2.0;
        if bracket > 1e300 {
            return Err(Error::NoConvergence {
                solver: "mutual equilibrium bracket",
                iterations: 0,
                residual: mean(0.0) - total_energy,
            });
        }
    };
    let mut beta = 0.0;
    for _ in 0..200 {
        let mid = mean(beta);
        if mid > total_energy {
            lo = beta;
        } else {
            hi = beta;
        }
        let next = 0.5 * (lo + hi);
        if (next - beta).abs() <= 1e-15 * beta.abs().max(1.0) {
            return Ok(next);
        }
        beta = next;
    }
    Ok(beta)
}

// ---------------------------------------------------------------------------
// Composite integration
// ---------------------------------------------------------------------------

/// Coupling mode of a multi-subsystem run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeKind {
    /// Noninteracting: each subsystem conserves its own energy.
    Independent,
    /// Shared global energy constraint, one global beta.
    NhGeneral,
    /// The two-system heat interaction (both subsystems single-sector).
    NhTwo,
}

/// One recorded composite sample.
#[derive(Debug, Clone)]
pub struct CompositeSample {
    pub t: f64,
    pub states: Vec<HEState>,
    pub sectors: Vec<Vec<SectorSummary>>,
    pub energies: Vec<f64>,
    pub entropies: Vec<f64>,
    pub total_energy: f64,
    pub total_entropy: f64,
    pub total_entropy_rate: f64,
    /// Global beta (NH general/two modes) or beta_J^AB (three-system).
    pub nh_beta: Option<f64>,
    /// Per-subsystem alpha_J multipliers where the mode defines them.
    pub nh_alpha: Option<Vec<f64>>,
    pub report: Option<FlowReport>,
    pub three: Option<ThreeSystemPotentials>,
}

#[derive(Debug, Clone)]
pub struct CompositeTrajectory {
    pub labels: Vec<String>,
    pub samples: Vec<CompositeSample>,
}

impl CompositeTrajectory {
    pub fn last(&self) -> &CompositeSample {
        self.samples.last().expect("trajectory has samples")
    }
}

fn pack(subsystems: &[Subsystem]) -> Vec<f64> {
    let mut y = Vec::new();
    for s in subsystems {
        y.extend_from_slice(&s.state.alpha);
        y.extend_from_slice(&s.state.beta);
    }
    y
}

fn unpack(subsystems: &mut [Subsystem], y: &[f64]) {
    let mut offset = 0;
    for s in subsystems.iter_mut() {
        let m = s.num_sectors();
        s.state.alpha.copy_from_slice(&y[offset..offset + m]);
        s.state.beta.copy_from_slice(&y[offset + m..offset + 2 * m]);
        offset += 2 * m;
    }
}

fn subsystem_summaries(s: &Subsystem) -> Vec<SectorSummary> {
    (0..s.num_sectors())
        .map(|k| {
            let t = s.state.sector_thermo(&s.spectrum, &s.partition, k);
            SectorSummary {
                alpha: s.state.alpha[k],
                beta: s.state.beta[k],
                p: t.p,
                energy: t.energy,
                entropy: t.entropy,
            }
        })
        .collect()
}

/// Total dS/dt of the general/two-mode composite: Σ_J ⟨m_J²⟩_w / (kB τ̃_J)
/// with `m_J = s - kB alpha_J - kB beta eps`.
fn nh_entropy_rate(subsystems: &[Subsystem], pots: &NHPotentials) -> Result<f64> {
    let kb = subsystems[0].state.kb;
    let mut total = 0.0;
    for (j, s) in subsystems.iter().enumerate() {
        let fs = s.state.to_full_populations(&s.spectrum, &s.partition);
        let m = s.moments()?;
        let mut m2 = 0.0;
        for (i, &pi) in fs.p.iter().enumerate() {
            if pi > 0.0 {
                let mi = -kb * pi.ln()
                    - kb * pots.alpha[j]
                    - kb * pots.beta * s.spectrum.energy(i);
                m2 += m.w[i] * mi * mi;
            }
        }
        total += m2 / (kb * m.tilde_tau);
    }
    Ok(total)
}

fn independent_entropy_rate(subsystems: &[Subsystem]) -> Result<f64> {
    let mut total = 0.0;
    for s in subsystems {
        let fs = s.state.to_full_populations(&s.spectrum, &s.partition);
        let m = s.moments()?;
        let pots = crate::sea::solve_potentials(&m, crate::sea::DegeneratePolicy::Error)?;
        let meig = crate::sea::massieu_eigenvalues(&fs.p, s.state.kb, &s.spectrum, &pots);
        total += crate::sea::entropy_production(&meig, &m);
    }
    Ok(total)
}

fn composite_sample(
    t: f64,
    subsystems: &[Subsystem],
    kind: CompositeKind,
) -> Result<CompositeSample> {
    let energies: Vec<f64> = subsystems.iter().map(Subsystem::energy).collect();
    let entropies: Vec<f64> = subsystems.iter().map(Subsystem::entropy).collect();
    let (nh_beta, nh_alpha, report, rate) = match kind {
        CompositeKind::Independent => {
            (None, None, None, independent_entropy_rate(subsystems)?)
        }
        CompositeKind::NhGeneral => {
            let pots = nh_potentials(subsystems)?;
            let rate = nh_entropy_rate(subsystems, &pots)?;
            (Some(pots.beta), Some(pots.alpha), None, rate)
        }
        CompositeKind::NhTwo => {
            let pots = nh_potentials(subsystems)?;
            let rate = nh_entropy_rate(subsystems, &pots)?;
            let model = TwoSystemModel::new(subsystems[0].clone(), subsystems[1].clone())?;
            let report = two_system_report(&model)?;
            (Some(pots.beta), Some(pots.alpha), Some(report), rate)
        }
    };
    Ok(CompositeSample {
        t,
        states: subsystems.iter().map(|s| s.state.clone()).collect(),
        sectors: subsystems.iter().map(subsystem_summaries).collect(),
        total_energy: energies.iter().sum(),
        total_entropy: entropies.iter().sum(),
        energies,
        entropies,
        total_entropy_rate: rate,
        nh_beta,
        nh_alpha,
        report,
        three: None,
    })
}

/// Integrate a composite of subsystems in the given coupling mode.
pub fn integrate_composite(
    subsystems: &[Subsystem],
    kind: CompositeKind,
    config: &IntegratorConfig,
) -> Result<CompositeTrajectory> {
    config.validate()?;
    if kind == CompositeKind::NhTwo {
        TwoSystemModel::new(subsystems[0].clone(), subsystems[1].clone())?;
    }
    common_kb(subsystems)?;
    let tau_min = subsystems
        .iter()
        .flat_map(|s| s.taus.tau.iter().copied())
        .fold(f64::MAX, f64::min);
    let mut scratch = subsystems.to_vec();
    let y0 = pack(subsystems);
    let mut samples = Vec::new();

    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        unpack(&mut scratch, y);
        let rates = match kind {
            CompositeKind::Independent => independent_composite_rates(&scratch)?,
            CompositeKind::NhGeneral | CompositeKind::NhTwo => nh_rhs(&scratch)?,
        };
        let mut offset = 0;
        for (dalpha, dbeta) in rates {
            let m = dalpha.len();
            dy[offset..offset + m].copy_from_slice(&dalpha);
            dy[offset + m..offset + 2 * m].copy_from_slice(&dbeta);
            offset += 2 * m;
        }
        Ok(())
    };
    let mut scratch_sample = subsystems.to_vec();
    let mut on_sample = |t: f64, y: &[f64]| -> Result<()> {
        unpack(&mut scratch_sample, y);
        samples.push(composite_sample(t, &scratch_sample, kind)?);
        Ok(())
    };
    rk::drive(&mut rhs, &y0, config, tau_min, &mut on_sample)?;
    Ok(CompositeTrajectory {
        labels: subsystems.iter().map(|s| s.label.clone()).collect(),
        samples,
    })
}

/// Integrate the three-system model.
pub fn integrate_three_system(
    model: &ThreeSystemModel,
    config: &IntegratorConfig,
) -> Result<CompositeTrajectory> {
    config.validate()?;
    let pots0 = three_system_potentials(model)?;
    let rate_scale = (pots0.omega_a + pots0.omega_b).max(1e-12);
    let tau_min = model
        .a
        .taus
        .tau
        .iter()
        .chain(model.b.taus.tau.iter())
        .copied()
        .chain(model.j.taus.tau.iter().map(|t| t / rate_scale))
        .fold(f64::MAX, f64::min);

    let subsystems = [model.a.clone(), model.j.clone(), model.b.clone()];
    let y0 = pack(&subsystems);
    let mj = model.j.num_sectors();
    let set_state = |m: &mut ThreeSystemModel, y: &[f64]| {
        m.a.state.alpha[0] = y[0];
        m.a.state.beta[0] = y[1];
        m.j.state.alpha.copy_from_slice(&y[2..2 + mj]);
        m.j.state.beta.copy_from_slice(&y[2 + mj..2 + 2 * mj]);
        m.b.state.alpha[0] = y[2 + 2 * mj];
        m.b.state.beta[0] = y[3 + 2 * mj];
    };
    let mut scratch = model.clone();
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        set_state(&mut scratch, y);
        let rates = three_system_rhs(&scratch)?;
        dy[0] = rates.a_alpha;
        dy[1] = rates.a_beta;
        dy[2..2 + mj].copy_from_slice(&rates.j_alpha);
        dy[2 + mj..2 + 2 * mj].copy_from_slice(&rates.j_beta);
        dy[2 + 2 * mj] = rates.b_alpha;
        dy[3 + 2 * mj] = rates.b_beta;
        Ok(())
    };
    let mut scratch_sample = model.clone();
    let mut samples = Vec::new();
    let mut on_sample = |t: f64, y: &[f64]| -> Result<()> {
        set_state(&mut scratch_sample, y);
        let report = three_system_flows(&scratch_sample)?;
        let pots = three_system_potentials(&scratch_sample)?;
        let subs_now = [
            scratch_sample.a.clone(),
            scratch_sample.j.clone(),
            scratch_sample.b.clone(),
        ];
        let energies: Vec<f64> = subs_now.iter().map(Subsystem::energy).collect();
        let entropies: Vec<f64> = subs_now.iter().map(Subsystem::entropy).collect();
        samples.push(CompositeSample {
            t,
            states: subs_now.iter().map(|s| s.state.clone()).collect(),
            sectors: subs_now.iter().map(subsystem_summaries).collect(),
            total_energy: energies.iter().sum(),
            total_entropy: entropies.iter().sum(),
            energies,
            entropies,
            total_entropy_rate: report.total_entropy_rate,
            nh_beta: Some(pots.beta_j_ab),
            nh_alpha: Some(vec![pots.alpha_a, pots.alpha_j, pots.alpha_b]),
            report: Some(report),
            three: Some(pots),
        });
        Ok(())
    };
    rk::drive(&mut rhs, &y0, config, tau_min, &mut on_sample)?;
    Ok(CompositeTrajectory {
        labels: vec![
            model.a.label.clone(),
            model.j.label.clone(),
            model.b.label.clone(),
        ],
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{equilibrium_state, IntegratorConfig};
    use crate::spectrum::{SectorPartition, Spectrum};
    use approx::assert_abs_diff_eq;

    fn two_level_bath(label: &str, beta: f64, tau: f64) -> Subsystem {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[]).unwrap();
        let state = HEState::from_p_beta(&[1.0], &[beta], &spectrum, &partition).unwrap();
        Subsystem::new(label, spectrum, partition, state, RelaxationTimes::new(vec![tau]).unwrap())
            .unwrap()
    }

    fn fix_b_subsystem(label: &str) -> Subsystem {
        let spectrum = Spectrum::new([(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[2]).unwrap();
        let state = HEState::from_p_beta(&[0.6, 0.4], &[1.0, 0.5], &spectrum, &partition).unwrap();
        Subsystem::new(
            label,
            spectrum,
            partition,
            state,
            RelaxationTimes::uniform(1.0, 2).unwrap(),
        )
        .unwrap()
    }

    fn fix_c() -> TwoSystemModel {
        TwoSystemModel::new(two_level_bath("A", 1.0, 1.0), two_level_bath("B", 2.0, 1.0)).unwrap()
    }

    #[test]
    fn nh_potentials_identical_subsystems() {
        let subs = [two_level_bath("A", 1.3, 1.0), two_level_bath("B", 1.3, 1.0)];
        let pots = nh_potentials(&subs).unwrap();
        assert_abs_diff_eq!(pots.beta, pots.beta_eff[0], epsilon = 1e-14);
        assert_abs_diff_eq!(pots.beta, 1.3, epsilon = 1e-13);
    }

    #[test]
    fn nh_potentials_fix_c_golden() {
        let m = fix_c();
        let pots = nh_potentials(&[m.a.clone(), m.b.clone()]).unwrap();
        assert_abs_diff_eq!(pots.v[0], 0.196_611_933_241_481_85, epsilon = 1e-12);
        assert_abs_diff_eq!(pots.v[1], 0.104_993_585_403_506_52, epsilon = 1e-12);
        assert_abs_diff_eq!(pots.beta, 1.348_115_597_735_768_2, epsilon = 1e-12);
        // substituted back, the global energy constraint closes
        let balance: f64 = pots
            .v
            .iter()
            .zip(&pots.beta_eff)
            .map(|(v, be)| v * (be - pots.beta))
            .sum();
        assert!(balance.abs() <= 1e-12);
    }

    #[test]
    fn nh_specializes_to_two_system_formula() {
        let m = fix_c();
        let pots = nh_potentials(&[m.a.clone(), m.b.clone()]).unwrap();
        let report = two_system_report(&m).unwrap();
        // independent algebraic routes to the same beta
        let t_q = report.effective_temperature[0].1;
        assert_abs_diff_eq!(1.0 / t_q, pots.beta, epsilon = 1e-14);
    }

    #[test]
    fn nh_rhs_zero_at_mutual_equilibrium() {
        let subs = [two_level_bath("A", 0.8, 2.0), two_level_bath("B", 0.8, 0.5)];
        for (da, db) in nh_rhs(&subs).unwrap() {
            assert_abs_diff_eq!(da[0], 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(db[0], 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn nh_rhs_fix_c_golden() {
        let m = fix_c();
        let rates = nh_rhs(&[m.a.clone(), m.b.clone()]).unwrap();
        assert_abs_diff_eq!(rates[0].1[0], 0.348_115_597_735_768_23, epsilon = 1e-12);
        assert_abs_diff_eq!(rates[1].1[0], -0.651_884_402_264_231_8, epsilon = 1e-12);
    }

    #[test]
    fn nh_rhs_conserves_global_energy_for_structured_pair() {
        // two structured subsystems with different initial states: individual
        // energies move, the sum does not
        let mut second = fix_b_subsystem("Y");
        second.state =
            HEState::from_p_beta(&[0.3, 0.7], &[0.2, 1.4], &second.spectrum, &second.partition)
                .unwrap();
        let subs = [fix_b_subsystem("X"), second];
        let rates = nh_rhs(&subs).unwrap();
        let mut total = 0.0;
        let mut individual = Vec::new();
        for (s, (da, db)) in subs.iter().zip(&rates) {
            let mut de_j = 0.0;
            for k in 0..s.num_sectors() {
                let t = s.state.sector_thermo(&s.spectrum, &s.partition, k);
                de_j += -t.energy * da[k] - t.energy_sq * db[k];
            }
            individual.push(de_j);
            total += de_j;
        }
        assert!(total.abs() <= 1e-10, "total drift {total}");
        assert!(individual[0].abs() > 1e-3);
    }

    #[test]
    fn two_system_report_mutual_equilibrium_is_silent() {
        let m = TwoSystemModel::new(two_level_bath("A", 1.5, 1.0), two_level_bath("B", 1.5, 3.0))
            .unwrap();
        let r = two_system_report(&m).unwrap();
        assert_abs_diff_eq!(r.energy_flow("A", "B"), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.total_entropy_rate, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn two_system_symmetric_weights_average_beta() {
        // equal v on both sides: beta is the midpoint
        let m = TwoSystemModel::new(two_level_bath("A", 1.0, 1.0), two_level_bath("B", 1.0, 1.0))
            .unwrap();
        let mut b = m.b;
        b.state.beta[0] = 2.0;
        b.state.alpha[0] = crate::he_state::sector_ln_z(&b.spectrum, &b.partition, 0, 2.0);
        // force v_B = v_A by matching tau to the variance ratio
        let var_a = 0.196_611_933_241_481_85;
        let var_b = 0.104_993_585_403_506_52;
        b.taus = RelaxationTimes::new(vec![var_b / var_a]).unwrap();
        let m = TwoSystemModel::new(m.a, b).unwrap();
        let r = two_system_report(&m).unwrap();
        assert_abs_diff_eq!(1.0 / r.effective_temperature[0].1, 1.5, epsilon = 1e-10);
    }

    #[test]
    fn two_system_fix_c_flow_golden() {
        let r = two_system_report(&fix_c()).unwrap();
        let e = r.energy_flow("A", "B");
        assert_abs_diff_eq!(e, 0.068_443_680_662_343_42, epsilon = 1e-12);
        assert!(e > 0.0); // hotter A (smaller beta) feeds B
        assert_abs_diff_eq!(r.total_entropy_rate, 0.068_443_680_662_343_42, epsilon = 1e-12);
        // S_irr golden values and the exact T_Q identity
        assert_abs_diff_eq!(r.irreversibility_of("A"), 0.023_826_312_805_007_72, epsilon = 1e-12);
        assert_abs_diff_eq!(r.irreversibility_of("B"), 0.044_617_367_857_335_7, epsilon = 1e-12);
        let t_q = r.effective_temperature[0].1;
        assert_abs_diff_eq!(r.entropy_flow("A", "B"), e / t_q, epsilon = 1e-14);
        // flows antisymmetric by lookup
        assert_eq!(r.energy_flow("B", "A"), -e);
    }

    #[test]
    fn two_system_trajectory_equalizes() {
        let m = fix_c();
        let e0 = m.a.energy() + m.b.energy();
        let config = IntegratorConfig::new(30.0);
        let traj =
            integrate_composite(&[m.a.clone(), m.b.clone()], CompositeKind::NhTwo, &config)
                .unwrap();
        for s in &traj.samples {
            assert!((s.total_energy - e0).abs() <= 1e-8 * e0.abs().max(1.0));
            assert!(s.total_entropy_rate >= -1e-15);
        }
        for pair in traj.samples.windows(2) {
            assert!(pair[1].total_entropy >= pair[0].total_entropy - 1e-10);
        }
        let last = traj.last();
        let (ba, bb) = (last.states[0].beta[0], last.states[1].beta[0]);
        assert!((ba - bb).abs() <= 1e-6, "betas not equalized: {ba} vs {bb}");
        // the common value conserves total energy by construction; check it
        assert!((last.total_energy - e0).abs() <= 1e-8);
    }

    #[test]
    fn three_system_triple_equilibrium_is_stationary() {
        let j = {
            let spectrum = Spectrum::new([(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)]).unwrap();
            let partition = SectorPartition::contiguous(&spectrum, &[2]).unwrap();
            let b = 0.7;
            let z: f64 = (1..=4).map(|i| (-b * i as f64).exp()).sum();
            let p1 = ((-b * 1.0_f64).exp() + (-b * 2.0_f64).exp()) / z;
            let state =
                HEState::from_p_beta(&[p1, 1.0 - p1], &[b, b], &spectrum, &partition).unwrap();
            Subsystem::new("J", spectrum, partition, state, RelaxationTimes::uniform(1.0, 2).unwrap())
                .unwrap()
        };
        let model = ThreeSystemModel::new(
            two_level_bath("A", 0.7, 1.0),
            j,
            two_level_bath("B", 0.7, 1.0),
            1.0,
            1.0,
            None,
        )
        .unwrap();
        let pots = three_system_potentials(&model).unwrap();
        assert_abs_diff_eq!(pots.beta_j_a, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(pots.beta_j_b, 0.7, epsilon = 1e-12);
        let rates = three_system_rhs(&model).unwrap();
        assert_abs_diff_eq!(rates.a_beta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rates.b_beta, 0.0, epsilon = 1e-12);
        for r in rates.j_beta.iter().chain(rates.j_alpha.iter()) {
            assert_abs_diff_eq!(*r, 0.0, epsilon = 1e-12);
        }
        let report = three_system_flows(&model).unwrap();
        assert_abs_diff_eq!(report.energy_flow("A", "J"), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(report.total_entropy_rate, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn three_system_large_bath_pins_channel_beta() {
        // v_A scaled up by ~1e6 via tau: beta_J^A -> beta_1^A
        let model = ThreeSystemModel::new(
            two_level_bath("A", 0.2, 2.5e-7),
            fix_b_subsystem("J"),
            two_level_bath("B", 0.45, 1.0),
            1.0,
            1.0,
            Some((1.0, 1.0)),
        )
        .unwrap();
        let pots = three_system_potentials(&model).unwrap();
        assert_abs_diff_eq!(pots.beta_j_a, 0.2, epsilon = 1e-5);
    }

    #[test]
    fn three_system_symmetric_baths() {
        // v_A = v_B, beta symmetric about beta_J_eff: channel splits mirror
        let spectrum = Spectrum::new([(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[2]).unwrap();
        let b_eff = 0.7;
        let z: f64 = (1..=4).map(|i| (-b_eff * i as f64).exp()).sum();
        let p1 = ((-b_eff * 1.0_f64).exp() + (-b_eff * 2.0_f64).exp()) / z;
        let state =
            HEState::from_p_beta(&[p1, 1.0 - p1], &[b_eff, b_eff], &spectrum, &partition).unwrap();
        let j = Subsystem::new(
            "J",
            spectrum,
            partition,
            state,
            RelaxationTimes::uniform(1.0, 2).unwrap(),
        )
        .unwrap();
        // symmetric two-level baths at beta = 0.7 ± d have equal variance
        let d = 0.25;
        let a = two_level_bath("A", b_eff - d, 1.0);
        let b = two_level_bath("B", b_eff + d, 1.0);
        let va = TwoSystemModel::side_v(&a);
        let vb = TwoSystemModel::side_v(&b);
        let mut b = b;
        b.taus = RelaxationTimes::new(vec![vb / va]).unwrap();
        let model = ThreeSystemModel::new(a, j, b, 1.0, 1.0, Some((1.0, 1.0))).unwrap();
        let pots = three_system_potentials(&model).unwrap();
        assert_abs_diff_eq!(pots.beta_j_eff, b_eff, epsilon = 1e-12);
        assert_abs_diff_eq!(
            pots.beta_j_a - b_eff,
            -(pots.beta_j_b - b_eff),
            epsilon = 1e-10
        );
    }

    #[test]
    fn three_system_pairwise_and_total_conservation() {
        let model = ThreeSystemModel::new(
            two_level_bath("A", 0.2, 1.0),
            fix_b_subsystem("J"),
            two_level_bath("B", 0.45, 1.5),
            0.7,
            1.9,
            None,
        )
        .unwrap();
        let pots = three_system_potentials(&model).unwrap();
        // pairwise: A-side loss equals the J-side gain through the A channel
        let lhs = pots.v_a * (pots.beta_j_a - model.a.state.beta[0]);
        let rhs = pots.v_j_a * (pots.beta_j_eff - pots.beta_j_a);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        let lhs_b = pots.v_b * (pots.beta_j_b - model.b.state.beta[0]);
        let rhs_b = pots.v_j_b * (pots.beta_j_eff - pots.beta_j_b);
        assert_abs_diff_eq!(lhs_b, rhs_b, epsilon = 1e-12);

        // total three-body energy rate vanishes under the actual rates
        let rates = three_system_rhs(&model).unwrap();
        let ta = model.a.state.sector_thermo(&model.a.spectrum, &model.a.partition, 0);
        let tb = model.b.state.sector_thermo(&model.b.spectrum, &model.b.partition, 0);
        let mut total = -ta.energy * rates.a_alpha - ta.energy_sq * rates.a_beta;
        total += -tb.energy * rates.b_alpha - tb.energy_sq * rates.b_beta;
        for k in 0..2 {
            let tj = model.j.state.sector_thermo(&model.j.spectrum, &model.j.partition, k);
            total += -tj.energy * rates.j_alpha[k] - tj.energy_sq * rates.j_beta[k];
        }
        assert!(total.abs() <= 1e-10, "three-body energy rate {total}");
    }

    #[test]
    fn three_system_balances_close_against_direct_derivatives() {
        let model = ThreeSystemModel::new(
            two_level_bath("A", 0.2, 1.0),
            fix_b_subsystem("J"),
            two_level_bath("B", 0.45, 1.5),
            0.7,
            1.9,
            None,
        )
        .unwrap();
        let report = three_system_flows(&model).unwrap();
        let rates = three_system_rhs(&model).unwrap();
        let kb = 1.0;

        // direct dE/dt and dS/dt from the relaxation rates
        let de_ds = |s: &Subsystem, da: &[f64], db: &[f64]| {
            let mut de = 0.0;
            let mut ds = 0.0;
            for k in 0..s.num_sectors() {
                let t = s.state.sector_thermo(&s.spectrum, &s.partition, k);
                de += -t.energy * da[k] - t.energy_sq * db[k];
                ds += kb * (t.p - t.entropy / kb) * da[k]
                    + kb * (t.energy - t.entropy_energy / kb) * db[k];
            }
            (de, ds)
        };
        let (de_a, ds_a) = de_ds(&model.a, &[rates.a_alpha], &[rates.a_beta]);
        let (de_b, ds_b) = de_ds(&model.b, &[rates.b_alpha], &[rates.b_beta]);
        let (de_j, ds_j) = de_ds(&model.j, &rates.j_alpha, &rates.j_beta);

        let e_aj = report.energy_flow("A", "J");
        let e_jb = report.energy_flow("J", "B");
        assert_abs_diff_eq!(de_a, -e_aj, epsilon = 1e-12);
        assert_abs_diff_eq!(de_j, e_aj - e_jb, epsilon = 1e-12);
        assert_abs_diff_eq!(de_b, e_jb, epsilon = 1e-12);

        let s_aj = report.entropy_flow("A", "J");
        let s_jb = report.entropy_flow("J", "B");
        assert_abs_diff_eq!(ds_a, -s_aj + report.irreversibility_of("A"), epsilon = 1e-10);
        assert_abs_diff_eq!(ds_b, s_jb + report.irreversibility_of("B"), epsilon = 1e-10);
        assert_abs_diff_eq!(
            ds_j,
            s_aj - s_jb + report.irreversibility_of("J"),
            epsilon = 1e-10
        );
        for (_, irr) in &report.irreversibility {
            assert!(*irr >= 0.0);
        }
        assert_abs_diff_eq!(
            ds_a + ds_j + ds_b,
            report.total_entropy_rate,
            epsilon = 1e-10
        );
    }

    #[test]
    fn three_system_decouples_to_pair_when_one_channel_closed() {
        // omega = (1, 0): identical to the general NH model on {A, J}
        let a = two_level_bath("A", 0.3, 1.0);
        let j = fix_b_subsystem("J");
        let b = two_level_bath("B", 0.9, 1.0);
        let model = ThreeSystemModel::new(a.clone(), j.clone(), b, 1.0, 1.0, Some((1.0, 0.0)))
            .unwrap();
        let rates3 = three_system_rhs(&model).unwrap();
        let rates2 = nh_rhs(&[a, j]).unwrap();
        assert_abs_diff_eq!(rates3.a_beta, rates2[0].1[0], epsilon = 1e-13);
        assert_abs_diff_eq!(rates3.a_alpha, rates2[0].0[0], epsilon = 1e-13);
        for k in 0..2 {
            assert_abs_diff_eq!(rates3.j_beta[k], rates2[1].1[k], epsilon = 1e-13);
            assert_abs_diff_eq!(rates3.j_alpha[k], rates2[1].0[k], epsilon = 1e-13);
        }
        // B frozen
        assert_abs_diff_eq!(rates3.b_beta, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rates3.b_alpha, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn steady_state_beta_limits_and_common_value() {
        // the two limiting regimes at v_J ratios 1e±8
        let (va, vb, ba, bb) = (2.0, 3.0, 1.0, 3.0);
        let small = steady_state_beta(va, vb, 1e-8, ba, bb);
        assert_abs_diff_eq!(small, (ba + bb) / 2.0, epsilon = 1e-6);
        let large = steady_state_beta(va, vb, 1e8, ba, bb);
        assert_abs_diff_eq!(large, (va * ba + vb * bb) / (va + vb), epsilon = 1e-6);
        for vj in [1e-3, 1.0, 1e3] {
            assert_abs_diff_eq!(steady_state_beta(va, vb, vj, 0.8, 0.8), 0.8, epsilon = 1e-14);
        }
    }

    #[test]
    fn independent_composite_no_cross_coupling() {
        let x = fix_b_subsystem("X");
        let mut y = fix_b_subsystem("Y");
        y.state =
            HEState::from_p_beta(&[0.3, 0.7], &[0.2, 1.4], &y.spectrum, &y.partition).unwrap();
        let rates_pair = independent_composite_rates(&[x.clone(), y.clone()]).unwrap();
        let rates_solo =
            crate::dynamics::reduced_rhs(&x.state, &x.spectrum, &x.partition, &x.taus).unwrap();
        for k in 0..2 {
            assert_abs_diff_eq!(rates_pair[0].0[k], rates_solo.0[k], epsilon = 1e-15);
            assert_abs_diff_eq!(rates_pair[0].1[k], rates_solo.1[k], epsilon = 1e-15);
        }
        // identical copies evolve identically
        let twins = independent_composite_rates(&[x.clone(), x.clone()]).unwrap();
        assert_eq!(twins[0], twins[1]);
    }

    #[test]
    fn independent_composite_reaches_separate_equilibria() {
        let x = fix_b_subsystem("X");
        let mut y = fix_b_subsystem("Y");
        y.state =
            HEState::from_p_beta(&[0.3, 0.7], &[0.2, 1.4], &y.spectrum, &y.partition).unwrap();
        let subs = [x, y];
        let config = IntegratorConfig::new(40.0);
        let traj = integrate_composite(&subs, CompositeKind::Independent, &config).unwrap();
        let last = traj.last();
        for (i, s) in subs.iter().enumerate() {
            // each subsystem conserves its own energy and lands on its own
            // equilibrium inverse temperature
            assert_abs_diff_eq!(last.energies[i], s.energy(), epsilon = 1e-8);
            let eq = equilibrium_state(&s.spectrum, &s.partition, s.energy()).unwrap();
            assert_abs_diff_eq!(last.states[i].beta[0], eq.beta, epsilon = 1e-6);
            assert_abs_diff_eq!(last.states[i].beta[1], eq.beta, epsilon = 1e-6);
        }
        assert!((last.states[0].beta[0] - last.states[1].beta[0]).abs() > 1e-3);
    }

    #[test]
    fn mutual_equilibrium_matches_two_system_limit() {
        let m = fix_c();
        let e0 = m.a.energy() + m.b.energy();
        let beta_eq =
            mutual_equilibrium_beta(&[m.a.clone(), m.b.clone()], e0).unwrap();
        let traj = integrate_composite(
            &[m.a.clone(), m.b.clone()],
            CompositeKind::NhTwo,
            &IntegratorConfig::new(40.0),
        )
        .unwrap();
        let last = traj.last();
        assert_abs_diff_eq!(last.states[0].beta[0], beta_eq, epsilon = 1e-7);
        assert_abs_diff_eq!(last.states[1].beta[0], beta_eq, epsilon = 1e-7);
    }
}
