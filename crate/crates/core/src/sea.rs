//! Weighted moments, the global SEA nonequilibrium potentials, Massieu
//! eigenvalues, entropy production, and the decomposition of the global
//! inverse temperature into fluctuation and covariance contributions.

use crate::error::Error;
use crate::spectrum::{SectorPartition, Spectrum};
use crate::Result;

/// Per-sector relaxation times; within a sector all levels share one time.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationTimes {
    pub tau: Vec<f64>,
}

impl RelaxationTimes {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        for (k, &t) in tau.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::NonPositiveTau { sector: k + 1, tau: t });
            }
        }
        Ok(Self { tau })
    }

    pub fn uniform(tau: f64, sectors: usize) -> Result<Self> {
        Self::new(vec![tau; sectors])
    }

    pub fn min(&self) -> f64 {
        self.tau.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.tau.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum
    }
}

fn kahan<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = KahanSum::default();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Relaxation-weighted moments of a population vector: weights
/// `w_i = tilde_tau * p_i g_i / tau_K(i)` with `1/tilde_tau = Σ_K p_K/tau_K`,
/// and `B_X = ⟨x⟩_w` for x ∈ {eps, s, eps², s·eps, s²} where `s_i = -kB ln p_i`.
///
/// Levels with `p_i = 0` carry zero weight and are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMoments {
    pub tilde_tau: f64,
    pub w: Vec<f64>,
    pub b_h: f64,
    pub b_s: f64,
    pub b_hh: f64,
    pub b_sh: f64,
    pub b_ss: f64,
    /// Centered weighted variance of the energy, ⟨Δε Δε⟩_w.
    pub var_e: f64,
    /// Centered weighted covariance ⟨Δs Δε⟩_w.
    pub cov_se: f64,
    /// Centered weighted variance of the entropy eigenvalues, ⟨Δs Δs⟩_w.
    pub var_s: f64,
    pub kb: f64,
}

/// Compute the weighted moments of per-level populations under per-sector
/// relaxation times.
///
/// The raw B-moments are accumulated in compensated summation; the centered
/// second moments come from a shifted two-pass sum when the level count
/// exceeds 16 (cancellation control), otherwise from the B-form directly.
pub fn weighted_moments(
    populations: &[f64],
    kb: f64,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
) -> Result<WeightedMoments> {
    assert_eq!(populations.len(), spectrum.len(), "population/spectrum length mismatch");
    if taus.tau.len() != partition.num_sectors() {
        return Err(Error::SectorCountMismatch {
            context: "relaxation times",
            expected: partition.num_sectors(),
            got: taus.tau.len(),
        });
    }
    let n = spectrum.len();
    let inv_tilde = kahan((0..n).filter(|&i| populations[i] > 0.0).map(|i| {
        populations[i] * spectrum.weight(i) / taus.tau[partition.sector_of(i)]
    }));
    if !(inv_tilde > 0.0) {
        return Err(Error::ZeroPopulationTotal);
    }
    let tilde_tau = 1.0 / inv_tilde;

    let mut w = vec![0.0; n];
    let mut s = vec![0.0; n];
    for i in 0..n {
        if populations[i] > 0.0 {
            w[i] = tilde_tau * populations[i] * spectrum.weight(i)
                / taus.tau[partition.sector_of(i)];
            s[i] = -kb * populations[i].ln();
        }
    }
    let b_h = kahan((0..n).map(|i| w[i] * spectrum.energy(i)));
    let b_s = kahan((0..n).map(|i| w[i] * s[i]));
    let b_hh = kahan((0..n).map(|i| w[i] * spectrum.energy(i) * spectrum.energy(i)));
    let b_sh = kahan((0..n).map(|i| w[i] * s[i] * spectrum.energy(i)));
    let b_ss = kahan((0..n).map(|i| w[i] * s[i] * s[i]));

    let (var_e, cov_se, var_s) = if n > 16 {
        (
            kahan((0..n).map(|i| {
                let d = spectrum.energy(i) - b_h;
                w[i] * d * d
            })),
            kahan((0..n).map(|i| (spectrum.energy(i) - b_h) * w[i] * (s[i] - b_s))),
            kahan((0..n).map(|i| {
                let d = s[i] - b_s;
                w[i] * d * d
            })),
        )
    } else {
        (b_hh - b_h * b_h, b_sh - b_s * b_h, b_ss - b_s * b_s)
    };

    Ok(WeightedMoments {
        tilde_tau,
        w,
        b_h,
        b_s,
        b_hh,
        b_sh,
        b_ss,
        var_e,
        cov_se,
        var_s,
        kb,
    })
}

/// The global SEA nonequilibrium potentials: `kB β` is the weighted regression
/// slope of entropy on energy, `kB α = B_S - kB β B_H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaPotentials {
    pub alpha: f64,
    pub beta: f64,
}

/// What to do when the weighted energy variance is degenerate (an
/// energy-constant weighted distribution): hard error by default, or accept
/// `beta = 0, alpha = B_S/kB` when explicitly requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    #[default]
    Error,
    ZeroBeta,
}

fn variance_threshold(m: &WeightedMoments) -> f64 {
    1e-14 * f64::max(1.0, m.b_hh)
}

/// Solve the normalization and mean-energy constraint equations for the SEA
/// potentials.
pub fn solve_potentials(m: &WeightedMoments, policy: DegeneratePolicy) -> Result<SeaPotentials> {
    if m.var_e <= variance_threshold(m) {
        return match policy {
            DegeneratePolicy::Error => Err(Error::DegenerateVariance { variance: m.var_e }),
            DegeneratePolicy::ZeroBeta => Ok(SeaPotentials {
                alpha: m.b_s / m.kb,
                beta: 0.0,
            }),
        };
    }
    let beta = m.cov_se / m.var_e / m.kb;
    let alpha = (m.b_s - m.kb * beta * m.b_h) / m.kb;
    Ok(SeaPotentials { alpha, beta })
}

/// Eigenvalues of the nonequilibrium Massieu operator,
/// `m_i = s_i - kB α - kB β eps_i`, computed from the populations themselves
/// (never from stored sector potentials), so the identities hold off-manifold
/// too. Zero-population levels get `m_i = 0` (their weight is 0 anyway).
pub fn massieu_eigenvalues(
    populations: &[f64],
    kb: f64,
    spectrum: &Spectrum,
    pots: &SeaPotentials,
) -> Vec<f64> {
    populations
        .iter()
        .enumerate()
        .map(|(i, &pi)| {
            if pi > 0.0 {
                -kb * pi.ln() - kb * pots.alpha - kb * pots.beta * spectrum.energy(i)
            } else {
                0.0
            }
        })
        .collect()
}

/// `dS/dt = ⟨m²⟩_w / (kB τ̃) ≥ 0`; zero iff every Massieu eigenvalue is zero.
pub fn entropy_production(m_eigs: &[f64], moments: &WeightedMoments) -> f64 {
    let m2 = kahan(
        m_eigs
            .iter()
            .zip(&moments.w)
            .map(|(mi, wi)| wi * mi * mi),
    );
    m2 / (moments.kb * moments.tilde_tau)
}

/// The two contributions shaping the global β: a fluctuation-weighted average
/// of the sector slopes, and the between-sector entropy-energy covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDecomposition {
    pub fluctuation_term: f64,
    pub covariance_term: f64,
    /// Per-sector statistical weights w_K = Σ_{i∈K} w_i.
    pub sector_weights: Vec<f64>,
    /// Per-sector weighted mean energies ⟨ε⟩_w^K.
    pub sector_energy_means: Vec<f64>,
    /// Per-sector weighted mean entropies ⟨s⟩_w^K.
    pub sector_entropy_means: Vec<f64>,
}

impl BetaDecomposition {
    pub fn total(&self) -> f64 {
        self.fluctuation_term + self.covariance_term
    }
}

/// Split the global β into within-sector fluctuation and between-sector
/// covariance parts (law of total covariance under the w-weights, so the two
/// terms sum to β exactly, on or off the manifold).
pub fn beta_decomposition(
    populations: &[f64],
    kb: f64,
    spectrum: &Spectrum,
    partition: &SectorPartition,
    taus: &RelaxationTimes,
) -> Result<BetaDecomposition> {
    let m = weighted_moments(populations, kb, spectrum, partition, taus)?;
    if m.var_e <= variance_threshold(&m) {
        return Err(Error::DegenerateVariance { variance: m.var_e });
    }
    let num_sectors = partition.num_sectors();
    let mut w_k = vec![0.0; num_sectors];
    let mut e_mean = vec![0.0; num_sectors];
    let mut s_mean = vec![0.0; num_sectors];
    for k in 0..num_sectors {
        for &i in partition.sector_levels(k) {
            let wi = m.w[i];
            w_k[k] += wi;
            e_mean[k] += wi * spectrum.energy(i);
            if populations[i] > 0.0 {
                s_mean[k] += wi * (-kb * populations[i].ln());
            }
        }
        if w_k[k] > 0.0 {
            e_mean[k] /= w_k[k];
            s_mean[k] /= w_k[k];
        }
    }
    let mut fluct_num = 0.0;
    let mut cov_num = 0.0;
    for k in 0..num_sectors {
        if w_k[k] == 0.0 {
            continue;
        }
        // w_K Var_K(eps) beta_K == Cov_K(s, eps)/kB, exactly on the manifold
        // and by definition of the fitted slope off it
        let mut cov_k = 0.0;
        for &i in partition.sector_levels(k) {
            let wi = m.w[i];
            if wi == 0.0 {
                continue;
            }
            let de = spectrum.energy(i) - e_mean[k];
            let ds = -kb * populations[i].ln() - s_mean[k];
            cov_k += wi * de * ds;
        }
        fluct_num += cov_k / kb;
        cov_num += w_k[k] * (s_mean[k] - m.b_s) * (e_mean[k] - m.b_h) / kb;
    }
    Ok(BetaDecomposition {
        fluctuation_term: fluct_num / m.var_e,
        covariance_term: cov_num / m.var_e,
        sector_weights: w_k,
        sector_energy_means: e_mean,
        sector_entropy_means: s_mean,
    })
}
