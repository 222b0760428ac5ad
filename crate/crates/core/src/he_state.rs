//! The 2M-parameter sector-canonical state family and its thermodynamic
//! functionals.
//!
//! A state of order M assigns each spectral sector K a canonical distribution
//! `p_i = exp(-alpha_K - beta_K * eps_i)`. The pair `(alpha_K, beta_K)` is the
//! canonical internal parameterization; `(p_K, beta_K)` is a constructor
//! convenience, related by `alpha_K = ln Z_K(beta_K) - ln p_K`.

use crate::error::Error;
use crate::full_state::FullState;
use crate::spectrum::{EnergyLevel, SectorPartition, Spectrum};
use crate::Result;

/// `ln Z = ln Σ g_i exp(-beta * eps_i)` evaluated in shifted (log-sum-exp)
/// form, so no intermediate overflows for `|beta * eps|` up to ~700 and beyond.
pub fn log_partition_function<I>(levels: I, beta: f64) -> f64
where
    I: IntoIterator<Item = EnergyLevel>,
    I::IntoIter: Clone,
{
    let terms = levels
        .into_iter()
        .map(move |l| f64::from(l.degeneracy).ln() - beta * l.energy);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY; // empty sector; callers guarantee nonempty
    }
    let sum: f64 = terms.map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// `ln Z_K(beta)` of one sector.
pub fn sector_ln_z(spectrum: &Spectrum, partition: &SectorPartition, k: usize, beta: f64) -> f64 {
    log_partition_function(
        partition.sector_levels(k).iter().map(|&i| spectrum.level(i)),
        beta,
    )
}

/// All Table-style quantities of one sector, computed from `(alpha_K, beta_K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorThermo {
    /// Sector probability p_K.
    pub p: f64,
    /// Partitional entropy per unit probability, s_K = -kB ln p_K.
    pub s: f64,
    /// ln Z_K(beta_K).
    pub ln_z: f64,
    /// Partial mean energy ⟨H_K⟩ = Σ p_i g_i eps_i.
    pub energy: f64,
    /// Second moment ⟨H_K H_K⟩ = Σ p_i g_i eps_i².
    pub energy_sq: f64,
    /// Partial entropy ⟨S_K⟩ = kB (alpha_K p_K + beta_K ⟨H_K⟩).
    pub entropy: f64,
    /// Entropy-energy covariance ⟨S_K H_K⟩ = kB (alpha_K ⟨H_K⟩ + beta_K ⟨H_K H_K⟩).
    pub entropy_energy: f64,
    /// Proper mean energy ⟨H_K⟩_K = ⟨H_K⟩ / p_K.
    pub proper_energy: f64,
    /// Proper entropy ⟨S̃_K⟩_K = ⟨S_K⟩/p_K - s_K.
    pub proper_entropy: f64,
}

/// A sector-canonical state of order M: per-sector constraint potentials
/// `(alpha_K, beta_K)` plus the Boltzmann constant carried for unit-consistent
/// entropy outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HEState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub kb: f64,
}

impl HEState {
    /// Construct from raw potentials; normalization is not checked here (use
    /// [`HEState::normalization_defect`]).
    pub fn from_alpha_beta(alpha: Vec<f64>, beta: Vec<f64>, kb: f64) -> Self {
        assert_eq!(alpha.len(), beta.len(), "alpha/beta length mismatch");
        Self { alpha, beta, kb }
    }

    /// Construct from sector probabilities and inverse temperatures:
    /// `alpha_K = ln Z_K(beta_K) - ln p_K`. kB defaults to 1.
    pub fn from_p_beta(
        p: &[f64],
        beta: &[f64],
        spectrum: &Spectrum,
        partition: &SectorPartition,
    ) -> Result<Self> {
        let m = partition.num_sectors();
        if p.len() != m {
            return Err(Error::SectorCountMismatch {
                context: "from_p_beta probabilities",
                expected: m,
                got: p.len(),
            });
        }
        if beta.len() != m {
            return Err(Error::SectorCountMismatch {
                context: "from_p_beta inverse temperatures",
                expected: m,
                got: beta.len(),
            });
        }
        for (k, &pk) in p.iter().enumerate() {
            if !(pk > 0.0) {
                return Err(Error::ZeroSectorProbability { sector: k + 1 });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum, tol: 1e-12 });
        }
        let alpha = (0..m)
            .map(|k| sector_ln_z(spectrum, partition, k, beta[k]) - p[k].ln())
            .collect();
        Ok(Self {
            alpha,
            beta: beta.to_vec(),
            kb: 1.0,
        })
    }

    pub fn with_kb(mut self, kb: f64) -> Self {
        self.kb = kb;
        self
    }

    /// Number of sectors M.
    pub fn num_sectors(&self) -> usize {
        self.alpha.len()
    }

    /// p_K = exp(ln Z_K(beta_K) - alpha_K).
    pub fn sector_probability(
        &self,
        spectrum: &Spectrum,
        partition: &SectorPartition,
        k: usize,
    ) -> f64 {
        (sector_ln_z(spectrum, partition, k, self.beta[k]) - self.alpha[k]).exp()
    }

    pub fn sector_probabilities(
        &self,
        spectrum: &Spectrum,
        partition: &SectorPartition,
    ) -> Vec<f64> {
        (0..self.num_sectors())
            .map(|k| self.sector_probability(spectrum, partition, k))
            .collect()
    }

    /// |Σ_K Z_K(beta_K) exp(-alpha_K) - 1|, the normalization constraint
    /// induced on the potentials.
    pub fn normalization_defect(&self, spectrum: &Spectrum, partition: &SectorPartition) -> f64 {
        let sum: f64 = self
            .sector_probabilities(spectrum, partition)
            .iter()
            .sum();
        (sum - 1.0).abs()
    }

    /// All sector quantities of sector `k` (0-based).
    pub fn sector_thermo(
        &self,
        spectrum: &Spectrum,
        partition: &SectorPartition,
        k: usize,
    ) -> SectorThermo {
        let alpha = self.alpha[k];
        let beta = self.beta[k];
        let ln_z = sector_ln_z(spectrum, partition, k, beta);
        let p = (ln_z - alpha).exp();
        let mut energy = 0.0;
        let mut energy_sq = 0.0;
        for &i in partition.sector_levels(k) {
            let level = spectrum.level(i);
            let occ = (-alpha - beta * level.energy).exp() * f64::from(level.degeneracy);
            energy += occ * level.energy;
            energy_sq += occ * level.energy * level.energy;
        }
        let kb = self.kb;
        let entropy = kb * (alpha * p + beta * energy);
        let entropy_energy = kb * (alpha * energy + beta * energy_sq);
        SectorThermo {
            p,
            s: -kb * p.ln(),
            ln_z,
            energy,
            energy_sq,
            entropy,
            entropy_energy,
            proper_energy: energy / p,
            proper_entropy: entropy / p + kb * p.ln(),
        }
    }

    /// Expand to per-level populations `p_i = exp(-alpha_K(i) - beta_K(i) eps_i)`.
    pub fn to_full_populations(
        &self,
        spectrum: &Spectrum,
        partition: &SectorPartition,
    ) -> FullState {
        let p = (0..spectrum.len())
            .map(|i| {
                let k = partition.sector_of(i);
                (-self.alpha[k] - self.beta[k] * spectrum.energy(i)).exp()
            })
            .collect();
        FullState { p, kb: self.kb }
    }

    /// ⟨S⟩ = kB Σ_K (alpha_K p_K + beta_K ⟨H_K⟩).
    pub fn overall_entropy(&self, spectrum: &Spectrum, partition: &SectorPartition) -> f64 {
        (0..self.num_sectors())
            .map(|k| self.sector_thermo(spectrum, partition, k).entropy)
            .sum()
    }

    /// ⟨H⟩ = Σ_K ⟨H_K⟩.
    pub fn total_energy(&self, spectrum: &Spectrum, partition: &SectorPartition) -> f64 {
        (0..self.num_sectors())
            .map(|k| self.sector_thermo(spectrum, partition, k).energy)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{SectorPartition, Spectrum};
    use approx::assert_abs_diff_eq;

    fn fix_b() -> (Spectrum, SectorPartition, HEState) {
        let spectrum = Spectrum::new([(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[2]).unwrap();
        let state = HEState::from_p_beta(&[0.6, 0.4], &[1.0, 0.5], &spectrum, &partition).unwrap();
        (spectrum, partition, state)
    }

    #[test]
    fn ln_z_uniform_two_level() {
        let levels = [
            EnergyLevel { energy: 0.0, degeneracy: 1 },
            EnergyLevel { energy: 1.0, degeneracy: 1 },
        ];
        assert_abs_diff_eq!(log_partition_function(levels, 0.0), 2.0_f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn ln_z_single_level_closed_form() {
        let levels = [EnergyLevel { energy: 5.0, degeneracy: 3 }];
        assert_abs_diff_eq!(
            log_partition_function(levels, 2.0),
            3.0_f64.ln() - 10.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ln_z_two_term_golden() {
        let levels = [
            EnergyLevel { energy: 1.0, degeneracy: 1 },
            EnergyLevel { energy: 2.0, degeneracy: 1 },
        ];
        // direct two-term summation oracle: ln(e^-1 + e^-2)
        assert_abs_diff_eq!(
            log_partition_function(levels, 1.0),
            -0.686_738_312_481_777_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ln_z_no_overflow_at_extreme_beta() {
        let levels = [
            EnergyLevel { energy: -1.0, degeneracy: 1 },
            EnergyLevel { energy: 1.0, degeneracy: 2 },
        ];
        let v = log_partition_function(levels, 700.0);
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, 700.0, epsilon = 1e-9);
        let w = log_partition_function(levels, -700.0);
        assert_abs_diff_eq!(w, 700.0 + 2.0_f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn from_p_beta_fix_b_golden() {
        let (_, _, state) = fix_b();
        assert_abs_diff_eq!(state.alpha[0], -0.175_912_688_715_786_48, epsilon = 1e-14);
        assert_abs_diff_eq!(state.alpha[1], -0.109_632_283_945_738_25, epsilon = 1e-14);
    }

    #[test]
    fn from_p_beta_round_trips() {
        let (spectrum, partition, state) = fix_b();
        let p = state.sector_probabilities(&spectrum, &partition);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.4, epsilon = 1e-12);
        assert!(state.normalization_defect(&spectrum, &partition) <= 1e-12);
    }

    #[test]
    fn single_sector_alpha_is_ln_z() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1), (2.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[]).unwrap();
        for beta in [-1.0, 0.0, 0.7, 3.0] {
            let state = HEState::from_p_beta(&[1.0], &[beta], &spectrum, &partition).unwrap();
            assert_abs_diff_eq!(
                state.alpha[0],
                sector_ln_z(&spectrum, &partition, 0, beta),
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(state.sector_probability(&spectrum, &partition, 0), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_sectors_give_ln4() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1), (2.0, 1), (3.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[2]).unwrap();
        let state = HEState::from_p_beta(&[0.5, 0.5], &[0.0, 0.0], &spectrum, &partition).unwrap();
        assert_abs_diff_eq!(state.alpha[0], 4.0_f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(state.alpha[1], 4.0_f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn zero_sector_probability_rejected() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[1]).unwrap();
        assert!(matches!(
            HEState::from_p_beta(&[1.0, 0.0], &[0.0, 0.0], &spectrum, &partition),
            Err(Error::ZeroSectorProbability { sector: 2 })
        ));
    }

    #[test]
    fn unnormalized_p_rejected() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[1]).unwrap();
        assert!(matches!(
            HEState::from_p_beta(&[0.6, 0.5], &[0.0, 0.0], &spectrum, &partition),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn sector_thermo_uniform_two_level() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[]).unwrap();
        let state = HEState::from_p_beta(&[1.0], &[0.0], &spectrum, &partition).unwrap();
        let t = state.sector_thermo(&spectrum, &partition, 0);
        assert_abs_diff_eq!(t.proper_energy, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn sector_thermo_fix_b_golden() {
        let (spectrum, partition, state) = fix_b();
        let t = state.sector_thermo(&spectrum, &partition, 0);
        assert_abs_diff_eq!(t.proper_energy, 1.268_941_421_369_995_1, epsilon = 1e-13);
        assert_abs_diff_eq!(t.energy, 0.761_364_852_821_997_1, epsilon = 1e-13);
        assert_abs_diff_eq!(t.energy_sq, 1.084_094_558_465_991_2, epsilon = 1e-13);
        assert_abs_diff_eq!(t.entropy, 0.655_817_239_592_525_2, epsilon = 1e-13);
        assert_abs_diff_eq!(t.entropy_energy, 0.950_160_820_112_374_7, epsilon = 1e-13);
        let u = state.sector_thermo(&spectrum, &partition, 1);
        assert_abs_diff_eq!(u.energy, 1.351_016_267_519_258_2, epsilon = 1e-13);
        assert_abs_diff_eq!(u.energy_sq, 4.657_113_872_634_807, epsilon = 1e-13);
    }

    #[test]
    fn sector_thermo_singleton() {
        let spectrum = Spectrum::new([(2.0, 1), (5.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[1]).unwrap();
        for beta in [0.0, -2.0, 7.5] {
            let state =
                HEState::from_p_beta(&[0.3, 0.7], &[beta, 0.0], &spectrum, &partition).unwrap();
            let t = state.sector_thermo(&spectrum, &partition, 0);
            assert_abs_diff_eq!(t.energy, 0.6, epsilon = 1e-13);
            assert_abs_diff_eq!(t.proper_energy, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn proper_entropy_identity() {
        let (spectrum, partition, state) = fix_b();
        for k in 0..2 {
            let t = state.sector_thermo(&spectrum, &partition, k);
            assert_abs_diff_eq!(t.proper_entropy, t.entropy / t.p - t.s, epsilon = 1e-13);
        }
    }

    #[test]
    fn full_populations_uniform() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[]).unwrap();
        let state = HEState::from_p_beta(&[1.0], &[0.0], &spectrum, &partition).unwrap();
        let fs = state.to_full_populations(&spectrum, &partition);
        assert_abs_diff_eq!(fs.p[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(fs.p[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn full_populations_fix_b_golden() {
        let (spectrum, partition, state) = fix_b();
        let fs = state.to_full_populations(&spectrum, &partition);
        let expected = [
            0.438_635_147_178_002_93,
            0.161_364_852_821_997_07,
            0.248_983_732_480_741_83,
            0.151_016_267_519_258_17,
        ];
        for (a, b) in fs.p.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
        let norm: f64 = fs
            .p
            .iter()
            .enumerate()
            .map(|(i, p)| p * spectrum.weight(i))
            .sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn singleton_sectors_invert_exactly() {
        let spectrum = Spectrum::new([(1.0, 2), (3.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[1]).unwrap();
        // alpha_K = -ln(p_K/g) - beta_K eps  =>  p_i = p_K/g exactly
        let (p1, p2) = (0.25, 0.75);
        let betas = [0.4, -1.1];
        let alpha = vec![
            -(p1 / 2.0_f64).ln() - betas[0] * 1.0,
            -(p2 / 1.0_f64).ln() - betas[1] * 3.0,
        ];
        let state = HEState::from_alpha_beta(alpha, betas.to_vec(), 1.0);
        let fs = state.to_full_populations(&spectrum, &partition);
        assert_abs_diff_eq!(fs.p[0], p1 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fs.p[1], p2, epsilon = 1e-15);
    }

    #[test]
    fn affine_fingerprint_exact_on_manifold() {
        let (spectrum, partition, state) = fix_b();
        let fs = state.to_full_populations(&spectrum, &partition);
        for i in 0..spectrum.len() {
            let k = partition.sector_of(i);
            let s_i = -state.kb * fs.p[i].ln();
            let affine = state.kb * (state.alpha[k] + state.beta[k] * spectrum.energy(i));
            assert_abs_diff_eq!(s_i, affine, epsilon = 1e-14);
        }
    }

    #[test]
    fn overall_entropy_golden_and_matches_population_sum() {
        let (spectrum, partition, state) = fix_b();
        let s = state.overall_entropy(&spectrum, &partition);
        assert_abs_diff_eq!(s, 1.287_472_459_773_859, epsilon = 1e-13);
        let fs = state.to_full_populations(&spectrum, &partition);
        let direct: f64 = fs
            .p
            .iter()
            .enumerate()
            .map(|(i, p)| -spectrum.weight(i) * p * p.ln())
            .sum();
        assert_abs_diff_eq!(s, direct, epsilon = 1e-10);
    }

    #[test]
    fn overall_entropy_max_for_two_level() {
        let spectrum = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[]).unwrap();
        let state = HEState::from_p_beta(&[1.0], &[0.0], &spectrum, &partition).unwrap();
        assert_abs_diff_eq!(
            state.overall_entropy(&spectrum, &partition),
            2.0_f64.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn singleton_only_entropy_reduces_to_discrete() {
        let spectrum = Spectrum::new([(0.5, 2), (1.5, 1), (2.5, 3)]).unwrap();
        let partition = SectorPartition::contiguous(&spectrum, &[1, 2]).unwrap();
        let p = [0.2, 0.3, 0.5];
        let state = HEState::from_p_beta(&p, &[0.0; 3], &spectrum, &partition).unwrap();
        let expected: f64 = p
            .iter()
            .zip([2.0, 1.0, 3.0])
            .map(|(pk, g): (&f64, f64)| -pk * (pk / g).ln())
            .sum();
        assert_abs_diff_eq!(
            state.overall_entropy(&spectrum, &partition),
            expected,
            epsilon = 1e-13
        );
    }

    #[test]
    fn total_energy_cases() {
        let (spectrum, partition, state) = fix_b();
        assert_abs_diff_eq!(
            state.total_energy(&spectrum, &partition),
            2.112_381_120_341_255_2,
            epsilon = 1e-13
        );

        let two = Spectrum::new([(0.0, 1), (1.0, 1)]).unwrap();
        let one = SectorPartition::contiguous(&two, &[]).unwrap();
        let flat = HEState::from_p_beta(&[1.0], &[0.0], &two, &one).unwrap();
        assert_abs_diff_eq!(flat.total_energy(&two, &one), 0.5, epsilon = 1e-14);

        // all population on a singleton sector at eps = 3
        let s3 = Spectrum::new([(1.0, 1), (3.0, 1)]).unwrap();
        let p3 = SectorPartition::contiguous(&s3, &[1]).unwrap();
        let state3 = HEState::from_p_beta(&[1e-300, 1.0 - 1e-300], &[0.0, 0.0], &s3, &p3).unwrap();
        assert_abs_diff_eq!(state3.total_energy(&s3, &p3), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn kb_scales_entropy_outputs() {
        let (spectrum, partition, state) = fix_b();
        let scaled = state.clone().with_kb(2.5);
        assert_abs_diff_eq!(
            scaled.overall_entropy(&spectrum, &partition),
            2.5 * state.overall_entropy(&spectrum, &partition),
            epsilon = 1e-12
        );
    }
}
