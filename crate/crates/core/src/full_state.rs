//! Full N-population states, sector aggregation, the affine entropy-energy
//! fingerprint, and the constrained maximum-entropy projection.
//!
//! The projection assigns a population vector the unique sector-canonical
//! state with the same `(p_K, ⟨H_K⟩)`; [`brute_force_maxent`] is the
//! independent oracle for it: projected-gradient ascent on the entropy over
//! each sector's probability simplex with a linear energy constraint, never
//! touching the canonical closed form.

use crate::error::Error;
use crate::he_state::{sector_ln_z, HEState};
use crate::spectrum::{SectorPartition, Spectrum};
use crate::Result;

/// Per-level per-state occupation probabilities (each of the `g_i` states of
/// level `i` carries probability `p[i]`).
///
/// Strict positivity is required for reduced-model interop; zero entries are
/// allowed in oracle mode, where they carry zero weight in every moment sum
/// and `0 ln 0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub p: Vec<f64>,
    pub kb: f64,
}

impl FullState {
    /// Validated constructor: nonnegative entries, `Σ p_i g_i = 1` within 1e-10.
    pub fn new(p: Vec<f64>, kb: f64, spectrum: &Spectrum) -> Result<Self> {
        if p.len() != spectrum.len() {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "population vector has {} entries, spectrum has {} levels",
                    p.len(),
                    spectrum.len()
                ),
            });
        }
        for (index, &value) in p.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::NegativePopulation { index, value });
            }
        }
        let sum: f64 = p
            .iter()
            .enumerate()
            .map(|(i, pi)| pi * spectrum.weight(i))
            .sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { sum, tol: 1e-10 });
        }
        Ok(Self { p, kb })
    }

    /// ⟨S⟩ = -kB Σ g_i p_i ln p_i, with 0 ln 0 = 0.
    pub fn entropy(&self, spectrum: &Spectrum) -> f64 {
        -self.kb
            * self
                .p
                .iter()
                .enumerate()
                .map(|(i, &pi)| {
                    if pi > 0.0 {
                        spectrum.weight(i) * pi * pi.ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
    }

    /// ⟨H⟩ = Σ g_i p_i eps_i.
    pub fn total_energy(&self, spectrum: &Spectrum) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(i, &pi)| spectrum.weight(i) * pi * spectrum.energy(i))
            .sum()
    }

    /// Σ g_i p_i (1 for a normalized state).
    pub fn norm(&self, spectrum: &Spectrum) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(i, &pi)| spectrum.weight(i) * pi)
            .sum()
    }
}

/// Raw per-sector moments of a population vector: exact linear functionals of
/// `p` (entropy moments use `s_i = -kB ln p_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct SectorAggregates {
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
    pub energy_sq: Vec<f64>,
    pub entropy: Vec<f64>,
    pub entropy_energy: Vec<f64>,
    pub kb: f64,
}

/// Sum the sector moments of `fs`.
pub fn sector_aggregates(
    fs: &FullState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
) -> SectorAggregates {
    let m = partition.num_sectors();
    let mut agg = SectorAggregates {
        p: vec![0.0; m],
        energy: vec![0.0; m],
        energy_sq: vec![0.0; m],
        entropy: vec![0.0; m],
        entropy_energy: vec![0.0; m],
        kb: fs.kb,
    };
    for (i, &pi) in fs.p.iter().enumerate() {
        let k = partition.sector_of(i);
        let e = spectrum.energy(i);
        let occ = pi * spectrum.weight(i);
        agg.p[k] += occ;
        agg.energy[k] += occ * e;
        agg.energy_sq[k] += occ * e * e;
        if pi > 0.0 {
            let s = -fs.kb * pi.ln();
            agg.entropy[k] += occ * s;
            agg.entropy_energy[k] += occ * s * e;
        }
    }
    agg
}

/// Per-sector weighted least-squares fit of `s_i = -kB ln p_i` against
/// `eps_i`, with weights `g_i p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    /// Fitted slope / kB per sector (an inverse temperature).
    pub beta: Vec<f64>,
    /// Fitted intercept / kB per sector.
    pub alpha: Vec<f64>,
    /// max_i |s_i - kB(alpha_K + beta_K eps_i)| per sector, fitted levels only.
    pub sector_residuals: Vec<f64>,
    /// Largest sector residual; ≤ ~1e-12 iff the state lies on the manifold.
    pub max_residual: f64,
}

/// Fit the per-sector affine entropy-vs-energy relation. Sectors with a single
/// (effective) level get residual 0 and slope 0; levels with `p_i = 0` carry
/// zero weight and are excluded from the fit.
pub fn affine_fit(
    fs: &FullState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
) -> Result<AffineFit> {
    let m = partition.num_sectors();
    let mut fit = AffineFit {
        beta: vec![0.0; m],
        alpha: vec![0.0; m],
        sector_residuals: vec![0.0; m],
        max_residual: 0.0,
    };
    for k in 0..m {
        let fitted: Vec<(f64, f64, f64)> = partition
            .sector_levels(k)
            .iter()
            .filter(|&&i| fs.p[i] > 0.0)
            .map(|&i| {
                let w = fs.p[i] * spectrum.weight(i);
                (w, spectrum.energy(i), -fs.kb * fs.p[i].ln())
            })
            .collect();
        if fitted.is_empty() {
            continue;
        }
        let w_tot: f64 = fitted.iter().map(|t| t.0).sum();
        let e_mean: f64 = fitted.iter().map(|t| t.0 * t.1).sum::<f64>() / w_tot;
        let s_mean: f64 = fitted.iter().map(|t| t.0 * t.2).sum::<f64>() / w_tot;
        let var_e: f64 = fitted
            .iter()
            .map(|t| t.0 * (t.1 - e_mean) * (t.1 - e_mean))
            .sum::<f64>()
            / w_tot;
        if fitted.len() == 1 {
            fit.alpha[k] = s_mean / fs.kb;
            continue;
        }
        if var_e <= 0.0 {
            // impossible for distinct eigenvalues; defensive
            return Err(Error::DegenerateSectorEnergies { sector: k + 1 });
        }
        let cov_se: f64 = fitted
            .iter()
            .map(|t| t.0 * (t.1 - e_mean) * (t.2 - s_mean))
            .sum::<f64>()
            / w_tot;
        let slope = cov_se / var_e;
        let intercept = s_mean - slope * e_mean;
        fit.beta[k] = slope / fs.kb;
        fit.alpha[k] = intercept / fs.kb;
        let residual = fitted
            .iter()
            .map(|t| (t.2 - intercept - slope * t.1).abs())
            .fold(0.0, f64::max);
        fit.sector_residuals[k] = residual;
        fit.max_residual = fit.max_residual.max(residual);
    }
    Ok(fit)
}

/// Proper mean energy and variance of the canonical distribution on one
/// sector, evaluated with a max-shifted exponential so nothing overflows.
fn sector_canonical_mean_var(
    spectrum: &Spectrum,
    levels: &[usize],
    beta: f64,
) -> (f64, f64) {
    let shift = levels
        .iter()
        .map(|&i| -beta * spectrum.energy(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut ze = 0.0;
    let mut zee = 0.0;
    for &i in levels {
        let e = spectrum.energy(i);
        let t = spectrum.weight(i) * (-beta * e - shift).exp();
        z += t;
        ze += t * e;
        zee += t * e * e;
    }
    let mean = ze / z;
    let var = (zee / z - mean * mean).max(0.0);
    (mean, var)
}

/// Solve `⟨H_K⟩_K(beta) = target` by safeguarded Newton (bisection fallback)
/// on the strictly decreasing proper-energy map.
pub(crate) fn solve_sector_beta(
    spectrum: &Spectrum,
    levels: &[usize],
    target: f64,
    sector: usize,
) -> Result<f64> {
    let e_min = levels.iter().map(|&i| spectrum.energy(i)).fold(f64::MAX, f64::min);
    let e_max = levels.iter().map(|&i| spectrum.energy(i)).fold(f64::MIN, f64::max);
    if !(target > e_min && target < e_max) {
        return Err(Error::EnergyOutOfRange {
            sector: sector + 1,
            target,
            min: e_min,
            max: e_max,
        });
    }
    let scale = f64::max(1.0, target.abs());
    let f = |beta: f64| sector_canonical_mean_var(spectrum, levels, beta).0 - target;

    // f is decreasing: f(-inf) = e_max - target > 0, f(+inf) = e_min - target < 0.
    let mut bracket = 1.0;
    let (mut lo, mut hi) = loop {
        if f(-bracket) > 0.0 && f(bracket) < 0.0 {
            break (-bracket, bracket);
        }
        bracket *= 2.0;
        if bracket > 1e308 {
            return Err(Error::NoConvergence {
                solver: "sector beta bracket",
                iterations: 0,
                residual: f(0.0),
            });
        }
    };

    let mut beta = 0.0;
    if !(beta > lo && beta < hi) {
        beta = 0.5 * (lo + hi);
    }
    let mut last_residual = f64::MAX;
    for _ in 0..200 {
        let (mean, var) = sector_canonical_mean_var(spectrum, levels, beta);
        let residual = mean - target;
        last_residual = residual;
        if residual > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        // Newton: d⟨H⟩/dbeta = -var. Iterate past the energy tolerance until
        // the beta step itself stalls, so poorly conditioned sectors (tiny
        // variance) still recover beta to full precision.
        let mut next = if var > 0.0 { beta + residual / var } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let step = next - beta;
        beta = next;
        if residual.abs() <= 1e-12 * scale && step.abs() <= 1e-14 * beta.abs().max(1.0) {
            return Ok(beta);
        }
    }
    if last_residual.abs() <= 1e-12 * scale {
        return Ok(beta);
    }
    Err(Error::NoConvergence {
        solver: "sector beta newton",
        iterations: 200,
        residual: last_residual,
    })
}

/// Maximum-entropy projection onto the sector-canonical family from raw
/// sector constraints `(p_K, ⟨H_K⟩)`.
pub fn rcce_project_aggregates(
    agg: &SectorAggregates,
    spectrum: &Spectrum,
    partition: &SectorPartition,
) -> Result<HEState> {
    let m = partition.num_sectors();
    let mut beta = vec![0.0; m];
    let mut alpha = vec![0.0; m];
    for k in 0..m {
        if !(agg.p[k] > 0.0) {
            return Err(Error::ZeroSectorProbability { sector: k + 1 });
        }
        let levels = partition.sector_levels(k);
        if levels.len() > 1 {
            beta[k] = solve_sector_beta(spectrum, levels, agg.energy[k] / agg.p[k], k)?;
        }
        alpha[k] = sector_ln_z(spectrum, partition, k, beta[k]) - agg.p[k].ln();
    }
    Ok(HEState { alpha, beta, kb: agg.kb })
}

/// Maximum-entropy projection of a population vector: the unique
/// sector-canonical state with the same `(p_K, ⟨H_K⟩)`.
pub fn rcce_project(
    fs: &FullState,
    spectrum: &Spectrum,
    partition: &SectorPartition,
) -> Result<HEState> {
    rcce_project_aggregates(&sector_aggregates(fs, spectrum, partition), spectrum, partition)
}

/// Independent oracle for the projection: per-sector projected-gradient
/// ascent of `-Σ g q ln q` under the mass and energy constraints. Agrees with
/// the closed form to well below 1e-6 on interior targets.
pub fn brute_force_maxent(
    agg: &SectorAggregates,
    spectrum: &Spectrum,
    partition: &SectorPartition,
) -> Result<FullState> {
    let mut p = vec![0.0; spectrum.len()];
    for k in 0..partition.num_sectors() {
        if !(agg.p[k] > 0.0) {
            return Err(Error::ZeroSectorProbability { sector: k + 1 });
        }
        let levels = partition.sector_levels(k);
        if levels.len() == 1 {
            let i = levels[0];
            p[i] = agg.p[k] / spectrum.weight(i);
            continue;
        }
        let q = maxent_sector(agg.p[k], agg.energy[k], spectrum, levels, k)?;
        for (slot, &i) in levels.iter().enumerate() {
            p[i] = q[slot];
        }
    }
    Ok(FullState { p, kb: agg.kb })
}

fn maxent_sector(
    mass: f64,
    energy: f64,
    spectrum: &Spectrum,
    levels: &[usize],
    sector: usize,
) -> Result<Vec<f64>> {
    let n = levels.len();
    let g: Vec<f64> = levels.iter().map(|&i| spectrum.weight(i)).collect();
    let e: Vec<f64> = levels.iter().map(|&i| spectrum.energy(i)).collect();
    let e_min = e.iter().copied().fold(f64::MAX, f64::min);
    let e_max = e.iter().copied().fold(f64::MIN, f64::max);
    let target = energy / mass;
    if !(target > e_min && target < e_max) {
        return Err(Error::EnergyOutOfRange {
            sector: sector + 1,
            target,
            min: e_min,
            max: e_max,
        });
    }
    let lo = e.iter().position(|&x| x == e_min).expect("present");
    let hi = e.iter().position(|&x| x == e_max).expect("present");

    // Orthonormal basis of the constraint normal space span{g, g*e}.
    let norm_a = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u1: Vec<f64> = g.iter().map(|x| x / norm_a).collect();
    let b: Vec<f64> = g.iter().zip(&e).map(|(gi, ei)| gi * ei).collect();
    let b_dot_u1: f64 = b.iter().zip(&u1).map(|(x, y)| x * y).sum();
    let b_perp: Vec<f64> = b.iter().zip(&u1).map(|(x, y)| x - b_dot_u1 * y).collect();
    let norm_b = b_perp.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u2: Vec<f64> = b_perp.iter().map(|x| x / norm_b).collect();
    let project = |v: &mut [f64]| {
        let c1: f64 = v.iter().zip(&u1).map(|(x, y)| x * y).sum();
        let c2: f64 = v.iter().zip(&u2).map(|(x, y)| x * y).sum();
        for ((vi, &u1i), &u2i) in v.iter_mut().zip(&u1).zip(&u2) {
            *vi -= c1 * u1i + c2 * u2i;
        }
    };

    // Feasible interior start: a uniform share plus a two-point remainder on
    // the extreme levels; shrink the uniform share until the remainder is
    // strictly positive.
    let g_tot: f64 = g.iter().sum();
    let e_unif: f64 = g.iter().zip(&e).map(|(gi, ei)| gi * ei).sum::<f64>() / g_tot;
    let mut share = 0.5;
    let mut q = loop {
        let m_rem = (1.0 - share) * mass;
        let e_rem = energy - share * mass * e_unif;
        let y = (e_rem - m_rem * e_min) / (e_max - e_min);
        let x = m_rem - y;
        if x > 0.0 && y > 0.0 {
            let mut q = vec![share * mass / g_tot; n];
            q[lo] += x / g[lo];
            q[hi] += y / g[hi];
            break q;
        }
        share *= 0.5;
        if share < 1e-12 {
            return Err(Error::NoConvergence {
                solver: "maxent feasible start",
                iterations: 0,
                residual: 0.0,
            });
        }
    };

    let entropy = |q: &[f64]| -> f64 {
        -q.iter()
            .zip(&g)
            .map(|(qi, gi)| if *qi > 0.0 { gi * qi * qi.ln() } else { 0.0 })
            .sum::<f64>()
    };

    let mut f_cur = entropy(&q);
    let mut step = 1.0_f64;
    for _ in 0..100_000 {
        let mut d: Vec<f64> = q
            .iter()
            .zip(&g)
            .map(|(qi, gi)| -gi * (qi.ln() + 1.0))
            .collect();
        project(&mut d);
        let d_norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if d_norm < 1e-10 {
            return Ok(q);
        }
        // backtracking line search, halving from the last accepted step
        step = (step * 2.0).min(1.0);
        loop {
            let candidate: Vec<f64> = q.iter().zip(&d).map(|(qi, di)| qi + step * di).collect();
            if candidate.iter().all(|&x| x > 0.0) {
                let f_new = entropy(&candidate);
                if f_new > f_cur {
                    q = candidate;
                    f_cur = f_new;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-18 {
                // flat to machine precision
                return Ok(q);
            }
        }
    }
    Err(Error::NoConvergence {
        solver: "maxent projected gradient",
        iterations: 100_000,
        residual: 0.0,
    })
}
