//! Energy spectra and their partition into spectral sectors.

use crate::error::Error;
use crate::Result;

/// One distinct energy eigenvalue with its degeneracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    pub degeneracy: u32,
}

/// A validated list of distinct eigenvalues, sorted ascending.
///
/// Equality of energies is exact: inputs are user-declared distinct
/// eigenvalues, and merging nearly equal ones is a modeling choice the caller
/// must make explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    levels: Vec<EnergyLevel>,
}

impl Spectrum {
    /// Build a spectrum from `(energy, degeneracy)` pairs, sorting ascending.
    pub fn new(levels: impl IntoIterator<Item = (f64, u32)>) -> Result<Self> {
        let mut levels: Vec<EnergyLevel> = levels
            .into_iter()
            .map(|(energy, degeneracy)| EnergyLevel { energy, degeneracy })
            .collect();
        if levels.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        for (index, level) in levels.iter().enumerate() {
            if level.degeneracy == 0 {
                return Err(Error::NonPositiveDegeneracy { index });
            }
            if !level.energy.is_finite() {
                return Err(Error::InvalidConfig {
                    reason: format!("non-finite energy at level {index}"),
                });
            }
        }
        levels.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        for pair in levels.windows(2) {
            if pair[0].energy == pair[1].energy {
                return Err(Error::DuplicateEnergy {
                    energy: pair[0].energy,
                });
            }
        }
        Ok(Self { levels })
    }

    /// Number of distinct levels N.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one level by construction
    }

    pub fn levels(&self) -> &[EnergyLevel] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> EnergyLevel {
        self.levels[i]
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.levels[i].energy
    }

    /// Degeneracy as f64, the weight it carries in every population sum.
    pub fn weight(&self, i: usize) -> f64 {
        f64::from(self.levels[i].degeneracy)
    }

    /// Hilbert-space dimension Σ g_i.
    pub fn dimension(&self) -> u64 {
        self.levels.iter().map(|l| u64::from(l.degeneracy)).sum()
    }

    pub fn min_energy(&self) -> f64 {
        self.levels[0].energy
    }

    pub fn max_energy(&self) -> f64 {
        self.levels[self.levels.len() - 1].energy
    }

    /// Every energy replaced by `energy + c`; degeneracies unchanged.
    pub fn shifted(&self, c: f64) -> Spectrum {
        Spectrum {
            levels: self
                .levels
                .iter()
                .map(|l| EnergyLevel {
                    energy: l.energy + c,
                    degeneracy: l.degeneracy,
                })
                .collect(),
        }
    }
}

/// Disjoint assignment of the N levels to M nonempty sectors.
///
/// Sector labels are 1-based (K = 1..=M) in all public inputs, mirroring the
/// usual indexing; internally sectors are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorPartition {
    sector_of: Vec<usize>,      // 0-based sector index per level
    sectors: Vec<Vec<usize>>,   // level indices per sector, each ascending
}

impl SectorPartition {
    /// Sectors as contiguous energy intervals ("energy shells").
    ///
    /// `cuts` are strictly increasing positions in `1..=N-1`; a cut at `c`
    /// starts a new sector at level `c+1` (1-based). `M = cuts.len() + 1`.
    pub fn contiguous(spectrum: &Spectrum, cuts: &[usize]) -> Result<Self> {
        let n = spectrum.len();
        let mut prev = 0usize;
        for &cut in cuts {
            if cut < 1 || cut > n - 1 || cut <= prev {
                return Err(Error::InvalidCut { cut, n });
            }
            prev = cut;
        }
        let mut sector_of = vec![0usize; n];
        let mut sector = 0usize;
        let mut next_cut = cuts.iter().copied();
        let mut boundary = next_cut.next();
        for (i, slot) in sector_of.iter_mut().enumerate() {
            if let Some(b) = boundary {
                if i >= b {
                    sector += 1;
                    boundary = next_cut.next();
                }
            }
            *slot = sector;
        }
        Ok(Self::from_sector_of(sector_of, cuts.len() + 1))
    }

    /// Arbitrary (possibly non-contiguous) assignment; `assignment[i]` is the
    /// 1-based sector label of level `i`, and labels must cover `1..=M`.
    pub fn arbitrary(spectrum: &Spectrum, assignment: &[usize]) -> Result<Self> {
        let n = spectrum.len();
        if assignment.len() != n {
            return Err(Error::AssignmentLength {
                expected: n,
                got: assignment.len(),
            });
        }
        let m = *assignment.iter().max().expect("nonempty");
        if assignment.iter().any(|&label| label == 0) {
            return Err(Error::LabelGap { label: 0 });
        }
        let mut counts = vec![0usize; m];
        for &label in assignment {
            counts[label - 1] += 1;
        }
        if let Some(gap) = counts.iter().position(|&c| c == 0) {
            return Err(Error::LabelGap { label: gap + 1 });
        }
        let sector_of = assignment.iter().map(|&label| label - 1).collect();
        Ok(Self::from_sector_of(sector_of, m))
    }

    fn from_sector_of(sector_of: Vec<usize>, m: usize) -> Self {
        let mut sectors = vec![Vec::new(); m];
        for (level, &k) in sector_of.iter().enumerate() {
            sectors[k].push(level);
        }
        Self { sector_of, sectors }
    }

    /// Number of sectors M.
    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    /// Number of levels N this partition was built for.
    pub fn num_levels(&self) -> usize {
        self.sector_of.len()
    }

    /// 0-based sector index of level `i`.
    pub fn sector_of(&self, i: usize) -> usize {
        self.sector_of[i]
    }

    /// Level indices of 0-based sector `k`, ascending.
    pub fn sector_levels(&self, k: usize) -> &[usize] {
        &self.sectors[k]
    }

    pub fn sectors(&self) -> impl Iterator<Item = &[usize]> {
        self.sectors.iter().map(|s| s.as_slice())
    }
}
