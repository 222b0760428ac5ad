//! The scenario file: one JSON document describing the system(s), the
//! initial state, and the integrator settings. Parsing validates everything
//! up front and reports the offending field.

use crate::error::CliError;
use crate::Result;
use hesea_core::{
    Direction, HEState, IntegratorConfig, Method, RelaxationTimes, SectorPartition, Spectrum,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Isolated,
    CompositeIndependent,
    NhGeneral,
    NhTwo,
    NhThree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IsolatedMode {
    #[default]
    Reduced,
    Full,
}

/// Sector assignment: contiguous cuts or an explicit 1-based label list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorSpec {
    Cuts(Vec<usize>),
    Assignment(Vec<usize>),
}

/// Initial state: sector probabilities + inverse temperatures, or the raw
/// constraint potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    PBeta { p: Vec<f64>, beta: Vec<f64> },
    AlphaBeta { alpha: Vec<f64>, beta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub label: String,
    /// `(energy, degeneracy)` pairs.
    pub levels: Vec<(f64, u32)>,
    pub sectors: SectorSpec,
    pub initial: InitialSpec,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub dt_init: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
    pub t_end: f64,
    #[serde(default = "default_direction")]
    pub direction: String,
    pub sample_every: f64,
    #[serde(default)]
    pub renormalize: bool,
}

fn default_method() -> String {
    "rk45_adaptive".into()
}
fn default_rel_tol() -> f64 {
    1e-9
}
fn default_abs_tol() -> f64 {
    1e-12
}
fn default_direction() -> String {
    "forward".into()
}
fn default_kb() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub tau_j_a: f64,
    pub tau_j_b: f64,
    #[serde(default)]
    pub omega_override: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default = "default_kb")]
    pub kb: f64,
    #[serde(default)]
    pub mode: IsolatedMode,
    pub integrator: IntegratorSpec,
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
}

/// A fully validated subsystem ready for the core library.
pub struct BuiltSubsystem {
    pub label: String,
    pub spectrum: Spectrum,
    pub partition: SectorPartition,
    pub state: HEState,
    pub taus: RelaxationTimes,
}

impl Scenario {
    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        let method = match self.integrator.method.as_str() {
            "rk45_adaptive" => Method::Rk45Adaptive,
            "rk4_fixed" => Method::Rk4Fixed,
            other => {
                return Err(CliError::validation(
                    "integrator.method",
                    format!("unknown method `{other}` (rk45_adaptive | rk4_fixed)"),
                ))
            }
        };
        let direction = match self.integrator.direction.as_str() {
            "forward" => Direction::Forward,
            "backward" => Direction::Backward,
            other => {
                return Err(CliError::validation(
                    "integrator.direction",
                    format!("unknown direction `{other}` (forward | backward)"),
                ))
            }
        };
        let config = IntegratorConfig {
            method,
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            dt_init: self.integrator.dt_init,
            max_step: self.integrator.max_step,
            t_end: self.integrator.t_end,
            direction,
            sample_every: self.integrator.sample_every,
            renormalize: self.integrator.renormalize,
        };
        config
            .validate()
            .map_err(|e| CliError::validation("integrator", e.to_string()))?;
        Ok(config)
    }

    /// Build and validate one subsystem entry.
    pub fn build_subsystem(&self, index: usize) -> Result<BuiltSubsystem> {
        let spec = &self.subsystems[index];
        let field = |suffix: &str| format!("subsystems[{index}].{suffix}");
        let spectrum = Spectrum::new(spec.levels.iter().copied())
            .map_err(|e| CliError::validation(field("levels"), e.to_string()))?;
        let partition = match &spec.sectors {
            SectorSpec::Cuts(cuts) => SectorPartition::contiguous(&spectrum, cuts),
            SectorSpec::Assignment(labels) => SectorPartition::arbitrary(&spectrum, labels),
        }
        .map_err(|e| CliError::validation(field("sectors"), e.to_string()))?;
        let m = partition.num_sectors();
        let state = match &spec.initial {
            InitialSpec::PBeta { p, beta } => {
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(CliError::validation(
                        field("initial.p"),
                        format!("normalization: probabilities sum to {sum}, expected 1 within 1e-9"),
                    ));
                }
                // renormalize the residual so the core 1e-12 precondition holds
                let p: Vec<f64> = p.iter().map(|x| x / sum).collect();
                HEState::from_p_beta(&p, beta, &spectrum, &partition)
                    .map_err(|e| CliError::validation(field("initial"), e.to_string()))?
                    .with_kb(self.kb)
            }
            InitialSpec::AlphaBeta { alpha, beta } => {
                if alpha.len() != m || beta.len() != m {
                    return Err(CliError::validation(
                        field("initial"),
                        format!(
                            "expected {m} alpha and beta entries, got {} and {}",
                            alpha.len(),
                            beta.len()
                        ),
                    ));
                }
                let state =
                    HEState::from_alpha_beta(alpha.clone(), beta.clone(), self.kb);
                let defect = state.normalization_defect(&spectrum, &partition);
                if defect > 1e-9 {
                    return Err(CliError::validation(
                        field("initial"),
                        format!("normalization: sum Z_K exp(-alpha_K) off by {defect:.3e} (> 1e-9)"),
                    ));
                }
                state
            }
        };
        let taus = RelaxationTimes::new(spec.tau.clone())
            .map_err(|e| CliError::validation(field("tau"), e.to_string()))?;
        if taus.tau.len() != m {
            return Err(CliError::validation(
                field("tau"),
                format!("expected {m} relaxation times, got {}", taus.tau.len()),
            ));
        }
        Ok(BuiltSubsystem {
            label: spec.label.clone(),
            spectrum,
            partition,
            state,
            taus,
        })
    }

    pub fn build_all(&self) -> Result<Vec<BuiltSubsystem>> {
        (0..self.subsystems.len())
            .map(|i| self.build_subsystem(i))
            .collect()
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.kb > 0.0) {
            return Err(CliError::validation("kb", "must be positive"));
        }
        let n = self.subsystems.len();
        let expect = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::validation(
                    "subsystems",
                    format!("kind `{:?}` requires {what}, got {n}", self.kind),
                ))
            }
        };
        match self.kind {
            ScenarioKind::Isolated => expect(n == 1, "exactly 1 subsystem")?,
            ScenarioKind::CompositeIndependent => expect(n >= 1, "at least 1 subsystem")?,
            ScenarioKind::NhGeneral | ScenarioKind::NhTwo => {
                expect(n == 2 || (self.kind == ScenarioKind::NhGeneral && n >= 2), "2 subsystems")?
            }
            ScenarioKind::NhThree => {
                expect(n == 3, "exactly 3 subsystems in order [A, J, B]")?;
                if self.coupling.is_none() {
                    return Err(CliError::validation(
                        "coupling",
                        "nh_three requires `coupling` with fields tau_j_a and tau_j_b",
                    ));
                }
                let c = self.coupling.as_ref().unwrap();
                if !(c.tau_j_a > 0.0) {
                    return Err(CliError::validation("coupling.tau_j_a", "must be positive"));
                }
                if !(c.tau_j_b > 0.0) {
                    return Err(CliError::validation("coupling.tau_j_b", "must be positive"));
                }
            }
        }
        let mut labels: Vec<&str> = self.subsystems.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != n {
            return Err(CliError::validation("subsystems.label", "labels must be unique"));
        }
        Ok(())
    }

    /// Full validation: shape, integrator settings, and every subsystem
    /// (spectra, partitions, normalization, relaxation times).
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        self.integrator_config()?;
        let built = self.build_all()?;
        if self.kind == ScenarioKind::NhTwo || self.kind == ScenarioKind::NhThree {
            let bath_indices: &[usize] = match self.kind {
                ScenarioKind::NhTwo => &[0, 1],
                _ => &[0, 2],
            };
            for &i in bath_indices {
                if built[i].partition.num_sectors() != 1 {
                    return Err(CliError::validation(
                        format!("subsystems[{i}].sectors"),
                        "heat-interaction end systems must have a single sector",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical serialized form, recorded in trajectory
    /// headers.
    pub fn hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        canonical.hash(&mut hasher);
        hasher.finish()
    }
}

/// Parse and validate a scenario from a JSON string.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
        CliError::Parse(format!(
            "line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Parse and validate a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

/// Serialize with enough digits to round-trip every f64 exactly.
pub fn scenario_to_string(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serializes")
}
