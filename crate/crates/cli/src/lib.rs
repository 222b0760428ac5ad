//! Scenario files, the simulation driver, trajectory serialization, and the
//! verification report behind the `hesea` command-line tool.

pub mod error;
pub mod run;
pub mod scenario;
pub mod trajectory;
pub mod verify;

pub use error::CliError;
pub use run::{run, RunOutcome};
pub use scenario::{parse_scenario, parse_scenario_str, Scenario, ScenarioKind};
pub use trajectory::{read_trajectory, TrajectoryFile};
pub use verify::{verify, CheckResult, VerifyReport};

pub type Result<T> = std::result::Result<T, CliError>;
