//! Scenario dispatch: build the core objects, integrate, serialize the
//! trajectory, and assemble the final-state summary.

use crate::error::CliError;
use crate::scenario::{BuiltSubsystem, IsolatedMode, Scenario, ScenarioKind};
use crate::trajectory::{TrajectoryFile, TrajectoryHeader};
use crate::Result;
use hesea_core::nh::{
    integrate_composite, integrate_three_system, CompositeKind, CompositeTrajectory, Subsystem,
    ThreeSystemModel,
};
use hesea_core::{
    equilibrium_state, integrate, mutual_equilibrium_beta, InitialState, StateSnapshot, Trajectory,
};
use serde_json::{json, Value};
use std::path::Path;

pub struct RunOutcome {
    pub trajectory: TrajectoryFile,
    pub summary: Value,
}

fn to_subsystem(b: &BuiltSubsystem) -> Result<Subsystem> {
    Subsystem::new(
        b.label.clone(),
        b.spectrum.clone(),
        b.partition.clone(),
        b.state.clone(),
        b.taus.clone(),
    )
    .map_err(CliError::from)
}

fn sector_columns(labels: &[(&str, usize)], prefix_labels: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for (label, m) in labels {
        for k in 1..=*m {
            let head = if prefix_labels {
                format!("{label}_")
            } else {
                String::new()
            };
            cols.push(format!("{head}alpha_{k}"));
            cols.push(format!("{head}beta_{k}"));
            cols.push(format!("{head}p_{k}"));
            cols.push(format!("{head}E_{k}"));
            cols.push(format!("{head}S_{k}"));
        }
    }
    cols
}

fn header(scenario: &Scenario, mode: &str, columns: Vec<String>) -> TrajectoryHeader {
    TrajectoryHeader {
        scenario_hash: format!("{:016x}", scenario.hash()),
        kind: serde_json::to_value(scenario.kind)
            .expect("kind serializes")
            .as_str()
            .expect("kind is a string")
            .to_string(),
        mode: mode.to_string(),
        rel_tol: scenario.integrator.rel_tol,
        abs_tol: scenario.integrator.abs_tol,
        columns,
    }
}

fn isolated_rows(traj: &Trajectory, file: &mut TrajectoryFile) {
    for s in &traj.samples {
        let mut row = vec![s.t];
        for sec in &s.sectors {
            row.extend_from_slice(&[sec.alpha, sec.beta, sec.p, sec.energy, sec.entropy]);
        }
        row.extend_from_slice(&[
            s.potentials.alpha,
            s.potentials.beta,
            s.energy,
            s.entropy,
            s.entropy_production,
        ]);
        file.push(row);
    }
}

fn composite_rows(
    traj: &CompositeTrajectory,
    kind: ScenarioKind,
    file: &mut TrajectoryFile,
) {
    for s in &traj.samples {
        let mut row = vec![s.t];
        for sectors in &s.sectors {
            for sec in sectors {
                row.extend_from_slice(&[sec.alpha, sec.beta, sec.p, sec.energy, sec.entropy]);
            }
        }
        match kind {
            ScenarioKind::CompositeIndependent => {}
            ScenarioKind::NhGeneral | ScenarioKind::NhTwo => {
                row.extend(s.nh_alpha.as_ref().expect("nh potentials").iter().copied());
                row.push(s.nh_beta.expect("nh beta"));
            }
            ScenarioKind::NhThree => {
                let alphas = s.nh_alpha.as_ref().expect("three potentials");
                row.extend_from_slice(alphas);
                let pots = s.three.as_ref().expect("three potentials");
                row.extend_from_slice(&[
                    pots.beta_j_a,
                    pots.beta_j_b,
                    pots.beta_j_ab,
                    pots.beta_j_eff,
                ]);
            }
            ScenarioKind::Isolated => unreachable!(),
        }
        row.extend_from_slice(&[s.total_energy, s.total_entropy, s.total_entropy_rate]);
        if let Some(report) = &s.report {
            for f in &report.flows {
                row.push(f.energy_rate);
            }
            for f in &report.flows {
                row.push(f.entropy_rate);
            }
            for (_, irr) in &report.irreversibility {
                row.push(*irr);
            }
            for (_, t_q) in &report.effective_temperature {
                row.push(*t_q);
            }
        }
        file.push(row);
    }
}

/// Execute a scenario. When `out` is given, the trajectory CSV is written
/// there.
pub fn run(scenario: &Scenario, out: Option<&Path>) -> Result<RunOutcome> {
    scenario.validate()?;
    let config = scenario.integrator_config()?;
    let built = scenario.build_all()?;

    let outcome = match scenario.kind {
        ScenarioKind::Isolated => {
            let b = &built[0];
            let initial = match scenario.mode {
                IsolatedMode::Reduced => InitialState::Reduced(b.state.clone()),
                IsolatedMode::Full => {
                    InitialState::Full(b.state.to_full_populations(&b.spectrum, &b.partition))
                }
            };
            let traj = integrate(&initial, &b.spectrum, &b.partition, &b.taus, &config)?;
            let mode = match scenario.mode {
                IsolatedMode::Reduced => "reduced",
                IsolatedMode::Full => "full",
            };
            let mut columns =
                sector_columns(&[(b.label.as_str(), b.partition.num_sectors())], false);
            columns.extend(
                ["alpha", "beta", "E_total", "S_total", "dS_dt"]
                    .iter()
                    .map(|s| s.to_string()),
            );
            let mut file = TrajectoryFile::new(header(scenario, mode, columns));
            isolated_rows(&traj, &mut file);

            let first = &traj.samples[0];
            let last = traj.samples.last().expect("samples");
            let norm0: f64 = first.sectors.iter().map(|s| s.p).sum();
            let eq = equilibrium_state(&b.spectrum, &b.partition, first.energy / norm0)?;
            let summary = json!({
                "t_final": last.t,
                "beta_K": last.sectors.iter().map(|s| s.beta).collect::<Vec<_>>(),
                "p_K": last.sectors.iter().map(|s| s.p).collect::<Vec<_>>(),
                "E_total": last.energy,
                "S_total": last.entropy,
                "beta_se": eq.beta,
                "alpha_se": eq.alpha,
                "p_se": eq.sector_p,
            });
            RunOutcome {
                trajectory: file,
                summary,
            }
        }
        ScenarioKind::CompositeIndependent | ScenarioKind::NhGeneral | ScenarioKind::NhTwo => {
            let subs: Vec<Subsystem> = built.iter().map(to_subsystem).collect::<Result<_>>()?;
            let kind = match scenario.kind {
                ScenarioKind::CompositeIndependent => CompositeKind::Independent,
                ScenarioKind::NhGeneral => CompositeKind::NhGeneral,
                _ => CompositeKind::NhTwo,
            };
            let traj = integrate_composite(&subs, kind, &config)?;
            let labels: Vec<(&str, usize)> = subs
                .iter()
                .map(|s| (s.label.as_str(), s.num_sectors()))
                .collect();
            let mut columns = sector_columns(&labels, true);
            match scenario.kind {
                ScenarioKind::NhGeneral | ScenarioKind::NhTwo => {
                    for s in &subs {
                        columns.push(format!("alpha_{}", s.label));
                    }
                    columns.push("beta".into());
                }
                _ => {}
            }
            columns.extend(
                ["E_total", "S_total", "dS_dt"].iter().map(|s| s.to_string()),
            );
            if scenario.kind == ScenarioKind::NhTwo {
                let (a, b) = (&subs[0].label, &subs[1].label);
                columns.push(format!("Edot_{a}to{b}"));
                columns.push(format!("Sdot_{a}to{b}"));
                columns.push(format!("Sirr_{a}"));
                columns.push(format!("Sirr_{b}"));
                columns.push(format!("TQ_{a}{b}"));
            }
            let mode = match scenario.kind {
                ScenarioKind::CompositeIndependent => "independent",
                ScenarioKind::NhGeneral => "nh_general",
                _ => "nh_two",
            };
            let mut file = TrajectoryFile::new(header(scenario, mode, columns));
            composite_rows(&traj, scenario.kind, &mut file);

            let last = traj.last();
            let mut summary = json!({
                "t_final": last.t,
                "subsystems": traj.labels.iter().zip(&last.states).zip(&last.energies).map(|((l, st), e)| json!({
                    "label": l,
                    "beta_K": st.beta,
                    "E": e,
                })).collect::<Vec<_>>(),
                "E_total": last.total_energy,
                "S_total": last.total_entropy,
            });
            if scenario.kind != ScenarioKind::CompositeIndependent {
                let beta_eq = mutual_equilibrium_beta(&subs, traj.samples[0].total_energy)?;
                summary["beta_se"] = json!(beta_eq);
            } else {
                let per: Vec<f64> = subs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        equilibrium_state(
                            &s.spectrum,
                            &s.partition,
                            traj.samples[0].energies[i],
                        )
                        .map(|eq| eq.beta)
                    })
                    .collect::<hesea_core::Result<_>>()?;
                summary["beta_se"] = json!(per);
            }
            RunOutcome {
                trajectory: file,
                summary,
            }
        }
        ScenarioKind::NhThree => {
            let coupling = scenario.coupling.as_ref().expect("validated");
            let subs: Vec<Subsystem> = built.iter().map(to_subsystem).collect::<Result<_>>()?;
            let [a, j, b]: [Subsystem; 3] = subs
                .try_into()
                .map_err(|_| CliError::validation("subsystems", "nh_three needs 3 subsystems"))?;
            let model = ThreeSystemModel::new(
                a,
                j,
                b,
                coupling.tau_j_a,
                coupling.tau_j_b,
                coupling.omega_override,
            )?;
            let traj = integrate_three_system(&model, &config)?;
            let labels: Vec<(&str, usize)> = [&model.a, &model.j, &model.b]
                .iter()
                .map(|s| (s.label.as_str(), s.num_sectors()))
                .collect();
            let mut columns = sector_columns(&labels, true);
            let (la, lj, lb) = (&model.a.label, &model.j.label, &model.b.label);
            for l in [la, lj, lb] {
                columns.push(format!("alpha_{l}"));
            }
            columns.extend(
                [
                    format!("beta_{lj}{la}"),
                    format!("beta_{lj}{lb}"),
                    format!("beta_{lj}{la}{lb}"),
                    format!("beta_{lj}_eff"),
                    "E_total".into(),
                    "S_total".into(),
                    "dS_dt".into(),
                    format!("Edot_{la}to{lj}"),
                    format!("Edot_{lj}to{lb}"),
                    format!("Sdot_{la}to{lj}"),
                    format!("Sdot_{lj}to{lb}"),
                    format!("Sirr_{la}"),
                    format!("Sirr_{lj}"),
                    format!("Sirr_{lb}"),
                    format!("TQ_{la}{lj}"),
                    format!("TQ_{lj}{lb}"),
                ]
                .into_iter(),
            );
            let mut file = TrajectoryFile::new(header(scenario, "nh_three", columns));
            composite_rows(&traj, ScenarioKind::NhThree, &mut file);

            let last = traj.last();
            let pots = last.three.as_ref().expect("three potentials");
            let beta_ss = hesea_core::steady_state_beta(
                pots.v_a,
                pots.v_b,
                pots.v_j,
                last.states[0].beta[0],
                last.states[2].beta[0],
            );
            let subs_for_eq = [model.a.clone(), model.j.clone(), model.b.clone()];
            let beta_eq = mutual_equilibrium_beta(&subs_for_eq, traj.samples[0].total_energy)?;
            let summary = json!({
                "t_final": last.t,
                "subsystems": traj.labels.iter().zip(&last.states).zip(&last.energies).map(|((l, st), e)| json!({
                    "label": l,
                    "beta_K": st.beta,
                    "E": e,
                })).collect::<Vec<_>>(),
                "E_total": last.total_energy,
                "S_total": last.total_entropy,
                "beta_j_eff": pots.beta_j_eff,
                "beta_steady_state": beta_ss,
                "beta_se": beta_eq,
            });
            RunOutcome {
                trajectory: file,
                summary,
            }
        }
    };

    if let Some(path) = out {
        outcome.trajectory.write(path)?;
    }
    Ok(outcome)
}
