//! Run manifests and the CSV / JSON files written by the experiments.
//!
//! Every file carries the SHA-256 of its manifest: CSV files in a leading
//! `# manifest_sha256=<hex>` comment line, JSON files in a
//! `manifest_sha256` field and SVG files in an XML comment.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::TrialRow;
use crate::qp::QpStatus;
use crate::scenario::{
    Decision, EpisodeStatus, EpisodeSummary, Phase, ScenarioConfig, SweepGrid, SweepRow,
    TrajectoryLog,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Trajectory CSV columns, in order.
pub const TRAJECTORY_COLUMNS: [&str; 21] = [
    "t", "x_e", "y_e", "theta_e", "v_e", "x_l", "y_l", "v_l", "x_oc", "y_oc", "v_oc", "omega",
    "a", "delta1", "delta2", "delta3", "V", "h_lane", "h_lead", "phase", "qp_status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Run,
    MonteCarlo {
        levels: usize,
        trials: usize,
        phi_base: f64,
    },
    Sweep {
        grid: SweepGrid,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub tool_version: String,
    pub config_path: Option<String>,
    pub out_dir: String,
    pub seed: u64,
    /// Configuration after defaults and command-line overrides.
    pub config: ScenarioConfig,
}

impl RunManifest {
    pub fn new(
        experiment: Experiment,
        config_path: Option<&Path>,
        out_dir: &Path,
        config: ScenarioConfig,
    ) -> Self {
        RunManifest {
            experiment,
            tool_version: TOOL_VERSION.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            out_dir: out_dir.display().to_string(),
            seed: config.scenario.seed,
            config,
        }
    }

    /// Hex SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn status_name(s: QpStatus) -> &'static str {
    match s {
        QpStatus::Optimal => "optimal",
        QpStatus::Infeasible => "infeasible",
        QpStatus::Degenerate => "degenerate",
    }
}

pub fn write_trajectory_csv<W: Write>(mut out: W, log: &TrajectoryLog, hash: &str) -> Result<()> {
    writeln!(out, "# manifest_sha256={hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for r in &log.records {
        let nums = [
            r.t,
            r.ego.x,
            r.ego.y,
            r.ego.theta,
            r.ego.v,
            r.lead.x,
            r.lead.y,
            r.lead.v,
            r.oncoming.x,
            r.oncoming.y,
            r.oncoming.v,
            r.u.omega,
            r.u.a,
            r.delta[0],
            r.delta[1],
            r.delta[2],
            r.v,
            r.h_lane,
            r.h_lead,
        ];
        let mut row: Vec<String> = nums.iter().map(|v| v.to_string()).collect();
        row.push(r.phase.name().to_string());
        row.push(status_name(r.qp_status).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: Phase,
    #[serde(rename = "T_budget")]
    pub t_budget: f64,
    #[serde(rename = "T_actual")]
    pub t_actual: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub disturbance: u64,
    pub sensing: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest_sha256: String,
    pub status: EpisodeStatus,
    pub phases: Vec<PhaseReport>,
    pub c3_star: f64,
    pub max_delta1: f64,
    pub min_h_lane: f64,
    pub min_h_lead: f64,
    pub max_abs_omega: f64,
    pub max_abs_a: f64,
    pub decision_log: Vec<Decision>,
    pub seeds: Seeds,
    pub duration: f64,
}

impl RunSummary {
    pub fn new(s: &EpisodeSummary, master_seed: u64, hash: &str) -> Self {
        RunSummary {
            manifest_sha256: hash.to_string(),
            status: s.status,
            phases: s
                .phases
                .iter()
                .map(|p| PhaseReport {
                    phase: p.phase,
                    t_budget: p.t_budget,
                    t_actual: p.t_actual,
                    converged: p.converged,
                })
                .collect(),
            c3_star: s.c3_star,
            max_delta1: s.max_delta1,
            min_h_lane: s.min_h_lane,
            min_h_lead: s.min_h_lead,
            max_abs_omega: s.max_abs_omega,
            max_abs_a: s.max_abs_a,
            decision_log: s.decisions.clone(),
            seeds: Seeds {
                master: master_seed,
                disturbance: s.disturbance_seed,
                sensing: s.sensing_seed,
            },
            duration: s.duration,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn episode_status_name(s: EpisodeStatus) -> &'static str {
    match s {
        EpisodeStatus::Completed => "completed",
        EpisodeStatus::SafetyViolation => "safety_violation",
        EpisodeStatus::QpInfeasible => "qp_infeasible",
        EpisodeStatus::QpDegenerate => "qp_degenerate",
        EpisodeStatus::PhaseTimeout => "phase_timeout",
        EpisodeStatus::HorizonReached => "horizon_reached",
    }
}

pub fn write_trials_csv<W: Write>(mut out: W, rows: &[TrialRow], hash: &str) -> Result<()> {
    writeln!(out, "# manifest_sha256={hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "level",
        "fraction",
        "phi_inf",
        "trial",
        "seed",
        "status",
        "initiated_at",
        "t_merge_out",
        "t_pass",
        "t_merge_back",
        "within_budget",
        "safe",
        "min_h_lane",
        "min_h_lead",
        "c3_star",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            r.fraction.to_string(),
            r.phi_inf.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            episode_status_name(r.status).to_string(),
            opt(r.initiated_at),
            opt(r.t_merge_out),
            opt(r.t_pass),
            opt(r.t_merge_back),
            r.within_budget.to_string(),
            r.safe.to_string(),
            r.min_h_lane.to_string(),
            r.min_h_lead.to_string(),
            r.c3_star.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow], hash: &str) -> Result<()> {
    writeln!(out, "# manifest_sha256={hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "K",
        "T",
        "omega_max",
        "a_max",
        "c3_star",
        "status",
        "within_budget",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.t_total.to_string(),
            r.omega_max.to_string(),
            r.a_max.to_string(),
            r.c3_star.to_string(),
            episode_status_name(r.status).to_string(),
            r.within_budget.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
