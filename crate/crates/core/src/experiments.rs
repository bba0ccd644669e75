//! Monte Carlo robustness study and the bounds report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fxts::{
    convergence_estimate, numeric_settling_time, FxtsParams, K2Variant, OracleOptions, Regime,
};
use crate::scenario::{mix_seed, run_episode, EpisodeStatus, Phase, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloOptions {
    /// Disturbance levels `phi_inf = (i + 1) / levels * phi_base`.
    pub levels: usize,
    pub trials: usize,
    pub phi_base: f64,
    /// Use the disturbance level as the sensing noise radius as well.
    pub tie_sensing: bool,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            levels: 10,
            trials: 10,
            phi_base: 3.99,
            tie_sensing: true,
        }
    }
}

impl MonteCarloOptions {
    pub fn fraction(&self, level: usize) -> f64 {
        (level + 1) as f64 / self.levels as f64
    }
}

/// One Monte Carlo trial, flattened for the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub level: usize,
    pub fraction: f64,
    pub phi_inf: f64,
    pub trial: usize,
    pub seed: u64,
    pub status: EpisodeStatus,
    pub initiated_at: Option<f64>,
    pub t_merge_out: Option<f64>,
    pub t_pass: Option<f64>,
    pub t_merge_back: Option<f64>,
    pub within_budget: bool,
    pub safe: bool,
    pub min_h_lane: f64,
    pub min_h_lead: f64,
    pub c3_star: f64,
}

/// Configuration for one Monte Carlo trial.
pub fn trial_config(
    cfg: &ScenarioConfig,
    opts: &MonteCarloOptions,
    level: usize,
    trial: usize,
) -> (ScenarioConfig, u64) {
    let mut c = cfg.clone();
    let seed = mix_seed(cfg.scenario.seed, (level * opts.trials + trial) as u64);
    c.reseed(seed);
    c.disturbance.phi_inf = opts.fraction(level) * opts.phi_base;
    if opts.tie_sensing {
        c.sensing.eps = c.disturbance.phi_inf;
    }
    (c, seed)
}

/// Runs every (level, trial) pair in parallel; rows come back in index order.
pub fn monte_carlo(cfg: &ScenarioConfig, opts: &MonteCarloOptions) -> Result<Vec<TrialRow>> {
    let n = opts.levels * opts.trials;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (level, trial) = (i / opts.trials, i % opts.trials);
            let (c, seed) = trial_config(cfg, opts, level, trial);
            let s = run_episode(&c)?.summary;
            let t = |p: Phase| s.phase(p).and_then(|ps| ps.t_actual);
            Ok(TrialRow {
                level,
                fraction: opts.fraction(level),
                phi_inf: c.disturbance.phi_inf,
                trial,
                seed,
                status: s.status,
                initiated_at: s.overtake_started,
                t_merge_out: t(Phase::MergeOut),
                t_pass: t(Phase::Pass),
                t_merge_back: t(Phase::MergeBack),
                within_budget: s.all_within_budget(),
                safe: s.safe(),
                min_h_lane: s.min_h_lane,
                min_h_lead: s.min_h_lead,
                c3_star: s.c3_star,
            })
        })
        .collect()
}

/// Per-level aggregate of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub phi_inf: f64,
    pub trials: usize,
    pub completed: usize,
    pub within_budget: usize,
    pub safe: usize,
}

pub fn level_stats(rows: &[TrialRow]) -> Vec<LevelStats> {
    let mut out: Vec<LevelStats> = Vec::new();
    for r in rows {
        if out.last().is_none_or(|s| s.level != r.level) {
            out.push(LevelStats {
                level: r.level,
                phi_inf: r.phi_inf,
                trials: 0,
                completed: 0,
                within_budget: 0,
                safe: 0,
            });
        }
        let s = out.last_mut().unwrap();
        s.trials += 1;
        s.completed += usize::from(r.status == EpisodeStatus::Completed);
        s.within_budget += usize::from(r.within_budget);
        s.safe += usize::from(r.safe);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub params: FxtsParams,
    pub variant: K2Variant,
    pub regime: Regime,
    pub domain_level: f64,
    pub time_bound: f64,
    pub valid: bool,
    pub v0: f64,
    /// Numerically integrated time from `v0` to the domain level, if reached.
    pub oracle_time: Option<f64>,
}

pub fn bounds_report(
    p: &FxtsParams,
    variant: K2Variant,
    v0: f64,
    oracle: &OracleOptions,
) -> Result<BoundsReport> {
    let est = convergence_estimate(p, variant)?;
    let oracle_time = match numeric_settling_time(p, v0, oracle) {
        Ok(t) => Some(t),
        Err(crate::Error::Timeout { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BoundsReport {
        params: *p,
        variant,
        regime: est.regime,
        domain_level: est.domain_level,
        time_bound: est.time_bound,
        valid: est.valid,
        v0,
        oracle_time,
    })
}
