//! Greedy evaluation of a trained policy: fixed-seed episodes, no
//! exploration, full traces, and per-episode metrics aggregated into a
//! summary. The environment seed stream depends only on the evaluation
//! seed, so different policies and inspector settings face identical
//! scenarios.

use crate::nets::Learner;
use crate::rollout::{rollout_episode, RolloutOptions};
use crate::seed::{child_seed, subsystem_seed};
use crate::train::InspectorMode;
use crate::{Error, Result};
use crossway_sim::metrics::{outcome_counts, EpisodeMetrics};
use crossway_sim::network::build_network;
use crossway_sim::trace::EpisodeTrace;
use crossway_sim::ScenarioConfig;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub scenario: ScenarioConfig,
    pub episodes: usize,
    pub seed: u64,
    pub inspector: InspectorMode,
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub metrics: Vec<EpisodeMetrics>,
    pub traces: Vec<EpisodeTrace>,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub mean_return: f64,
    pub mean_speed: f64,
    /// Decisions where the inspector replaced the proposed action, summed
    /// over all episodes.
    pub corrected: usize,
    /// Smallest post-encroachment time observed across all episodes.
    pub min_pet: Option<f64>,
}

pub fn evaluate(learner: &Learner, cfg: &EvalConfig) -> Result<EvalSummary> {
    cfg.scenario.validate()?;
    if cfg.scenario.cav_count != learner.n_agents {
        return Err(Error::Train(format!(
            "policy drives {} agents but the scenario has {}",
            learner.n_agents, cfg.scenario.cav_count
        )));
    }
    if cfg.scenario.obs_slots != learner.obs_slots {
        return Err(Error::Train(format!(
            "policy observes {} slots but the scenario provides {}",
            learner.obs_slots, cfg.scenario.obs_slots
        )));
    }
    let network = Arc::new(build_network(cfg.scenario.lanes)?);
    let inspector = cfg.inspector.resolve(learner.variant);
    let env_stream = subsystem_seed(cfg.seed, "env");

    let mut metrics = Vec::with_capacity(cfg.episodes);
    let mut traces = Vec::with_capacity(cfg.episodes);
    let mut corrected = 0usize;
    for e in 0..cfg.episodes {
        let opts = RolloutOptions {
            scenario: cfg.scenario.clone(),
            network: network.clone(),
            episode: e as u64,
            world_seed: child_seed(env_stream, e as u64),
            inspector,
            record_trace: true,
        };
        let run = rollout_episode(learner, &opts, None)?;
        corrected += run.corrected;
        let trace = run.trace.expect("evaluation rollouts always record traces");
        metrics.push(EpisodeMetrics::from_trace(&trace, &network));
        traces.push(trace);
    }

    let (succ, coll, tout) = outcome_counts(&metrics);
    let n = metrics.len().max(1) as f64;
    let mean_return = metrics.iter().map(|m| m.return_total).sum::<f64>() / n;
    let mean_speed = metrics.iter().map(|m| m.mean_speed).sum::<f64>() / n;
    let min_pet = metrics
        .iter()
        .filter_map(|m| m.min_pet)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))));
    Ok(EvalSummary {
        success_rate: succ as f64 / n,
        collision_rate: coll as f64 / n,
        timeout_rate: tout as f64 / n,
        mean_return,
        mean_speed,
        corrected,
        min_pet,
        metrics,
        traces,
    })
}
