//! The training loop: episodes roll out under an exploration schedule, land
//! in the replay buffer, and every fixed number of simulated physics steps
//! one update round refreshes all critics and actors. All randomness comes
//! from named streams derived from the run seed, so a run is reproducible
//! from its configuration alone.

use crate::buffer::ReplayBuffer;
use crate::nets::Learner;
use crate::rollout::{rollout_episode, EpisodeRun, RolloutOptions};
use crate::seed::{child_seed, subsystem_seed};
use crate::updates::{update_round, UpdateParams};
use crate::{Error, Result, Variant};
use crossway_sim::network::build_network;
use crossway_sim::trace::{EpisodeTrace, Outcome};
use crossway_sim::ScenarioConfig;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

/// Whether the inspection stage runs during rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InspectorMode {
    /// Follow the variant's default (on only for the full method).
    Auto,
    On,
    Off,
}

impl InspectorMode {
    pub fn resolve(self, variant: Variant) -> bool {
        match self {
            InspectorMode::Auto => variant.inspects_by_default(),
            InspectorMode::On => true,
            InspectorMode::Off => false,
        }
    }
}

impl FromStr for InspectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<InspectorMode> {
        match s {
            "auto" => Ok(InspectorMode::Auto),
            "on" => Ok(InspectorMode::On),
            "off" => Ok(InspectorMode::Off),
            _ => Err(Error::Train(format!(
                "unknown inspector mode `{s}` (expected auto, on, or off)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub scenario: ScenarioConfig,
    pub variant: Variant,
    pub seed: u64,
    pub episodes: usize,
    /// Rollout threads; episodes within a chunk share the same parameter
    /// snapshot, so results depend on the worker count (but are reproducible
    /// for a fixed count).
    pub workers: usize,
    pub inspector: InspectorMode,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub polyak: f64,
    /// Simulated physics steps between update rounds.
    pub update_every_steps: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub temp_start: f64,
    pub temp_end: f64,
    /// Keep every episode's full trace in the result.
    pub record_traces: bool,
}

impl TrainConfig {
    pub fn new(variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            scenario: ScenarioConfig::cav_only(),
            variant,
            seed,
            episodes: 500,
            workers: 1,
            inspector: InspectorMode::Auto,
            gamma: 0.95,
            lr: 0.01,
            batch: 128,
            buffer_capacity: 10_000,
            polyak: 0.01,
            update_every_steps: 100,
            eps_start: 0.3,
            eps_end: 0.05,
            temp_start: 1.0,
            temp_end: 0.5,
            record_traces: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.workers == 0 {
            return Err(Error::Train("at least one worker is required".into()));
        }
        if self.episodes == 0 {
            return Err(Error::Train("at least one episode is required".into()));
        }
        if self.batch == 0 || self.batch > self.buffer_capacity {
            return Err(Error::Train(
                "batch size must be positive and fit in the replay buffer".into(),
            ));
        }
        Ok(())
    }

    /// Linear schedule position for an episode: 0 at the first episode, 1 at
    /// the last.
    fn fraction(&self, episode: usize) -> f64 {
        let den = self.episodes.saturating_sub(1).max(1) as f64;
        episode as f64 / den
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let f = self.fraction(episode);
        (1.0 - f) * self.eps_start + f * self.eps_end
    }

    pub fn temperature_at(&self, episode: usize) -> f64 {
        let f = self.fraction(episode);
        (1.0 - f) * self.temp_start + f * self.temp_end
    }
}

/// One CSV row of the training log.
#[derive(Clone, Debug)]
pub struct EpisodeLog {
    pub episode: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub temperature: f64,
    pub outcome: Outcome,
    pub steps: usize,
    pub return_total: f64,
    pub corrected: usize,
    pub buffer_len: usize,
    pub rounds: usize,
    /// Wall-clock milliseconds; the only column that varies between
    /// otherwise identical runs.
    pub wall_ms: u128,
}

#[derive(Debug)]
pub struct TrainResult {
    pub learner: Learner,
    pub log: Vec<EpisodeLog>,
    /// Update rounds performed.
    pub rounds: usize,
    /// Populated only when the config asks for traces.
    pub traces: Vec<EpisodeTrace>,
}

fn rollout_chunk(
    learner: &Learner,
    cfg: &TrainConfig,
    network: &Arc<crossway_sim::RoadNetwork>,
    env_stream: u64,
    explore_stream: u64,
    inspector: bool,
    episodes: &[usize],
) -> Result<Vec<EpisodeRun>> {
    let opts_for = |e: usize| RolloutOptions {
        scenario: cfg.scenario.clone(),
        network: network.clone(),
        episode: e as u64,
        world_seed: child_seed(env_stream, e as u64),
        inspector,
        record_trace: cfg.record_traces,
    };
    if episodes.len() == 1 {
        let e = episodes[0];
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(explore_stream, e as u64));
        let run = rollout_episode(learner, &opts_for(e), Some((cfg.epsilon_at(e), &mut rng)))?;
        return Ok(vec![run]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = episodes
            .iter()
            .map(|&e| {
                let opts = opts_for(e);
                let epsilon = cfg.epsilon_at(e);
                let rng_seed = child_seed(explore_stream, e as u64);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                    rollout_episode(learner, &opts, Some((epsilon, &mut rng)))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    })
}

pub fn train(cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let network = Arc::new(build_network(cfg.scenario.lanes)?);
    let inspector = cfg.inspector.resolve(cfg.variant);
    let mut learner = Learner::new(
        cfg.variant,
        cfg.scenario.cav_count,
        cfg.scenario.obs_slots,
        subsystem_seed(cfg.seed, "init"),
    );
    let env_stream = subsystem_seed(cfg.seed, "env");
    let explore_stream = subsystem_seed(cfg.seed, "explore");
    let mut rng_batch = ChaCha8Rng::seed_from_u64(subsystem_seed(cfg.seed, "buffer"));
    let mut rng_noise = ChaCha8Rng::seed_from_u64(subsystem_seed(cfg.seed, "update"));
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);

    let mut log = Vec::with_capacity(cfg.episodes);
    let mut traces = Vec::new();
    let mut pending_steps = 0usize;
    let mut rounds = 0usize;
    let mut next = 0usize;
    while next < cfg.episodes {
        let chunk_start = Instant::now();
        let chunk: Vec<usize> = (next..cfg.episodes.min(next + cfg.workers)).collect();
        let runs = rollout_chunk(
            &learner,
            cfg,
            &network,
            env_stream,
            explore_stream,
            inspector,
            &chunk,
        )?;
        for (&e, run) in chunk.iter().zip(runs) {
            for t in run.transitions {
                buffer.push(t);
            }
            pending_steps += run.sim_steps;
            let params = UpdateParams {
                gamma: cfg.gamma,
                lr: cfg.lr,
                batch: cfg.batch,
                polyak: cfg.polyak,
                temperature: cfg.temperature_at(e),
            };
            while pending_steps >= cfg.update_every_steps {
                pending_steps -= cfg.update_every_steps;
                if buffer.len() >= cfg.batch {
                    update_round(&mut learner, &buffer, &params, &mut rng_batch, &mut rng_noise)?;
                    rounds += 1;
                }
            }
            log.push(EpisodeLog {
                episode: e as u64,
                seed: run.world_seed,
                epsilon: cfg.epsilon_at(e),
                temperature: cfg.temperature_at(e),
                outcome: run.outcome,
                steps: run.sim_steps,
                return_total: run.returns.iter().sum(),
                corrected: run.corrected,
                buffer_len: buffer.len(),
                rounds,
                wall_ms: chunk_start.elapsed().as_millis(),
            });
            if let Some(trace) = run.trace {
                traces.push(trace);
            }
            learner.episodes_trained += 1;
        }
        next += chunk.len();
    }
    Ok(TrainResult {
        learner,
        log,
        rounds,
        traces,
    })
}

/// Schema tag written as the first line of training CSV files.
pub const TRAIN_SCHEMA: &str = "#schema=train-v1";

/// Writes the training log as CSV: a schema line, a header, one row per
/// episode. `wall_ms` is deliberately the last column so comparisons can
/// strip it.
pub fn write_train_csv(path: &Path, rows: &[EpisodeLog]) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRAIN_SCHEMA);
    out.push('\n');
    out.push_str(
        "episode,seed,epsilon,temperature,outcome,steps,return_total,corrected,buffer_len,rounds,wall_ms\n",
    );
    for r in rows {
        let outcome = match r.outcome {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.episode,
            r.seed,
            r.epsilon,
            r.temperature,
            outcome,
            r.steps,
            r.return_total,
            r.corrected,
            r.buffer_len,
            r.rounds,
            r.wall_ms
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
