//! One full episode under a fixed policy snapshot: per decision window the
//! actors propose actions (greedy or exploratory), the optional inspection
//! stage may correct them, and the executed joint action drives the
//! simulator. Everything consumed here is derived from the arguments, so a
//! rollout is a pure function of (policy parameters, options, explore rng).

use crate::buffer::Transition;
use crate::inspector::{inspect_and_correct, InspectorConfig};
use crate::nets::{AttnInfo, Learner};
use crate::prior::{build_interaction_graph, PriorConfig};
use crate::Result;
use crossway_autograd::gumbel::{argmax, gumbel_noise};
use crossway_sim::trace::{DecisionRecord, EpisodeTrace, Outcome, TraceBuilder};
use crossway_sim::world::{AgentStatus, MetaAction, World};
use crossway_sim::{RoadNetwork, ScenarioConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct RolloutOptions {
    pub scenario: ScenarioConfig,
    pub network: Arc<RoadNetwork>,
    pub episode: u64,
    /// Seed that spawns the episode's world.
    pub world_seed: u64,
    /// Run the interaction-priority inspection stage on proposed actions.
    pub inspector: bool,
    /// Record a full trace (per-substep vehicle states plus decisions).
    pub record_trace: bool,
}

/// Everything one episode produced.
#[derive(Clone, Debug)]
pub struct EpisodeRun {
    pub episode: u64,
    pub world_seed: u64,
    pub transitions: Vec<Transition>,
    pub trace: Option<EpisodeTrace>,
    pub outcome: Outcome,
    /// Physics steps simulated.
    pub sim_steps: usize,
    /// Per-agent return.
    pub returns: Vec<f64>,
    /// Decisions where the inspector replaced the proposed action.
    pub corrected: usize,
}

/// Gumbel-max draw over the logits, mixed with an epsilon-uniform action.
fn sample_exploratory(logits: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> MetaAction {
    let noise = gumbel_noise(rng, logits.len());
    let perturbed: Vec<f64> = logits.iter().zip(&noise).map(|(l, g)| l + g).collect();
    let mut choice = argmax(&perturbed);
    let u: f64 = rng.gen();
    if u < epsilon {
        choice = rng.gen_range(0..logits.len());
    }
    MetaAction::from_index(choice)
}

/// Runs one episode. `explore` switches action selection from greedy argmax
/// to Gumbel-max sampling with epsilon-uniform mixing.
pub fn rollout_episode(
    learner: &Learner,
    opts: &RolloutOptions,
    mut explore: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<EpisodeRun> {
    let n = learner.n_agents;
    assert_eq!(
        opts.scenario.cav_count, n,
        "scenario agent count must match the policy"
    );
    let mut world = World::with_network(opts.scenario.clone(), opts.network.clone(), opts.world_seed)?;
    let mut builder = opts
        .record_trace
        .then(|| TraceBuilder::new(opts.episode, opts.world_seed, learner.variant.name(), &mut world));
    let agent_vehicles: Vec<usize> = (0..n).map(|a| world.agent_vehicle(a).id).collect();
    let prior_cfg = PriorConfig::default();
    let inspector_cfg = InspectorConfig::default();

    let mut obs = world.observe_all();
    let mut transitions = Vec::new();
    let mut returns = vec![0.0; n];
    let mut corrected = 0usize;

    while !world.done() {
        let running: Vec<bool> = (0..n)
            .map(|a| world.agent_status(a) == AgentStatus::Running)
            .collect();
        let mut proposed = vec![MetaAction::Idle; n];
        let mut attn: Vec<Option<AttnInfo>> = (0..n).map(|_| None).collect();
        for a in 0..n {
            if !running[a] {
                continue;
            }
            let nets = &learner.agents[a];
            let (logits, info) = nets.actor.logits_infer(&nets.actor_ps, &obs[a])?;
            attn[a] = info;
            proposed[a] = match &mut explore {
                Some((epsilon, rng)) => sample_exploratory(&logits, *epsilon, rng),
                None => MetaAction::from_index(argmax(&logits)),
            };
        }

        let (executed, ranks) = if opts.inspector {
            let graph = build_interaction_graph(&attn, &agent_vehicles, &prior_cfg);
            let report = inspect_and_correct(&world, &proposed, &graph.order, &inspector_cfg);
            (report.executed, Some(graph.rank))
        } else {
            (proposed.clone(), None)
        };
        for a in 0..n {
            if running[a] && executed[a] != proposed[a] {
                corrected += 1;
            }
        }
        let decisions: Vec<DecisionRecord> = (0..n)
            .filter(|&a| running[a])
            .map(|a| DecisionRecord {
                agent: a,
                proposed: proposed[a],
                executed: executed[a],
                attention: attn[a].as_ref().map(|i| i.weights.clone()),
                rank: ranks.as_ref().map(|r| r[a]),
            })
            .collect();

        let out = world.step(&executed);
        let next_obs = world.observe_all();
        for (total, r) in returns.iter_mut().zip(&out.rewards) {
            *total += r;
        }
        transitions.push(Transition {
            obs: obs.clone(),
            actions: executed.iter().map(|m| m.index()).collect(),
            rewards: out.rewards.clone(),
            next_obs: next_obs.clone(),
            done: out
                .agent_status
                .iter()
                .map(|s| *s != AgentStatus::Running)
                .collect(),
        });
        if let Some(b) = builder.as_mut() {
            b.record_step(&mut world, decisions, &out.rewards);
        }
        obs = next_obs;
    }

    let outcome = Outcome::from_statuses(&world.all_agent_status());
    let trace = builder.map(|b| b.finish(&world));
    Ok(EpisodeRun {
        episode: opts.episode,
        world_seed: opts.world_seed,
        transitions,
        trace,
        outcome,
        sim_steps: world.step_count,
        returns,
        corrected,
    })
}
