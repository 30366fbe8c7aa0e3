//! Per-agent networks: a decentralized actor (plain or attention-based), a
//! centralized critic over the joint observation/action, and target copies
//! of both for stable off-policy bootstrapping.

use crate::{Error, Result, Variant};
use crossway_autograd::checkpoint::Checkpoint;
use crossway_autograd::{MultiHeadAttention, ParamSet, Perceptron, Tape, Tensor, Var};
use crossway_sim::world::Observation;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Discrete meta-action count (slow down / hold / speed up).
pub const ACTION_DIM: usize = 3;
/// Width of the per-vehicle encoding and of the attention space.
pub const D_MODEL: usize = 64;
pub const N_HEADS: usize = 2;
/// Hidden width of the actor output layers.
const ACTOR_HIDDEN: usize = 64;
/// Hidden width of the centralized critic.
const CRITIC_HIDDEN: usize = 128;

/// Attention summary of one forward pass, aligned with the compacted
/// (present-only) observation rows. Row 0 is always the ego vehicle.
#[derive(Clone, Debug)]
pub struct AttnInfo {
    /// Head-averaged attention weight per compacted row; sums to 1.
    pub weights: Vec<f64>,
    /// Vehicle id of each compacted row.
    pub ids: Vec<Option<usize>>,
    /// Planar distance of each row's vehicle from the ego (0 for row 0).
    pub dists: Vec<f64>,
}

/// Drops masked observation slots, keeping the rows, vehicle ids, and
/// ego-relative distances of the vehicles actually perceived. Masked rows
/// are all-zero and attention ignores them, so removing them changes no
/// output while shrinking every matrix the actor touches.
fn compact_rows(obs: &Observation) -> (Tensor, Vec<Option<usize>>, Vec<f64>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ids = Vec::new();
    let mut dists = Vec::new();
    for (k, row) in obs.rows.iter().enumerate() {
        if !obs.mask[k] {
            continue;
        }
        dists.push(if rows.is_empty() {
            0.0
        } else {
            (row[0] * row[0] + row[1] * row[1]).sqrt()
        });
        rows.push(row.to_vec());
        ids.push(obs.ids[k]);
    }
    (Tensor::from_rows(&rows), ids, dists)
}

/// Decentralized policy network producing one logit per meta-action.
#[derive(Clone, Debug)]
pub enum Actor {
    /// Single perceptron over the flattened observation.
    Mlp(Perceptron),
    /// Per-vehicle encoder, ego-query attention over the encodings, and a
    /// decoder over the ego encoding concatenated with the context.
    Attention {
        encoder: Perceptron,
        attention: MultiHeadAttention,
        decoder: Perceptron,
    },
}

impl Actor {
    pub fn new<R: Rng>(ps: &mut ParamSet, rng: &mut R, variant: Variant, obs_slots: usize) -> Actor {
        if variant.uses_attention() {
            Actor::Attention {
                encoder: Perceptron::new(
                    ps,
                    rng,
                    "actor.enc",
                    &[Observation::FEATURES, D_MODEL, D_MODEL],
                ),
                attention: MultiHeadAttention::new(ps, rng, "actor.att", D_MODEL, N_HEADS),
                decoder: Perceptron::new(
                    ps,
                    rng,
                    "actor.dec",
                    &[2 * D_MODEL, ACTOR_HIDDEN, ACTOR_HIDDEN, ACTION_DIM],
                ),
            }
        } else {
            Actor::Mlp(Perceptron::new(
                ps,
                rng,
                "actor.mlp",
                &[
                    obs_slots * Observation::FEATURES,
                    ACTOR_HIDDEN,
                    ACTOR_HIDDEN,
                    ACTION_DIM,
                ],
            ))
        }
    }

    /// Tape-free forward pass used on every execution path. Bitwise equal to
    /// `logits_tape` on the same observation and parameters.
    pub fn logits_infer(
        &self,
        ps: &ParamSet,
        obs: &Observation,
    ) -> Result<(Vec<f64>, Option<AttnInfo>)> {
        match self {
            Actor::Mlp(net) => {
                let out = net.infer(ps, &Tensor::row(obs.flat()))?;
                Ok((out.row_slice(0).to_vec(), None))
            }
            Actor::Attention {
                encoder,
                attention,
                decoder,
            } => {
                let (rows, ids, dists) = compact_rows(obs);
                let enc = encoder.infer(ps, &rows)?;
                let mask = vec![true; enc.rows];
                let (context, _heads, combined) =
                    attention.infer(ps, enc.row_slice(0), &enc, &mask)?;
                let mut dec_in = enc.row_slice(0).to_vec();
                dec_in.extend_from_slice(&context);
                let out = decoder.infer(ps, &Tensor::row(dec_in))?;
                Ok((
                    out.row_slice(0).to_vec(),
                    Some(AttnInfo {
                        weights: combined,
                        ids,
                        dists,
                    }),
                ))
            }
        }
    }

    /// Differentiable forward pass for policy updates.
    pub fn logits_tape(&self, tape: &mut Tape, ps: &ParamSet, obs: &Observation) -> Result<Var> {
        match self {
            Actor::Mlp(net) => {
                let x = tape.leaf_row(&obs.flat());
                Ok(net.forward(tape, ps, x)?)
            }
            Actor::Attention {
                encoder,
                attention,
                decoder,
            } => {
                let (rows, _ids, _dists) = compact_rows(obs);
                let mask = vec![true; rows.rows];
                let x = tape.leaf(&rows);
                let enc = encoder.forward(tape, ps, x)?;
                let query = tape.select_row(enc, 0)?;
                let att = attention.forward(tape, ps, query, enc, &mask)?;
                let dec_in = tape.concat_cols(&[query, att.context])?;
                Ok(decoder.forward(tape, ps, dec_in)?)
            }
        }
    }
}

/// One agent's live and target networks, each in its own parameter set so
/// optimizer state and soft updates stay per-network.
#[derive(Clone, Debug)]
pub struct AgentNets {
    pub actor: Actor,
    pub critic: Perceptron,
    pub target_actor: Actor,
    pub target_critic: Perceptron,
    pub actor_ps: ParamSet,
    pub critic_ps: ParamSet,
    pub target_actor_ps: ParamSet,
    pub target_critic_ps: ParamSet,
}

impl AgentNets {
    fn new<R: Rng>(rng: &mut R, variant: Variant, n_agents: usize, obs_slots: usize) -> AgentNets {
        let critic_dims = [
            n_agents * (obs_slots * Observation::FEATURES + ACTION_DIM),
            CRITIC_HIDDEN,
            CRITIC_HIDDEN,
            1,
        ];
        let mut actor_ps = ParamSet::new();
        let actor = Actor::new(&mut actor_ps, rng, variant, obs_slots);
        let mut critic_ps = ParamSet::new();
        let critic = Perceptron::new(&mut critic_ps, rng, "critic", &critic_dims);
        let mut target_actor_ps = ParamSet::new();
        let target_actor = Actor::new(&mut target_actor_ps, rng, variant, obs_slots);
        let mut target_critic_ps = ParamSet::new();
        let target_critic = Perceptron::new(&mut target_critic_ps, rng, "critic", &critic_dims);
        // Targets start as exact copies of the live networks.
        target_actor_ps.blend_from(&actor_ps, 1.0);
        target_critic_ps.blend_from(&critic_ps, 1.0);
        AgentNets {
            actor,
            critic,
            target_actor,
            target_critic,
            actor_ps,
            critic_ps,
            target_actor_ps,
            target_critic_ps,
        }
    }

    /// Polyak-blend the target networks toward the live ones.
    pub fn soft_update(&mut self, tau: f64) {
        self.target_actor_ps.blend_from(&self.actor_ps, tau);
        self.target_critic_ps.blend_from(&self.critic_ps, tau);
    }
}

/// The full set of agents plus the dimensions they were built for.
#[derive(Clone, Debug)]
pub struct Learner {
    pub variant: Variant,
    pub n_agents: usize,
    pub obs_slots: usize,
    pub episodes_trained: u64,
    pub agents: Vec<AgentNets>,
}

impl Learner {
    pub fn new(variant: Variant, n_agents: usize, obs_slots: usize, init_seed: u64) -> Learner {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let agents = (0..n_agents)
            .map(|_| AgentNets::new(&mut rng, variant, n_agents, obs_slots))
            .collect();
        Learner {
            variant,
            n_agents,
            obs_slots,
            episodes_trained: 0,
            agents,
        }
    }

    fn param_sets(agent: &AgentNets) -> [(&'static str, &ParamSet); 4] {
        [
            ("actor", &agent.actor_ps),
            ("critic", &agent.critic_ps),
            ("target_actor", &agent.target_actor_ps),
            ("target_critic", &agent.target_critic_ps),
        ]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.meta.push(("variant".into(), self.variant.code()));
        ck.meta.push(("n_agents".into(), self.n_agents as u64));
        ck.meta.push(("obs_slots".into(), self.obs_slots as u64));
        ck.meta.push(("action_dim".into(), ACTION_DIM as u64));
        ck.meta
            .push(("episodes_trained".into(), self.episodes_trained));
        for (a, agent) in self.agents.iter().enumerate() {
            for (set, ps) in Self::param_sets(agent) {
                ck.meta
                    .push((format!("agent{a}.{set}.adam_steps"), ps.step));
                ck.tensors
                    .extend(ps.export_named(&format!("agent{a}.{set}.")));
            }
        }
        ck.save(path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Learner> {
        let ck = Checkpoint::load(path)?;
        let meta = |name: &str| -> Result<u64> {
            ck.meta_value(name)
                .ok_or_else(|| Error::CheckpointMismatch(format!("missing metadata `{name}`")))
        };
        let variant = Variant::from_code(meta("variant")?).ok_or_else(|| {
            Error::CheckpointMismatch("unrecognized policy variant tag".to_string())
        })?;
        let n_agents = meta("n_agents")? as usize;
        let obs_slots = meta("obs_slots")? as usize;
        if meta("action_dim")? as usize != ACTION_DIM {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint actions do not match the {ACTION_DIM} meta-actions of this build"
            )));
        }
        if n_agents == 0 || obs_slots == 0 {
            return Err(Error::CheckpointMismatch(
                "agent count and observation slots must be positive".to_string(),
            ));
        }
        let mut learner = Learner::new(variant, n_agents, obs_slots, 0);
        learner.episodes_trained = meta("episodes_trained")?;
        for (a, agent) in learner.agents.iter_mut().enumerate() {
            let sets: [(&str, &mut ParamSet); 4] = [
                ("actor", &mut agent.actor_ps),
                ("critic", &mut agent.critic_ps),
                ("target_actor", &mut agent.target_actor_ps),
                ("target_critic", &mut agent.target_critic_ps),
            ];
            for (set, ps) in sets {
                ps.import_named(&format!("agent{a}.{set}."), &|name| {
                    ck.tensor(name).cloned()
                })
                .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
                ps.step = ck
                    .meta_value(&format!("agent{a}.{set}.adam_steps"))
                    .unwrap_or(0);
            }
        }
        Ok(learner)
    }
}
