//! Gradient updates: a temporal-difference step for each centralized critic
//! and a policy-gradient step for each actor through a straight-through
//! relaxed sample of its own action, followed by soft target blending.

use crate::buffer::{ReplayBuffer, Transition};
use crate::nets::{AgentNets, Learner, ACTION_DIM};
use crate::Result;
use crossway_autograd::gumbel::{gumbel_noise, gumbel_softmax, softmax_tempered};
use crossway_autograd::{Tape, Tensor, Var};
use crossway_sim::world::Observation;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct UpdateParams {
    /// Discount factor for the bootstrapped target.
    pub gamma: f64,
    /// Adam learning rate for both critics and actors.
    pub lr: f64,
    /// Minibatch size, sampled independently per agent.
    pub batch: usize,
    /// Soft target blend factor.
    pub polyak: f64,
    /// Relaxation temperature for target actions and actor samples.
    pub temperature: f64,
}

/// Losses from one update round, per agent.
#[derive(Clone, Debug)]
pub struct RoundStats {
    pub critic_loss: Vec<f64>,
    pub actor_loss: Vec<f64>,
}

fn one_hot(index: usize) -> [f64; ACTION_DIM] {
    let mut row = [0.0; ACTION_DIM];
    row[index] = 1.0;
    row
}

/// Mean-squared TD update of one agent's critic on the given minibatch.
/// Targets come from every agent's target actor (tempered softmax of its
/// logits on the next observation, no noise) fed into the agent's target
/// critic. Returns the loss before the step.
pub fn critic_update(
    learner: &mut Learner,
    agent: usize,
    buffer: &ReplayBuffer,
    idx: &[usize],
    p: &UpdateParams,
) -> Result<f64> {
    let n = learner.n_agents;
    let obs_dim = learner.obs_slots * Observation::FEATURES;
    let in_dim = n * (obs_dim + ACTION_DIM);
    let rows = idx.len();
    let mut xs = Tensor::zeros(rows, in_dim);
    let mut ys = Tensor::zeros(rows, 1);
    for (row, &i) in idx.iter().enumerate() {
        let t = buffer.get(i);
        let mut x = Vec::with_capacity(in_dim);
        for j in 0..n {
            x.extend(t.obs[j].flat());
        }
        for j in 0..n {
            x.extend_from_slice(&one_hot(t.actions[j]));
        }
        xs.data[row * in_dim..(row + 1) * in_dim].copy_from_slice(&x);

        let y = if t.done[agent] {
            t.rewards[agent]
        } else {
            let mut next = Vec::with_capacity(in_dim);
            for j in 0..n {
                next.extend(t.next_obs[j].flat());
            }
            for j in 0..n {
                let nets = &learner.agents[j];
                let (logits, _) = nets
                    .target_actor
                    .logits_infer(&nets.target_actor_ps, &t.next_obs[j])?;
                next.extend(softmax_tempered(&logits, p.temperature));
            }
            let me = &learner.agents[agent];
            let q_next = me
                .target_critic
                .infer(&me.target_critic_ps, &Tensor::row(next))?
                .get(0, 0);
            t.rewards[agent] + p.gamma * q_next
        };
        ys.set(row, 0, y);
    }

    let a = &mut learner.agents[agent];
    let mut tape = Tape::new();
    let x = tape.leaf(&xs);
    let pred = a.critic.forward(&mut tape, &a.critic_ps, x)?;
    let target = tape.leaf(&ys);
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    let loss = tape.mean_all(sq);
    tape.backward(loss)?;
    let grads = tape.param_grads(&a.critic_ps)?;
    let loss_value = tape.value(loss)[0];
    a.critic_ps.adam_step(&grads, p.lr)?;
    Ok(loss_value)
}

/// Builds the actor objective for one agent over a minibatch: the negated
/// batch-mean critic value of the joint stored observations and actions,
/// with the agent's own action replaced by a relaxed sample of its current
/// policy (straight-through hard sample when `use_hard`, the plain soft
/// sample otherwise, which keeps the objective differentiable end to end
/// for finite-difference verification). One Gumbel noise row per sample.
pub fn actor_objective_graph(
    nets: &AgentNets,
    n_agents: usize,
    agent: usize,
    batch: &[&Transition],
    noises: &[Vec<f64>],
    temperature: f64,
    use_hard: bool,
) -> Result<(Tape, Var)> {
    assert_eq!(batch.len(), noises.len(), "one noise row per sample");
    let mut tape = Tape::new();
    let mut rows = Vec::with_capacity(batch.len());
    for (t, noise) in batch.iter().zip(noises) {
        let mut obs_flat = Vec::new();
        for j in 0..n_agents {
            obs_flat.extend(t.obs[j].flat());
        }
        let obs_leaf = tape.leaf_row(&obs_flat);
        let logits = nets.actor.logits_tape(&mut tape, &nets.actor_ps, &t.obs[agent])?;
        let sample = gumbel_softmax(&mut tape, logits, noise, temperature)?;
        let own = if use_hard { sample.hard } else { sample.soft };
        let mut parts = Vec::with_capacity(1 + n_agents);
        parts.push(obs_leaf);
        for j in 0..n_agents {
            if j == agent {
                parts.push(own);
            } else {
                parts.push(tape.leaf_row(&one_hot(t.actions[j])));
            }
        }
        rows.push(tape.concat_cols(&parts)?);
    }
    let joint = tape.stack_rows(&rows)?;
    let q = nets.critic.forward(&mut tape, &nets.critic_ps, joint)?;
    let mean_q = tape.mean_all(q);
    let loss = tape.affine(mean_q, -1.0, 0.0);
    Ok((tape, loss))
}

/// One policy-gradient step for an agent's actor; the critic participates
/// in the graph but only actor parameters are stepped. Returns the loss
/// (negated mean critic value) before the step.
pub fn actor_update(
    learner: &mut Learner,
    agent: usize,
    buffer: &ReplayBuffer,
    idx: &[usize],
    p: &UpdateParams,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let batch: Vec<&Transition> = idx.iter().map(|&i| buffer.get(i)).collect();
    let noises: Vec<Vec<f64>> = batch
        .iter()
        .map(|_| gumbel_noise(rng, ACTION_DIM))
        .collect();
    let n = learner.n_agents;
    let a = &mut learner.agents[agent];
    let (mut tape, loss) =
        actor_objective_graph(a, n, agent, &batch, &noises, p.temperature, true)?;
    tape.backward(loss)?;
    let grads = tape.param_grads(&a.actor_ps)?;
    let loss_value = tape.value(loss)[0];
    a.actor_ps.adam_step(&grads, p.lr)?;
    Ok(loss_value)
}

/// One full update round: per agent, sample a minibatch and apply the
/// critic then the actor step; afterwards blend every target network.
pub fn update_round(
    learner: &mut Learner,
    buffer: &ReplayBuffer,
    p: &UpdateParams,
    rng_batch: &mut ChaCha8Rng,
    rng_noise: &mut ChaCha8Rng,
) -> Result<RoundStats> {
    let n = learner.n_agents;
    let mut stats = RoundStats {
        critic_loss: Vec::with_capacity(n),
        actor_loss: Vec::with_capacity(n),
    };
    for agent in 0..n {
        let idx = buffer.sample_indices(rng_batch, p.batch)?;
        stats
            .critic_loss
            .push(critic_update(learner, agent, buffer, &idx, p)?);
        stats
            .actor_loss
            .push(actor_update(learner, agent, buffer, &idx, p, rng_noise)?);
    }
    for a in &mut learner.agents {
        a.soft_update(p.polyak);
    }
    Ok(stats)
}
