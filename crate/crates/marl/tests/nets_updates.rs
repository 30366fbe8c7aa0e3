//! Network wiring, checkpointing, replay buffer, and the learning updates:
//! gradient checks against finite differences and convergence sanity runs.

use crossway_autograd::checkpoint::Checkpoint;
use crossway_autograd::{gumbel_noise, Tensor};
use crossway_marl::buffer::{ReplayBuffer, Transition};
use crossway_marl::nets::{Learner, ACTION_DIM};
use crossway_marl::updates::{
    actor_objective_graph, actor_update, critic_update, update_round, UpdateParams,
};
use crossway_marl::{Error, Variant};
use crossway_sim::Observation;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rand_obs(rng: &mut ChaCha8Rng, slots: usize, ego: usize) -> Observation {
    let mut rows = Vec::with_capacity(slots);
    let mut mask = Vec::with_capacity(slots);
    let mut ids = Vec::with_capacity(slots);
    for k in 0..slots {
        let present = k == 0 || rng.gen_bool(0.7);
        if present {
            let mut row = [0.0; 6];
            for x in &mut row {
                *x = rng.gen_range(-8.0..8.0);
            }
            rows.push(row);
            mask.push(true);
            ids.push(Some(if k == 0 { ego } else { 100 + k }));
        } else {
            rows.push([0.0; 6]);
            mask.push(false);
            ids.push(None);
        }
    }
    Observation { rows, mask, ids }
}

fn rand_transition(rng: &mut ChaCha8Rng, n: usize, slots: usize) -> Transition {
    Transition {
        obs: (0..n).map(|a| rand_obs(rng, slots, a)).collect(),
        actions: (0..n).map(|_| rng.gen_range(0..ACTION_DIM)).collect(),
        rewards: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        next_obs: (0..n).map(|a| rand_obs(rng, slots, a)).collect(),
        done: (0..n).map(|_| rng.gen_bool(0.1)).collect(),
    }
}

fn filled_buffer(rng: &mut ChaCha8Rng, n: usize, slots: usize, count: usize) -> ReplayBuffer {
    let mut buffer = ReplayBuffer::new(count.max(64));
    for _ in 0..count {
        buffer.push(rand_transition(rng, n, slots));
    }
    buffer
}

// ------------------------------------------------------------- wiring --

#[test]
fn tape_and_inference_actor_paths_agree_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for variant in Variant::ALL {
        let learner = Learner::new(variant, 2, 8, 5);
        for agent in 0..2 {
            let nets = &learner.agents[agent];
            for _ in 0..5 {
                let obs = rand_obs(&mut rng, 8, agent);
                let (logits, info) = nets.actor.logits_infer(&nets.actor_ps, &obs).unwrap();
                assert_eq!(info.is_some(), variant.uses_attention());
                let mut tape = crossway_autograd::Tape::new();
                let var = nets
                    .actor
                    .logits_tape(&mut tape, &nets.actor_ps, &obs)
                    .unwrap();
                let taped = tape.value(var);
                assert_eq!(taped.len(), ACTION_DIM);
                for (a, b) in logits.iter().zip(taped) {
                    assert_eq!(a.to_bits(), b.to_bits(), "{variant} paths diverge");
                }
            }
        }
    }
}

#[test]
fn attention_weights_cover_present_rows_and_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let learner = Learner::new(Variant::MaGaDdpg, 2, 8, 5);
    let nets = &learner.agents[0];
    let obs = rand_obs(&mut rng, 8, 0);
    let present = obs.mask.iter().filter(|&&m| m).count();
    let (_, info) = nets.actor.logits_infer(&nets.actor_ps, &obs).unwrap();
    let info = info.unwrap();
    assert_eq!(info.weights.len(), present);
    assert_eq!(info.ids.len(), present);
    assert!((info.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(info.ids[0], Some(0));
    assert_eq!(info.dists[0], 0.0);
    for (k, id) in info.ids.iter().enumerate().skip(1) {
        assert!(id.is_some());
        assert!(info.dists[k] > 0.0);
    }
}

#[test]
fn target_networks_start_as_exact_copies() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for variant in [Variant::Maddpg, Variant::MaGaDdpg] {
        let learner = Learner::new(variant, 2, 8, 123);
        let nets = &learner.agents[1];
        let obs = rand_obs(&mut rng, 8, 1);
        let (live, _) = nets.actor.logits_infer(&nets.actor_ps, &obs).unwrap();
        let (tgt, _) = nets
            .target_actor
            .logits_infer(&nets.target_actor_ps, &obs)
            .unwrap();
        assert_eq!(live, tgt);

        let x = Tensor::row((0..102).map(|i| (i as f64).sin()).collect());
        let live_q = nets.critic.infer(&nets.critic_ps, &x).unwrap();
        let tgt_q = nets.target_critic.infer(&nets.target_critic_ps, &x).unwrap();
        assert_eq!(live_q.data, tgt_q.data);
    }
}

#[test]
fn soft_update_is_the_expected_convex_blend() {
    let mut learner = Learner::new(Variant::Maddpg, 1, 4, 3);
    let tau = 0.01;
    let before: Vec<(String, Tensor)> = learner.agents[0].target_actor_ps.export_named("");
    let live: Vec<(String, Tensor)> = learner.agents[0].actor_ps.export_named("");
    // Make live differ from target first.
    {
        let ps = &mut learner.agents[0].actor_ps;
        let id = ps.find("actor.mlp.w0").unwrap();
        ps.tensor_mut(id).data[0] += 1.0;
    }
    let live_after: Vec<(String, Tensor)> = learner.agents[0].actor_ps.export_named("");
    learner.agents[0].soft_update(tau);
    let after = learner.agents[0].target_actor_ps.export_named("");
    let mut checked = 0;
    for (((name, t0), (_, t1)), (_, l)) in before.iter().zip(&after).zip(&live_after) {
        if name.ends_with("#m") || name.ends_with("#v") {
            continue;
        }
        for ((d0, d1), x) in t0.data.iter().zip(&t1.data).zip(&l.data) {
            let expect = tau * x + (1.0 - tau) * d0;
            assert_eq!(d1.to_bits(), expect.to_bits(), "{name}");
            checked += 1;
        }
    }
    assert!(checked > 100);
    drop(live);
}

// ------------------------------------------------------- checkpointing --

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("learner.ckpt");
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(401);

    let mut learner = Learner::new(Variant::MaGaDdpg, 2, 8, 17);
    learner.episodes_trained = 42;
    // Give the optimizer state something non-trivial to preserve.
    let buffer = filled_buffer(&mut rng, 2, 8, 48);
    let p = UpdateParams {
        gamma: 0.95,
        lr: 0.01,
        batch: 16,
        polyak: 0.01,
        temperature: 0.8,
    };
    update_round(&mut learner, &buffer, &p, &mut rng, &mut noise_rng).unwrap();
    learner.save(&path).unwrap();

    let loaded = Learner::load(&path).unwrap();
    assert_eq!(loaded.variant, Variant::MaGaDdpg);
    assert_eq!(loaded.n_agents, 2);
    assert_eq!(loaded.obs_slots, 8);
    assert_eq!(loaded.episodes_trained, 42);
    for (a, (orig, got)) in learner.agents.iter().zip(&loaded.agents).enumerate() {
        let pairs = [
            (&orig.actor_ps, &got.actor_ps),
            (&orig.critic_ps, &got.critic_ps),
            (&orig.target_actor_ps, &got.target_actor_ps),
            (&orig.target_critic_ps, &got.target_critic_ps),
        ];
        for (x, y) in pairs {
            assert_eq!(x.step, y.step, "agent {a} optimizer step");
            let xs = x.export_named("");
            let ys = y.export_named("");
            assert_eq!(xs.len(), ys.len());
            for ((xn, xt), (yn, yt)) in xs.iter().zip(&ys) {
                assert_eq!(xn, yn);
                let same = xt
                    .data
                    .iter()
                    .zip(&yt.data)
                    .all(|(u, v)| u.to_bits() == v.to_bits());
                assert!(same, "agent {a} tensor {xn} changed across save/load");
            }
        }
    }

    // Saving the reloaded learner reproduces the file byte-for-byte.
    let path2 = dir.path().join("learner2.ckpt");
    loaded.save(&path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

#[test]
fn checkpoint_load_rejects_tampered_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ok.ckpt");
    let learner = Learner::new(Variant::AttentionMaddpg, 2, 8, 1);
    learner.save(&path).unwrap();

    // Missing tensors.
    let mut ck = Checkpoint::load(&path).unwrap();
    ck.tensors.truncate(ck.tensors.len() / 2);
    let bad = dir.path().join("truncated.ckpt");
    ck.save(&bad).unwrap();
    let err = Learner::load(&bad).unwrap_err();
    assert!(err.is_checkpoint_error(), "unexpected error: {err}");

    // Wrong action dimensionality.
    let mut ck = Checkpoint::load(&path).unwrap();
    for (k, v) in &mut ck.meta {
        if k == "action_dim" {
            *v = 4;
        }
    }
    let bad = dir.path().join("claims4actions.ckpt");
    ck.save(&bad).unwrap();
    let err = Learner::load(&bad).unwrap_err();
    assert!(err.is_checkpoint_error(), "unexpected error: {err}");

    // Not a checkpoint at all.
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert!(Learner::load(&junk).unwrap_err().is_checkpoint_error());
}

// --------------------------------------------------------- replay ring --

#[test]
fn replay_buffer_overwrites_oldest_and_reports_underflow() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut buffer = ReplayBuffer::new(4);
    for i in 0..6 {
        let mut t = rand_transition(&mut rng, 1, 4);
        t.rewards = vec![i as f64];
        buffer.push(t);
    }
    assert_eq!(buffer.len(), 4);
    let mut held: Vec<f64> = (0..4).map(|i| buffer.get(i).rewards[0]).collect();
    held.sort_by(f64::total_cmp);
    assert_eq!(held, vec![2.0, 3.0, 4.0, 5.0]);

    match buffer.sample_indices(&mut rng, 5) {
        Err(Error::BufferUnderflow { have: 4, need: 5 }) => {}
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn replay_sampling_is_roughly_uniform_with_replacement() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut buffer = ReplayBuffer::new(10);
    for _ in 0..10 {
        buffer.push(rand_transition(&mut rng, 1, 4));
    }
    let mut counts = [0usize; 10];
    let draws = 6000;
    for _ in 0..draws {
        for i in buffer.sample_indices(&mut rng, 10).unwrap() {
            counts[i] += 1;
        }
    }
    let total = draws * 10;
    for (i, &c) in counts.iter().enumerate() {
        let freq = c as f64 / total as f64;
        assert!(
            (freq - 0.1).abs() < 0.01,
            "index {i} drawn with frequency {freq}"
        );
    }
}

// ------------------------------------------------------------ learning --

#[test]
fn actor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut learner = Learner::new(Variant::MaGaDdpg, 2, 4, 11);
    let transitions: Vec<Transition> = (0..3).map(|_| rand_transition(&mut rng, 2, 4)).collect();
    let batch: Vec<&Transition> = transitions.iter().collect();
    let noises: Vec<Vec<f64>> = (0..3).map(|_| gumbel_noise(&mut rng, ACTION_DIM)).collect();

    let agent = 0;
    let (mut tape, loss) = actor_objective_graph(
        &learner.agents[agent],
        2,
        agent,
        &batch,
        &noises,
        0.9,
        false,
    )
    .unwrap();
    tape.backward(loss).unwrap();
    let grads = tape.param_grads(&learner.agents[agent].actor_ps).unwrap();

    let loss_at = |l: &Learner| -> f64 {
        let (tape, var) =
            actor_objective_graph(&l.agents[agent], 2, agent, &batch, &noises, 0.9, false)
                .unwrap();
        tape.value(var)[0]
    };

    let h = 1e-5;
    let mut checked = 0;
    for name in ["actor.enc.w0", "actor.att.wq0", "actor.att.wv1", "actor.dec.w1", "actor.dec.b0"] {
        let id = learner.agents[agent].actor_ps.find(name).unwrap();
        let len = learner.agents[agent].actor_ps.tensor(id).numel();
        let analytic = grads.get(id).expect("missing gradient").to_vec();
        for k in [0, len / 2, len - 1] {
            let original = learner.agents[agent].actor_ps.tensor(id).data[k];
            learner.agents[agent].actor_ps.tensor_mut(id).data[k] = original + h;
            let up = loss_at(&learner);
            learner.agents[agent].actor_ps.tensor_mut(id).data[k] = original - h;
            let down = loss_at(&learner);
            learner.agents[agent].actor_ps.tensor_mut(id).data[k] = original;
            let fd = (up - down) / (2.0 * h);
            let scale = 1.0f64.max(analytic[k].abs()).max(fd.abs());
            assert!(
                (fd - analytic[k]).abs() / scale < 1e-5,
                "{name}[{k}]: analytic {} vs finite-difference {fd}",
                analytic[k]
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 15);
}

#[test]
fn critic_fits_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut learner = Learner::new(Variant::Maddpg, 2, 6, 21);
    let buffer = filled_buffer(&mut rng, 2, 6, 40);
    let idx: Vec<usize> = (0..32).collect();
    let p = UpdateParams {
        gamma: 0.95,
        lr: 0.01,
        batch: 32,
        polyak: 0.01,
        temperature: 1.0,
    };
    let first = critic_update(&mut learner, 0, &buffer, &idx, &p).unwrap();
    let mut last = first;
    for _ in 0..59 {
        last = critic_update(&mut learner, 0, &buffer, &idx, &p).unwrap();
    }
    assert!(first.is_finite() && last.is_finite());
    assert!(
        last < 0.5 * first,
        "regression loss failed to drop: {first} -> {last}"
    );
}

#[test]
fn actor_climbs_toward_the_action_a_fixed_critic_prefers() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut learner = Learner::new(Variant::Maddpg, 1, 8, 33);
    let obs_dim = 8 * Observation::FEATURES;

    // Rebuild the critic by hand: Q(obs, action) = one-hot weight of the
    // speed-up action, so the best policy is to always pick it.
    {
        let ps = &mut learner.agents[0].critic_ps;
        let ids: Vec<_> = ps.ids().collect();
        for id in ids {
            ps.tensor_mut(id).data.fill(0.0);
        }
        let w0 = ps.find("critic.w0").unwrap();
        ps.tensor_mut(w0).set(obs_dim + 2, 0, 1.0);
        let w1 = ps.find("critic.w1").unwrap();
        ps.tensor_mut(w1).set(0, 0, 1.0);
        let w2 = ps.find("critic.w2").unwrap();
        ps.tensor_mut(w2).set(0, 0, 1.0);
    }

    let mut buffer = ReplayBuffer::new(8);
    for _ in 0..4 {
        buffer.push(rand_transition(&mut rng, 1, 8));
    }
    let idx = [0usize, 1, 2, 3];
    let p = UpdateParams {
        gamma: 0.95,
        lr: 0.01,
        batch: 4,
        polyak: 0.01,
        temperature: 1.0,
    };
    let first = actor_update(&mut learner, 0, &buffer, &idx, &p, &mut rng).unwrap();
    let mut last = first;
    for _ in 0..299 {
        last = actor_update(&mut learner, 0, &buffer, &idx, &p, &mut rng).unwrap();
    }
    assert!(last < first, "objective did not improve: {first} -> {last}");
    let nets = &learner.agents[0];
    for i in 0..4 {
        let (logits, _) = nets
            .actor
            .logits_infer(&nets.actor_ps, &buffer.get(i).obs[0])
            .unwrap();
        let best = crossway_autograd::gumbel::argmax(&logits);
        assert_eq!(best, 2, "greedy action on sample {i}: logits {logits:?}");
    }
}

#[test]
fn update_round_touches_every_agent_and_moves_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(501);
    let mut learner = Learner::new(Variant::AttentionMaddpg, 3, 6, 2);
    let buffer = filled_buffer(&mut rng, 3, 6, 50);
    let before = learner.agents[0].target_actor_ps.export_named("");
    let p = UpdateParams {
        gamma: 0.95,
        lr: 0.01,
        batch: 16,
        polyak: 0.01,
        temperature: 1.0,
    };
    let stats = update_round(&mut learner, &buffer, &p, &mut rng, &mut noise_rng).unwrap();
    assert_eq!(stats.critic_loss.len(), 3);
    assert_eq!(stats.actor_loss.len(), 3);
    assert!(stats.critic_loss.iter().all(|l| l.is_finite()));
    let after = learner.agents[0].target_actor_ps.export_named("");
    let moved = before
        .iter()
        .zip(&after)
        .filter(|((n, _), _)| !n.contains('#'))
        .any(|((_, t0), (_, t1))| t0.data != t1.data);
    assert!(moved, "target networks did not blend toward the live ones");
}
