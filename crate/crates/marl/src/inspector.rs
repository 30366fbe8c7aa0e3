//! Action inspection by short trajectory rollouts. Every vehicle gets a
//! predicted path over the next few decision points: automated vehicles by
//! replaying their own speed/steering controllers and kinematics under a
//! candidate action, human drivers by integrating car-following acceleration
//! along their route against their current leader extrapolated at constant
//! speed. A conflict is a predicted center-to-center pass closer than the
//! conflict radius; agents are processed in priority order, and an agent
//! whose proposed action predicts conflicts is switched to the candidate
//! that removes the most of them.

use crossway_sim::behavior::{idm_acceleration, DrivingStyle};
use crossway_sim::dynamics::{
    accel_to_speed, bicycle_step, steer_to_lane, Command, LaneFrame, DT, VEHICLE_LENGTH,
};
use crossway_sim::geom::Vec2;
use crossway_sim::world::{
    AgentStatus, MetaAction, VehicleKind, VehicleStatus, World,
};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug)]
pub struct InspectorConfig {
    /// Number of future decision points to examine.
    pub horizon: usize,
    /// Physics steps between consecutive points.
    pub steps_per_point: usize,
    /// Center-to-center distance below which two predicted positions count
    /// as a conflict.
    pub conflict_radius: f64,
}

impl Default for InspectorConfig {
    fn default() -> Self {
        InspectorConfig {
            horizon: 5,
            steps_per_point: 10,
            conflict_radius: 4.0,
        }
    }
}

/// What the inspector decided for one agent.
#[derive(Clone, Copy, Debug)]
pub struct AgentCheck {
    pub agent: usize,
    /// Position in the processing order (0 = inspected first).
    pub rank: usize,
    pub proposed: MetaAction,
    pub chosen: MetaAction,
    /// Predicted conflict count under the proposed action.
    pub conflict_before: f64,
    /// Predicted conflict count under the chosen action.
    pub conflict_after: f64,
    /// Conflict reduction per candidate action, indexed by action; all zero
    /// when the proposed action was already conflict-free.
    pub enhancement: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct InspectionReport {
    /// Per inspected agent, in processing order.
    pub checks: Vec<AgentCheck>,
    /// Final action per agent (proposed actions pass through unchanged for
    /// agents that were clean or not inspected).
    pub executed: Vec<MetaAction>,
}

/// Predicted positions of an automated vehicle at the next `horizon`
/// decision points when `action` is applied to its commanded speed now and
/// held. Replays the vehicle's own speed and lane-keeping controllers and
/// kinematic model along its route; terminal vehicles stay where they are.
pub fn rollout_cav(
    world: &World,
    vehicle_id: usize,
    action: MetaAction,
    cfg: &InspectorConfig,
) -> Vec<Vec2> {
    let v = &world.vehicles[vehicle_id];
    if v.status != VehicleStatus::Active {
        return vec![v.state.pos; cfg.horizon];
    }
    let delta = match action {
        MetaAction::Slower => -world.config.speed_increment,
        MetaAction::Idle => 0.0,
        MetaAction::Faster => world.config.speed_increment,
    };
    let target = (v.target_speed + delta).clamp(0.0, world.config.speed_max);
    let line = &world.network.routes[v.route].line;
    let mut state = v.state;
    let mut s = v.s;
    let mut out = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        for _ in 0..cfg.steps_per_point {
            let (s_proj, lateral) = line.project_window(state.pos, s - 5.0, s + 5.0);
            let lane = LaneFrame {
                lateral,
                heading: line.heading_at(s_proj),
            };
            let steer = steer_to_lane(&state, &lane, &world.gains, &world.limits);
            let accel = accel_to_speed(&state, target, &world.gains, &world.limits);
            state = bicycle_step(&state, &Command { accel, steer }, DT);
            s = line.project_window(state.pos, s - 3.0, s + 6.0).0;
        }
        out.push(state.pos);
    }
    out
}

/// Predicted positions of a human-driven vehicle at the next `horizon`
/// decision points: one-dimensional integration along its route, with
/// car-following acceleration against its current leader extrapolated at
/// constant speed (free-road acceleration when it has no leader).
pub fn predict_hv(world: &World, vehicle_id: usize, cfg: &InspectorConfig) -> Vec<Vec2> {
    let v = &world.vehicles[vehicle_id];
    if v.status != VehicleStatus::Active {
        return vec![v.state.pos; cfg.horizon];
    }
    let params = match v.kind {
        VehicleKind::Human { style } => style.idm(),
        VehicleKind::Automated { .. } => DrivingStyle::Normal.idm(),
    };
    let line = &world.network.routes[v.route].line;
    // Current leader: the nearest vehicle ahead on this route's centerline.
    let mut leader: Option<(f64, f64)> = None;
    for other in &world.vehicles {
        if other.id == vehicle_id || other.status != VehicleStatus::Active {
            continue;
        }
        let (s_other, lateral) = line.project_window(other.state.pos, v.s - 5.0, v.s + 60.0);
        if lateral.abs() > 2.0 || s_other - v.s <= 0.5 {
            continue;
        }
        let tangent = Vec2::from_angle(line.heading_at(s_other));
        let along = other.state.velocity().dot(tangent);
        if leader.is_none_or(|(s_lead, _)| s_other < s_lead) {
            leader = Some((s_other, along));
        }
    }
    let mut s = v.s;
    let mut speed = v.state.speed;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        for _ in 0..cfg.steps_per_point {
            let (gap, closing) = match leader {
                Some((s0, v_lead)) => ((s0 + v_lead * t) - s - VEHICLE_LENGTH, speed - v_lead),
                None => (f64::INFINITY, 0.0),
            };
            let accel = idm_acceleration(&params, speed, gap, closing);
            speed = (speed + accel * DT).max(0.0);
            s += speed * DT;
            t += DT;
        }
        out.push(line.pos_at(s));
    }
    out
}

/// Number of (time point, vehicle) pairs where the subject's predicted
/// position passes within `radius` of another vehicle's predicted position.
pub fn conflict_index(subject: &[Vec2], others: &[&[Vec2]], radius: f64) -> f64 {
    let mut count = 0usize;
    for path in others {
        for (a, b) in subject.iter().zip(path.iter()) {
            if a.dist(*b) < radius {
                count += 1;
            }
        }
    }
    count as f64
}

/// Largest distance covered between consecutive predicted points (starting
/// from the current position); used to prefer the gentler candidate when
/// two candidates remove the same number of conflicts.
fn max_step_displacement(start: Vec2, path: &[Vec2]) -> f64 {
    let mut prev = start;
    let mut largest = 0.0f64;
    for p in path {
        largest = largest.max(prev.dist(*p));
        prev = *p;
    }
    largest
}

/// Screens the proposed joint action. Agents are visited in `order`; each
/// running agent's action keeps its proposal when it predicts no conflicts,
/// and otherwise switches to the candidate with the largest conflict
/// reduction (ties prefer the proposal, then the smaller maximum step
/// displacement, then the lower action index). Earlier agents' decisions are
/// already baked into the predicted paths that later agents are checked
/// against.
pub fn inspect_and_correct(
    world: &World,
    proposed: &[MetaAction],
    order: &[usize],
    cfg: &InspectorConfig,
) -> InspectionReport {
    let mut executed = proposed.to_vec();
    let mut paths: HashMap<usize, Vec<Vec2>> = HashMap::new();
    for v in &world.vehicles {
        if v.status == VehicleStatus::Arrived {
            continue;
        }
        let path = match v.kind {
            VehicleKind::Automated { agent } => rollout_cav(world, v.id, executed[agent], cfg),
            VehicleKind::Human { .. } => predict_hv(world, v.id, cfg),
        };
        paths.insert(v.id, path);
    }

    let mut checks = Vec::new();
    for (rank, &agent) in order.iter().enumerate() {
        if world.agent_status(agent) != AgentStatus::Running {
            continue;
        }
        let vehicle = world.agent_vehicle(agent);
        let vid = vehicle.id;
        let start = vehicle.state.pos;
        let others: Vec<&[Vec2]> = world
            .vehicles
            .iter()
            .filter(|o| o.id != vid && o.status != VehicleStatus::Arrived)
            .map(|o| paths[&o.id].as_slice())
            .collect();
        let ci_proposed = conflict_index(&paths[&vid], &others, cfg.conflict_radius);
        let (chosen, ci_chosen, enhancement, new_path) = if ci_proposed == 0.0 {
            (executed[agent], 0.0, [0.0; 3], None)
        } else {
            let mut candidates: Vec<(MetaAction, Vec<Vec2>, f64)> = Vec::with_capacity(3);
            for action in MetaAction::ALL {
                let path = if action == executed[agent] {
                    paths[&vid].clone()
                } else {
                    rollout_cav(world, vid, action, cfg)
                };
                let ci = conflict_index(&path, &others, cfg.conflict_radius);
                candidates.push((action, path, ci));
            }
            let mut enhancement = [0.0; 3];
            for (action, _, ci) in &candidates {
                enhancement[action.index()] = ci_proposed - ci;
            }
            let best = candidates
                .iter()
                .enumerate()
                .min_by(|(ia, a), (ib, b)| {
                    let disp_a = max_step_displacement(start, &a.1);
                    let disp_b = max_step_displacement(start, &b.1);
                    a.2.total_cmp(&b.2)
                        .then((a.0 != executed[agent]).cmp(&(b.0 != executed[agent])))
                        .then(disp_a.total_cmp(&disp_b))
                        .then(ia.cmp(ib))
                })
                .map(|(i, _)| i)
                .unwrap();
            let (action, path, ci) = candidates.swap_remove(best);
            (action, ci, enhancement, Some(path))
        };
        checks.push(AgentCheck {
            agent,
            rank,
            proposed: proposed[agent],
            chosen,
            conflict_before: ci_proposed,
            conflict_after: ci_chosen,
            enhancement,
        });
        executed[agent] = chosen;
        if let Some(path) = new_path {
            paths.insert(vid, path);
        }
    }
    InspectionReport { checks, executed }
}
