//! The multi-agent intersection environment.
//!
//! Automated vehicles (one per approach) follow fixed routes; their policies
//! choose a discrete speed-target adjustment once per decision step. Each
//! decision step expands into `steps_per_decision` physics substeps in which
//! every vehicle runs its lane-tracking and speed controllers and integrates
//! the kinematic bicycle model. Human-driven vehicles follow a car-following
//! law with optional lane changes and an emergency brake driven by
//! constant-speed motion prediction.
//!
//! Substeps are two-phase: all commands are computed from the same world
//! snapshot, then all vehicles integrate, so vehicle order never changes
//! physics. All randomness is consumed at spawn time, which makes episodes
//! a pure function of (config, seed, action sequence).

use crate::behavior::{
    idm_acceleration, mobil_accepts, DrivingStyle, IdmParams, MobilParams, NeighborView,
};
use crate::config::{ScenarioConfig, StyleMode};
use crate::dynamics::{
    accel_to_speed, bicycle_step, steer_to_lane, Command, ControlGains, LaneFrame, Limits,
    VehicleState, DT, VEHICLE_LENGTH, VEHICLE_WIDTH,
};
use crate::geom::{convex_overlap, convex_separation, obb_corners, Vec2};
use crate::network::{build_network, Movement, RoadNetwork, APPROACH_LEN};
use crate::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Maximum spawn placement attempts per human vehicle before the requested
/// count is reduced.
const SPAWN_ATTEMPTS: usize = 10;
/// Minimum separation between freshly spawned vehicles.
const SPAWN_CLEARANCE: f64 = 2.0;
/// Lateral tolerance when matching vehicles to a lane centerline.
const LANE_CAPTURE: f64 = 2.0;
/// Look-ahead distance for leader search (m).
const LEADER_RANGE: f64 = 55.0;
/// Horizon of the emergency-brake motion prediction (s).
const BRAKE_HORIZON: f64 = 3.0;
/// A vehicle within this arc length of its route end has arrived.
const ARRIVAL_MARGIN: f64 = 0.25;

/// What kind of driver controls a vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    /// Policy-controlled automated vehicle, identified by agent index.
    Automated { agent: usize },
    /// Rule-based human driver.
    Human { style: DrivingStyle },
}

/// Lifecycle of a vehicle within an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    Active,
    /// Frozen in place after a collision; still a physical obstacle.
    Collided,
    /// Reached the route end and left the scene.
    Arrived,
}

/// Per-agent terminal view used by training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Running,
    Arrived,
    Collided,
}

/// Discrete speed-target adjustment available to an automated vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaAction {
    Slower,
    Idle,
    Faster,
}

impl MetaAction {
    pub const ALL: [MetaAction; 3] = [MetaAction::Slower, MetaAction::Idle, MetaAction::Faster];

    pub fn index(self) -> usize {
        match self {
            MetaAction::Slower => 0,
            MetaAction::Idle => 1,
            MetaAction::Faster => 2,
        }
    }

    pub fn from_index(i: usize) -> MetaAction {
        Self::ALL[i]
    }
}

/// One vehicle in the scene.
#[derive(Clone, Debug)]
pub struct Vehicle {
    pub id: usize,
    pub kind: VehicleKind,
    /// Index into the network route table.
    pub route: usize,
    /// Arc-length progress of the vehicle center along its route.
    pub s: f64,
    pub state: VehicleState,
    /// Commanded speed for automated vehicles; ignored for human drivers.
    pub target_speed: f64,
    pub status: VehicleStatus,
    /// Physics step of the last lane change (human drivers only).
    pub last_lane_change: Option<usize>,
}

impl Vehicle {
    pub fn corners(&self) -> [Vec2; 4] {
        obb_corners(self.state.pos, self.state.heading, VEHICLE_LENGTH, VEHICLE_WIDTH)
    }

    pub fn is_human(&self) -> bool {
        matches!(self.kind, VehicleKind::Human { .. })
    }

    fn idm(&self) -> IdmParams {
        match self.kind {
            VehicleKind::Human { style } => style.idm(),
            VehicleKind::Automated { .. } => DrivingStyle::Normal.idm(),
        }
    }
}

/// Discrete scene event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Collision { a: usize, b: usize },
    Arrival { id: usize },
    /// Fewer human vehicles were placed than requested because no free slot
    /// was found within the attempt budget.
    SpawnReduced { requested: usize, placed: usize },
}

/// An event stamped with the physics step it occurred on (spawn events use
/// step 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Egocentric observation: a fixed number of rows of
/// `[x, y, vx, vy, cos(heading), sin(heading)]`. Row 0 is the ego vehicle in
/// absolute coordinates; remaining rows are the nearest perceived vehicles
/// with position and velocity relative to the ego (headings stay absolute).
/// `mask` marks filled rows and `ids` maps rows back to vehicle ids.
#[derive(Clone, Debug)]
pub struct Observation {
    pub rows: Vec<[f64; 6]>,
    pub mask: Vec<bool>,
    pub ids: Vec<Option<usize>>,
}

impl Observation {
    pub const FEATURES: usize = 6;

    /// Row-major flattening (masked rows are zero).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len() * Self::FEATURES);
        for row in &self.rows {
            out.extend_from_slice(row);
        }
        out
    }
}

/// Result of one decision step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Per-agent reward over the decision window (zero once terminal before
    /// the window started).
    pub rewards: Vec<f64>,
    pub agent_status: Vec<AgentStatus>,
    /// Episode finished (all agents terminal or horizon reached).
    pub done: bool,
    /// Events that occurred during this decision window.
    pub events: Vec<Event>,
}

/// Snapshot of one vehicle for trace recording.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VehicleSnap {
    pub id: usize,
    pub kind: VehicleKind,
    pub route: usize,
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub status: VehicleStatus,
}

/// Snapshot of the scene after one physics substep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubstepRecord {
    pub step: usize,
    pub vehicles: Vec<VehicleSnap>,
    pub events: Vec<Event>,
}

/// The simulation world.
#[derive(Clone, Debug)]
pub struct World {
    pub config: ScenarioConfig,
    pub network: Arc<RoadNetwork>,
    pub vehicles: Vec<Vehicle>,
    /// Physics steps taken so far.
    pub step_count: usize,
    pub gains: ControlGains,
    pub limits: Limits,
    pub mobil: MobilParams,
    spawn_events: Vec<Event>,
    recording: bool,
    substep_log: Vec<SubstepRecord>,
    /// Speed each agent had at the moment of its collision (the vehicle
    /// state itself is zeroed when frozen); used by the reward's
    /// efficiency term on the crash step.
    impact_speed: Vec<Option<f64>>,
}

impl World {
    /// Build the network and spawn an episode from a seed.
    pub fn new(config: ScenarioConfig, seed: u64) -> Result<World> {
        let network = Arc::new(build_network(config.lanes)?);
        World::with_network(config, network, seed)
    }

    /// Spawn an episode on a pre-built network (reuse across episodes).
    pub fn with_network(config: ScenarioConfig, network: Arc<RoadNetwork>, seed: u64) -> Result<World> {
        config.validate()?;
        assert_eq!(network.lanes, config.lanes, "network lane count must match the scenario");
        let config_cav_count = config.cav_count;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut world = World {
            config,
            network,
            vehicles: Vec::new(),
            step_count: 0,
            gains: ControlGains::default(),
            limits: Limits::default(),
            mobil: MobilParams::default(),
            spawn_events: Vec::new(),
            recording: false,
            substep_log: Vec::new(),
            impact_speed: vec![None; config_cav_count],
        };
        world.spawn(&mut rng);
        Ok(world)
    }

    fn spawn(&mut self, rng: &mut ChaCha8Rng) {
        let cfg = self.config.clone();
        for agent in 0..cfg.cav_count {
            let approach = agent; // one automated vehicle per approach
            let lane = rng.gen_range(0..cfg.lanes);
            let movement = Movement::ALL[rng.gen_range(0..3)];
            let back = rng.gen_range(cfg.spawn_back_min..=cfg.spawn_back_max);
            let speed = rng.gen_range(cfg.speed_min..=cfg.speed_max);
            let route = self.network.route_index(approach, lane, movement);
            let s = APPROACH_LEN - back;
            self.place(VehicleKind::Automated { agent }, route, s, speed);
        }
        let requested = rng.gen_range(cfg.hv_count_min..=cfg.hv_count_max);
        let mut placed = 0;
        'next_hv: for _ in 0..requested {
            for _ in 0..SPAWN_ATTEMPTS {
                let style = match cfg.hv_style {
                    StyleMode::Normal => DrivingStyle::Normal,
                    StyleMode::Aggressive => DrivingStyle::Aggressive,
                    StyleMode::Timid => DrivingStyle::Timid,
                    StyleMode::Mixed => DrivingStyle::ALL[rng.gen_range(0..3)],
                };
                let approach = rng.gen_range(0..4);
                let lane = rng.gen_range(0..cfg.lanes);
                let movement = Movement::ALL[rng.gen_range(0..3)];
                let back = rng.gen_range(cfg.hv_back_min..=cfg.hv_back_max);
                let speed = rng.gen_range(cfg.hv_speed_min..=cfg.hv_speed_max);
                let route = self.network.route_index(approach, lane, movement);
                let s = APPROACH_LEN - back;
                if self.slot_free(route, s) {
                    self.place(VehicleKind::Human { style }, route, s, speed);
                    placed += 1;
                    continue 'next_hv;
                }
            }
            // Attempt budget exhausted; stop placing more.
            break;
        }
        if placed < requested {
            self.spawn_events.push(Event {
                step: 0,
                kind: EventKind::SpawnReduced { requested, placed },
            });
        }
    }

    fn slot_free(&self, route: usize, s: f64) -> bool {
        let line = &self.network.routes[route].line;
        let pos = line.pos_at(s);
        let heading = line.heading_at(s);
        let corners = obb_corners(pos, heading, VEHICLE_LENGTH, VEHICLE_WIDTH);
        self.vehicles
            .iter()
            .all(|v| convex_separation(&corners, &v.corners()) >= SPAWN_CLEARANCE)
    }

    fn place(&mut self, kind: VehicleKind, route: usize, s: f64, speed: f64) {
        let line = &self.network.routes[route].line;
        let state = VehicleState { pos: line.pos_at(s), heading: line.heading_at(s), speed };
        self.vehicles.push(Vehicle {
            id: self.vehicles.len(),
            kind,
            route,
            s,
            state,
            target_speed: speed,
            status: VehicleStatus::Active,
            last_lane_change: None,
        });
    }

    /// Events emitted during episode setup.
    pub fn spawn_events(&self) -> &[Event] {
        &self.spawn_events
    }

    /// Enable per-substep snapshot recording (drained by
    /// [`World::take_substep_log`]).
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn take_substep_log(&mut self) -> Vec<SubstepRecord> {
        std::mem::take(&mut self.substep_log)
    }

    /// The vehicle controlled by an agent.
    pub fn agent_vehicle(&self, agent: usize) -> &Vehicle {
        self.vehicles
            .iter()
            .find(|v| v.kind == VehicleKind::Automated { agent })
            .expect("agent index out of range")
    }

    pub fn agent_status(&self, agent: usize) -> AgentStatus {
        match self.agent_vehicle(agent).status {
            VehicleStatus::Active => AgentStatus::Running,
            VehicleStatus::Collided => AgentStatus::Collided,
            VehicleStatus::Arrived => AgentStatus::Arrived,
        }
    }

    pub fn all_agent_status(&self) -> Vec<AgentStatus> {
        (0..self.config.cav_count).map(|a| self.agent_status(a)).collect()
    }

    /// Episode finished: horizon reached or every agent terminal.
    pub fn done(&self) -> bool {
        self.step_count >= self.config.horizon_steps
            || (0..self.config.cav_count).all(|a| self.agent_status(a) != AgentStatus::Running)
    }

    /// Vehicles that are still physical obstacles (not arrived).
    fn present(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.iter().filter(|v| v.status != VehicleStatus::Arrived)
    }

    /// Egocentric observation for one agent.
    pub fn observe(&self, agent: usize) -> Observation {
        let ego = self.agent_vehicle(agent);
        let slots = self.config.obs_slots;
        let mut rows = vec![[0.0; 6]; slots];
        let mut mask = vec![false; slots];
        let mut ids = vec![None; slots];
        let ev = ego.state.velocity();
        rows[0] = [
            ego.state.pos.x,
            ego.state.pos.y,
            ev.x,
            ev.y,
            ego.state.heading.cos(),
            ego.state.heading.sin(),
        ];
        mask[0] = true;
        ids[0] = Some(ego.id);
        let mut near: Vec<(f64, usize)> = self
            .present()
            .filter(|v| v.id != ego.id)
            .map(|v| (v.state.pos.dist(ego.state.pos), v.id))
            .filter(|(d, _)| *d <= self.config.perception_range)
            .collect();
        near.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (slot, (_, id)) in near.into_iter().take(slots - 1).enumerate() {
            let v = &self.vehicles[id];
            let vel = v.state.velocity();
            rows[slot + 1] = [
                v.state.pos.x - ego.state.pos.x,
                v.state.pos.y - ego.state.pos.y,
                vel.x - ev.x,
                vel.y - ev.y,
                v.state.heading.cos(),
                v.state.heading.sin(),
            ];
            mask[slot + 1] = true;
            ids[slot + 1] = Some(id);
        }
        Observation { rows, mask, ids }
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.config.cav_count).map(|a| self.observe(a)).collect()
    }

    /// Nearest leader of vehicle `idx` along route `route` from arc length
    /// `from_s`: `(gap, speed_along_route)` with gap bumper-to-bumper.
    fn leader_on_route(&self, idx: usize, route: usize, from_s: f64) -> NeighborView {
        let line = &self.network.routes[route].line;
        let mut best = NeighborView::EMPTY;
        let mut best_ds = f64::INFINITY;
        for v in self.present() {
            if v.id == idx {
                continue;
            }
            if v.state.pos.dist(self.vehicles[idx].state.pos) > LEADER_RANGE + VEHICLE_LENGTH {
                continue;
            }
            let (s_o, lat) = line.project_window(v.state.pos, from_s, from_s + LEADER_RANGE);
            if lat.abs() > LANE_CAPTURE {
                continue;
            }
            let ds = s_o - from_s;
            if ds <= 0.5 || ds >= best_ds {
                continue;
            }
            let tangent = Vec2::from_angle(line.heading_at(s_o));
            best_ds = ds;
            best = NeighborView { gap: ds - VEHICLE_LENGTH, speed: v.state.velocity().dot(tangent) };
        }
        best
    }

    /// Nearest follower behind arc length `at_s` on `route`:
    /// `(gap, speed_along, follower_s)`.
    fn follower_on_route(&self, idx: usize, route: usize, at_s: f64) -> (NeighborView, Option<f64>) {
        let line = &self.network.routes[route].line;
        let mut best = NeighborView::EMPTY;
        let mut best_ds = f64::INFINITY;
        let mut best_s = None;
        for v in self.present() {
            if v.id == idx {
                continue;
            }
            let lo = (at_s - LEADER_RANGE).max(0.0);
            let (s_o, lat) = line.project_window(v.state.pos, lo, at_s);
            if lat.abs() > LANE_CAPTURE {
                continue;
            }
            let ds = at_s - s_o;
            if ds <= 0.5 || ds >= best_ds {
                continue;
            }
            let tangent = Vec2::from_angle(line.heading_at(s_o));
            best_ds = ds;
            best = NeighborView { gap: ds - VEHICLE_LENGTH, speed: v.state.velocity().dot(tangent) };
            best_s = Some(s_o);
        }
        (best, best_s)
    }

    /// Constant-speed pose prediction along each active vehicle's own route,
    /// for `steps` physics steps ahead (index 0 = now).
    fn predict_sweeps(&self, steps: usize) -> Vec<(usize, Vec<(Vec2, f64)>)> {
        self.present()
            .map(|v| {
                let line = &self.network.routes[v.route].line;
                let sweep = (0..=steps)
                    .map(|k| {
                        let s = v.s + v.state.speed * DT * k as f64;
                        (line.pos_at(s), line.heading_at(s))
                    })
                    .collect();
                (v.id, sweep)
            })
            .collect()
    }

    /// Whether constant-speed prediction puts vehicle `id` in overlap with
    /// any other vehicle within the emergency-brake horizon.
    pub fn predicted_conflict(&self, id: usize) -> bool {
        let steps = (BRAKE_HORIZON / DT).round() as usize;
        let sweeps = self.predict_sweeps(steps);
        sweep_conflict(&sweeps, id, steps)
    }

    /// Advance one decision step. `actions[a]` is agent `a`'s speed-target
    /// adjustment; agents that are already terminal ignore theirs.
    pub fn step(&mut self, actions: &[MetaAction]) -> StepOutput {
        assert_eq!(actions.len(), self.config.cav_count, "one action per agent");
        let status_before = self.all_agent_status();
        let n_agents = self.config.cav_count;
        for (agent, action) in actions.iter().enumerate() {
            let id = self.agent_vehicle(agent).id;
            let v = &mut self.vehicles[id];
            if v.status != VehicleStatus::Active {
                continue;
            }
            let delta = match action {
                MetaAction::Slower => -self.config.speed_increment,
                MetaAction::Idle => 0.0,
                MetaAction::Faster => self.config.speed_increment,
            };
            v.target_speed = (v.target_speed + delta).clamp(0.0, self.config.speed_max);
        }
        let mut collided = vec![false; n_agents];
        let mut arrived = vec![false; n_agents];
        let mut events = Vec::new();
        for _ in 0..self.config.steps_per_decision {
            if self.done() {
                break;
            }
            self.substep(&mut events, &mut collided, &mut arrived);
        }
        let rewards = (0..n_agents)
            .map(|a| {
                if status_before[a] != AgentStatus::Running {
                    return 0.0;
                }
                let v = if collided[a] {
                    self.impact_speed[a].unwrap_or(0.0)
                } else {
                    self.agent_vehicle(a).state.speed
                };
                let span = (self.config.speed_max - self.config.speed_min).max(f64::EPSILON);
                let r_eff = ((v - self.config.speed_min) / span).clamp(0.0, 1.0);
                let r_col = if collided[a] { self.config.collision_penalty } else { 0.0 };
                let r_arr = if arrived[a] { self.config.arrival_bonus } else { 0.0 };
                self.config.w_collision * r_col
                    + self.config.w_efficiency * r_eff
                    + self.config.w_arrival * r_arr
            })
            .collect();
        StepOutput {
            rewards,
            agent_status: self.all_agent_status(),
            done: self.done(),
            events,
        }
    }

    fn substep(&mut self, events: &mut Vec<Event>, collided: &mut [bool], arrived: &mut [bool]) {
        let brake_steps = (BRAKE_HORIZON / DT).round() as usize;
        let sweeps = self.predict_sweeps(brake_steps);

        // Lane-change decisions from the frozen snapshot, applied before
        // command computation.
        let swaps = self.plan_lane_changes();
        for (id, route) in swaps {
            self.vehicles[id].route = route;
            self.vehicles[id].last_lane_change = Some(self.step_count);
        }

        // Phase 1: commands from a consistent snapshot.
        let mut commands: Vec<Option<Command>> = vec![None; self.vehicles.len()];
        for v in self.vehicles.iter() {
            if v.status != VehicleStatus::Active {
                continue;
            }
            let line = &self.network.routes[v.route].line;
            let (s_proj, lateral) = line.project_window(v.state.pos, v.s - 5.0, v.s + 5.0);
            let lane = LaneFrame { lateral, heading: line.heading_at(s_proj) };
            let steer = steer_to_lane(&v.state, &lane, &self.gains, &self.limits);
            let accel = match v.kind {
                VehicleKind::Automated { .. } => {
                    accel_to_speed(&v.state, v.target_speed, &self.gains, &self.limits)
                }
                VehicleKind::Human { style } => {
                    let idm = style.idm();
                    let lead = self.leader_on_route(v.id, v.route, v.s);
                    let a = idm_acceleration(
                        &idm,
                        v.state.speed,
                        lead.gap,
                        v.state.speed - lead.speed,
                    );
                    if sweep_conflict(&sweeps, v.id, brake_steps) {
                        a.min(-2.0 * idm.comfort_decel)
                    } else {
                        a
                    }
                }
            };
            commands[v.id] = Some(Command { accel, steer });
        }

        // Phase 2: integrate everyone.
        for v in self.vehicles.iter_mut() {
            if let Some(cmd) = commands[v.id] {
                v.state = bicycle_step(&v.state, &cmd, DT);
            }
        }
        // Update arc-length progress.
        let mut new_s = vec![0.0; self.vehicles.len()];
        for v in self.vehicles.iter() {
            let line = &self.network.routes[v.route].line;
            new_s[v.id] = if v.status == VehicleStatus::Active {
                line.project_window(v.state.pos, v.s - 3.0, v.s + 6.0).0
            } else {
                v.s
            };
        }
        for v in self.vehicles.iter_mut() {
            v.s = new_s[v.id];
        }
        self.step_count += 1;

        // Collisions: any present pair, at least one of them still active.
        let present_ids: Vec<usize> = self.present().map(|v| v.id).collect();
        let mut newly_collided = Vec::new();
        for (i, &a) in present_ids.iter().enumerate() {
            for &b in &present_ids[i + 1..] {
                let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
                if va.status != VehicleStatus::Active && vb.status != VehicleStatus::Active {
                    continue;
                }
                if va.state.pos.dist(vb.state.pos) > VEHICLE_LENGTH + VEHICLE_WIDTH {
                    continue;
                }
                if convex_overlap(&va.corners(), &vb.corners()) {
                    newly_collided.push((a, b));
                }
            }
        }
        for (a, b) in newly_collided {
            events.push(Event { step: self.step_count, kind: EventKind::Collision { a, b } });
            for id in [a, b] {
                let v = &mut self.vehicles[id];
                if v.status == VehicleStatus::Active {
                    v.status = VehicleStatus::Collided;
                    let speed_at_impact = v.state.speed;
                    v.state.speed = 0.0;
                    if let VehicleKind::Automated { agent } = v.kind {
                        collided[agent] = true;
                        self.impact_speed[agent] = Some(speed_at_impact);
                    }
                }
            }
        }

        // Arrivals: reaching the route end removes the vehicle.
        for id in 0..self.vehicles.len() {
            let v = &self.vehicles[id];
            if v.status != VehicleStatus::Active {
                continue;
            }
            let line = &self.network.routes[v.route].line;
            if v.s >= line.len() - ARRIVAL_MARGIN {
                let v = &mut self.vehicles[id];
                v.status = VehicleStatus::Arrived;
                events.push(Event { step: self.step_count, kind: EventKind::Arrival { id } });
                if let VehicleKind::Automated { agent } = v.kind {
                    arrived[agent] = true;
                }
            }
        }

        if self.recording {
            let step_events: Vec<Event> =
                events.iter().filter(|e| e.step == self.step_count).copied().collect();
            self.substep_log.push(SubstepRecord {
                step: self.step_count,
                vehicles: self.vehicles.iter().map(snapshot).collect(),
                events: step_events,
            });
        }
    }

    /// Lane-change planning for human drivers on multi-lane approaches.
    fn plan_lane_changes(&self) -> Vec<(usize, usize)> {
        if self.config.lanes < 2 {
            return Vec::new();
        }
        let cooldown_steps = (self.mobil.cooldown / DT).round() as usize;
        let mut swaps = Vec::new();
        for v in self.vehicles.iter() {
            if v.status != VehicleStatus::Active || !v.is_human() {
                continue;
            }
            let route = &self.network.routes[v.route];
            // Only on the approach leg, clear of the intersection box.
            if v.s >= route.stop_line_s - 5.0 {
                continue;
            }
            if let Some(last) = v.last_lane_change {
                if self.step_count < last + cooldown_steps {
                    continue;
                }
            }
            let idm = v.idm();
            let current_leader = self.leader_on_route(v.id, v.route, v.s);
            for target_lane in [route.lane.wrapping_sub(1), route.lane + 1] {
                if target_lane >= self.config.lanes {
                    continue;
                }
                let cand = self.network.route_index(route.approach, target_lane, route.movement);
                let target_leader = self.leader_on_route(v.id, cand, v.s);
                let (target_follower, follower_s) = self.follower_on_route(v.id, cand, v.s);
                // Physical room in the target lane is a precondition.
                if target_leader.gap <= 0.0 || target_follower.gap <= 0.0 {
                    continue;
                }
                let follower_gap_to_leader = match follower_s {
                    Some(fs) if target_leader.gap.is_finite() => {
                        (v.s + VEHICLE_LENGTH + target_leader.gap) - fs - VEHICLE_LENGTH
                    }
                    _ => f64::INFINITY,
                };
                let follower_idm = DrivingStyle::Normal.idm();
                if mobil_accepts(
                    &self.mobil,
                    &idm,
                    v.state.speed,
                    current_leader,
                    target_leader,
                    target_follower,
                    &follower_idm,
                    follower_gap_to_leader,
                ) {
                    swaps.push((v.id, cand));
                    break;
                }
            }
        }
        swaps
    }
}

fn snapshot(v: &Vehicle) -> VehicleSnap {
    VehicleSnap {
        id: v.id,
        kind: v.kind,
        route: v.route,
        s: v.s,
        x: v.state.pos.x,
        y: v.state.pos.y,
        heading: v.state.heading,
        speed: v.state.speed,
        status: v.status,
    }
}

/// Check a predicted-pose table for overlap between `id` and anyone else at
/// the same future step.
fn sweep_conflict(sweeps: &[(usize, Vec<(Vec2, f64)>)], id: usize, steps: usize) -> bool {
    let Some(me) = sweeps.iter().find(|(vid, _)| *vid == id) else {
        return false;
    };
    for (other_id, other) in sweeps {
        if *other_id == id {
            continue;
        }
        for (&(mp, mh), &(op, oh)) in me.1.iter().zip(other).take(steps + 1).skip(1) {
            if mp.dist(op) > VEHICLE_LENGTH + VEHICLE_WIDTH {
                continue;
            }
            let a = obb_corners(mp, mh, VEHICLE_LENGTH, VEHICLE_WIDTH);
            let b = obb_corners(op, oh, VEHICLE_LENGTH, VEHICLE_WIDTH);
            if convex_overlap(&a, &b) {
                return true;
            }
        }
    }
    false
}
