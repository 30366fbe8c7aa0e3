//! Low-level vehicle control and kinematic bicycle integration.
//!
//! Vehicles are rectangles tracked by their center. Steering follows a
//! cascaded proportional law: lateral offset from the lane centerline maps
//! to a lateral-speed command, that to a heading correction relative to the
//! lane direction, and the heading-rate command finally to a front-wheel
//! angle through the inverse bicycle relation. Speed is tracked by a
//! proportional controller with asymmetric acceleration limits.

use crate::geom::{wrap_angle, Vec2};

/// Vehicle body length in meters.
pub const VEHICLE_LENGTH: f64 = 5.0;
/// Vehicle body width in meters.
pub const VEHICLE_WIDTH: f64 = 2.0;
/// Distance between front and rear axles.
pub const WHEELBASE: f64 = 2.5;
/// Physics step length in seconds.
pub const DT: f64 = 0.1;
/// Speed floor used when dividing by velocity in the steering laws.
const MIN_CONTROL_SPEED: f64 = 0.1;

/// Pose and speed of one vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub pos: Vec2,
    /// Heading angle in radians, counterclockwise from +x.
    pub heading: f64,
    /// Forward speed in m/s (non-negative).
    pub speed: f64,
}

impl VehicleState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading).scale(self.speed)
    }
}

/// Proportional gains for the tracking controllers.
#[derive(Clone, Copy, Debug)]
pub struct ControlGains {
    /// Lateral offset to lateral-speed command.
    pub kp_lateral: f64,
    /// Heading error to heading-rate command.
    pub kp_heading: f64,
    /// Speed error to acceleration command.
    pub kp_speed: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains { kp_lateral: 1.0, kp_heading: 2.0, kp_speed: 1.0 }
    }
}

/// Actuation limits.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Maximum front-wheel angle magnitude (radians).
    pub max_steer: f64,
    /// Maximum forward acceleration (m/s^2).
    pub max_accel: f64,
    /// Maximum braking deceleration magnitude (m/s^2).
    pub max_brake: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steer: std::f64::consts::FRAC_PI_4, max_accel: 3.0, max_brake: 5.0 }
    }
}

/// Lane-relative placement of a vehicle: signed lateral offset from the
/// centerline (positive left of travel) and the centerline heading there.
#[derive(Clone, Copy, Debug)]
pub struct LaneFrame {
    pub lateral: f64,
    pub heading: f64,
}

/// Acceleration and steering applied over one physics step.
#[derive(Clone, Copy, Debug, Default)]
pub struct Command {
    pub accel: f64,
    pub steer: f64,
}

/// Front-wheel angle that steers the vehicle back to the lane centerline.
///
/// Chain: lateral-speed command `-kp_lateral * lateral`, converted to a
/// heading offset from the lane direction by `asin(v_lat / v)`, then a
/// heading-rate command proportional to the remaining heading error, and
/// finally the bicycle inversion `steer = asin(rate * wheelbase / (2 v))`.
/// All `asin` arguments are clamped to [-1, 1] and the result to the
/// steering limit.
pub fn steer_to_lane(
    state: &VehicleState,
    lane: &LaneFrame,
    gains: &ControlGains,
    limits: &Limits,
) -> f64 {
    let v = state.speed.max(MIN_CONTROL_SPEED);
    let lat_speed_cmd = -gains.kp_lateral * lane.lateral;
    let heading_offset = (lat_speed_cmd / v).clamp(-1.0, 1.0).asin();
    let heading_ref = lane.heading + heading_offset;
    let rate_cmd = gains.kp_heading * wrap_angle(heading_ref - state.heading);
    let steer = (0.5 * WHEELBASE / v * rate_cmd).clamp(-1.0, 1.0).asin();
    steer.clamp(-limits.max_steer, limits.max_steer)
}

/// Proportional speed tracking with asymmetric limits.
pub fn accel_to_speed(state: &VehicleState, target_speed: f64, gains: &ControlGains, limits: &Limits) -> f64 {
    (gains.kp_speed * (target_speed - state.speed)).clamp(-limits.max_brake, limits.max_accel)
}

/// One explicit-Euler step of the kinematic bicycle model.
///
/// The slip angle is `beta = atan(tan(steer) / 2)` (center of gravity midway
/// between the axles); position advances along `heading + beta`, heading at
/// rate `speed / wheelbase * sin(beta)`, and speed by the commanded
/// acceleration, floored at zero.
pub fn bicycle_step(state: &VehicleState, cmd: &Command, dt: f64) -> VehicleState {
    let beta = (0.5 * cmd.steer.tan()).atan();
    let dir = state.heading + beta;
    let pos = state.pos + Vec2::from_angle(dir).scale(state.speed * dt);
    let heading = wrap_angle(state.heading + state.speed / WHEELBASE * beta.sin() * dt);
    let speed = (state.speed + cmd.accel * dt).max(0.0);
    VehicleState { pos, heading, speed }
}
