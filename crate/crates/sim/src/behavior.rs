//! Rule-based human-driver models: car following, lane changing, and an
//! emergency braking check based on short-horizon motion prediction.

use serde::{Deserialize, Serialize};

/// Car-following parameter set for the intelligent-driver car-following law.
#[derive(Clone, Copy, Debug)]
pub struct IdmParams {
    /// Desired free-flow speed (m/s).
    pub desired_speed: f64,
    /// Standstill minimum gap (m).
    pub min_gap: f64,
    /// Desired time headway (s).
    pub headway: f64,
    /// Maximum acceleration (m/s^2).
    pub max_accel: f64,
    /// Comfortable deceleration (m/s^2).
    pub comfort_decel: f64,
    /// Free-flow exponent.
    pub exponent: f64,
}

/// Driving style presets with calibrated car-following parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingStyle {
    Aggressive,
    Normal,
    Timid,
}

impl DrivingStyle {
    pub const ALL: [DrivingStyle; 3] =
        [DrivingStyle::Aggressive, DrivingStyle::Normal, DrivingStyle::Timid];

    /// Calibrated car-following parameters for this style.
    pub fn idm(self) -> IdmParams {
        match self {
            DrivingStyle::Aggressive => IdmParams {
                desired_speed: 9.0,
                min_gap: 3.38,
                headway: 0.86,
                max_accel: 1.35,
                comfort_decel: 2.07,
                exponent: 4.0,
            },
            DrivingStyle::Normal => IdmParams {
                desired_speed: 8.0,
                min_gap: 3.67,
                headway: 1.14,
                max_accel: 1.34,
                comfort_decel: 2.06,
                exponent: 4.0,
            },
            DrivingStyle::Timid => IdmParams {
                desired_speed: 7.0,
                min_gap: 3.69,
                headway: 1.27,
                max_accel: 1.36,
                comfort_decel: 1.99,
                exponent: 4.0,
            },
        }
    }
}

/// Car-following acceleration.
///
/// `gap` is the bumper-to-bumper distance to the leader (use `f64::INFINITY`
/// for free road) and `closing` the approach rate `v_ego - v_leader`. The
/// desired gap is `max(min_gap, min_gap + headway * v + v * closing /
/// (2 sqrt(max_accel * comfort_decel)))`. A non-positive gap triggers a hard
/// brake at twice the comfortable deceleration; output is clamped to
/// `[-2 * comfort_decel, max_accel]`.
pub fn idm_acceleration(p: &IdmParams, speed: f64, gap: f64, closing: f64) -> f64 {
    let brake_floor = -2.0 * p.comfort_decel;
    if gap <= 0.0 {
        return brake_floor;
    }
    let interaction = if gap.is_finite() {
        let desired_gap = (p.min_gap
            + p.headway * speed
            + speed * closing / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
        .max(p.min_gap);
        (desired_gap / gap).powi(2)
    } else {
        0.0
    };
    let free = (speed / p.desired_speed).powf(p.exponent);
    (p.max_accel * (1.0 - free - interaction)).clamp(brake_floor, p.max_accel)
}

/// Lane-change parameters for the incentive/safety lane-change rule.
#[derive(Clone, Copy, Debug)]
pub struct MobilParams {
    /// Weight on the disadvantage imposed on the new follower.
    pub politeness: f64,
    /// Net acceleration advantage required to change lanes (m/s^2).
    pub accel_threshold: f64,
    /// Maximum braking the change may impose on the new follower (m/s^2).
    pub safe_decel: f64,
    /// Minimum time between lane changes (s).
    pub cooldown: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams { politeness: 0.3, accel_threshold: 0.1, safe_decel: 2.0, cooldown: 2.0 }
    }
}

/// Gap and speed of a neighbor relative to the subject vehicle. `gap` is
/// bumper-to-bumper and `f64::INFINITY` when the slot is empty.
#[derive(Clone, Copy, Debug)]
pub struct NeighborView {
    pub gap: f64,
    pub speed: f64,
}

impl NeighborView {
    pub const EMPTY: NeighborView = NeighborView { gap: f64::INFINITY, speed: 0.0 };
}

/// Incentive/safety lane-change decision.
///
/// The change is accepted when the new follower would not need to brake
/// harder than `safe_decel`, and the subject's acceleration gain minus
/// `politeness` times the new follower's loss exceeds `accel_threshold`.
#[allow(clippy::too_many_arguments)]
pub fn mobil_accepts(
    p: &MobilParams,
    idm: &IdmParams,
    speed: f64,
    current_leader: NeighborView,
    target_leader: NeighborView,
    target_follower: NeighborView,
    follower_idm: &IdmParams,
    follower_gap_to_target_leader: f64,
) -> bool {
    // Safety: the new follower braking to accommodate the subject.
    let follower_after = idm_acceleration(
        follower_idm,
        target_follower.speed,
        target_follower.gap,
        target_follower.speed - speed,
    );
    if follower_after < -p.safe_decel {
        return false;
    }
    let self_now = idm_acceleration(idm, speed, current_leader.gap, speed - current_leader.speed);
    let self_after = idm_acceleration(idm, speed, target_leader.gap, speed - target_leader.speed);
    let follower_now = idm_acceleration(
        follower_idm,
        target_follower.speed,
        follower_gap_to_target_leader,
        target_follower.speed - target_leader.speed,
    );
    self_after - self_now - p.politeness * (follower_now - follower_after) > p.accel_threshold
}
