//! Scenario configuration for the intersection environment.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Style population for spawned human-driven vehicles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleMode {
    /// Every human driver uses the normal preset.
    Normal,
    /// Every human driver uses the aggressive preset.
    Aggressive,
    /// Every human driver uses the timid preset.
    Timid,
    /// Styles drawn uniformly per vehicle.
    Mixed,
}

/// Everything that defines an episode distribution: road layout, traffic
/// composition, spawn ranges, horizon, and reward shaping.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Lanes per direction (1..=3).
    pub lanes: usize,
    /// Number of automated vehicles (1..=4, one per approach).
    pub cav_count: usize,
    /// Human-driven vehicle count range (inclusive), sampled per episode.
    pub hv_count_min: usize,
    pub hv_count_max: usize,
    /// Driving-style population for human-driven vehicles.
    pub hv_style: StyleMode,
    /// Episode length in physics steps.
    pub horizon_steps: usize,
    /// Physics steps per decision step.
    pub steps_per_decision: usize,
    /// Automated-vehicle spawn distance behind the stop line (m).
    pub spawn_back_min: f64,
    pub spawn_back_max: f64,
    /// Automated-vehicle initial and commanded speed range (m/s).
    pub speed_min: f64,
    pub speed_max: f64,
    /// Human-vehicle spawn window along the approach, measured as distance
    /// behind the stop line (m).
    pub hv_back_min: f64,
    pub hv_back_max: f64,
    /// Human-vehicle initial speed range (m/s).
    pub hv_speed_min: f64,
    pub hv_speed_max: f64,
    /// Perception radius for observations (m).
    pub perception_range: f64,
    /// Observation rows (ego + nearest neighbors).
    pub obs_slots: usize,
    /// Speed-target increment of one decision (m/s).
    pub speed_increment: f64,
    /// Reward weights: collision, efficiency, arrival terms.
    pub w_collision: f64,
    pub w_efficiency: f64,
    pub w_arrival: f64,
    /// Raw collision penalty (applied once, on the step it happens).
    pub collision_penalty: f64,
    /// Raw arrival bonus (applied once, on the step it happens).
    pub arrival_bonus: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            lanes: 1,
            cav_count: 4,
            hv_count_min: 0,
            hv_count_max: 0,
            hv_style: StyleMode::Normal,
            horizon_steps: 150,
            steps_per_decision: 10,
            spawn_back_min: 20.0,
            spawn_back_max: 50.0,
            speed_min: 3.0,
            speed_max: 9.0,
            hv_back_min: 5.0,
            hv_back_max: 55.0,
            hv_speed_min: 3.0,
            hv_speed_max: 7.0,
            perception_range: 50.0,
            obs_slots: 8,
            speed_increment: 1.5,
            w_collision: 1.0,
            w_efficiency: 1.0,
            w_arrival: 1.0,
            collision_penalty: -10.0,
            arrival_bonus: 5.0,
        }
    }
}

impl ScenarioConfig {
    /// A car-free scenario with only the automated vehicles.
    pub fn cav_only() -> Self {
        ScenarioConfig::default()
    }

    /// A mixed-traffic scenario with `lo..=hi` human vehicles per episode.
    pub fn mixed(lo: usize, hi: usize, style: StyleMode) -> Self {
        ScenarioConfig {
            hv_count_min: lo,
            hv_count_max: hi,
            hv_style: style,
            ..ScenarioConfig::default()
        }
    }

    /// Validate ranges that the rest of the crate relies on.
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.lanes) {
            return Err(Error::BadLaneCount(self.lanes));
        }
        if !(1..=4).contains(&self.cav_count) {
            return Err(Error::BadConfig(format!(
                "cav_count {} out of range 1..=4 (one per approach)",
                self.cav_count
            )));
        }
        if self.hv_count_min > self.hv_count_max {
            return Err(Error::BadConfig(format!(
                "hv_count_min {} exceeds hv_count_max {}",
                self.hv_count_min, self.hv_count_max
            )));
        }
        if self.horizon_steps == 0 || self.steps_per_decision == 0 {
            return Err(Error::BadConfig("horizon and decision period must be positive".into()));
        }
        if self.obs_slots < 1 {
            return Err(Error::BadConfig("obs_slots must be at least 1".into()));
        }
        for (name, lo, hi) in [
            ("spawn_back", self.spawn_back_min, self.spawn_back_max),
            ("speed", self.speed_min, self.speed_max),
            ("hv_back", self.hv_back_min, self.hv_back_max),
            ("hv_speed", self.hv_speed_min, self.hv_speed_max),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 {
                return Err(Error::BadConfig(format!("bad {name} range [{lo}, {hi}]")));
            }
        }
        if self.perception_range <= 0.0 || self.speed_increment <= 0.0 {
            return Err(Error::BadConfig(
                "perception_range and speed_increment must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Decision steps per episode (ceiling division of the horizon).
    pub fn decision_steps(&self) -> usize {
        self.horizon_steps.div_ceil(self.steps_per_decision)
    }
}
