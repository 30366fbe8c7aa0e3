//! Multi-agent reinforcement learning for cooperative intersection
//! crossing: decentralized actors trained against centralized critics,
//! optionally with an attention stage that both conditions the policy on
//! its neighbors and exposes interaction weights. Those weights drive a
//! priority ordering over agents, and a trajectory-rollout inspector
//! screens each proposed action before it reaches the simulator.

pub mod buffer;
pub mod error;
pub mod evaluate;
pub mod inspector;
pub mod nets;
pub mod prior;
pub mod rollout;
pub mod seed;
pub mod train;
pub mod updates;

pub use buffer::{ReplayBuffer, Transition};
pub use error::Error;
pub use evaluate::{evaluate, EvalConfig, EvalSummary};
pub use inspector::{
    conflict_index, inspect_and_correct, predict_hv, rollout_cav, AgentCheck, InspectionReport,
    InspectorConfig,
};
pub use nets::{Actor, AgentNets, AttnInfo, Learner, ACTION_DIM};
pub use prior::{build_interaction_graph, InteractionGraph, PriorConfig, SelectedObject};
pub use rollout::{rollout_episode, EpisodeRun, RolloutOptions};
pub use train::{
    train, write_train_csv, EpisodeLog, InspectorMode, TrainConfig, TrainResult, TRAIN_SCHEMA,
};
pub use updates::{update_round, RoundStats, UpdateParams};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub type Result<T> = std::result::Result<T, Error>;

/// Policy family being trained or evaluated.
///
/// * `Maddpg` - plain multi-layer-perceptron actors.
/// * `AttentionMaddpg` - actors encode each perceived vehicle separately and
///   attend over them; no safety screening by default.
/// * `MaGaDdpg` - attention actors plus interaction ranking and trajectory
///   inspection of every proposed action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Maddpg,
    AttentionMaddpg,
    MaGaDdpg,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Maddpg, Variant::AttentionMaddpg, Variant::MaGaDdpg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Maddpg => "maddpg",
            Variant::AttentionMaddpg => "attention_maddpg",
            Variant::MaGaDdpg => "ma_ga_ddpg",
        }
    }

    /// Whether the actor produces attention weights over perceived vehicles.
    pub fn uses_attention(self) -> bool {
        !matches!(self, Variant::Maddpg)
    }

    /// Whether action inspection is enabled when the caller asks for the
    /// variant's default behavior.
    pub fn inspects_by_default(self) -> bool {
        matches!(self, Variant::MaGaDdpg)
    }

    /// Stable numeric tag used in checkpoints.
    pub fn code(self) -> u64 {
        match self {
            Variant::Maddpg => 0,
            Variant::AttentionMaddpg => 1,
            Variant::MaGaDdpg => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.code() == code)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.replace('-', "_").as_str() {
            "maddpg" => Ok(Variant::Maddpg),
            "attention_maddpg" => Ok(Variant::AttentionMaddpg),
            "ma_ga_ddpg" => Ok(Variant::MaGaDdpg),
            _ => Err(Error::BadVariant(s.to_string())),
        }
    }
}
