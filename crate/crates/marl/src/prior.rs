//! Interaction analysis from attention weights: each agent keeps only the
//! vehicles it attends to strongly and nearby, the kept weights aimed at
//! each automated vehicle are summed into a global interaction weight, and
//! agents are ranked by that weight to fix the order in which their actions
//! are inspected.

use crate::nets::AttnInfo;

#[derive(Clone, Copy, Debug)]
pub struct PriorConfig {
    /// Vehicles farther than this are never selected (strict).
    pub interaction_range: f64,
    /// Attention weights at or below this are ignored (strict).
    pub min_weight: f64,
    /// At most this many vehicles are kept per agent.
    pub max_objects: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            interaction_range: 40.0,
            min_weight: 0.05,
            max_objects: 5,
        }
    }
}

/// One vehicle an agent attends to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectedObject {
    pub vehicle: usize,
    pub weight: f64,
    pub dist: f64,
}

#[derive(Clone, Debug)]
pub struct InteractionGraph {
    /// Per agent: the vehicles it interacts with, strongest weight first.
    pub selected: Vec<Vec<SelectedObject>>,
    /// Per agent: total selected attention weight aimed at its vehicle by
    /// the other agents.
    pub global_weight: Vec<f64>,
    /// Agent ids ordered by descending global weight (ties: lower id).
    pub order: Vec<usize>,
    /// Position of each agent in `order`.
    pub rank: Vec<usize>,
}

/// Builds the interaction set of every agent and the priority order over
/// agents. `attn[i]` is agent i's latest attention summary (None when the
/// agent is terminal or its policy has no attention stage), and
/// `agent_vehicles[i]` is the vehicle id agent i drives.
pub fn build_interaction_graph(
    attn: &[Option<AttnInfo>],
    agent_vehicles: &[usize],
    cfg: &PriorConfig,
) -> InteractionGraph {
    let n = attn.len();
    let mut selected: Vec<Vec<SelectedObject>> = Vec::with_capacity(n);
    for info in attn {
        let mut objs = Vec::new();
        if let Some(info) = info {
            // Row 0 is the ego vehicle itself and never an interaction object.
            for k in 1..info.weights.len() {
                let Some(vehicle) = info.ids[k] else { continue };
                if info.dists[k] < cfg.interaction_range && info.weights[k] > cfg.min_weight {
                    objs.push(SelectedObject {
                        vehicle,
                        weight: info.weights[k],
                        dist: info.dists[k],
                    });
                }
            }
            objs.sort_by(|a, b| {
                b.weight
                    .total_cmp(&a.weight)
                    .then(a.dist.total_cmp(&b.dist))
                    .then(a.vehicle.cmp(&b.vehicle))
            });
            objs.truncate(cfg.max_objects);
        }
        selected.push(objs);
    }

    let mut global_weight = vec![0.0; n];
    for (i, objs) in selected.iter().enumerate() {
        for o in objs {
            if let Some(j) = agent_vehicles.iter().position(|&v| v == o.vehicle) {
                if j != i {
                    global_weight[j] += o.weight;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| global_weight[b].total_cmp(&global_weight[a]).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &a) in order.iter().enumerate() {
        rank[a] = r;
    }
    InteractionGraph {
        selected,
        global_weight,
        order,
        rank,
    }
}
