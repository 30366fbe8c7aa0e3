//! Rough training-throughput probe: times a short run with production
//! hyperparameters and extrapolates to a full 500-episode run.

use crossway_marl::train::{train, TrainConfig};
use crossway_marl::Variant;
use std::time::Instant;

fn main() {
    for variant in [Variant::Maddpg, Variant::MaGaDdpg] {
        let mut cfg = TrainConfig::new(variant, 7);
        cfg.episodes = 16;
        let t0 = Instant::now();
        let result = train(&cfg).expect("training failed");
        let dt = t0.elapsed().as_secs_f64();
        let sim_steps: usize = result.log.iter().map(|r| r.steps).sum();
        println!(
            "{variant}: {} episodes in {dt:.1}s ({} rounds, {sim_steps} sim steps) -> est {:.1} min / 500 eps",
            result.log.len(),
            result.rounds,
            dt / 16.0 * 500.0 / 60.0
        );
    }
}
