//! Episode traces: a JSONL schema capturing every physics substep, the
//! decisions taken at decision boundaries, and the episode outcome, plus a
//! bit-exact replay checker.
//!
//! File layout (one JSON object per line):
//! 1. header: `{"schema":"trace-v1", episode, seed, variant, scenario}`
//! 2. one record per physics substep (`vehicles`, optional `decisions`)
//! 3. footer: `{"outcome", "steps", "returns"}`
//!
//! JSON floats round-trip exactly (shortest representation that parses back
//! to the same bits), so replays can compare poses bitwise.

use crate::config::ScenarioConfig;
use crate::error::Error;
use crate::network::RoadNetwork;
use crate::world::{AgentStatus, Event, MetaAction, SubstepRecord, World};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// Schema identifier for trace files.
pub const TRACE_SCHEMA: &str = "trace-v1";

/// First line of a trace file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub episode: u64,
    pub seed: u64,
    /// Which policy variant produced the episode.
    pub variant: String,
    pub scenario: ScenarioConfig,
}

/// One agent's decision at a decision boundary: what the policy proposed,
/// what was executed after safety screening, the attention weights over
/// observation slots (when the policy produces them), and the priority rank
/// assigned by the interaction-level analysis (when enabled).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub agent: usize,
    pub proposed: MetaAction,
    pub executed: MetaAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

/// One physics substep. `decisions` is present on the first substep of each
/// decision window and describes the commands issued for that window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(flatten)]
    pub substep: SubstepRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<Vec<DecisionRecord>>,
}

/// Episode-level result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Every automated vehicle crossed and exited.
    Success,
    /// At least one automated vehicle collided.
    Collision,
    /// The horizon expired with agents still en route.
    Timeout,
}

impl Outcome {
    pub fn from_statuses(statuses: &[AgentStatus]) -> Outcome {
        if statuses.contains(&AgentStatus::Collided) {
            Outcome::Collision
        } else if statuses.iter().all(|s| *s == AgentStatus::Arrived) {
            Outcome::Success
        } else {
            Outcome::Timeout
        }
    }
}

/// Last line of a trace file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceFooter {
    pub outcome: Outcome,
    /// Physics steps simulated.
    pub steps: usize,
    /// Per-agent undiscounted return.
    pub returns: Vec<f64>,
}

/// A full episode trace.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub footer: TraceFooter,
}

impl EpisodeTrace {
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for rec in &self.steps {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &self.footer)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<EpisodeTrace> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::BadTrace("empty file".into()))??;
        let header: TraceHeader = serde_json::from_str(&first)
            .map_err(|e| Error::BadTrace(format!("unreadable header: {e}")))?;
        if header.schema != TRACE_SCHEMA {
            return Err(Error::BadTrace(format!(
                "schema {:?} is not supported (expected {TRACE_SCHEMA:?})",
                header.schema
            )));
        }
        let mut steps = Vec::new();
        let mut footer = None;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)?;
            if value.get("outcome").is_some() {
                footer = Some(serde_json::from_value(value)?);
            } else if value.get("vehicles").is_some() {
                if footer.is_some() {
                    return Err(Error::BadTrace("step record after footer".into()));
                }
                steps.push(serde_json::from_value(value)?);
            } else {
                return Err(Error::BadTrace("unrecognized record".into()));
            }
        }
        let footer = footer.ok_or_else(|| Error::BadTrace("missing footer".into()))?;
        Ok(EpisodeTrace { header, steps, footer })
    }
}

/// Collects one episode into an [`EpisodeTrace`] while the caller drives the
/// world. Call [`TraceBuilder::record_step`] after every `World::step`.
pub struct TraceBuilder {
    header: TraceHeader,
    steps: Vec<StepRecord>,
    returns: Vec<f64>,
    sim_steps: usize,
}

impl TraceBuilder {
    /// Start a trace. `world` must have recording enabled before stepping;
    /// spawn events are attached to the first substep record.
    pub fn new(episode: u64, seed: u64, variant: &str, world: &mut World) -> TraceBuilder {
        world.set_recording(true);
        TraceBuilder {
            header: TraceHeader {
                schema: TRACE_SCHEMA.to_string(),
                episode,
                seed,
                variant: variant.to_string(),
                scenario: world.config.clone(),
            },
            steps: Vec::new(),
            returns: vec![0.0; world.config.cav_count],
            sim_steps: 0,
        }
    }

    /// Record the substeps produced by the latest decision step together
    /// with the decisions that opened the window.
    pub fn record_step(&mut self, world: &mut World, decisions: Vec<DecisionRecord>, rewards: &[f64]) {
        for (r, total) in rewards.iter().zip(self.returns.iter_mut()) {
            *total += r;
        }
        let mut substeps = world.take_substep_log();
        if self.steps.is_empty() {
            if let Some(first) = substeps.first_mut() {
                let mut evs: Vec<Event> = world.spawn_events().to_vec();
                evs.extend(first.events.iter().copied());
                first.events = evs;
            }
        }
        for (i, sub) in substeps.into_iter().enumerate() {
            self.sim_steps = sub.step;
            self.steps.push(StepRecord {
                substep: sub,
                decisions: if i == 0 { Some(decisions.clone()) } else { None },
            });
        }
    }

    pub fn finish(self, world: &World) -> EpisodeTrace {
        let outcome = Outcome::from_statuses(&world.all_agent_status());
        EpisodeTrace {
            header: self.header,
            steps: self.steps,
            footer: TraceFooter { outcome, steps: self.sim_steps, returns: self.returns },
        }
    }
}

/// Result of replaying a trace against the simulator.
#[derive(Clone, Debug, PartialEq)]
pub enum ReplayResult {
    /// Every recorded pose matched bit for bit.
    Match { steps: usize },
    /// First divergence found.
    Diverged { step: usize, vehicle: usize, field: &'static str },
}

/// Re-run the episode described by a trace (same scenario, seed, and
/// executed actions) and compare every recorded vehicle pose bitwise.
pub fn replay(trace: &EpisodeTrace, network: Arc<RoadNetwork>) -> Result<ReplayResult> {
    let mut world = World::with_network(trace.header.scenario.clone(), network, trace.header.seed)?;
    world.set_recording(true);
    let n_agents = world.config.cav_count;
    let mut replayed: Vec<SubstepRecord> = Vec::new();
    for rec in &trace.steps {
        let Some(decisions) = &rec.decisions else { continue };
        if world.done() {
            break;
        }
        let mut actions = vec![MetaAction::Idle; n_agents];
        for d in decisions {
            if d.agent < n_agents {
                actions[d.agent] = d.executed;
            }
        }
        world.step(&actions);
        replayed.extend(world.take_substep_log());
    }
    if replayed.len() != trace.steps.len() {
        return Ok(ReplayResult::Diverged {
            step: replayed.len().min(trace.steps.len()),
            vehicle: 0,
            field: "step-count",
        });
    }
    for (rec, got) in trace.steps.iter().zip(replayed.iter()) {
        let want = &rec.substep;
        if want.step != got.step {
            return Ok(ReplayResult::Diverged { step: got.step, vehicle: 0, field: "step" });
        }
        if want.vehicles.len() != got.vehicles.len() {
            return Ok(ReplayResult::Diverged {
                step: got.step,
                vehicle: 0,
                field: "vehicle-count",
            });
        }
        for (vw, vg) in want.vehicles.iter().zip(got.vehicles.iter()) {
            let fields: [(&'static str, f64, f64); 4] = [
                ("x", vw.x, vg.x),
                ("y", vw.y, vg.y),
                ("heading", vw.heading, vg.heading),
                ("speed", vw.speed, vg.speed),
            ];
            for (name, a, b) in fields {
                if a.to_bits() != b.to_bits() {
                    return Ok(ReplayResult::Diverged {
                        step: got.step,
                        vehicle: vw.id,
                        field: name,
                    });
                }
            }
            if vw.status != vg.status {
                return Ok(ReplayResult::Diverged {
                    step: got.step,
                    vehicle: vw.id,
                    field: "status",
                });
            }
        }
    }
    Ok(ReplayResult::Match { steps: trace.steps.len() })
}
