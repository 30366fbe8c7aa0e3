//! Evaluation metrics over episode traces: outcome rates, speed and
//! acceleration statistics, and post-encroachment time (PET) at the
//! network's conflict zones.

use crate::dynamics::{DT, VEHICLE_LENGTH, VEHICLE_WIDTH};
use crate::geom::{convex_separation, obb_corners};
use crate::network::{ConflictZone, RoadNetwork};
use crate::trace::{EpisodeTrace, Outcome, StepRecord};
use crate::world::{VehicleKind, VehicleStatus};
use crate::Result;
use std::io::Write;
use std::path::Path;

/// Fraction of episodes with the given outcome.
pub fn outcome_rate(outcomes: &[Outcome], which: Outcome) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| **o == which).count() as f64 / outcomes.len() as f64
}

/// One vehicle's pass through one conflict zone.
#[derive(Clone, Copy, Debug)]
pub struct ZoneVisit {
    pub vehicle: usize,
    pub automated: bool,
    /// The route (of the zone's pair) the vehicle was travelling.
    pub route: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// A post-encroachment event: the second vehicle entered `pet` seconds
/// after the first cleared the shared zone.
#[derive(Clone, Copy, Debug)]
pub struct PetEvent {
    pub zone: usize,
    pub first: usize,
    pub second: usize,
    pub pet: f64,
}

/// Signed separation between a vehicle footprint and a zone polygon at one
/// recorded substep.
fn zone_separation(zone: &ConflictZone, x: f64, y: f64, heading: f64) -> f64 {
    let corners = obb_corners(crate::geom::Vec2::new(x, y), heading, VEHICLE_LENGTH, VEHICLE_WIDTH);
    convex_separation(&corners, &zone.polygon)
}

/// Occupancy intervals of a conflict zone, with entry and exit times
/// linearly interpolated on the separation function between substeps.
pub fn zone_visits(zone: &ConflictZone, steps: &[StepRecord]) -> Vec<ZoneVisit> {
    let mut visits = Vec::new();
    // Vehicle ids present anywhere in the trace.
    let mut ids: Vec<usize> = Vec::new();
    for rec in steps {
        for v in &rec.substep.vehicles {
            if !ids.contains(&v.id) {
                ids.push(v.id);
            }
        }
    }
    for id in ids {
        // Collect (time, separation, route, automated) samples while the
        // vehicle is in the scene and travelling one of the zone's routes.
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut automated = false;
        let mut route_used = None;
        for rec in steps {
            let Some(v) = rec.substep.vehicles.iter().find(|v| v.id == id) else { continue };
            if v.status == VehicleStatus::Arrived {
                continue;
            }
            if v.route != zone.routes.0 && v.route != zone.routes.1 {
                continue;
            }
            let t = rec.substep.step as f64 * DT;
            let sep = zone_separation(zone, v.x, v.y, v.heading);
            if sep < 0.0 {
                automated = matches!(v.kind, VehicleKind::Automated { .. });
                route_used = Some(v.route);
            }
            samples.push((t, sep));
        }
        let Some(route) = route_used else { continue };
        // First entry and last exit, refined by linear interpolation of the
        // separation across the bracketing substeps.
        let first_in = samples.iter().position(|(_, s)| *s < 0.0).unwrap();
        let last_in = samples.iter().rposition(|(_, s)| *s < 0.0).unwrap();
        let t_enter = if first_in == 0 {
            samples[0].0
        } else {
            let (t0, g0) = samples[first_in - 1];
            let (t1, g1) = samples[first_in];
            interp_zero(t0, g0, t1, g1)
        };
        let t_exit = if last_in + 1 >= samples.len() {
            samples[last_in].0
        } else {
            let (t0, g0) = samples[last_in];
            let (t1, g1) = samples[last_in + 1];
            interp_zero(t0, g0, t1, g1)
        };
        visits.push(ZoneVisit { vehicle: id, automated, route, t_enter, t_exit });
    }
    visits.sort_by(|a, b| a.t_enter.partial_cmp(&b.t_enter).unwrap());
    visits
}

/// Time at which the linear interpolant between (t0, g0) and (t1, g1)
/// crosses zero.
fn interp_zero(t0: f64, g0: f64, t1: f64, g1: f64) -> f64 {
    if (g1 - g0).abs() < 1e-12 {
        t0
    } else {
        t0 + (t1 - t0) * (g0 / (g0 - g1))
    }
}

/// All post-encroachment events in a trace: consecutive, non-overlapping
/// zone visits by vehicles on the two different routes of a zone, where at
/// least one of the pair is automated.
pub fn pet_events(trace: &EpisodeTrace, network: &RoadNetwork) -> Vec<PetEvent> {
    let mut events = Vec::new();
    for (zi, zone) in network.zones.iter().enumerate() {
        let visits = zone_visits(zone, &trace.steps);
        for pair in visits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.route == b.route {
                continue;
            }
            if !(a.automated || b.automated) {
                continue;
            }
            let pet = b.t_enter - a.t_exit;
            if pet >= 0.0 {
                events.push(PetEvent { zone: zi, first: a.vehicle, second: b.vehicle, pet });
            }
        }
    }
    events
}

/// Mean speed and mean absolute acceleration of the automated vehicles over
/// their active lifetime in a trace.
pub fn speed_accel_stats(trace: &EpisodeTrace) -> (f64, f64) {
    let mut speeds = Vec::new();
    let mut accels = Vec::new();
    let mut prev: Vec<(usize, f64)> = Vec::new();
    for rec in &trace.steps {
        let mut cur = Vec::new();
        for v in &rec.substep.vehicles {
            if !matches!(v.kind, VehicleKind::Automated { .. }) || v.status != VehicleStatus::Active
            {
                continue;
            }
            speeds.push(v.speed);
            if let Some((_, ps)) = prev.iter().find(|(id, _)| *id == v.id) {
                accels.push((v.speed - ps).abs() / DT);
            }
            cur.push((v.id, v.speed));
        }
        prev = cur;
    }
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    (mean(&speeds), mean(&accels))
}

/// Per-episode summary row.
#[derive(Clone, Debug)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub seed: u64,
    pub variant: String,
    pub outcome: Outcome,
    pub steps: usize,
    /// Sum of per-agent returns.
    pub return_total: f64,
    pub mean_speed: f64,
    pub mean_abs_accel: f64,
    pub min_pet: Option<f64>,
}

impl EpisodeMetrics {
    pub fn from_trace(trace: &EpisodeTrace, network: &RoadNetwork) -> EpisodeMetrics {
        let (mean_speed, mean_abs_accel) = speed_accel_stats(trace);
        let pets = pet_events(trace, network);
        let min_pet = pets.iter().map(|p| p.pet).fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.min(p)))
        });
        EpisodeMetrics {
            episode: trace.header.episode,
            seed: trace.header.seed,
            variant: trace.header.variant.clone(),
            outcome: trace.footer.outcome,
            steps: trace.footer.steps,
            return_total: trace.footer.returns.iter().sum(),
            mean_speed,
            mean_abs_accel,
            min_pet,
        }
    }
}

/// Schema tag written as the first line of metrics CSV files.
pub const METRICS_SCHEMA: &str = "#schema=metrics-v1";

/// Write per-episode metrics as CSV with a schema tag line, a header line,
/// and one row per episode.
pub fn write_metrics_csv(path: &Path, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_SCHEMA);
    out.push('\n');
    out.push_str("episode,seed,variant,outcome,steps,return_total,mean_speed,mean_abs_accel,min_pet\n");
    for r in rows {
        let outcome = match r.outcome {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        };
        let pet = r.min_pet.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.episode,
            r.seed,
            r.variant,
            outcome,
            r.steps,
            r.return_total,
            r.mean_speed,
            r.mean_abs_accel,
            pet
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Success/collision/timeout counts over a set of metric rows.
pub fn outcome_counts(rows: &[EpisodeMetrics]) -> (usize, usize, usize) {
    let mut c = (0, 0, 0);
    for r in rows {
        match r.outcome {
            Outcome::Success => c.0 += 1,
            Outcome::Collision => c.1 += 1,
            Outcome::Timeout => c.2 += 1,
        }
    }
    c
}
