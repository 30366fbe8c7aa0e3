//! The four subcommands: train, evaluate, replay, inspect-config.

use crate::config::RunConfig;
use crate::error::{CliError, Result, EXIT_DIVERGED, EXIT_OK};
use crossway_marl::evaluate::{evaluate, EvalConfig};
use crossway_marl::nets::Learner;
use crossway_marl::train::{train, write_train_csv};
use crossway_sim::metrics::write_metrics_csv;
use crossway_sim::network::build_network;
use crossway_sim::trace::{replay, EpisodeTrace, ReplayResult};
use crossway_sim::world::EventKind;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))
}

fn write_manifest(
    cfg: &RunConfig,
    command: &str,
    outputs: serde_json::Value,
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.manifest_value(),
        "outputs": outputs,
        "results": extra,
        "schemas": {
            "train_csv": "train-v1",
            "metrics_csv": "metrics-v1",
            "trace": crossway_sim::trace::TRACE_SCHEMA,
        },
    });
    let path = cfg.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::io(format!("manifest serialization failed: {e}")))?;
    std::fs::write(&path, text)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_config_echo(cfg: &RunConfig) -> Result<()> {
    let path = cfg.out.join("config.toml");
    std::fs::write(&path, cfg.toml_echo())
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn write_traces(dir: &Path, traces: &[EpisodeTrace]) -> Result<Vec<String>> {
    ensure_dir(dir)?;
    let mut names = Vec::with_capacity(traces.len());
    for trace in traces {
        let name = format!("episode_{:04}.jsonl", trace.header.episode);
        trace.save_jsonl(&dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<i32> {
    let train_cfg = cfg.train_config()?;
    ensure_dir(&cfg.out)?;
    let result = train(&train_cfg)?;

    let csv_path = cfg.out.join("train.csv");
    write_train_csv(&csv_path, &result.log)?;
    let ckpt_path = cfg.out.join("checkpoint.bin");
    result.learner.save(&ckpt_path)?;
    let trace_names = if cfg.record_traces {
        write_traces(&cfg.out.join("traces"), &result.traces)?
    } else {
        Vec::new()
    };
    write_config_echo(cfg)?;

    let (succ, coll, tout) = count_outcomes(result.log.iter().map(|r| r.outcome));
    write_manifest(
        cfg,
        "train",
        serde_json::json!({
            "train_csv": "train.csv",
            "checkpoint": "checkpoint.bin",
            "config_echo": "config.toml",
            "traces": trace_names,
        }),
        serde_json::json!({
            "episodes": result.log.len(),
            "update_rounds": result.rounds,
            "success": succ,
            "collision": coll,
            "timeout": tout,
        }),
    )?;

    println!(
        "trained {} for {} episodes ({} update rounds): {} success / {} collision / {} timeout",
        cfg.variant.name(),
        result.log.len(),
        result.rounds,
        succ,
        coll,
        tout
    );
    println!("outputs in {}", cfg.out.display());
    Ok(EXIT_OK)
}

fn count_outcomes(
    outcomes: impl Iterator<Item = crossway_sim::trace::Outcome>,
) -> (usize, usize, usize) {
    use crossway_sim::trace::Outcome;
    let mut counts = (0, 0, 0);
    for o in outcomes {
        match o {
            Outcome::Success => counts.0 += 1,
            Outcome::Collision => counts.1 += 1,
            Outcome::Timeout => counts.2 += 1,
        }
    }
    counts
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<i32> {
    let learner = Learner::load(checkpoint)?;
    let eval_cfg = EvalConfig {
        scenario: cfg.scenario()?,
        episodes: cfg.episodes,
        seed: cfg.seed,
        inspector: cfg.inspector,
    };
    ensure_dir(&cfg.out)?;
    let summary = evaluate(&learner, &eval_cfg)?;

    let csv_path = cfg.out.join("metrics.csv");
    write_metrics_csv(&csv_path, &summary.metrics)?;
    append_summary_rows(&csv_path, &summary)?;
    let trace_names = if cfg.record_traces {
        write_traces(&cfg.out.join("traces"), &summary.traces)?
    } else {
        Vec::new()
    };
    write_config_echo(cfg)?;

    write_manifest(
        cfg,
        "evaluate",
        serde_json::json!({
            "metrics_csv": "metrics.csv",
            "config_echo": "config.toml",
            "checkpoint": checkpoint.display().to_string(),
            "traces": trace_names,
        }),
        serde_json::json!({
            "episodes": summary.metrics.len(),
            "success_rate": summary.success_rate,
            "collision_rate": summary.collision_rate,
            "timeout_rate": summary.timeout_rate,
            "mean_return": summary.mean_return,
            "mean_speed": summary.mean_speed,
            "min_pet": summary.min_pet,
            "corrected": summary.corrected,
        }),
    )?;

    println!(
        "evaluated {} over {} episodes: success {:.1}% / collision {:.1}% / timeout {:.1}%",
        learner.variant.name(),
        summary.metrics.len(),
        summary.success_rate * 100.0,
        summary.collision_rate * 100.0,
        summary.timeout_rate * 100.0,
    );
    if summary.corrected > 0 {
        println!("inspector corrected {} decisions", summary.corrected);
    }
    println!("outputs in {}", cfg.out.display());
    Ok(EXIT_OK)
}

/// Appends aggregate rates to the metrics CSV as comment rows, next to the
/// per-episode data they summarize.
fn append_summary_rows(
    path: &Path,
    summary: &crossway_marl::evaluate::EvalSummary,
) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(format!("cannot append to {}: {e}", path.display())))?;
    let min_pet = summary
        .min_pet
        .map_or("none".to_string(), |v| format!("{v}"));
    write!(
        file,
        "#success_rate={}\n#collision_rate={}\n#timeout_rate={}\n#mean_return={}\n#mean_speed={}\n#min_pet={min_pet}\n#corrected={}\n",
        summary.success_rate,
        summary.collision_rate,
        summary.timeout_rate,
        summary.mean_return,
        summary.mean_speed,
        summary.corrected,
    )
    .map_err(|e| CliError::io(format!("cannot append to {}: {e}", path.display())))
}

pub fn cmd_replay(trace_path: &Path) -> Result<i32> {
    let trace = EpisodeTrace::load_jsonl(trace_path)?;
    let network = Arc::new(build_network(trace.header.scenario.lanes)?);

    println!(
        "episode {} seed {} variant {} ({} decision steps)",
        trace.header.episode,
        trace.header.seed,
        trace.header.variant,
        trace.steps.len()
    );
    for step in &trace.steps {
        if let Some(decisions) = &step.decisions {
            let actions: Vec<String> = decisions
                .iter()
                .map(|d| {
                    let mark = if d.proposed != d.executed { "*" } else { "" };
                    format!("agent{}={:?}{mark}", d.agent, d.executed)
                })
                .collect();
            println!("step {:>4}: {}", step.substep.step, actions.join(" "));
        }
        for event in &step.substep.events {
            match &event.kind {
                EventKind::Collision { a, b } => println!(
                    "step {:>4}: collision between vehicle {a} and vehicle {b}",
                    event.step
                ),
                EventKind::Arrival { id } => {
                    println!("step {:>4}: vehicle {id} arrived", event.step)
                }
                _ => {}
            }
        }
    }
    println!(
        "outcome {:?} after {} steps, returns {:?}",
        trace.footer.outcome, trace.footer.steps, trace.footer.returns
    );

    match replay(&trace, network)? {
        ReplayResult::Match { steps } => {
            println!("replay: identical ({steps} decision steps re-simulated bit-for-bit)");
            Ok(EXIT_OK)
        }
        ReplayResult::Diverged { step, vehicle, field } => {
            println!("replay: DIVERGED at step {step}, vehicle {vehicle}, field {field}");
            Ok(EXIT_DIVERGED)
        }
    }
}

pub fn cmd_inspect_config(cfg: &RunConfig) -> Result<i32> {
    print!("{}", cfg.toml_echo());
    Ok(EXIT_OK)
}
