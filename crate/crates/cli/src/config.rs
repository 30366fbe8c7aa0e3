//! Flat run configuration. Values resolve in three layers: built-in
//! defaults, then the `--config` TOML file, then command-line flags. The
//! resolved form is echoed to disk with every run so it can be replayed.

use crate::error::{CliError, Result};
use crossway_marl::train::{InspectorMode, TrainConfig};
use crossway_marl::Variant;
use crossway_sim::{ScenarioConfig, StyleMode};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys accepted in the TOML config file. Every key is optional; omitted
/// keys fall back to the built-in defaults. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub variant: Option<String>,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub workers: Option<usize>,
    pub inspector: Option<String>,
    pub out: Option<String>,
    pub record_traces: Option<bool>,
    pub cav_count: Option<usize>,
    pub hv_min: Option<usize>,
    pub hv_max: Option<usize>,
    pub hv_style: Option<String>,
    pub gamma: Option<f64>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub buffer_capacity: Option<usize>,
    pub polyak: Option<f64>,
    pub update_every_steps: Option<usize>,
    pub eps_start: Option<f64>,
    pub eps_end: Option<f64>,
    pub temp_start: Option<f64>,
    pub temp_end: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub variant: Option<String>,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub workers: Option<usize>,
    pub inspector: Option<String>,
    pub out: Option<PathBuf>,
    pub record_traces: Option<bool>,
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub variant: Variant,
    pub scenario_name: String,
    pub seed: u64,
    pub episodes: usize,
    pub workers: usize,
    pub inspector: InspectorMode,
    pub out: PathBuf,
    pub record_traces: bool,
    pub cav_count: usize,
    pub hv_min: usize,
    pub hv_max: usize,
    pub hv_style: StyleMode,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub polyak: f64,
    pub update_every_steps: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub temp_start: f64,
    pub temp_end: f64,
}

fn lanes_for(name: &str) -> Result<usize> {
    match name {
        "single_lane" => Ok(1),
        "two_lane" => Ok(2),
        "three_lane" => Ok(3),
        other => Err(CliError::config(format!(
            "unknown scenario {other:?}: expected single_lane, two_lane, or three_lane"
        ))),
    }
}

fn style_for(name: &str) -> Result<StyleMode> {
    match name {
        "normal" => Ok(StyleMode::Normal),
        "aggressive" => Ok(StyleMode::Aggressive),
        "timid" => Ok(StyleMode::Timid),
        "mixed" => Ok(StyleMode::Mixed),
        other => Err(CliError::config(format!(
            "unknown hv_style {other:?}: expected normal, aggressive, timid, or mixed"
        ))),
    }
}

fn style_name(style: StyleMode) -> &'static str {
    match style {
        StyleMode::Normal => "normal",
        StyleMode::Aggressive => "aggressive",
        StyleMode::Timid => "timid",
        StyleMode::Mixed => "mixed",
    }
}

fn inspector_name(mode: InspectorMode) -> &'static str {
    match mode {
        InspectorMode::Auto => "auto",
        InspectorMode::On => "on",
        InspectorMode::Off => "off",
    }
}

/// Merges defaults, the optional config file, and flag overrides.
/// `default_episodes` differs per command (training runs 500 episodes,
/// evaluation runs the 100-episode protocol).
pub fn resolve(
    config_path: Option<&Path>,
    over: &Overrides,
    default_episodes: usize,
) -> Result<RunConfig> {
    let file = match config_path {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let defaults = TrainConfig::new(Variant::MaGaDdpg, 7);

    let variant_name = over
        .variant
        .clone()
        .or(file.variant)
        .unwrap_or_else(|| Variant::MaGaDdpg.name().to_string());
    let variant = Variant::from_str(&variant_name)
        .map_err(|e| CliError::config(e.to_string()))?;

    let scenario_name = over
        .scenario
        .clone()
        .or(file.scenario)
        .unwrap_or_else(|| "single_lane".to_string());
    lanes_for(&scenario_name)?;

    let inspector_word = over
        .inspector
        .clone()
        .or(file.inspector)
        .unwrap_or_else(|| "auto".to_string());
    let inspector = InspectorMode::from_str(&inspector_word)
        .map_err(|e| CliError::config(e.to_string()))?;

    let style_word = file.hv_style.unwrap_or_else(|| "normal".to_string());
    let seed = over.seed.or(file.seed).unwrap_or(defaults.seed);
    let out = over
        .out
        .clone()
        .or_else(|| file.out.map(PathBuf::from))
        .unwrap_or_else(|| {
            PathBuf::from(format!("runs/{}_{}_seed{}", variant.name(), scenario_name, seed))
        });

    let cfg = RunConfig {
        variant,
        scenario_name: scenario_name.clone(),
        seed,
        episodes: over.episodes.or(file.episodes).unwrap_or(default_episodes),
        workers: over.workers.or(file.workers).unwrap_or(defaults.workers),
        inspector,
        out,
        record_traces: over
            .record_traces
            .or(file.record_traces)
            .unwrap_or(defaults.record_traces),
        cav_count: file.cav_count.unwrap_or(defaults.scenario.cav_count),
        hv_min: file.hv_min.unwrap_or(defaults.scenario.hv_count_min),
        hv_max: file.hv_max.unwrap_or(defaults.scenario.hv_count_max),
        hv_style: style_for(&style_word)?,
        gamma: file.gamma.unwrap_or(defaults.gamma),
        lr: file.lr.unwrap_or(defaults.lr),
        batch: file.batch.unwrap_or(defaults.batch),
        buffer_capacity: file.buffer_capacity.unwrap_or(defaults.buffer_capacity),
        polyak: file.polyak.unwrap_or(defaults.polyak),
        update_every_steps: file
            .update_every_steps
            .unwrap_or(defaults.update_every_steps),
        eps_start: file.eps_start.unwrap_or(defaults.eps_start),
        eps_end: file.eps_end.unwrap_or(defaults.eps_end),
        temp_start: file.temp_start.unwrap_or(defaults.temp_start),
        temp_end: file.temp_end.unwrap_or(defaults.temp_end),
    };
    cfg.scenario()?.validate().map_err(CliError::from)?;
    if cfg.episodes == 0 {
        return Err(CliError::config("episodes must be at least 1"));
    }
    Ok(cfg)
}

impl RunConfig {
    /// Scene settings implied by this configuration.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            lanes: lanes_for(&self.scenario_name)?,
            cav_count: self.cav_count,
            hv_count_min: self.hv_min,
            hv_count_max: self.hv_max,
            hv_style: self.hv_style,
            ..ScenarioConfig::default()
        })
    }

    /// Full training settings implied by this configuration.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(self.variant, self.seed);
        cfg.scenario = self.scenario()?;
        cfg.episodes = self.episodes;
        cfg.workers = self.workers;
        cfg.inspector = self.inspector;
        cfg.gamma = self.gamma;
        cfg.lr = self.lr;
        cfg.batch = self.batch;
        cfg.buffer_capacity = self.buffer_capacity;
        cfg.polyak = self.polyak;
        cfg.update_every_steps = self.update_every_steps;
        cfg.eps_start = self.eps_start;
        cfg.eps_end = self.eps_end;
        cfg.temp_start = self.temp_start;
        cfg.temp_end = self.temp_end;
        cfg.record_traces = self.record_traces;
        Ok(cfg)
    }

    /// The resolved configuration as a TOML document, in the documented key
    /// order. Readable back through `FileConfig`.
    pub fn toml_echo(&self) -> String {
        format!(
            "variant = \"{}\"\n\
             scenario = \"{}\"\n\
             seed = {}\n\
             episodes = {}\n\
             workers = {}\n\
             inspector = \"{}\"\n\
             out = \"{}\"\n\
             record_traces = {}\n\
             cav_count = {}\n\
             hv_min = {}\n\
             hv_max = {}\n\
             hv_style = \"{}\"\n\
             gamma = {}\n\
             lr = {}\n\
             batch = {}\n\
             buffer_capacity = {}\n\
             polyak = {}\n\
             update_every_steps = {}\n\
             eps_start = {}\n\
             eps_end = {}\n\
             temp_start = {}\n\
             temp_end = {}\n",
            self.variant.name(),
            self.scenario_name,
            self.seed,
            self.episodes,
            self.workers,
            inspector_name(self.inspector),
            self.out.display(),
            self.record_traces,
            self.cav_count,
            self.hv_min,
            self.hv_max,
            style_name(self.hv_style),
            self.gamma,
            self.lr,
            self.batch,
            self.buffer_capacity,
            self.polyak,
            self.update_every_steps,
            self.eps_start,
            self.eps_end,
            self.temp_start,
            self.temp_end,
        )
    }

    /// Configuration section of the run manifest.
    pub fn manifest_value(&self) -> serde_json::Value {
        serde_json::json!({
            "variant": self.variant.name(),
            "scenario": self.scenario_name,
            "seed": self.seed,
            "episodes": self.episodes,
            "workers": self.workers,
            "inspector": inspector_name(self.inspector),
            "out": self.out.display().to_string(),
            "record_traces": self.record_traces,
            "cav_count": self.cav_count,
            "hv_min": self.hv_min,
            "hv_max": self.hv_max,
            "hv_style": style_name(self.hv_style),
            "gamma": self.gamma,
            "lr": self.lr,
            "batch": self.batch,
            "buffer_capacity": self.buffer_capacity,
            "polyak": self.polyak,
            "update_every_steps": self.update_every_steps,
            "eps_start": self.eps_start,
            "eps_end": self.eps_end,
            "temp_start": self.temp_start,
            "temp_end": self.temp_end,
        })
    }
}
