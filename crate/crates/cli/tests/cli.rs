//! End-to-end command tests: artifact layout, exit codes, stdout content,
//! and the replay verification path, exercised both in-process and through
//! the compiled binary.

use crossway_cli::error::{EXIT_CONFIG, EXIT_DIVERGED, EXIT_USAGE, EXIT_VERSION};
use crossway_cli::run_cli;
use crossway_marl::Learner;
use crossway_sim::trace::EpisodeTrace;
use std::path::{Path, PathBuf};
use std::process::Command;

/// A configuration small enough that `train` finishes in well under a second.
const TINY_CONFIG: &str = r#"
variant = "maddpg"
scenario = "single_lane"
seed = 11
episodes = 2
workers = 1
cav_count = 2
hv_min = 0
hv_max = 0
batch = 8
buffer_capacity = 64
update_every_steps = 40
"#;

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    path
}

fn run(args: &[&str]) -> i32 {
    let argv = std::iter::once("crossway").chain(args.iter().copied());
    run_cli(argv)
}

/// Run the compiled binary and capture exit code, stdout, and stderr.
fn run_bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_crossway"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Train the tiny configuration into `out`, optionally recording traces.
fn train_tiny(dir: &Path, out: &Path, traces: bool) {
    let config = write_tiny_config(dir);
    let mut args = vec![
        "train".to_string(),
        format!("--config={}", config.display()),
        format!("--out={}", out.display()),
    ];
    if traces {
        args.push("--trace".to_string());
    }
    let arg_refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    assert_eq!(run(&arg_refs), 0, "tiny training run failed");
}

#[test]
fn train_writes_log_checkpoint_manifest_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, false);

    let log = std::fs::read_to_string(out.join("train.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next().unwrap(), "#schema=train-v1");
    let header = lines.next().unwrap();
    assert!(header.starts_with("episode,"));
    assert!(header.ends_with(",wall_ms"));
    assert_eq!(lines.count(), 2, "one row per episode");

    let learner = Learner::load(&out.join("checkpoint.bin")).unwrap();
    assert_eq!(learner.episodes_trained, 2);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["variant"], "maddpg");
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["config"]["episodes"], 2);
    assert!(manifest["version"].as_str().is_some_and(|v| !v.is_empty()));
    assert!(manifest["outputs"].is_object());
    assert!(manifest["results"].is_object());
    assert!(manifest["schemas"].is_object());

    let echo: toml::Value =
        toml::from_str(&std::fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echo["variant"].as_str(), Some("maddpg"));
    assert_eq!(echo["episodes"].as_integer(), Some(2));
    assert_eq!(echo["cav_count"].as_integer(), Some(2));
}

#[test]
fn evaluate_writes_metrics_with_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, false);

    let config = write_tiny_config(dir.path());
    let eval_out = dir.path().join("eval");
    let code = run(&[
        "evaluate",
        &format!("--config={}", config.display()),
        &format!("--checkpoint={}", out.join("checkpoint.bin").display()),
        &format!("--out={}", eval_out.display()),
        "--episodes=3",
    ]);
    assert_eq!(code, 0);

    let csv = std::fs::read_to_string(eval_out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("#schema=metrics-v1\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    for key in [
        "#success_rate=",
        "#collision_rate=",
        "#timeout_rate=",
        "#mean_return=",
        "#mean_speed=",
    ] {
        assert!(csv.contains(key), "metrics.csv missing {key}");
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["config"]["episodes"], 3);
}

#[test]
fn replay_verifies_a_recorded_trace_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, true);

    let trace = out.join("traces").join("episode_0000.jsonl");
    assert!(trace.is_file(), "training with --trace writes episode files");
    let (code, stdout, _) = run_bin(&["replay", &format!("--trace={}", trace.display())]);
    assert_eq!(code, 0);
    assert!(stdout.contains("identical"), "stdout: {stdout}");
    assert!(stdout.contains("outcome"), "narration summary missing");
}

#[test]
fn replay_detects_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, true);

    let path = out.join("traces").join("episode_0001.jsonl");
    let mut trace = EpisodeTrace::load_jsonl(&path).unwrap();
    let mid = trace.steps.len() / 2;
    trace.steps[mid].substep.vehicles[0].speed += 0.25;
    let tampered = dir.path().join("tampered.jsonl");
    trace.save_jsonl(&tampered).unwrap();

    let (code, stdout, _) = run_bin(&["replay", &format!("--trace={}", tampered.display())]);
    assert_eq!(code, EXIT_DIVERGED);
    assert!(stdout.contains("DIVERGED"), "stdout: {stdout}");
}

#[test]
fn replay_rejects_an_unknown_trace_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, true);

    let path = out.join("traces").join("episode_0000.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = dir.path().join("future.jsonl");
    std::fs::write(&bumped, text.replacen("trace-v1", "trace-v9", 1)).unwrap();
    assert_eq!(
        run(&["replay", &format!("--trace={}", bumped.display())]),
        EXIT_VERSION
    );
}

#[test]
fn usage_errors_exit_with_code_2() {
    assert_eq!(run(&["train", "--no-such-flag"]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&[]), EXIT_USAGE);
    // evaluate requires --checkpoint; replay requires --trace.
    assert_eq!(run(&["evaluate"]), EXIT_USAGE);
    assert_eq!(run(&["replay"]), EXIT_USAGE);
}

#[test]
fn help_and_version_are_successful() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&["train", "--help"]), 0);
}

#[test]
fn configuration_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();

    assert_eq!(run(&["inspect-config", "--variant=ddpg"]), EXIT_CONFIG);
    assert_eq!(run(&["inspect-config", "--scenario=four_lane"]), EXIT_CONFIG);
    assert_eq!(run(&["inspect-config", "--inspector=maybe"]), EXIT_CONFIG);
    assert_eq!(run(&["inspect-config", "--episodes=0"]), EXIT_CONFIG);

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        run(&["inspect-config", &format!("--config={}", missing.display())]),
        EXIT_CONFIG
    );

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "variant = \"maddpg\"\nlearning_rate = 0.5\n").unwrap();
    assert_eq!(
        run(&["inspect-config", &format!("--config={}", unknown.display())]),
        EXIT_CONFIG
    );

    let invalid = dir.path().join("invalid.toml");
    std::fs::write(&invalid, "variant = [not toml").unwrap();
    assert_eq!(
        run(&["inspect-config", &format!("--config={}", invalid.display())]),
        EXIT_CONFIG
    );
}

#[test]
fn evaluate_rejects_a_corrupted_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    train_tiny(dir.path(), &out, false);
    let good = std::fs::read(out.join("checkpoint.bin")).unwrap();

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a checkpoint at all").unwrap();
    let truncated = dir.path().join("truncated.bin");
    std::fs::write(&truncated, &good[..good.len() / 2]).unwrap();

    let config = write_tiny_config(dir.path());
    for bad in [&junk, &truncated] {
        let code = run(&[
            "evaluate",
            &format!("--config={}", config.display()),
            &format!("--checkpoint={}", bad.display()),
            &format!("--out={}", dir.path().join("eval").display()),
            "--episodes=1",
        ]);
        assert_eq!(code, EXIT_VERSION, "checkpoint {}", bad.display());
    }
}

#[test]
fn inspect_config_echoes_resolved_settings_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());

    // Defaults fill anything the file and flags leave unset.
    let (code, stdout, _) = run_bin(&["inspect-config", "--variant=ma_ga_ddpg", "--seed=3"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("variant = \"ma_ga_ddpg\""), "{stdout}");
    assert!(stdout.contains("seed = 3"));
    assert!(stdout.contains("episodes = 500"), "train default episodes");
    assert!(stdout.contains("out = \"runs/ma_ga_ddpg_single_lane_seed3\""));
    assert!(stdout.contains("inspector = \"auto\""));

    // Flags override file values; untouched file values survive.
    let (code, stdout, _) = run_bin(&[
        "inspect-config",
        &format!("--config={}", config.display()),
        "--episodes=7",
        "--scenario=two_lane",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("episodes = 7"), "{stdout}");
    assert!(stdout.contains("scenario = \"two_lane\""));
    assert!(stdout.contains("variant = \"maddpg\""), "file value kept");
    assert!(stdout.contains("seed = 11"), "file value kept");

    // The echo is itself a loadable configuration.
    let echoed = dir.path().join("echo.toml");
    std::fs::write(&echoed, &stdout).unwrap();
    let (code, second, _) =
        run_bin(&["inspect-config", &format!("--config={}", echoed.display())]);
    assert_eq!(code, 0);
    assert_eq!(second, stdout, "echo round-trips exactly");
}

#[test]
fn training_is_reproducible_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    train_tiny(dir.path(), &out_a, true);
    train_tiny(dir.path(), &out_b, true);

    let log_a = std::fs::read_to_string(out_a.join("train.csv")).unwrap();
    let log_b = std::fs::read_to_string(out_b.join("train.csv")).unwrap();
    // Every column except wall-clock time must match bit for bit.
    for (la, lb) in log_a.lines().zip(log_b.lines()) {
        if la.starts_with('#') || la.starts_with("episode") {
            assert_eq!(la, lb);
            continue;
        }
        let strip = |l: &str| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap();
        assert_eq!(strip(la), strip(lb));
    }
    assert_eq!(
        std::fs::read(out_a.join("checkpoint.bin")).unwrap(),
        std::fs::read(out_b.join("checkpoint.bin")).unwrap(),
        "checkpoints are byte-identical"
    );
    assert_eq!(
        std::fs::read(out_a.join("traces/episode_0000.jsonl")).unwrap(),
        std::fs::read(out_b.join("traces/episode_0000.jsonl")).unwrap(),
        "traces are byte-identical"
    );
}
