use std::path::Path;
use std::process::{Command, Output};

use tcnn_core::audit::{AuditReport, SURFACE_HEADER};
use tcnn_core::dataset::Dataset;
use tcnn_core::mlp::{init_params, Architecture, Domain, ModelParams};
use tcnn_core::trainer::TrainReport;
use tcnn_cli::config::RunConfig;

fn tcnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcnn"))
        .args(args)
        .current_dir(dir)
        .env_remove("TCNN_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "seed": 4,
  "oracle": {"noise_std": 0.02},
  "train": {"epochs": 150, "architecture": {"hidden": [8, 8]}, "grid": {"paths": 6, "stations": 10}, "history_every": 50},
  "audit": {"grid": {"paths": 8, "stations": 12}},
  "search": {"budget": 2, "space": {"hidden": [[4], [6]]}}
}"#;

#[test]
fn synth_writes_reproduction_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let o = tcnn(&["synth", "--out", "data.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 237);
    assert_eq!(text.lines().next().unwrap(), "path_id,phi_deg,delta_norm,j_n,j_t");
    assert!(!text.contains('\r'));
    let echo = RunConfig::load(&dir.path().join("data.config.json")).unwrap();
    assert_eq!(echo.oracle.noise_std, 0.0);
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), SMALL).unwrap();
    let steps: [&[&str]; 5] = [
        &["synth", "--config", "c.json", "--out", "data.csv"],
        &["train", "--config", "c.json", "--data", "data.csv", "--model", "model.json"],
        &["audit", "--config", "c.json", "--model", "model.json", "--out", "audit.json", "--surface", "surface.csv"],
        &["export", "--config", "c.json", "--model", "model.json", "--out", "export.csv"],
        &["hpo", "--config", "c.json", "--data", "data.csv", "--out", "board.json"],
    ];
    for args in steps {
        let o = tcnn(args, d);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    }

    assert_eq!(Dataset::load(&d.join("data.csv")).unwrap().len(), 236);
    let model = ModelParams::load(&d.join("model.json")).unwrap();
    assert!(model.domain.is_some());
    let report: TrainReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("model.report.json")).unwrap()).unwrap();
    assert_eq!(report.version, "tcnn-report/1");
    assert_eq!(report.seed, 4);
    assert_eq!(report.history.last().unwrap().loss, report.final_loss);

    let audit: AuditReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("audit.json")).unwrap()).unwrap();
    assert_eq!(audit.version, "tcnn-audit/1");
    assert_eq!((audit.grid.paths, audit.grid.stations), (8, 12));
    let surface = std::fs::read_to_string(d.join("surface.csv")).unwrap();
    let export = std::fs::read_to_string(d.join("export.csv")).unwrap();
    assert_eq!(surface, export);
    assert_eq!(surface.lines().next().unwrap(), SURFACE_HEADER.join(","));
    assert_eq!(surface.lines().count(), 1 + 8 * 12);

    let board: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("board.json")).unwrap()).unwrap();
    assert_eq!(board["leaderboard"].as_array().unwrap().len(), 2);

    for echo in ["data", "model", "audit", "export", "board"] {
        let c = RunConfig::load(&d.join(format!("{echo}.config.json"))).unwrap();
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.train.seed, 4);
    }
}

#[test]
fn missing_model_is_a_validation_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = tcnn(&["audit", "--model", "nowhere/model.json", "--out", "a.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere/model.json"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tcnn(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(tcnn(&["synth", "--out", "x.csv", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(tcnn(&["synth"], dir.path()).status.code(), Some(1));
    assert_eq!(tcnn(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"train": {"weights": {"mse": 0.5, "tc1": 0.5, "tc2": 0.5, "tc3": 0}}}"#,
    )
    .unwrap();
    let o = tcnn(&["synth", "--config", "c.json", "--out", "d.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("loss weights must sum to 1"));
}

#[test]
fn bad_dataset_row_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.csv"),
        "path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,95,1,1,1\n",
    )
    .unwrap();
    let o = tcnn(&["train", "--data", "d.csv", "--model", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("phase angle out of range") && err.contains("row 3"), "{err}");
}

#[test]
fn degenerate_surface_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = init_params(&Architecture::new(vec![3]).unwrap(), 0).unwrap();
    for l in &mut model.layers {
        l.weights.fill(0.0);
    }
    model.domain = Some(Domain {
        phi_min: 0.0,
        phi_max: 1.0,
        max_separation: 1.0,
    });
    model.save(&dir.path().join("zero.json")).unwrap();
    let o = tcnn(&["audit", "--model", "zero.json", "--out", "a.json"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate"));
}

#[test]
fn seed_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"seed": 1, "oracle": {"noise_std": 0.05}}"#).unwrap();
    let run = |extra: &[&str], env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tcnn"));
        cmd.args(["synth", "--config", "c.json", "--out", out]).args(extra).current_dir(d);
        match env {
            Some(v) => cmd.env("TCNN_SEED", v),
            None => cmd.env_remove("TCNN_SEED"),
        };
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        std::fs::read(d.join(out)).unwrap()
    };
    let config_seed = run(&[], None, "a.csv");
    let env_seed = run(&[], Some("2"), "b.csv");
    let flag_seed = run(&["--seed", "2"], Some("7"), "c.csv");
    assert_ne!(config_seed, env_seed);
    assert_eq!(env_seed, flag_seed);
    assert_eq!(RunConfig::load(&d.join("c.config.json")).unwrap().seed, Some(2));

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tcnn"));
    let o = cmd
        .args(["synth", "--out", "x.csv"])
        .env("TCNN_SEED", "minus one")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_export_has_closed_form_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = tcnn(&["export", "--oracle", "--out", "o.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("o.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 32 * 64);
    let o = tcnn(&["audit", "--oracle", "--out", "a.json"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let audit: AuditReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(audit.fractions.overall, 0.0);
}
