use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use attenface_cli::{diff_tables, oracle_report, run_scenario, Mode, RunOptions, RunReport};
use attenface_core::scenario::{build_scenario, generate_scenario, GeneratorConfig, ScenarioFile};

fn attenface(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attenface"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, file: &ScenarioFile) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(file).unwrap()).unwrap();
    path
}

fn options(mode: Mode) -> RunOptions {
    RunOptions {
        mode,
        program: Some(env!("CARGO_BIN_EXE_attenface").into()),
        ..Default::default()
    }
}

#[test]
fn concurrent_sequential_and_networked_agree() {
    let file = generate_scenario(&GeneratorConfig {
        students: 30,
        sessions: 20,
        courses: 10,
        noise_sigma: 0.05,
        ..Default::default()
    });
    let concurrent = run_scenario(&file, &options(Mode::InProcess)).unwrap();
    let sequential = run_scenario(
        &file,
        &RunOptions {
            sequential: true,
            ..options(Mode::InProcess)
        },
    )
    .unwrap();
    let networked = run_scenario(&file, &options(Mode::Networked)).unwrap();
    assert_eq!(concurrent.sessions.len(), 20);
    assert_eq!(concurrent.tables_json(), sequential.tables_json());
    assert_eq!(concurrent.tables_json(), networked.tables_json());
    assert_eq!(concurrent.errors, networked.errors);
}

#[test]
fn zero_noise_run_matches_the_oracle() {
    let file = generate_scenario(&GeneratorConfig {
        students: 20,
        sessions: 6,
        ..Default::default()
    });
    let report = run_scenario(&file, &options(Mode::InProcess)).unwrap();
    let oracle = oracle_report(&build_scenario(file).unwrap()).unwrap();
    assert_eq!(report.errors.total(), 0);
    assert_eq!(diff_tables(&oracle, &report), Vec::<String>::new());
}

#[test]
fn camera_faults_match_the_oracle() {
    let mut file = generate_scenario(&GeneratorConfig {
        students: 15,
        sessions: 6,
        courses: 3,
        ..Default::default()
    });
    file.offline_cameras
        .insert(file.sessions[1].camera_id.clone());
    file.failed_snapshots
        .insert(file.sessions[0].id.clone(), [0, 2].into());
    let report = run_scenario(&file, &options(Mode::InProcess)).unwrap();
    let oracle = oracle_report(&build_scenario(file.clone()).unwrap()).unwrap();
    assert_eq!(diff_tables(&oracle, &report), Vec::<String>::new());
    let failed = report
        .sessions
        .iter()
        .filter(|s| s.state == "failed")
        .count();
    assert_eq!(failed, 2, "both sessions on the offline camera");
    assert!(report.sessions[0]
        .rows
        .iter()
        .all(|r| &r.blocks[0..1] == "0"));
}

#[test]
fn noise_degrades_recognition_monotonically() {
    let mut errors = Vec::new();
    for sigma in [0.0, 0.02, 0.05, 0.1] {
        let file = generate_scenario(&GeneratorConfig {
            students: 50,
            sessions: 10,
            noise_sigma: sigma,
            ..Default::default()
        });
        errors.push(
            run_scenario(&file, &options(Mode::InProcess))
                .unwrap()
                .errors
                .total(),
        );
    }
    assert_eq!(errors[0], 0);
    assert!(errors.windows(2).all(|w| w[0] <= w[1]), "{errors:?}");
    assert!(errors[3] > 0, "{errors:?}");
}

#[test]
fn malformed_scenario_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"seed\": 1, \"students\": [}").unwrap();
    let out = attenface(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));

    let mut overlapping = generate_scenario(&GeneratorConfig {
        students: 3,
        sessions: 2,
        courses: 1,
        ..Default::default()
    });
    overlapping.sessions[1].start = overlapping.sessions[0].start;
    let path = write(dir.path(), "overlap.json", &overlapping);
    let out = attenface(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));

    let out = attenface(&["oracle", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_oracle_and_diff_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate_scenario(&GeneratorConfig {
        students: 10,
        sessions: 4,
        ..Default::default()
    });
    let scenario = write(dir.path(), "s.json", &file);
    let run_json = dir.path().join("run.json");
    let oracle_json = dir.path().join("oracle.json");

    let out = attenface(&[
        "run",
        scenario.to_str().unwrap(),
        "--mode",
        "networked",
        "--json",
        run_json.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("oracle: match"));
    let out = attenface(&[
        "oracle",
        scenario.to_str().unwrap(),
        "--json",
        oracle_json.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let out = attenface(&[
        "diff",
        run_json.to_str().unwrap(),
        oracle_json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let mut tampered: RunReport =
        serde_json::from_str(&std::fs::read_to_string(&oracle_json).unwrap()).unwrap();
    let row = &mut tampered.sessions[0].rows[0];
    row.present = !row.present;
    let tampered_json = dir.path().join("tampered.json");
    std::fs::write(&tampered_json, serde_json::to_string(&tampered).unwrap()).unwrap();
    let out = attenface(&[
        "diff",
        run_json.to_str().unwrap(),
        tampered_json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains(&tampered.sessions[0].session_id));
}

#[test]
fn seed_writes_a_database() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate_scenario(&GeneratorConfig {
        students: 4,
        sessions: 2,
        ..Default::default()
    });
    let scenario = write(dir.path(), "s.json", &file);
    let db = dir.path().join("a.db");
    let out = attenface(&[
        "seed",
        scenario.to_str().unwrap(),
        "--db",
        db.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 sessions"));
    assert!(db.exists());
}
