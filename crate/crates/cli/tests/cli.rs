use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use platoon_cli::{EXIT_COLLISION, EXIT_CONFIG};

const GOLDEN_HEADER: &str = "t,vehicle,x,v,a,a_des,mode,R,Rdot,Rdot_mod,RH,h_eff,spacing_error";

fn platoon(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PLATOON_OUT")
        .output()
        .expect("spawn platoon")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn trace_header_is_pinned() {
    let tmp = tempfile::tempdir().unwrap();
    let o = platoon(&["run", "--preset", "braking-dry-cacc", "--out", "o", "--format", "trace-csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("o/braking-dry-cacc/trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(GOLDEN_HEADER));
    assert_eq!(lines.next(), Some("0,0,0,25,0,0,,,,,,,"));
    assert!(!csv.contains('\r'));
    // 3 vehicles, 20001 steps
    assert_eq!(csv.lines().count(), 1 + 3 * 20001);
    assert!(!tmp.path().join("o/braking-dry-cacc/summary.toml").exists());
}

#[test]
fn braking_dry_cacc_is_collision_free() {
    let tmp = tempfile::tempdir().unwrap();
    let o = platoon(&["run", "--preset", "braking-dry-cacc", "--out", "o", "--format", "summary"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: toml::Table = fs::read_to_string(tmp.path().join("o/braking-dry-cacc/summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["collision"].as_bool(), Some(false));
    assert!(summary["min_range"].as_float().unwrap() > 0.0);
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = platoon(&["run", "--preset", "oscillatory-2-cacc", "--seed", "42", "--out", out], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["trace.csv", "summary.toml", "scenario.toml", "plot/accel_v7.dat", "plot/spacing_error_v3.dat"] {
        let a = fs::read(tmp.path().join("a/oscillatory-2-cacc").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b/oscillatory-2-cacc").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
    let scenario = fs::read_to_string(tmp.path().join("a/oscillatory-2-cacc/scenario.toml")).unwrap();
    assert!(scenario.contains("seed = 42"));
}

#[test]
fn plot_data_is_two_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let o = platoon(&["run", "--preset", "braking-wet-acc", "--out", "o", "--format", "plot-data"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let plot = tmp.path().join("o/braking-wet-acc/plot");
    let mut names: Vec<String> = fs::read_dir(&plot).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "accel_v0.dat", "accel_v1.dat", "accel_v2.dat", "range_v1.dat", "range_v2.dat", "spacing_error_v1.dat",
            "spacing_error_v2.dat", "velocity_v0.dat", "velocity_v1.dat", "velocity_v2.dat"
        ]
    );
    let text = fs::read_to_string(plot.join("velocity_v0.dat")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# t v"));
    assert_eq!(lines.next(), Some("0 25"));
    assert!(lines.all(|l| l.split(' ').count() == 2));
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[run]
preset = "braking-dry-acc"
out = "sweep"
formats = ["summary"]

[[sweep]]
key = "acc.h"
values = [0.6, 1.1]

[[sweep]]
key = "controller"
values = ["acc", "cacc"]
"#;
    fs::write(tmp.path().join("sweep.toml"), cfg).unwrap();
    let o = platoon(&["run", "--config", "sweep.toml"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut dirs: Vec<String> = fs::read_dir(tmp.path().join("sweep/braking-dry-acc"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    dirs.sort();
    assert_eq!(
        dirs,
        ["acc.h=0.6_controller=acc", "acc.h=0.6_controller=cacc", "acc.h=1.1_controller=acc", "acc.h=1.1_controller=cacc"]
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 4);
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_platoon"))
        .args(["run", "--preset", "braking-dry-acc", "--format", "summary"])
        .current_dir(tmp.path())
        .env("PLATOON_OUT", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("from-env/braking-dry-acc/summary.toml").exists());
}

#[test]
fn negative_time_gap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[run]\npreset = \"braking-dry-acc\"\n\n[set]\nacc.h = -1.0\n").unwrap();
    let o = platoon(&["run", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("h must be positive"), "{}", stderr(&o));
}

#[test]
fn syntax_error_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), "[run]\npreset = \"braking-dry-acc\"\nseed = = 1\n").unwrap();
    let o = platoon(&["run", "--config", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn collision_has_its_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[run]\npreset = \"braking-dry-acc\"\nformats = [\"summary\"]\n\n[set]\nacc.a_min_des = -1.0\n";
    fs::write(tmp.path().join("weak.toml"), cfg).unwrap();
    let o = platoon(&["run", "--config", "weak.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(EXIT_COLLISION), "{}", stderr(&o));
    assert!(stderr(&o).contains("collision"));
    let summary = fs::read_to_string(tmp.path().join("out/braking-dry-acc/summary.toml")).unwrap();
    assert!(summary.contains("collision = true"));
}

#[test]
fn report_tabulates_runs_and_warns_on_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    for preset in ["oscillatory-1-acc", "oscillatory-1-cacc", "braking-dry-acc"] {
        let o = platoon(&["run", "--preset", preset, "--out", "o", "--format", "trace-csv"], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = platoon(&["report", "o/oscillatory-1-acc", "o/oscillatory-1-cacc/trace.csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("Commercial ACC"));
    assert!(lines[2].starts_with("Connected ACC with Add-Ons"));
    assert!(stderr(&o).is_empty());

    let o = platoon(&["report", "o/oscillatory-1-acc", "o/braking-dry-acc"], tmp.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("different scenario"));

    let o = platoon(&["report", "o/braking-dry-acc"], tmp.path());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
}

#[test]
fn list_presets_names_all_eleven() {
    let tmp = tempfile::tempdir().unwrap();
    let o = platoon(&["list-presets"], tmp.path());
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 11);
    for name in platoon_cli::presets::names() {
        assert!(out.contains(name));
    }
}

#[test]
fn missing_scenario_source_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = platoon(&["run"], tmp.path());
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}
