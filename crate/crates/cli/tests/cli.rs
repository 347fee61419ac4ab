use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use owc::config::{load_config, RunConfig};
use owc::output::parse_sweep_csv;
use owc::ratesplit::Scheme;

fn owc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owc"))
        .args(args)
        .env_remove("OWC_CONFIG")
        .env_remove("OWC_SEED")
        .env_remove("OWC_TRIALS")
        .env_remove("OWC_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = owc(args);
    assert!(
        out.status.success(),
        "owc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_users_config_matches_builtin_defaults() {
    let c = load_config(&configs().join("users_sweep.toml")).unwrap();
    assert_eq!(c, RunConfig::default());
}

#[test]
fn shipped_waist_config_is_valid() {
    let c = load_config(&configs().join("waist_sweep.toml")).unwrap();
    assert_eq!(c.scenario.users, 20);
    assert_eq!(c.sweep_waist_m.len(), 7);
}

#[test]
fn sweep_users_writes_csv_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep-users", "--users", "2,6,10", "--trials", "6", "--out-dir", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("sweep_users.csv")).unwrap();
    let rows = parse_sweep_csv(&text).unwrap();
    // RS at 3 points, G=5 at 6 and 10, G=10 at 10.
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.mean_user_rate_bps.is_finite() && r.mean_user_rate_bps > 0.0));
    assert!(dir.path().join("sweep_users.svg").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
    assert_eq!(manifest["skipped"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_waist_has_seven_rows_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("waist_sweep.toml");
    ok(&["sweep-waist", "--config", s(&cfg), "--trials", "3", "--no-plot", "--out-dir", s(dir.path())]);
    let rows = parse_sweep_csv(&fs::read_to_string(dir.path().join("sweep_waist.csv")).unwrap()).unwrap();
    for scheme in [Scheme::Rs, Scheme::Hrs { groups: 5 }, Scheme::Hrs { groups: 10 }] {
        assert_eq!(rows.iter().filter(|r| r.scheme == scheme).count(), 7);
    }
    assert!(!dir.path().join("sweep_waist.svg").exists());
}

#[test]
fn scheme_and_groups_flags_select_series() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--scheme", "hrs", "--groups", "2", "--trials", "4", "--out-dir", s(dir.path())]);
    let rows = parse_sweep_csv(&fs::read_to_string(dir.path().join("run.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].scheme, Scheme::Hrs { groups: 2 });

    ok(&["run", "--scheme", "rs", "--trials", "4", "--out-dir", s(dir.path())]);
    let rows = parse_sweep_csv(&fs::read_to_string(dir.path().join("run.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].scheme, Scheme::Rs);
}

#[test]
fn same_seed_gives_identical_csv_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = ["sweep-users", "--users", "4,8", "--trials", "8", "--seed", "17", "--keep-trials"];
    ok(&[&base[..], &["--workers", "1", "--out-dir", s(a.path())]].concat());
    ok(&[&base[..], &["--workers", "8", "--out-dir", s(b.path())]].concat());
    for f in ["sweep_users.csv", "sweep_users_trials.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["run", "--users", "12", "--trials", "5", "--seed", "3", "--out-dir", s(a.path())]);
    let manifest = a.path().join("manifest.json");
    ok(&["run", "--config", s(&manifest), "--out-dir", s(b.path())]);
    assert_eq!(fs::read(a.path().join("run.csv")).unwrap(), fs::read(b.path().join("run.csv")).unwrap());
}

#[test]
fn env_vars_act_as_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_owc"))
        .args(["run", "--scheme", "rs", "--out-dir", s(dir.path())])
        .env("OWC_TRIALS", "3")
        .env_remove("OWC_CONFIG")
        .env_remove("OWC_SEED")
        .env_remove("OWC_WORKERS")
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = parse_sweep_csv(&fs::read_to_string(dir.path().join("run.csv")).unwrap()).unwrap();
    assert_eq!(rows[0].trials, 3);
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[rs]\nt = 1.5\n").unwrap();
    let out = owc(&["run", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rs.t"));

    fs::write(&cfg, "[hrs]\ngroups = 0\n").unwrap();
    assert_eq!(owc(&["run", "--config", s(&cfg)]).status.code(), Some(2));

    fs::write(&cfg, "[room]\nbogus = 1\n").unwrap();
    assert_eq!(owc(&["run", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn waist_sweep_needs_the_gaussian_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = owc(&["sweep-waist", "--trials", "2", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = owc(&["run", "--trials", "2", "--out-dir", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn empty_users_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let users = dir.path().join("users.csv");
    fs::write(&users, "x_m,y_m\n").unwrap();
    let out = owc(&["channel", "--users-file", s(&users), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("channel.csv").exists());
}

#[test]
fn user_below_first_unit_gets_nothing_from_its_vertical_element() {
    let dir = tempfile::tempdir().unwrap();
    let users = dir.path().join("users.csv");
    fs::write(&users, "x_m,y_m\n3.5,3.5\n").unwrap();
    ok(&["channel", "--users-file", s(&users), "--out-dir", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("channel.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let head = rdr.headers().unwrap().clone();
    assert_eq!(head.len(), 2 + 40);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn channel_from_seed_has_one_row_per_user() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["channel", "--users", "7", "--seed", "5", "--out-dir", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("channel.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 7);
}
