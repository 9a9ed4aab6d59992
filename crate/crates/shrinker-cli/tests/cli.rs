use std::path::Path;
use std::process::{Command, Output};

fn shrinker(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinker")).arg("--out").arg(out).args(args).env_remove("SHRINKER_OUT").output().expect("binary runs")
}

fn summary(out: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join(command).join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn check<'a>(s: &'a serde_json::Value, name: &str) -> &'a serde_json::Value {
    s["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn construct_reports_the_expansion_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(dir.path(), &["construct", "--n", "3", "--alpha", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "construct");
    assert_eq!(s["passed"], true);
    let c1 = s["data"]["fit"]["w"]["c1"].as_f64().unwrap();
    assert!((c1 + 0.5).abs() < 0.025, "c1 = {c1}");
    assert_eq!(check(&s, "c1 relative error")["tolerance"]["max"], 0.05);
    for f in ["profile.csv", "profile.json", "radial.csv", "profile.svg"] {
        assert!(dir.path().join("construct").join(f).is_file(), "{f}");
    }
}

#[test]
fn gaussian_construct_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(dir.path(), &["construct", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), "construct");
    assert!(check(&s, "sup|w-1|")["value"].as_f64().unwrap() < 1e-9);
}

#[test]
fn gaussian_flow_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(dir.path(), &["flow", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "flow");
    assert!(check(&s, "algebraic residual")["value"].as_f64().unwrap() < 1e-10);
    assert!(check(&s, "tau-derivative residual")["value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(dir.path(), &["construct", "--anchor", "cone", "--s0", "450"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(summary(dir.path(), "construct")["passed"], false);
}

#[test]
fn configuration_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[construct]\nalpha = \"half\"\n").unwrap();
    let o = shrinker(dir.path(), &["--config", cfg.to_str().unwrap(), "construct"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[construct]\nalpha = -0.5\n").unwrap();
    assert_eq!(shrinker(dir.path(), &["--config", cfg.to_str().unwrap(), "construct"]).status.code(), Some(2));
    let missing = dir.path().join("nowhere.toml");
    assert_eq!(shrinker(dir.path(), &["--config", missing.to_str().unwrap(), "flow"]).status.code(), Some(2));
    assert_eq!(shrinker(dir.path(), &["construct", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_profile_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = shrinker(dir.path(), &["flow", "--profile", dir.path().join("absent.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csv"));
}

#[test]
fn stored_profile_drives_the_flow() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(shrinker(dir.path(), &["construct", "--s0", "2.5e6"]).status.code(), Some(0));
    let csv = dir.path().join("construct/profile.csv");
    let o = shrinker(dir.path(), &["flow", "--profile", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn summaries_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(shrinker(dir, &["diff"]).status.code(), Some(0));
    }
    assert_eq!(shrinker(b.path(), &["--sequential", "flow"]).status.code(), Some(0));
    assert_eq!(shrinker(a.path(), &["flow"]).status.code(), Some(0));
    for c in ["diff", "flow"] {
        let x = std::fs::read(a.path().join(c).join("summary.json")).unwrap();
        let y = std::fs::read(b.path().join(c).join("summary.json")).unwrap();
        assert_eq!(x, y, "{c} summary differs");
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        Command::new(env!("CARGO_BIN_EXE_shrinker")).args(["diff", "--points", "201"]).env("SHRINKER_OUT", dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("diff/summary.json").is_file());
    assert!(dir.path().join("diff/diff_tau0.25.csv").is_file());
}

#[test]
fn canonical_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for c in ["construct", "flow", "carleman", "diff", "verify-all"] {
        let cfg = shrinker_cli::config::RunConfig::load(&root.join(format!("{c}.toml"))).unwrap();
        cfg.validate().unwrap();
    }
}
