use shrinker::io::*;
use shrinker::soliton::*;
use shrinker::Error;

fn opts() -> ShootOptions {
    ShootOptions { anchor: Anchor::Expansion, rtol: Some(1e-12), ..Default::default() }
}

#[test]
fn profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let p = normalize_potential(&shoot_profile(3, 0.5, 1600.0, 2.0, 1e-8, &opts()).unwrap());
    let side = write_profile(&p, 2.0, &opts(), &csv).unwrap();
    assert_eq!(side.rows, p.len());
    assert!(sidecar_path(&csv).is_file());
    let q = load_profile(&csv).unwrap();
    assert_eq!(q.len(), p.len());
    for i in (0..p.len()).step_by(50) {
        let (a, b) = (p.point(i), q.point(i));
        assert!((a.w - b.w).abs() <= RELOAD_TOL && (a.f - b.f).abs() <= RELOAD_TOL * (1.0 + a.f.abs()));
    }
}

#[test]
fn tampered_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let p = normalize_potential(&shoot_profile(3, 0.5, 1600.0, 2.0, 1e-8, &opts()).unwrap());
    write_profile(&p, 2.0, &opts(), &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cells: Vec<&str> = lines[5].split(',').collect();
    let w: f64 = cells[1].parse().unwrap();
    let mut edited: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
    edited[1] = format!("{}", w + 1e-6);
    lines[5] = edited.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    assert!(matches!(load_profile(&csv), Err(Error::Format(_))));
    std::fs::remove_file(sidecar_path(&csv)).unwrap();
    assert!(matches!(load_profile(&csv), Err(Error::Io(_))));
}

#[test]
fn json_is_written_at_fixed_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    let v = serde_json::json!({"b": 1.0 / 3.0, "a": [2.0f64.sqrt(), 1e-300, 0.0]});
    write_json(&path, &v).unwrap();
    let first = std::fs::read(&path).unwrap();
    write_json(&path, &fixed_precision(&v, JSON_DIGITS)).unwrap();
    assert_eq!(first, std::fs::read(&path).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("0.3333333333") && !text.contains("0.33333333333"));
    assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
}
