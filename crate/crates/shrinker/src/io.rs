//! On-disk formats: profile CSV with a JSON sidecar, per-τ snapshot and
//! difference tables, and fixed-precision JSON.

use crate::diffsys::DifferenceLevel;
use crate::error::{Error, Result};
use crate::flow::FlowSnapshot;
use crate::soliton::{normalize_potential, shoot_profile, Anchor, ShootOptions, SolitonProfile};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const PROFILE_COLUMNS: [&str; 5] = ["s", "w", "w1", "f", "f1"];
pub const DIFF_COLUMNS: [&str; 6] = ["r", "u", "v", "w", "s", "t"];
pub const SNAPSHOT_COLUMNS: [&str; 9] = ["r_c", "rho", "a", "a1", "a2", "h", "f", "R", "rm_norm"];

/// Reproduction recipe stored beside a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    /// Requested inner end.
    pub s_min: f64,
    pub tol: f64,
    pub anchor: Anchor,
    pub rtol: f64,
    pub points_per_e: f64,
    pub s_keep: Option<f64>,
    pub normalized: bool,
    pub rows: usize,
}

/// Largest disagreement tolerated between a stored table and its re-shoot.
pub const RELOAD_TOL: f64 = 1e-10;

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `<stem>.csv` and `<stem>.json`. `s_min` and `opts` are the values
/// the profile was shot with.
pub fn write_profile(profile: &SolitonProfile, s_min: f64, opts: &ShootOptions, csv: &Path) -> Result<ProfileSidecar> {
    let mut w = csv::Writer::from_path(csv)?;
    w.write_record(PROFILE_COLUMNS)?;
    for i in 0..profile.len() {
        let p = profile.point(i);
        w.write_record([p.s, p.w, p.w1, p.f, p.f1].map(fmt))?;
    }
    w.flush()?;
    let side = ProfileSidecar {
        n: profile.n,
        alpha: profile.alpha,
        s0: profile.s0,
        s_min,
        tol: profile.tol,
        anchor: profile.anchor,
        rtol: profile.rtol,
        points_per_e: opts.points_per_e,
        s_keep: opts.s_keep,
        normalized: profile.f_const.is_some(),
        rows: profile.len(),
    };
    write_json(&sidecar_path(csv), &serde_json::to_value(&side)?)?;
    Ok(side)
}

fn read_rows(csv: &Path) -> Result<Vec<[f64; 5]>> {
    let mut r = csv::Reader::from_path(csv)?;
    let head: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if head != PROFILE_COLUMNS {
        return Err(Error::Format(format!("{}: expected columns {:?}, found {head:?}", csv.display(), PROFILE_COLUMNS)));
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut row = [0.0; 5];
        for (j, cell) in rec.iter().enumerate().take(5) {
            row[j] = cell.trim().parse().map_err(|_| Error::Format(format!("row {k}: bad number {cell:?}")))?;
        }
        out.push(row);
    }
    Ok(out)
}

/// Rebuilds a profile from its sidecar and checks it against the table.
pub fn load_profile(csv: &Path) -> Result<SolitonProfile> {
    let side: ProfileSidecar = serde_json::from_reader(File::open(sidecar_path(csv))?)?;
    let rows = read_rows(csv)?;
    let opts = ShootOptions { anchor: side.anchor, points_per_e: side.points_per_e, rtol: Some(side.rtol), s_keep: side.s_keep };
    let mut p = shoot_profile(side.n, side.alpha, side.s0, side.s_min, side.tol, &opts)?;
    if side.normalized {
        p = normalize_potential(&p);
    }
    if rows.len() != p.len() || rows.len() != side.rows {
        return Err(Error::Format(format!("table has {} rows, sidecar {} and re-shoot {}", rows.len(), side.rows, p.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        let q = p.point(i);
        for (j, v) in [q.s, q.w, q.w1, q.f, q.f1].iter().enumerate() {
            if (v - row[j]).abs() > RELOAD_TOL * v.abs().max(1.0) {
                return Err(Error::Format(format!("row {i} column {}: table {} vs re-shoot {v}", PROFILE_COLUMNS[j], row[j])));
            }
        }
    }
    Ok(p)
}

fn write_table(path: &Path, head: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(head)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diff_level(level: &DifferenceLevel, path: &Path) -> Result<()> {
    let rows = (0..level.r_c.len()).map(|i| vec![level.r_c[i], level.u[i], level.v[i], level.w[i], level.s[i], level.t[i]]);
    write_table(path, &DIFF_COLUMNS, rows)
}

pub fn write_snapshot(snap: &FlowSnapshot, path: &Path) -> Result<()> {
    let f = &snap.field;
    let pot = f.potential()?;
    let rows = (0..snap.len()).map(|i| {
        let c = &snap.curvature[i];
        vec![snap.r_c[i], f.r[i], f.a[i], f.a1[i], f.a2[i], snap.h[i], pot.f[i], c.scalar, c.rm_norm]
    });
    write_table(path, &SNAPSHOT_COLUMNS, rows)
}

/// Generic table with caller-chosen columns.
pub fn write_csv(path: &Path, head: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_table(path, head, rows.iter().cloned())
}

/// Significant digits kept by [`fixed_precision`].
pub const JSON_DIGITS: usize = 10;

fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to `digits` significant digits, so summaries
/// are byte-identical across runs that agree to that precision.
pub fn fixed_precision(v: &Value, digits: usize) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap(), digits);
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.iter().map(|x| fixed_precision(x, digits)).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, x)| (k.clone(), fixed_precision(x, digits))).collect()),
        other => other.clone(),
    }
}

/// Pretty JSON at [`JSON_DIGITS`] with a trailing newline.
pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &fixed_precision(v, JSON_DIGITS))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_stable() {
        let v = serde_json::json!({"a": 0.1 + 0.2, "b": [1.0/3.0, 7], "c": "x"});
        let r = fixed_precision(&v, 10);
        assert_eq!(r["a"].as_f64().unwrap(), 0.3);
        assert_eq!(r["b"][0].as_f64().unwrap(), 0.3333333333);
        assert_eq!(r["b"][1], 7);
        assert_eq!(fixed_precision(&r, 10), r);
    }
}
