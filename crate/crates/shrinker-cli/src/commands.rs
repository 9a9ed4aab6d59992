//! The five pipelines. Each writes its bundle under `<root>/<command>/`.

use crate::acceptance::{self, BatterySettings, FD_FLOOR};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::fixtures::{self, PairSpec};
use crate::report::{Bound, Check, ReportBundle};
use crate::svg::{Heatmap, LinePlot};
use serde_json::{json, Value};
use shrinker::carleman::{weight_fd_errors, G1Params, G2Params, ScanRecord};
use shrinker::diffsys::{check_decay, check_ode_inequalities, difference_fields, uev_residual};
use shrinker::exec::Execution;
use shrinker::flow::*;
use shrinker::geometry;
use shrinker::io;
use shrinker::soliton::*;
use std::path::Path;
use std::time::Instant;

fn bundle(command: &str, root: &Path, params: Value) -> CliResult<ReportBundle> {
    let dir = root.join(command);
    std::fs::create_dir_all(&dir)?;
    Ok(ReportBundle::new(command, &dir, params))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report data serializes")
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) })
}

pub fn cmd_construct(cfg: &RunConfig, root: &Path, _exec: Execution) -> CliResult<ReportBundle> {
    let c = &cfg.construct;
    let mut b = bundle("construct", root, to_value(c))?;
    let t = Instant::now();
    let opts = ShootOptions { anchor: c.anchor, rtol: Some(c.rtol), ..Default::default() };
    let s_min = c.s_min.unwrap_or_else(|| default_s_min(c.n));
    let window = (c.window[0], c.window[1]);
    let raw = match c.s0 {
        Some(s0) => shoot_profile(c.n, c.alpha, s0, s_min, c.tol, &opts)?,
        None => {
            let k = construct_soliton(c.n, c.alpha, window, c.tol, Some(s_min), &opts)?;
            b.insert("doublings", to_value(&k.history));
            k.profile
        }
    };
    let p = normalize_potential(&raw);
    b.timings.push(("construct".into(), t.elapsed().as_secs_f64()));
    b.insert("S0", json!(p.s0));
    b.insert("s_min_reached", json!(p.s_min));
    b.insert("l_eff", json!(p.l_eff));
    b.insert("inner_stop", json!(p.inner_stop));
    b.check(Check::below("normalization residual", p.normalization_residual.unwrap_or(f64::NAN), 1e-6));
    b.check(Check::flag("w stays within the band", p.within_band()));
    if c.alpha == 1.0 {
        let pts: Vec<ProfilePoint> = (0..p.len()).map(|i| p.point(i)).collect();
        b.check(Check::below("sup|w-1|", sup(pts.iter().map(|q| (q.w - 1.0).abs())), 1e-9));
        b.check(Check::below("sup|f-s/4|/(1+s/4)", sup(pts.iter().map(|q| (q.f - q.s / 4.0).abs() / (1.0 + q.s / 4.0))), 1e-9));
        b.check(Check::below("normalization residual (flat)", p.normalization_residual.unwrap_or(f64::NAN), 1e-10));
    } else {
        let fit = fit_asymptotics(&p, window)?;
        let c1 = expansion_c1(c.n, c.alpha);
        b.check(Check::new("c1 relative error", ((fit.w.c1 - c1) / c1).abs(), Bound::AtMost { max: 0.05 }));
        b.check(Check::at_least("w remainder order", fit.w.residual_order, 1.8));
        b.check(Check::at_least("f remainder order", fit.f.residual_order, 0.8));
        b.insert("fit", to_value(&fit));
    }
    let field = to_radial_chart(&p);
    let m = field.len();
    let (rad, sph) = geometry::soliton_residual_on(&field, m / 4..3 * m / 4)?;
    b.check(Check::below("soliton residual (radial, middle half)", rad, 1e-6));
    b.check(Check::below("soliton residual (spherical, middle half)", sph, 1e-6));
    b.check(Check::below("normalization residual (middle half)", geometry::normalization_residual_on(&field, m / 4..3 * m / 4)?, 1e-6));

    let csv = b.file("profile.csv");
    io::write_profile(&p, s_min, &opts, &csv)?;
    b.files.push("profile.json".into());
    let pot = field.potential()?;
    let rows: Vec<Vec<f64>> =
        (0..m).map(|i| vec![field.r[i], field.a[i], field.a1[i], field.a2[i], pot.f[i], pot.f1[i], pot.f2[i]]).collect();
    io::write_csv(&b.file("radial.csv"), &["r", "a", "a1", "a2", "f", "f1", "f2"], &rows)?;
    let step = (p.len() / 800).max(1);
    let w: Vec<(f64, f64)> = (0..p.len()).step_by(step).map(|i| (p.s[i], p.w[i])).collect();
    let lim = vec![(p.s[0], p.l_eff), (p.s[p.len() - 1], p.l_eff)];
    LinePlot::new(&format!("w(s), n={}, alpha={}", c.n, c.alpha), "s", "w")
        .log(true, false)
        .series("w", w)
        .series("limit", lim)
        .save(&b.file("profile.svg"))?;
    Ok(b)
}

pub fn cmd_flow(cfg: &RunConfig, root: &Path, exec: Execution) -> CliResult<ReportBundle> {
    let f = &cfg.flow;
    let mut b = bundle("flow", root, to_value(f))?;
    let t = Instant::now();
    let (bg, fam) = fixtures::family(&f.source, &f.grid, exec)?;
    b.timings.push(("build".into(), t.elapsed().as_secs_f64()));
    b.insert("source", json!(fam.source));

    let id = verify_flow_identities(&fam);
    b.check(Check::below("algebraic residual", id.algebraic, 1e-6));
    b.check(Check::below("tau-derivative residual", id.time_derivative, 1e-4));
    b.insert("identities", to_value(&id));
    b.insert("fid0", to_value(&verify_fid0(&fam)));
    b.insert("hder", to_value(&verify_hder(&fam)));
    b.check(Check::flag("r_c/2 <= h <= 2 r_c", hr_bounds_hold(&fam)));
    let decay: Vec<_> = (0..=1).map(|m| curvature_decay(&fam, m)).collect::<shrinker::Result<_>>()?;
    b.insert("curvature_decay", to_value(&decay));

    let field = bg.radial_field();
    let thr = trajectory_threshold(&field)?;
    let r0s: Vec<f64> = f.trajectory_r0.iter().copied().filter(|r| *r > thr).collect();
    b.check(Check::at_least("trajectory starts beyond threshold", r0s.len() as f64, 1.0));
    let tb = check_trajectory_bounds(&field, &r0s, f.trajectory_s)?;
    b.check(Check::flag("trajectory bounds", tb.holds));
    b.insert("trajectories", to_value(&tb));

    let cd = cone_deviation_sequence(&fam, f.cone_b)?;
    b.check(Check::flag("cone deviation decreases", is_monotone_decreasing(&cd)));
    b.insert("cone_deviation", json!(cd.iter().map(|(t, d)| json!({"tau": t, "sup": d.sup, "r2_sup": d.r2_sup})).collect::<Vec<_>>()));
    let pts: Vec<(f64, f64)> = cd.iter().map(|(t, d)| (*t, d.sup)).collect();
    LinePlot::new("cone deviation", "tau", "sup deviation").log(true, true).series("sup", pts).save(&b.file("cone.svg"))?;

    let gap = sup(fam.snapshots.iter().flat_map(|s| s.r_c.iter().zip(&s.h).map(|(x, h)| (h - x).abs() / x)));
    if bg.aperture() == 1.0 {
        b.check(Check::below("sup|h-r_c|/r_c on the flat flow", gap, 1e-12));
    } else {
        let rh = verify_rh_comparison(&fam, f.rh_min_label)?;
        b.check(Check::new("tau exponent of |h-r_c|", rh.tau_exponent, Bound::Within { min: 1.8, max: 2.2 }));
        b.check(Check::new("r_c exponent of |h-r_c|", rh.rc_exponent, Bound::AtMost { max: -2.7 }));
        b.insert("rh", to_value(&rh));
    }
    let mut plot = LinePlot::new("|h - r_c|", "r_c", "|h - r_c|").log(true, true);
    for s in &fam.snapshots {
        let step = (s.len() / 300).max(1);
        let pts: Vec<(f64, f64)> = (0..s.len()).step_by(step).map(|i| (s.r_c[i], (s.h[i] - s.r_c[i]).abs())).collect();
        plot = plot.series(&format!("tau={}", s.tau), pts);
    }
    plot.save(&b.file("rh.svg"))?;
    for s in &fam.snapshots {
        io::write_snapshot(s, &b.file(&format!("snapshot_tau{}.csv", s.tau)))?;
    }
    Ok(b)
}

fn margin_table(records: &[&ScanRecord], path: &Path) -> CliResult<Vec<String>> {
    let Some(first) = records.first() else { return Ok(vec![]) };
    let pk: Vec<&String> = first.params.keys().collect();
    let mk: Vec<&String> = first.margins.keys().collect();
    let mut head: Vec<&str> = pk.iter().map(|s| s.as_str()).collect();
    head.push("threshold");
    head.extend(mk.iter().map(|s| s.as_str()));
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let mut v: Vec<f64> = pk.iter().map(|k| r.params[*k]).collect();
            v.push(r.threshold_radius.unwrap_or(f64::NAN));
            v.extend(mk.iter().map(|k| r.margins.get(*k).copied().unwrap_or(f64::NAN)));
            v
        })
        .collect();
    io::write_csv(path, &head, &rows)?;
    Ok(mk.iter().map(|s| s.to_string()).collect())
}

fn heatmap(title: &str, records: &[&ScanRecord], cols: &[String]) -> Heatmap {
    let rows = records.iter().map(|r| r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")).collect();
    let values = records.iter().map(|r| cols.iter().map(|k| r.margins.get(k).copied().unwrap_or(f64::NAN)).collect()).collect();
    Heatmap { title: title.into(), rows, cols: cols.to_vec(), values }
}

pub fn cmd_carleman(cfg: &RunConfig, root: &Path, exec: Execution) -> CliResult<ReportBundle> {
    let k = &cfg.carleman;
    let mut b = bundle("carleman", root, to_value(k))?;
    let t = Instant::now();
    let (bg, fam) = fixtures::family(&k.source, &k.grid, exec)?;
    b.insert("source", json!(fam.source));
    let scan = acceptance::threshold_scan(&fam, &k.alphas, &k.deltas, &k.a_values, &k.rho_multiples, k.gamma)?;
    b.check(Check::flag("finite G1 threshold radius", scan.g1_threshold.is_finite()));
    b.check(Check::new("failing scan points", scan.failures.len() as f64, Bound::AtMost { max: 0.0 }));
    b.insert("g1_threshold", json!(scan.g1_threshold));
    b.insert("failures", json!(scan.failures));
    b.timings.push(("threshold scan".into(), t.elapsed().as_secs_f64()));

    let rho = k.rho_multiples[0] * scan.g1_threshold.max(1.0);
    let g1 = G1Params::new(k.alphas[k.alphas.len() / 2], 1.0, k.deltas[k.deltas.len() / 2])?;
    let g2 = G2Params::new(k.a_values[0], rho, k.gamma, bg.n())?;
    let grid = fixtures::grid(&k.grid)?;
    let fine = weight_fd_errors(bg.as_ref(), &grid, &k.grid.taus, k.grid.tau_step, &g1, &g2, exec)?;
    let coarse = weight_fd_errors(bg.as_ref(), &grid.coarsened(), &k.grid.taus, 2.0 * k.grid.tau_step, &g1, &g2, exec)?;
    b.check(Check::below("F1 closed form vs differenced", fine.0, 1e-4));
    b.check(Check::below("F2 closed form vs differenced", fine.1, 1e-4));
    b.check(Check::flag("F1 gap shrinks under refinement", fine.0 <= coarse.0.max(FD_FLOOR)));
    b.check(Check::flag("F2 gap shrinks under refinement", fine.1 <= coarse.1.max(FD_FLOOR)));
    b.insert("fd", json!({"fine": [fine.0, fine.1], "coarse": [coarse.0, coarse.1]}));

    let mut records = scan.records;
    if k.battery {
        let t = Instant::now();
        let set =
            BatterySettings { tau0: k.battery_tau0, inner: k.battery_inner, rho: k.battery_rho, gamma: k.gamma, ..Default::default() };
        let bbg = fixtures::background(&k.source, k.battery_x_max / 0.02f64.sqrt())?;
        let scans = acceptance::battery_scans(bbg.as_ref(), &set, exec)?;
        for s in &scans {
            b.check(Check::flag(format!("{} holds from alpha0", s.name), s.holds()));
            let mut margins = std::collections::BTreeMap::new();
            for (al, row) in s.alphas.iter().zip(&s.margins) {
                margins.insert(format!("alpha={al}"), row.iter().copied().fold(f64::INFINITY, f64::min));
            }
            records.push(ScanRecord {
                params: [("tau0".to_string(), set.tau0), ("inner".to_string(), set.inner), ("rho".to_string(), set.rho)].into(),
                threshold_radius: None,
                alpha0: s.alpha0,
                margins,
            });
        }
        b.insert("battery", to_value(&scans));
        b.timings.push(("battery".into(), t.elapsed().as_secs_f64()));
    }
    io::write_json(&b.file("scan.json"), &to_value(&records))?;
    let g1r: Vec<&ScanRecord> = records.iter().filter(|r| r.params.contains_key("delta")).collect();
    let g2r: Vec<&ScanRecord> = records.iter().filter(|r| r.params.contains_key("gamma")).collect();
    let c1 = margin_table(&g1r, &b.file("margins_g1.csv"))?;
    let c2 = margin_table(&g2r, &b.file("margins_g2.csv"))?;
    heatmap("G1 minimum margins", &g1r, &c1).save(&b.file("margins_g1.svg"))?;
    heatmap("G2 minimum margins", &g2r, &c2).save(&b.file("margins_g2.svg"))?;
    Ok(b)
}

pub fn cmd_diff(cfg: &RunConfig, root: &Path, exec: Execution) -> CliResult<ReportBundle> {
    let d = &cfg.diff;
    let mut b = bundle("diff", root, to_value(d))?;
    let t = Instant::now();
    let spec = PairSpec { n: d.n, alpha: d.alpha, s0: d.s0, factor: d.s0_factor, s_min: d.s_min, tol: d.tol, rtol: d.rtol };
    let (fa, fb) = fixtures::pair_families(&spec, &d.grid, exec)?;
    b.insert("flows", json!([fa.source, fb.source]));
    let same = difference_fields(&fa, &fa, exec)?;
    b.check(Check::new("coincident flows max field", acceptance::max_field(&same), Bound::AtMost { max: 0.0 }));
    let pair = difference_fields(&fa, &fb, exec)?;
    let ode = check_ode_inequalities(&pair)?;
    for c in &ode {
        b.check(Check::flag(format!("finite N for {}", c.name), c.is_finite()));
    }
    b.insert("empirical_constants", to_value(&ode));
    b.check(Check::below("uev residual", uev_residual(&pair), 1e-6));
    let (decay, at) = check_decay(&pair);
    b.check(Check::flag("weighted sup finite", decay.is_finite()));
    b.insert("weighted_sup", json!({"value": decay, "at": at}));
    if d.negative_control {
        let grid = fixtures::grid(&d.grid)?;
        let q = required_q_max(&grid, &d.grid.taus, d.grid.tau_step);
        let gauss =
            SnapshotFamily::build_with_step(&GaussianBackground { n: d.n, q_max: 2.0 * q }, &grid, &d.grid.taus, d.grid.tau_step, exec)?;
        let (v, at) = check_decay(&difference_fields(&gauss, &fa, exec)?);
        b.insert("negative_control", json!({"weighted_sup": v, "at": at, "ratio_to_pair": v / decay}));
    }
    b.timings.push(("diff".into(), t.elapsed().as_secs_f64()));
    let mut plot = LinePlot::new("r_c^2-weighted difference", "r_c", "r_c^2 (|S|+|T|+|U|+|V|+|W|+...)").log(true, true);
    for l in &pair.levels {
        io::write_diff_level(l, &b.file(&format!("diff_tau{}.csv", l.tau)))?;
        let pts = (0..l.r_c.len())
            .map(|i| (l.r_c[i], l.r_c[i].powi(2) * (l.s[i] + l.t[i] + l.grad_s[i] + l.grad_t[i] + l.u[i] + l.v[i] + l.w[i])))
            .collect();
        plot = plot.series(&format!("tau={}", l.tau), pts);
    }
    plot.save(&b.file("decay.svg"))?;
    Ok(b)
}

pub fn cmd_verify_all(cfg: &RunConfig, root: &Path, exec: Execution) -> CliResult<(ReportBundle, Vec<acceptance::Outcome>)> {
    let mut b = bundle("verify-all", root, to_value(&cfg.verify))?;
    let out = acceptance::run_all(&cfg.verify.criteria, exec);
    for o in &out {
        b.check(Check::flag(format!("{:>2} {}", o.id, o.title), o.passed()));
        for c in &o.timing {
            b.timings.push((format!("C{} {}", o.id, c.name), c.value));
        }
    }
    io::write_json(&b.file("acceptance.json"), &to_value(&out))?;
    Ok((b, out))
}
