//! Minimal static SVG: line plots with optional log axes, and heatmaps.

use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 420.0;
const L: f64 = 70.0;
const R: f64 = 150.0;
const T: f64 = 40.0;
const B: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else {
        format!("{v:.3}")
    }
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_x: false, log_y: false, series: vec![] }
    }

    pub fn log(mut self, x: bool, y: bool) -> Self {
        self.log_x = x;
        self.log_y = y;
        self
    }

    pub fn series(mut self, name: &str, pts: Vec<(f64, f64)>) -> Self {
        self.series.push((name.into(), pts));
        self
    }

    pub fn render(&self) -> String {
        let tx = |v: f64| if self.log_x { v.log10() } else { v };
        let ty = |v: f64| if self.log_y { v.log10() } else { v };
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|(_, p)| p.iter().map(|&(x, y)| (tx(x), ty(y))).filter(|(x, y)| x.is_finite() && y.is_finite()).collect())
            .collect();
        let all = pts.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let (pw, ph) = (W - L - R, H - T - B);
        let px = |x: f64| L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| T + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, esc(&self.title));
        let _ = writeln!(s, r#"<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(xv), H - B + 16.0, tick(xv, self.log_x));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, L - 6.0, py(yv) + 4.0, tick(yv, self.log_y));
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, L + pw / 2.0, H - 12.0, esc(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            T + ph / 2.0,
            T + ph / 2.0,
            esc(&self.y_label)
        );
        for (k, ((name, _), p)) in self.series.iter().zip(&pts).enumerate() {
            let c = COLORS[k % COLORS.len()];
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = T + 14.0 * (k as f64 + 1.0);
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, W - R + 10.0, W - R + 30.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - R + 34.0, ly + 4.0, esc(name));
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Cells coloured by sign and size: blue for positive, red for negative.
pub struct Heatmap {
    pub title: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn render(&self) -> String {
        let scale = self.values.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let (cw, ch) = (28.0, 18.0);
        let (ox, oy) = (90.0, 40.0);
        let w = ox + cw * self.cols.len() as f64 + 20.0;
        let h = oy + ch * self.rows.len() as f64 + 40.0;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#, w / 2.0, esc(&self.title));
        for (i, row) in self.values.iter().enumerate() {
            let y = oy + ch * i as f64;
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, ox - 4.0, y + 13.0, esc(&self.rows[i]));
            for (j, v) in row.iter().enumerate() {
                let t = (v.abs() / scale).sqrt().min(1.0);
                let shade = (255.0 * (1.0 - t)).round() as u8;
                let fill = if !v.is_finite() {
                    "#888888".to_string()
                } else if *v >= 0.0 {
                    format!("#{shade:02x}{shade:02x}ff")
                } else {
                    format!("#ff{shade:02x}{shade:02x}")
                };
                let _ =
                    writeln!(s, r#"<rect x="{}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"/>"#, ox + cw * j as f64);
            }
        }
        for (j, c) in self.cols.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                ox + cw * (j as f64 + 0.5),
                oy + ch * self.rows.len() as f64 + 14.0,
                esc(c)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_markup() {
        let p = LinePlot::new("a<b", "x", "y").log(true, true).series("s", vec![(1.0, 1.0), (10.0, 0.1), (0.0, 1.0)]);
        let s = p.render();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b"));
        let m = Heatmap { title: "m".into(), rows: vec!["r".into()], cols: vec!["c".into(), "d".into()], values: vec![vec![1.0, -2.0]] };
        assert_eq!(m.render().matches("<rect").count(), 3);
    }
}
