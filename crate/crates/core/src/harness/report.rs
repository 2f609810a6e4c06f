use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::seq::ShapeClass;

use super::config::ExperimentConfig;
use super::risk::RateFit;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str =
    "estimator,n,sigma,replicates,mean_risk,stderr,regret_r1,regret_r2,oracle_rhs,runtime_ms,seed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RowKind {
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "adversarial-grid max")]
    AdversarialMax,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskRow {
    pub estimator: String,
    pub kind: RowKind,
    pub n: usize,
    pub sigma: f64,
    /// Replicates that produced a loss.
    pub replicates: usize,
    pub mean_risk: f64,
    pub stderr: Option<f64>,
    pub regret_r1: Option<f64>,
    pub regret_r2: Option<f64>,
    pub regret_r1_stderr: Option<f64>,
    /// `min_{u∈S} ‖u - μ‖²` (or an upper bound on it).
    pub approx_sq: Option<f64>,
    pub regret_is_lower_bound: Option<bool>,
    /// One value per configured bound spec.
    pub oracle_rhs: Vec<Option<f64>>,
    pub runtime_ms: Option<f64>,
    pub seed: u64,
    pub failures: usize,
    /// For adversarial rows: which candidate attained the maximum.
    pub worst_case: Option<String>,
}

impl RiskRow {
    pub fn display_name(&self) -> String {
        match self.kind {
            RowKind::Mean => self.estimator.clone(),
            RowKind::AdversarialMax => format!("{} [adversarial-grid max]", self.estimator),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFitRow {
    pub estimator: String,
    pub fit: RateFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskReport {
    pub schema_version: u32,
    pub name: String,
    pub signal: String,
    pub class: Option<ShapeClass>,
    pub config: ExperimentConfig,
    pub rows: Vec<RiskRow>,
    pub rate_fits: Vec<RateFitRow>,
    pub notes: Vec<String>,
    pub errors: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl RiskReport {
    pub fn is_success(&self) -> bool {
        self.errors.is_empty()
    }

    /// One line per row; `oracle_rhs` holds the first bound spec.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.display_name()),
                r.n,
                r.sigma,
                r.replicates,
                r.mean_risk,
                opt(r.stderr),
                opt(r.regret_r1),
                opt(r.regret_r2),
                opt(r.oracle_rhs.first().copied().flatten()),
                opt(r.runtime_ms),
                r.seed
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Log-log plot of mean risk against `n`, one series per estimator, with
    /// the fitted slope in the legend.
    pub fn to_svg(&self) -> String {
        plot_svg(self)
    }
}

pub fn write_outputs(report: &RiskReport, dir: &Path, plot: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("risk.csv"), report.to_csv())?;
    std::fs::write(dir.join("report.json"), report.to_json()? + "\n")?;
    if plot {
        std::fs::write(dir.join("risk.svg"), report.to_svg())?;
    }
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn plot_svg(report: &RiskReport) -> String {
    let (w, h) = (720.0, 460.0);
    let (left, right, top, bottom) = (70.0, 250.0, 30.0, 50.0);
    let mut labels: Vec<&str> = Vec::new();
    for r in report.rows.iter().filter(|r| r.kind == RowKind::Mean) {
        if !labels.contains(&r.estimator.as_str()) {
            labels.push(&r.estimator);
        }
    }
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.kind == RowKind::Mean && r.mean_risk > 0.0)
        .map(|r| ((r.n as f64).log10(), r.mean_risk.log10()))
        .collect();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(s, r#"<text x="20" y="40">no positive risks to plot</text>"#);
        s.push_str("</svg>\n");
        return s;
    }
    let pad = |lo: f64, hi: f64| {
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo))
        }
    };
    let (x0, x1) = pad(
        pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = pad(
        pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in (x0.ceil() as i32 - 1)..=(x1.floor() as i32 + 1) {
        for m in 1..10 {
            let x = d as f64 + (m as f64).log10();
            if x < x0 || x > x1 {
                continue;
            }
            let px = sx(x);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/>"##,
                top,
                top + ph
            );
            if m == 1 || m == 2 || m == 5 {
                let _ = writeln!(
                    s,
                    r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                    top + ph + 16.0,
                    fmt_tick(x)
                );
            }
        }
    }
    for d in (y0.floor() as i32)..=(y1.ceil() as i32) {
        let y = d as f64;
        if y < y0 || y > y1 {
            continue;
        }
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/>"##,
            left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            left - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">mean squared risk</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, label) in labels.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let series: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Mean && r.estimator == *label && r.mean_risk > 0.0)
            .map(|r| ((r.n as f64).log10(), r.mean_risk.log10()))
            .collect();
        for &(x, y) in &series {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let fit = report.rate_fits.iter().find(|f| f.estimator == *label);
        if let (Some(f), Some(first), Some(last)) = (fit, series.first(), series.last()) {
            // The fit is in natural logs; slopes are base independent.
            let b10 = f.fit.intercept / std::f64::consts::LN_10;
            let line = |x: f64| b10 + f.fit.slope * x;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="5,3"/>"#,
                sx(first.0),
                sy(line(first.0)),
                sx(last.0),
                sy(line(last.0))
            );
        } else if series.len() > 1 {
            let path: Vec<String> = series
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
                path.join(" ")
            );
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let text = match fit {
            Some(f) => format!("{} (slope {:.3})", label, f.fit.slope),
            None => label.to_string(),
        };
        let _ = writeln!(s, r#"<circle cx="{lx:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#,
            lx + 10.0,
            xml_escape(&text)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(log10x: f64) -> String {
    let v = 10f64.powf(log10x);
    format!("{}", (v * 1000.0).round() / 1000.0)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
