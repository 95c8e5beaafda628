//! Report artifacts: JSON envelopes, per-δ CSV tables and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use cheeger_core::perturbation_lab::SlopeReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Sources whose hashes identify the code that produced a report.
const MODULES: &[(&str, &[&str])] = &[
    (
        "geometry",
        &[
            include_str!("../../core/src/geometry/mod.rs"),
            include_str!("../../core/src/geometry/grid.rs"),
            include_str!("../../core/src/geometry/shape.rs"),
            include_str!("../../core/src/geometry/domain.rs"),
            include_str!("../../core/src/geometry/pgm.rs"),
        ],
    ),
    ("tv_core", &[include_str!("../../core/src/tv_core.rs")]),
    ("cheeger_solver", &[include_str!("../../core/src/cheeger_solver.rs"), include_str!("../../core/src/primal_dual.rs")]),
    ("capacity", &[include_str!("../../core/src/capacity.rs")]),
    ("perturbation_lab", &[include_str!("../../core/src/perturbation_lab.rs")]),
    ("oracles", &[include_str!("../../core/src/oracles.rs")]),
    ("cli_report", &[include_str!("main.rs"), include_str!("config.rs"), include_str!("report.rs")]),
];

/// SHA-256 of each module's sources, as lowercase hex.
pub fn module_hashes() -> BTreeMap<&'static str, String> {
    MODULES
        .iter()
        .map(|(name, sources)| {
            let mut h = Sha256::new();
            for s in *sources {
                h.update(s.as_bytes());
            }
            let hex = h.finalize().iter().fold(String::new(), |mut acc, b| {
                let _ = write!(acc, "{b:02x}");
                acc
            });
            (*name, hex)
        })
        .collect()
}

/// Top-level layout shared by every JSON report.
#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub modules: BTreeMap<&'static str, String>,
    pub config: &'a C,
    pub result: &'a R,
}

pub fn write_json<C: Serialize, R: Serialize>(path: &Path, command: &str, config: &C, result: &R) -> std::io::Result<()> {
    let env = Envelope { command, version: env!("CARGO_PKG_VERSION"), modules: module_hashes(), config, result };
    let mut text = serde_json::to_string_pretty(&env).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[derive(Serialize)]
struct Row {
    delta: f64,
    driver: f64,
    lambda: f64,
    lambda_minus_base: f64,
    eigenset_l1_distance: f64,
    tv_mass: f64,
}

/// One row per sample, ordered by δ as configured.
pub fn write_csv(path: &Path, report: &SlopeReport) -> Result<(), csv::Error> {
    let mut samples: Vec<_> = report.samples.iter().collect();
    samples.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(Row {
            delta: s.delta,
            driver: s.driver,
            lambda: s.lambda,
            lambda_minus_base: s.lambda_minus_base,
            eigenset_l1_distance: s.eigenset_l1_distance,
            tv_mass: s.tv_mass,
        })?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Scatter plot of `λ_δ` against the driver, with the base eigenvalue and,
/// when nonzero, the predicted first-order line.
pub fn svg_plot(report: &SlopeReport) -> String {
    let pts: Vec<(f64, f64)> = report.samples.iter().map(|s| (s.driver, s.lambda)).collect();
    let x_lo = pts.iter().map(|p| p.0).fold(0.0, f64::min);
    let x_hi = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let predicted = |x: f64| report.base_lambda + report.predicted_coefficient * x;
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.extend([report.base_lambda, predicted(x_lo), predicted(x_hi)]);
    let y_lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = |lo: f64, hi: f64| if hi > lo { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) } else { (lo - 1.0, hi + 1.0) };
    let (x_lo, x_hi) = pad(x_lo, x_hi);
    let (y_lo, y_hi) = pad(y_lo, y_hi);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x_lo + f * (x_hi - x_lo), y_lo + f * (y_hi - y_lo));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3e}</text>"#, sx(xv), b + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.5}</text>"#, l - 6.0, sy(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, 0.5 * (l + r), HEIGHT - 12.0, report.driver.label());
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">lambda</text>"#,
        0.5 * (t + b),
        0.5 * (t + b)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#888" stroke-dasharray="4 4"/>"##,
        y = sy(report.base_lambda)
    );
    if report.predicted_coefficient != 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c33"/>"##,
            sx(x_lo),
            sy(predicted(x_lo)),
            sx(x_hi),
            sy(predicted(x_hi))
        );
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#246"/>"##, sx(*x), sy(*y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{} experiment: base {:.6}, predicted slope {:.4}</text>"#,
        0.5 * (l + r),
        t - 20.0,
        report.experiment,
        report.base_lambda,
        report.predicted_coefficient
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_cover_every_module() {
        let h = module_hashes();
        assert_eq!(h.len(), 7);
        assert!(h.values().all(|v| v.len() == 64));
    }
}
