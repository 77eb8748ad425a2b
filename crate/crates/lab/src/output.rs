//! Experiment reports and the files written from them.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::config::Config;
use crate::fit::RateFit;

/// A named pass/fail outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Log-log plot of a rate fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub file: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub fit: RateFit,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
    pub plots: Vec<Plot>,
}

impl Report {
    pub fn new(experiment: &str, header: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!("experiment: {}\n", self.experiment);
        for l in &self.summary {
            s.push_str(l);
            s.push('\n');
        }
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn manifest(cfg: &Config, experiment: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {experiment}");
    let _ = writeln!(s, "seed: {}", cfg.raw("seed"));
    let _ = writeln!(s, "config_sha256: {}", cfg.hash());
    let _ = writeln!(s, "mfbm-lab: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "mfbm: {}", mfbm::VERSION);
    s.push_str("[config]\n");
    s.push_str(&cfg.canonical());
    s
}

/// Write `results.csv`, `summary.txt`, `manifest.txt` and any plots.
pub fn write_report(dir: &Path, cfg: &Config, report: &Report) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), report.csv())?;
    fs::write(dir.join("summary.txt"), report.summary_text())?;
    fs::write(dir.join("manifest.txt"), manifest(cfg, &report.experiment))?;
    for p in &report.plots {
        fs::write(dir.join(&p.file), svg_plot(p))?;
    }
    Ok(())
}

/// Static SVG with the fitted points and line in log-log coordinates.
pub fn svg_plot(p: &Plot) -> String {
    let (w, h, m) = (480.0, 360.0, 56.0);
    let pts = &p.fit.points;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    for (a, b) in [(&mut x0, &mut x1), (&mut y0, &mut y1)] {
        let pad = 0.08 * (*b - *a).max(1e-9);
        *a -= pad;
        *b += pad;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} (slope {:.3} ± {:.3})</text>"#,
        w / 2.0,
        p.title,
        p.fit.slope,
        p.fit.stderr
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        w / 2.0,
        h - 16.0,
        p.x_label
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        p.y_label
    );
    let line = |x: f64| p.fit.intercept + p.fit.slope * x;
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-width="2"/>"#,
        sx(x0),
        sy(line(x0)),
        sx(x1),
        sy(line(x1))
    );
    for (x, y) in pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="firebrick"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    s.push_str("</svg>\n");
    s
}
