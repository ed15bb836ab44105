//! Diagnostic SVG line charts over ordinary rounds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::report::{find_runs, Run};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for &(px, py) in series.iter().flat_map(|s| &s.points) {
        x = (x.0.min(px), x.1.max(px));
        y = (y.0.min(py), y.1.max(py));
    }
    if !x.0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x.0 == x.1 {
        x = (x.0 - 1.0, x.1 + 1.0);
    }
    if y.0 == y.1 {
        let pad = y.0.abs().max(1.0) * 0.1;
        y = (y.0 - pad, y.1 + pad);
    }
    (x, y)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(series);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT},{TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{b}" x2="{px:.1}" y2="{b2}" stroke="black"/><text x="{px:.1}" y="{ty}" text-anchor="middle">{xv:.0}</text>"#,
            b = TOP + plot_h,
            b2 = TOP + plot_h + 5.0,
            ty = TOP + plot_h + 18.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{a}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><line x1="{LEFT}" y1="{py:.1}" x2="{r}" y2="{py:.1}" stroke="#e5e5e5"/><text x="{tx}" y="{ty:.1}" text-anchor="end">{yv:.3}</text>"##,
            a = LEFT - 5.0,
            r = LEFT + plot_w,
            tx = LEFT - 8.0,
            ty = py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = TOP + plot_h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Legend names: the method label, with the seed appended when a label
/// occurs more than once.
fn legend_names(runs: &[Run]) -> Vec<String> {
    let mut count: HashMap<&str, usize> = HashMap::new();
    for r in runs {
        *count.entry(&r.header.label).or_default() += 1;
    }
    runs.iter()
        .map(|r| {
            if count[r.header.label.as_str()] > 1 {
                format!("{} (seed {})", r.header.label, r.header.seed)
            } else {
                r.header.label.clone()
            }
        })
        .collect()
}

fn series(runs: &[Run], names: &[String], f: impl Fn(&ispfl_core::orchestrator::RoundRecord) -> Option<f64>) -> Vec<Series> {
    runs.iter()
        .zip(names)
        .map(|(run, name)| Series {
            label: name.clone(),
            points: run
                .ordinary()
                .filter_map(|r| f(r).map(|v| (r.round as f64, v)))
                .collect(),
        })
        .collect()
}

/// Writes `test_loss.svg`, `accuracy.svg` and `clients.svg` into `out`.
/// Falls back to validation metrics for runs without a test set.
pub fn plot_runs(dirs: &[PathBuf], out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let runs = find_runs(dirs)?
        .iter()
        .map(|p| Run::load(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let names = legend_names(&runs);
    let has_test = runs.iter().all(|r| r.ordinary().all(|x| x.test_loss.is_some()));
    let (loss_title, acc_title) = if has_test {
        ("Test loss", "Test accuracy")
    } else {
        ("Validation loss", "Validation accuracy")
    };
    let charts = [
        (
            "test_loss.svg",
            line_chart(
                loss_title,
                "round",
                "loss",
                &series(&runs, &names, |r| if has_test { r.test_loss } else { r.val_loss }),
            ),
        ),
        (
            "accuracy.svg",
            line_chart(
                acc_title,
                "round",
                "accuracy",
                &series(&runs, &names, |r| if has_test { r.test_accuracy } else { r.val_accuracy }),
            ),
        ),
        (
            "clients.svg",
            line_chart("Participating clients", "round", "clients", &series(&runs, &names, |r| Some(r.m as f64))),
        ),
    ];
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for (file, svg) in charts {
        let path = out.join(file);
        std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
