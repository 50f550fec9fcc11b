//! Self-contained SVG of a sweep: probability and fidelity against instance index.

use std::fmt::Write as _;
use std::path::Path;

use super::sweep::ExperimentRecord;
use crate::alpha::AlphaMethod;
use crate::error::{QsvtError, Result};

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 140.0;
const MARGIN_TOP: f64 = 40.0;
const PANEL_GAP: f64 = 70.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Panel {
    title: &'static str,
    value: fn(&ExperimentRecord) -> f64,
}

const PANELS: [Panel; 2] = [
    Panel {
        title: "Probability",
        value: ExperimentRecord::probability,
    },
    Panel {
        title: "Fidelity",
        value: ExperimentRecord::fidelity,
    },
];

fn methods(records: &[ExperimentRecord]) -> Vec<AlphaMethod> {
    let mut m: Vec<AlphaMethod> = records.iter().map(|r| r.alpha_method).collect();
    m.sort();
    m.dedup();
    m
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

pub fn render_svg(records: &[ExperimentRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(QsvtError::InvalidConfig("no records to plot".into()));
    }
    let ok: Vec<&ExperimentRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let methods = methods(records);
    let x_max = records.iter().map(|r| r.instance).max().unwrap_or(0).max(1) as f64;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = MARGIN_TOP + 2.0 * PANEL_HEIGHT + PANEL_GAP + 40.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (pi, panel) in PANELS.iter().enumerate() {
        let top = MARGIN_TOP + pi as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let (y_lo, y_hi) = range(ok.iter().map(|r| (panel.value)(r)));
        let px = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
        let py = |y: f64| top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * PANEL_HEIGHT;
        let _ = writeln!(
            s,
            r#"<g class="panel" data-panel="{}">"#,
            panel.title.to_lowercase()
        );
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN_LEFT}" y="{:.1}" font-size="14">{}</text>"#,
            top - 10.0,
            panel.title
        );
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_LEFT}" y="{top:.1}" width="{plot_w:.1}" height="{PANEL_HEIGHT:.1}" fill="none" stroke="#444"/>"##
        );
        for (v, anchor) in [(y_lo, py(y_lo)), (y_hi, py(y_hi))] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
                MARGIN_LEFT - 6.0,
                anchor + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">instance</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            top + PANEL_HEIGHT + 20.0
        );
        for (mi, method) in methods.iter().enumerate() {
            let color = COLORS[mi % COLORS.len()];
            let pts: Vec<(f64, f64)> = ok
                .iter()
                .filter(|r| r.alpha_method == *method)
                .map(|r| (px(r.instance as f64), py((panel.value)(r))))
                .collect();
            let _ = writeln!(
                s,
                r#"<g class="series" data-method="{method}" stroke="{color}" fill="{color}">"#
            );
            let joined: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke-width="1" points="{}"/>"#,
                joined.join(" ")
            );
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#);
            }
            let _ = writeln!(s, "</g>");
            if pi == 0 {
                let ly = top + 16.0 * mi as f64 + 10.0;
                let lx = WIDTH - MARGIN_RIGHT + 15.0;
                let _ = writeln!(
                    s,
                    r#"<circle cx="{lx:.1}" cy="{ly:.1}" r="4" fill="{color}"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}">{method}</text>"#,
                    lx + 10.0,
                    ly + 4.0
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let svg = render_svg(records)?;
    std::fs::write(path, svg)?;
    Ok(())
}
