//! Static SVG of HV-gap curves: mean line and standard-error band per model,
//! log-scaled gap axis.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::output::SummaryRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Gaps are clamped here before taking logs; exact zeros occur at the best run.
const GAP_FLOOR: f64 = 1e-8;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Groups rows by model in first-appearance order.
fn by_model(table: &[SummaryRow]) -> Vec<(&str, Vec<&SummaryRow>)> {
    let mut out: Vec<(&str, Vec<&SummaryRow>)> = Vec::new();
    for r in table {
        match out.iter_mut().find(|(m, _)| *m == r.model) {
            Some((_, rows)) => rows.push(r),
            None => out.push((&r.model, vec![r])),
        }
    }
    for (_, rows) in &mut out {
        rows.sort_by_key(|r| r.iteration);
    }
    out
}

pub fn render_svg(table: &[SummaryRow]) -> Result<String> {
    if table.is_empty() {
        return Err(HarnessError::Config("nothing to plot".into()));
    }
    let groups = by_model(table);
    let lg = |v: f64| v.max(GAP_FLOOR).log10();
    let max_iter = table.iter().map(|r| r.iteration).max().unwrap_or(0).max(1) as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in table {
        lo = lo.min(lg(r.mean_gap - r.std_error)).min(lg(r.mean_gap));
        hi = hi.max(lg(r.mean_gap + r.std_error));
    }
    let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |i: f64| LEFT + pw * i / max_iter;
    let sy = |g: f64| TOP + ph * (hi - lg(g)) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    );

    let mut e = lo as i64;
    while e as f64 <= hi {
        let y = sy(10f64.powi(e as i32));
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#, LEFT - 6.0, y + 4.0);
        e += 1;
    }
    let ticks = max_iter as usize;
    let step = (ticks / 10).max(1);
    for t in (0..=ticks).step_by(step) {
        let x = sx(t as f64);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, TOP + ph + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">HV gap</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (k, (model, rows)) in groups.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let upper = rows.iter().map(|r| format!("{:.2},{:.2}", sx(r.iteration as f64), sy(r.mean_gap + r.std_error)));
        let lower =
            rows.iter().rev().map(|r| format!("{:.2},{:.2}", sx(r.iteration as f64), sy(r.mean_gap - r.std_error)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> =
            rows.iter().map(|r| format!("{:.2},{:.2}", sx(r.iteration as f64), sy(r.mean_gap))).collect();
        let _ = writeln!(
            s,
            r#"<polyline data-model="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(model),
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 32.0, ly + 4.0, escape(model));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(table: &[SummaryRow], path: &Path) -> Result<()> {
    let svg = render_svg(table)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}

/// Rows for the listed models only; an empty selection is an error.
pub fn select_models(table: &[SummaryRow], models: &[String]) -> Result<Vec<SummaryRow>> {
    let rows: Vec<SummaryRow> = table.iter().filter(|r| models.contains(&r.model)).cloned().collect();
    if rows.is_empty() {
        return Err(HarnessError::Config(format!("no rows for models {models:?}")));
    }
    Ok(rows)
}
