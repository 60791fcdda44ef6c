//! Grouped bar charts as standalone SVG: datasets on the x axis, one bar per
//! technique, value on the y axis.

use std::fmt::Write;

use super::results::{ResultRow, ResultsTable, METRIC_TITLES};
use crate::error::{Error, Result};
use crate::evalkit::MetricsReport;

const BAR_WIDTH: f64 = 22.0;
const GROUP_GAP: f64 = 28.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const PLOT_HEIGHT: f64 = 260.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

/// One chart per metric, keyed by metric name. Fails when the table holds no
/// mean rows.
pub fn render_charts(table: &ResultsTable) -> Result<Vec<(&'static str, String)>> {
    if table.mean_rows().next().is_none() {
        return Err(Error::Results("results contain no mean rows".into()));
    }
    Ok((0..5).map(|m| (MetricsReport::NAMES[m], render_chart(table, m))).collect())
}

fn render_chart(table: &ResultsTable, metric: usize) -> String {
    let means: Vec<_> = table.mean_rows().collect();
    let datasets = first_seen(means.iter().map(|r| r.dataset.as_str()));
    let techniques = first_seen(means.iter().map(|r| r.technique.as_str()));
    let value = |r: &ResultRow| r.metrics.expect("mean rows carry metrics").values()[metric];

    let lo = if means.iter().any(|r| value(r) < 0.0) { -1.0 } else { 0.0 };
    let hi = 1.0_f64.max(means.iter().map(|r| value(r)).fold(f64::MIN, f64::max));
    let y_of = |v: f64| TOP + PLOT_HEIGHT * (hi - v) / (hi - lo);

    let group_width = techniques.len() as f64 * BAR_WIDTH;
    let plot_width = datasets.len() as f64 * (group_width + GROUP_GAP) + GROUP_GAP;
    let width = LEFT + plot_width + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let title = METRIC_TITLES[metric];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<title>{title}</title>"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + plot_width / 2.0,
        TOP / 2.0 + 4.0
    );

    // y grid and ticks
    let steps = ((hi - lo) / 0.2).round() as i32;
    for i in 0..=steps {
        let v = lo + 0.2 * i as f64;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_width
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<line class="axis" x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
        y_of(0.0),
        LEFT + plot_width,
        y_of(0.0)
    );
    let _ = writeln!(
        s,
        r##"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="#333"/>"##,
        TOP + PLOT_HEIGHT
    );

    for (gi, dataset) in datasets.iter().enumerate() {
        let gx = LEFT + GROUP_GAP + gi as f64 * (group_width + GROUP_GAP);
        for (ti, technique) in techniques.iter().enumerate() {
            let Some(row) = means.iter().find(|r| r.dataset == *dataset && r.technique == *technique) else {
                continue;
            };
            let v = value(row);
            let (y, h) = (y_of(v.max(0.0)), (y_of(v) - y_of(0.0)).abs());
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-dataset="{}" data-technique="{}" data-value="{v:.6}" x="{:.2}" y="{y:.2}" width="{BAR_WIDTH}" height="{h:.2}" fill="{}"><title>{} / {}: {v:.3}</title></rect>"#,
                escape(dataset),
                escape(technique),
                gx + ti as f64 * BAR_WIDTH,
                PALETTE[ti % PALETTE.len()],
                escape(dataset),
                escape(technique),
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + group_width / 2.0,
            TOP + PLOT_HEIGHT + 20.0,
            escape(dataset)
        );
    }

    let lx = LEFT + plot_width + 16.0;
    for (ti, technique) in techniques.iter().enumerate() {
        let ly = TOP + 10.0 + ti as f64 * 20.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{lx:.2}" y="{ly:.2}" width="12" height="12" fill="{}"/>"#,
            PALETTE[ti % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 18.0,
            ly + 10.0,
            escape(technique)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn first_seen<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = Vec::new();
    for n in names {
        if !seen.contains(&n) {
            seen.push(n);
        }
    }
    seen
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
