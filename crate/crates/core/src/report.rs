//! Standalone SVG chart emitters for static report artifacts. Deliberately
//! small: grouped bars for per-layer neuron counts, polylines for sweep
//! curves.

use crate::locator::DistributionReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn svg_open(title: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{x}" y="24" text-anchor="middle" font-size="15">{title}</text>
"#,
        x = WIDTH / 2.0
    )
}

/// Grouped bar chart of flagged neurons per layer.
pub fn distribution_chart_svg(title: &str, report: &DistributionReport) -> String {
    let mut out = svg_open(title);
    let n = report.per_layer.len().max(1);
    let max_count = report
        .per_layer
        .iter()
        .map(|l| l.positive.max(l.negative))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let group_w = plot_w / n as f64;
    let bar_w = (group_w * 0.35).min(28.0);

    for (i, layer) in report.per_layer.iter().enumerate() {
        let cx = MARGIN + (i as f64 + 0.5) * group_w;
        for (value, color, offset) in [
            (layer.positive, "#2f7ed8", -bar_w),
            (layer.negative, "#d84b2f", 0.0),
        ] {
            let h = plot_h * value as f64 / max_count;
            let x = cx + offset;
            let y = HEIGHT - MARGIN - h;
            out.push_str(&format!(
                r#"<rect x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{color}"/>
"#
            ));
        }
        out.push_str(&format!(
            r#"<text x="{cx:.1}" y="{y:.1}" text-anchor="middle">{label}</text>
"#,
            y = HEIGHT - MARGIN + 16.0,
            label = layer.layer
        ));
    }
    out.push_str(&format!(
        r#"<text x="{x}" y="{y}" text-anchor="middle">layer (blue: positive, red: negative; max {max_count})</text>
</svg>
"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 12.0
    ));
    out
}

/// One named polyline series.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line chart over shared x values.
pub fn line_chart_svg(title: &str, x_label: &str, series: &[Series<'_>]) -> String {
    let mut out = svg_open(title);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    let to_px = |x: f64, y: f64| {
        let px = MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    };

    let colors = ["#2f7ed8", "#d84b2f", "#4caf50", "#9c27b0", "#ff9800"];
    for (i, s) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        out.push_str(&format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>
"#,
            pts.join(" ")
        ));
        out.push_str(&format!(
            r#"<text x="{x}" y="{y}" fill="{color}">{name}</text>
"#,
            x = WIDTH - MARGIN - 140.0,
            y = 40.0 + 16.0 * i as f64,
            name = s.name
        ));
    }
    out.push_str(&format!(
        r#"<text x="{x}" y="{y}" text-anchor="middle">{x_label} in [{x_min}, {x_max}]; y in [{y_min:.4}, {y_max:.4}]</text>
</svg>
"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 12.0
    ));
    out
}
