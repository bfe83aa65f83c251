//! Minimal self-contained SVG line chart for cumulative regret curves.

use std::fmt::Write as _;

use crate::harness::io::RegretRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const MAX_POINTS: usize = 2000;

/// Cumulative regret against episode number (1-based on the x axis).
///
/// With `loglog`, both axes are `log10` and points with a non-positive
/// cumulative regret are dropped.
pub fn regret_svg(rows: &[RegretRow], loglog: bool, title: &str) -> String {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.episode + 1) as f64, r.cum_regret))
        .filter(|&(_, y)| !loglog || y > 0.0)
        .map(|(x, y)| if loglog { (x.log10(), y.log10()) } else { (x, y) })
        .collect();
    let stride = pts.len().div_ceil(MAX_POINTS).max(1);
    let mut sampled: Vec<(f64, f64)> = pts.iter().copied().step_by(stride).collect();
    if let (Some(&last), Some(&kept)) = (pts.last(), sampled.last()) {
        if last != kept {
            sampled.push(last);
        }
    }

    let (x_lo, x_hi) = bounds(sampled.iter().map(|p| p.0));
    let (y_lo, y_hi) = bounds(sampled.iter().map(|p| p.1));
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * plot_h;
    let axis_label = |v: f64| if loglog { format!("1e{v:.2}") } else { format!("{v:.4}") };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" fill="none" stroke="black" stroke-width="1"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (x, anchor, text) in [
        (MARGIN, "start", axis_label(x_lo)),
        (WIDTH - MARGIN, "end", axis_label(x_hi)),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for (y, text) in [(HEIGHT - MARGIN, axis_label(y_lo)), (MARGIN, axis_label(y_hi))] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end">{text}</text>"#,
            MARGIN - 4.0
        );
    }
    let x_name = if loglog { "log10 episode" } else { "episode" };
    let y_name = if loglog { "log10 cumulative regret" } else { "cumulative regret" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{x_name}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{y_name}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    if !sampled.is_empty() {
        let mut points = String::new();
        for (x, y) in &sampled {
            let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            points.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
