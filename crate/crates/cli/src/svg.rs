//! Static step-response charts.

use std::fmt::Write as _;

use pidfit::TimeSeries;

use crate::output::format_g;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 10;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Renders labelled traces on shared axes; the same input gives the same bytes.
pub fn emit_svg(title: &str, traces: &[(&str, &TimeSeries)]) -> Result<String, String> {
    if traces.is_empty() {
        return Err("no traces to plot".into());
    }
    let t_max = traces
        .iter()
        .map(|(_, s)| s.grid().t_final())
        .fold(0.0, f64::max);
    let (mut y_min, mut y_max) = (0.0f64, 0.0f64);
    for (_, s) in traces {
        for v in s.values().iter().filter(|v| v.is_finite()) {
            y_min = y_min.min(*v);
            y_max = y_max.max(*v);
        }
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + t / t_max * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let t = frac * t_max;
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            format_g(t, 4)
        );
        let y = y_lo + frac * (y_hi - y_lo);
        let py = sy(y);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py + 4.0,
            format_g(round_label(y, y_hi - y_lo), 4)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time [s]</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">output</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (k, (_, series)) in traces.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    segment.join(" ")
                );
            }
            segment.clear();
        };
        for (t, v) in series.times().iter().zip(series.values()) {
            if v.is_finite() {
                segment.push(format!("{:.2},{:.2}", sx(*t), sy(*v)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
    }

    let legend_w = 20.0
        + 8.0
            * traces
                .iter()
                .map(|(l, _)| l.chars().count())
                .max()
                .unwrap_or(0) as f64
        + 30.0;
    let legend_x = LEFT + plot_w - legend_w - 10.0;
    let legend_y = TOP + 10.0;
    let _ = writeln!(
        out,
        r##"<rect x="{legend_x:.2}" y="{legend_y:.2}" width="{legend_w:.2}" height="{:.2}" fill="white" stroke="#808080"/>"##,
        10.0 + 18.0 * traces.len() as f64
    );
    for (k, (label, _)) in traces.iter().enumerate() {
        let y = legend_y + 17.0 + 18.0 * k as f64;
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            legend_x + 8.0,
            y - 4.0,
            legend_x + 30.0,
            y - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{y:.2}">{}</text>"#,
            legend_x + 36.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Snaps values that are zero up to rounding so labels do not read `-1.1e-17`.
fn round_label(v: f64, span: f64) -> f64 {
    if v.abs() < 1e-9 * span {
        0.0
    } else {
        v
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
