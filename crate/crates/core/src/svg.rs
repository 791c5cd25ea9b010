//! Minimal deterministic SVG charts for report emission.
//!
//! Hand-rolled on purpose: output bytes depend only on the input values, so
//! identical runs emit identical plot files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One named line in a [`line_chart`].
pub struct Series {
    pub name: String,
    /// (x, y) points, already in data coordinates.
    pub points: Vec<(f64, f64)>,
}

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn svg_header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Scale {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Scale {
    fn of(series: &[Series]) -> Scale {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for s in series {
            for &(x, y) in &s.points {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
        if !x_min.is_finite() {
            (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
        }
        if (x_max - x_min).abs() < 1e-12 {
            x_max = x_min + 1.0;
        }
        if (y_max - y_min).abs() < 1e-12 {
            y_max = y_min + 1.0;
        }
        Scale {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Multi-series line chart with axis labels and a small legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let scale = Scale::of(series);
    let mut s = svg_header(title);
    // Axes.
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    // Axis extent labels.
    for (v, x_axis) in [
        (scale.x_min, true),
        (scale.x_max, true),
        (scale.y_min, false),
        (scale.y_max, false),
    ] {
        let (x, y, anchor) = if x_axis {
            (scale.px(v), HEIGHT - MARGIN + 16.0, "middle")
        } else {
            (MARGIN - 6.0, scale.py(v) + 4.0, "end")
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{}</text>"#,
            fmt_coord(x),
            fmt_coord(y),
            format_args!("{v:.3}")
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_coord(scale.px(x)), fmt_coord(scale.py(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                fmt_coord(scale.px(x)),
                fmt_coord(scale.py(y))
            );
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            ly,
            WIDTH - MARGIN - 96.0,
            ly + 9.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn grouped_bar_chart(
    title: &str,
    group_labels: &[String],
    series_names: &[String],
    values: &[Vec<f64>],
) -> String {
    let mut s = svg_header(title);
    let y_max = values
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(v))
        .max(1e-9);
    let groups = group_labels.len().max(1) as f64;
    let group_w = (WIDTH - 2.0 * MARGIN) / groups;
    let bar_w = group_w / (series_names.len() as f64 + 1.0);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (gi, label) in group_labels.iter().enumerate() {
        let gx = MARGIN + gi as f64 * group_w;
        for (si, _) in series_names.iter().enumerate() {
            let v = values.get(si).and_then(|col| col.get(gi)).copied().unwrap_or(0.0);
            let h = v / y_max * (HEIGHT - 2.0 * MARGIN);
            let color = SERIES_COLORS[si % SERIES_COLORS.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                fmt_coord(gx + bar_w * (si as f64 + 0.5)),
                fmt_coord(HEIGHT - MARGIN - h),
                fmt_coord(bar_w),
                fmt_coord(h)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            fmt_coord(gx + group_w / 2.0),
            HEIGHT - MARGIN + 16.0,
            escape(label)
        );
    }
    for (si, name) in series_names.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let ly = MARGIN + 16.0 * si as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            ly,
            WIDTH - MARGIN - 96.0,
            ly + 9.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Conversation rendering where each tweet's fill intensity encodes how many
/// pooled dimensions it won.
pub fn attribution_chart(title: &str, rows: &[(String, usize, String)]) -> String {
    let mut s = svg_header(title);
    let max_dims = rows.iter().map(|r| r.1).max().unwrap_or(0).max(1) as f64;
    let row_h = ((HEIGHT - 2.0 * MARGIN) / rows.len().max(1) as f64).min(28.0);
    for (i, (tweet_id, dims, text)) in rows.iter().enumerate() {
        let y = MARGIN + i as f64 * row_h;
        let intensity = *dims as f64 / max_dims;
        let shade = (255.0 - intensity * 160.0) as u8;
        let _ = writeln!(
            s,
            r##"<rect x="{m}" y="{}" width="{w}" height="{h}" fill="rgb(255,{shade},{shade})" stroke="#999"/>"##,
            fmt_coord(y),
            m = MARGIN,
            w = WIDTH - 2.0 * MARGIN,
            h = fmt_coord(row_h - 2.0),
        );
        let snippet: String = text.chars().take(60).collect();
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{} ({} dims) {}</text>"#,
            MARGIN + 6.0,
            fmt_coord(y + row_h / 2.0 + 4.0),
            escape(tweet_id),
            dims,
            escape(&snippet)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_deterministic_and_wellformed() {
        let series = vec![Series {
            name: "macro-F1".into(),
            points: vec![(0.0, 0.5), (0.5, 0.55), (1.0, 0.6)],
        }];
        let a = line_chart("sweep", "lambda", "score", &series);
        let b = line_chart("sweep", "lambda", "score", &series);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("polyline"));
    }

    #[test]
    fn bar_chart_handles_empty_groups() {
        let svg = grouped_bar_chart("empty", &[], &[], &[]);
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn attribution_escapes_markup() {
        let svg = attribution_chart(
            "case",
            &[("t<1>".into(), 3, "a & b".into())],
        );
        assert!(svg.contains("t&lt;1&gt;"));
        assert!(svg.contains("a &amp; b"));
    }
}
