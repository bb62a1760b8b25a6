//! Minimal SVG line charts rendered from summary data. Convenience output
//! only; CSVs are the canonical summaries.

use std::path::Path;

use crate::error::Result;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 52.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            xs.0 = xs.0.min(x);
            xs.1 = xs.1.max(x);
            ys.0 = ys.0.min(y);
            ys.1 = ys.1.max(y);
        }
    }
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
        ys = (0.0, 1.0);
    }
    if xs.0 == xs.1 {
        xs.1 = xs.0 + 1.0;
    }
    if ys.0 == ys.1 {
        ys.1 = ys.0 + 1.0;
    }
    (xs, ys)
}

/// Render one chart with shared axes; returns the SVG document.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(series);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // axes
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"#333\"/>\n",
        MARGIN_TOP + plot_h
    ));

    // ticks
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let px = sx(fx);
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#333\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            trim_num(fx)
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_LEFT}\" y2=\"{py}\" stroke=\"#333\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            trim_num(fy)
        ));
    }

    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.points.is_empty() {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
        let ly = MARGIN_TOP + 6.0 + i as f64 * 16.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            MARGIN_LEFT + plot_w - 120.0,
            MARGIN_LEFT + plot_w - 100.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN_LEFT + plot_w - 94.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, line_chart_svg(title, x_label, y_label, series))?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_chart_with_series() {
        let series = [
            Series { label: "a".into(), points: vec![(0.0, 0.0), (0.5, 0.4), (1.0, 1.0)] },
            Series { label: "b".into(), points: vec![(0.0, 1.0), (1.0, 0.0)] },
        ];
        let svg = line_chart_svg("title", "x", "y", &series);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("title"));
    }

    #[test]
    fn empty_series_still_render() {
        let svg = line_chart_svg("t", "x", "y", &[]);
        assert!(svg.contains("</svg>"));
    }
}
