//! Minimal SVG line plots of index series with their fitted trend.

use std::fmt::Write as _;
use std::path::Path;

use crate::indices::IndexSeries;
use crate::stats::TrendFit;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

/// The declared scale, narrowed when every value sits in its bottom tenth
/// (salience values are typically a few per thousand).
fn y_range(series: &[&IndexSeries]) -> (f64, f64) {
    let scale = series[0].scale;
    let max = series.iter().flat_map(|s| s.points.iter().map(|p| p.value)).fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().flat_map(|s| s.points.iter().map(|p| p.value)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (scale.lo.min(min), scale.hi.max(max));
    if max.is_finite() && max < scale.lo + 0.1 * (scale.hi - scale.lo) && max > scale.lo {
        hi = scale.lo + (max - scale.lo) * 1.2;
        lo = scale.lo;
    }
    (lo, hi)
}

fn frame(series: &[&IndexSeries]) -> Frame {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| f64::from(p.time_unit)));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let (y0, y1) = y_range(series);
    Frame { x0, x1, y0, y1 }
}

/// Runs of points with no missing time unit between them. The step is the
/// smallest spacing seen (1 for annual series, the interval length for
/// breadth).
fn segments(series: &IndexSeries) -> Vec<&[crate::indices::SeriesPoint]> {
    let pts = &series.points;
    let step = pts.windows(2).map(|w| w[1].time_unit - w[0].time_unit).filter(|d| *d > 0).min().unwrap_or(1);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=pts.len() {
        if i == pts.len() || pts[i].time_unit - pts[i - 1].time_unit > step {
            out.push(&pts[start..i]);
            start = i;
        }
    }
    out
}

fn axes(svg: &mut String, f: &Frame, y_label: &str) {
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(svg, r##"<g class="axes" stroke="#333" stroke-width="1">"##);
    let _ = writeln!(svg, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}"/>"#, W - RIGHT);
    let _ = writeln!(svg, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{bx:.2}" y2="{TOP:.2}"/>"#);
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r##"<g class="ticks" font-size="11" fill="#333">"##);
    for k in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * f64::from(k) / 4.0;
        let y = f.py(v);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(v));
    }
    let first = (f.x0 / 10.0).ceil() as i32 * 10;
    let mut year = first;
    while f64::from(year) <= f.x1 {
        let x = f.px(f64::from(year));
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{year}</text>"#, H - BOTTOM + 16.0);
        year += 10;
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">year</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="ylabel" transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle" font-size="12">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        esc(y_label)
    );
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.01 {
        format!("{v:.4}")
    } else {
        format!("{v:.2}")
    }
}

fn draw_series(svg: &mut String, f: &Frame, s: &IndexSeries, color: &str) {
    for seg in segments(s) {
        if seg.len() >= 2 {
            let pts: Vec<String> =
                seg.iter().map(|p| format!("{:.2},{:.2}", f.px(f64::from(p.time_unit)), f.py(p.value))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    for p in &s.points {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{}: {}</title></circle>"#,
            f.px(f64::from(p.time_unit)),
            f.py(p.value),
            p.time_unit,
            p.value
        );
    }
}

fn header(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text class="title" x="{LEFT}" y="24" font-size="14">{}</text>"#, esc(title));
}

fn y_label(s: &IndexSeries) -> String {
    format!("{} [{}, {}]", s.index, s.scale.lo, s.scale.hi)
}

/// Data markers, a polyline broken at missing periods, and the fitted curve
/// with one text field per coefficient.
pub fn render_plot(series: &IndexSeries, fit: Option<&TrendFit>, title: &str) -> String {
    let mut svg = String::new();
    header(&mut svg, title);
    if series.is_empty() {
        let _ = writeln!(svg, "</svg>");
        return svg;
    }
    let f = frame(&[series]);
    axes(&mut svg, &f, &y_label(series));
    draw_series(&mut svg, &f, series, PALETTE[0]);
    if let Some(fit) = fit {
        let steps = 120;
        let mut d = String::new();
        for i in 0..=steps {
            let x = f.x0 + (f.x1 - f.x0) * f64::from(i) / f64::from(steps);
            let y = fit.predict(x).clamp(f.y0 - (f.y1 - f.y0), f.y1 + (f.y1 - f.y0));
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, f.px(x), f.py(y));
        }
        let _ = writeln!(
            svg,
            r##"<path class="fit" data-model="{}" data-estimator="{}" fill="none" stroke="#555" stroke-dasharray="6 4" d="{}"/>"##,
            fit.model,
            fit.estimator,
            d.trim_end()
        );
        let _ = writeln!(svg, r##"<g class="coefficients" font-size="11" fill="#222">"##);
        for (i, c) in fit.coefficients.iter().enumerate() {
            let _ = writeln!(
                svg,
                r#"<text class="coef" data-term="{}" x="{:.2}" y="{:.2}">{} B = {:.4} (SE {:.4}, p = {:.3})</text>"#,
                esc(&c.term),
                W - RIGHT - 250.0,
                TOP + 14.0 * i as f64,
                esc(&c.term),
                c.b,
                c.se,
                c.p
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Several corpora for one (target, index) on shared axes.
pub fn render_overlay(series: &[(&str, &IndexSeries)], title: &str) -> String {
    let mut svg = String::new();
    header(&mut svg, title);
    let nonempty: Vec<&IndexSeries> = series.iter().map(|(_, s)| *s).filter(|s| !s.is_empty()).collect();
    if nonempty.is_empty() {
        let _ = writeln!(svg, "</svg>");
        return svg;
    }
    let f = frame(&nonempty);
    axes(&mut svg, &f, &y_label(nonempty[0]));
    for (i, (label, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        draw_series(&mut svg, &f, s, color);
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 14.0 * i as f64,
            esc(label)
        );
    }
    let _ = writeln!(svg, "</svg>");
    svg
}

pub fn emit_plot(series: &IndexSeries, fit: Option<&TrendFit>, title: &str, path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render_plot(series, fit, title))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::{IndexKind, SeriesPoint};
    use crate::stats::{fit_trend, TrendModel, TrendOptions};

    fn series(pts: &[(i32, f64)], kind: IndexKind) -> IndexSeries {
        IndexSeries::from_points("t", kind, pts.iter().map(|&(y, v)| SeriesPoint { time_unit: y, value: v, n: 1 }))
    }

    #[test]
    fn one_marker_per_point() {
        let s = series(&[(2000, 5.0), (2001, 5.5), (2002, 6.0)], IndexKind::Valence);
        let svg = render_plot(&s, None, "t");
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert_eq!(svg.matches(r#"class="series""#).count(), 1);
    }

    #[test]
    fn gap_breaks_polyline() {
        let s = series(&[(2000, 5.0), (2001, 5.5), (2003, 6.0), (2004, 6.1)], IndexKind::Valence);
        let svg = render_plot(&s, None, "t");
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
        // interval series step by their own spacing
        let b = series(&[(1970, 0.5), (1975, 0.6), (1980, 0.55)], IndexKind::Breadth);
        assert_eq!(render_plot(&b, None, "b").matches(r#"class="series""#).count(), 1);
    }

    #[test]
    fn quadratic_fit_has_three_coefficients() {
        let pts: Vec<(i32, f64)> =
            (1970..=2016).map(|y| (y, 0.1 + 0.0002 * f64::from(y - 1993).powi(2) + 0.001 * f64::from(y % 3))).collect();
        let s = series(&pts, IndexKind::Intensifier);
        let fit = fit_trend(&s, TrendModel::Quadratic, &TrendOptions { dw_permutations: 200, ..Default::default() }).unwrap();
        let svg = render_plot(&s, Some(&fit), "t");
        assert_eq!(svg.matches(r#"class="coef""#).count(), 3);
        assert!(svg.contains(r#"data-model="quadratic""#));
        assert!(svg.contains("intensifier [0, 1]"));
    }

    #[test]
    fn escapes_text() {
        let s = series(&[(2000, 5.0)], IndexKind::Valence);
        assert!(render_plot(&s, None, "a<b>&c").contains("a&lt;b&gt;&amp;c"));
    }
}
