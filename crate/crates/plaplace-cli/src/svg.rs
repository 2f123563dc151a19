//! Self-contained polyline SVG for the ratio curve: axes, tick labels,
//! one polyline. No plotting dependency, no external references.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;

/// Renders ratio against p. The x axis is logarithmic, matching the
/// usual grids; tick positions follow from the data range.
pub fn ratio_plot(n: u32, points: &[(f64, f64)]) -> String {
    assert!(!points.is_empty(), "plot needs at least one point");
    let (mut p_lo, mut p_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut r_lo, mut r_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(p, r) in points {
        p_lo = p_lo.min(p);
        p_hi = p_hi.max(p);
        r_lo = r_lo.min(r);
        r_hi = r_hi.max(r);
    }
    // Degenerate spans (single-point grids) still need a finite box.
    if p_hi <= p_lo {
        p_lo *= 0.9;
        p_hi = (p_hi * 1.1).max(p_lo * 1.01);
    }
    if r_hi <= r_lo {
        r_lo -= 0.5 * r_lo.abs().max(0.1);
        r_hi += 0.5 * r_hi.abs().max(0.1);
    }
    let pad = 0.05 * (r_hi - r_lo);
    r_lo -= pad;
    r_hi += pad;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |p: f64| LEFT + plot_w * (p.ln() - p_lo.ln()) / (p_hi.ln() - p_lo.ln());
    let y_of = |r: f64| TOP + plot_h * (r_hi - r) / (r_hi - r_lo);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">\
         ratio K*/K for n = {n}</text>\n",
        LEFT + plot_w / 2.0
    );

    // Axes.
    let x0 = LEFT;
    let y0 = TOP + plot_h;
    let _ = write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{TOP}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        LEFT + plot_w
    );

    // X ticks: round values spread over the log range.
    for tick in [1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0] {
        if tick < p_lo * 0.999 || tick > p_hi * 1.001 {
            continue;
        }
        let x = x_of(tick.clamp(p_lo, p_hi));
        let _ = write!(
            svg,
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{tick}</text>\n",
            y0 + 5.0,
            y0 + 18.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">p</text>\n",
        LEFT + plot_w / 2.0,
        y0 + 36.0
    );

    // Y ticks: five evenly spaced levels.
    for k in 0..5 {
        let r = r_lo + (r_hi - r_lo) * k as f64 / 4.0;
        let y = y_of(r);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{r:.3}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }

    let mut coords = String::new();
    for &(p, r) in points {
        let _ = write!(coords, "{:.2},{:.2} ", x_of(p), y_of(r));
    }
    let _ = write!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\"/>\n",
        coords.trim_end()
    );
    svg.push_str("</svg>\n");
    svg
}
