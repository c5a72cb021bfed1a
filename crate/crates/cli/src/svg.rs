//! Deterministic SVG power-curve plots: sample size on x, power on y, one
//! polyline per curve with an optional shaded confidence band, and a red
//! horizontal line at the target power.
//!
//! Axis mapping is linear: with the plot area spanning `[LEFT, LEFT+WIDTH]`
//! horizontally over the n range and `[TOP, TOP+HEIGHT]` vertically over
//! power 1 down to 0, a value v lands at `y = TOP + (1 - v) * HEIGHT` and a
//! sample size n at `x = LEFT + (n - n_min) / (n_max - n_min) * WIDTH`. All
//! coordinates are written with two decimals, so identical inputs produce
//! identical bytes.

use std::fmt::Write as _;

/// Left edge of the plot area in px.
pub const LEFT: f64 = 62.0;
/// Top edge of the plot area in px.
pub const TOP: f64 = 40.0;
/// Plot area width in px.
pub const WIDTH: f64 = 540.0;
/// Plot area height in px.
pub const HEIGHT: f64 = 320.0;

const CANVAS_W: f64 = 640.0;
const CANVAS_H: f64 = 430.0;

/// Curve color cycle; red is reserved for the target line.
pub const PALETTE: [&str; 6] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#17becf", "#8c564b"];

/// One plotted point; `band` is the (low, high) confidence interval.
#[derive(Clone, Copy, Debug)]
pub struct PlotPoint {
    pub n: f64,
    pub value: f64,
    pub band: Option<(f64, f64)>,
}

/// One curve: a label for the legend and its points in n order.
#[derive(Clone, Debug)]
pub struct PlotCurve {
    pub label: String,
    pub points: Vec<PlotPoint>,
}

/// Plot-wide options.
#[derive(Clone, Debug)]
pub struct PlotOptions {
    pub title: String,
    /// Power level for the red horizontal line.
    pub target: f64,
}

fn x_of(n: f64, n_min: f64, n_max: f64) -> f64 {
    if n_max > n_min {
        LEFT + (n - n_min) / (n_max - n_min) * WIDTH
    } else {
        LEFT + WIDTH / 2.0
    }
}

fn y_of(v: f64) -> f64 {
    TOP + (1.0 - v.clamp(0.0, 1.0)) * HEIGHT
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the plot; deterministic for identical inputs.
pub fn power_plot(curves: &[PlotCurve], options: &PlotOptions) -> String {
    let mut n_min = f64::INFINITY;
    let mut n_max = f64::NEG_INFINITY;
    for p in curves.iter().flat_map(|c| &c.points) {
        n_min = n_min.min(p.n);
        n_max = n_max.max(p.n);
    }
    if !n_min.is_finite() {
        n_min = 0.0;
        n_max = 1.0;
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" \
         viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        LEFT + WIDTH / 2.0,
        esc(&options.title)
    );

    // Axes with y ticks every 0.2 and five evenly spaced x ticks.
    let bottom = TOP + HEIGHT;
    let right = LEFT + WIDTH;
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT:.2}\" y1=\"{TOP:.2}\" x2=\"{LEFT:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT:.2}\" y1=\"{bottom:.2}\" x2=\"{right:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
    );
    for i in 0..=5 {
        let v = f64::from(i) / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.1}</text>",
            LEFT - 9.0,
            y + 4.0
        );
    }
    for i in 0..=4 {
        let n = n_min + (n_max - n_min) * f64::from(i) / 4.0;
        let x = x_of(n, n_min, n_max);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{bottom:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            bottom + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{n:.0}</text>",
            bottom + 19.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">samples per group</text>",
        LEFT + WIDTH / 2.0,
        bottom + 38.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">power</text>",
        TOP + HEIGHT / 2.0,
        TOP + HEIGHT / 2.0
    );

    // Confidence bands first so curves draw on top of them.
    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        if curve.points.iter().any(|p| p.band.is_none()) {
            continue;
        }
        let mut poly = String::new();
        for p in &curve.points {
            let (lo, _) = p.band.unwrap();
            if !lo.is_finite() {
                poly.clear();
                break;
            }
            let _ = write!(poly, "{:.2},{:.2} ", x_of(p.n, n_min, n_max), y_of(lo));
        }
        if poly.is_empty() {
            continue;
        }
        for p in curve.points.iter().rev() {
            let (_, hi) = p.band.unwrap();
            let _ = write!(poly, "{:.2},{:.2} ", x_of(p.n, n_min, n_max), y_of(hi));
        }
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            poly.trim_end()
        );
    }

    // Target line: red, at the exact linear-mapping coordinate.
    let ty = y_of(options.target);
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT:.2}\" y1=\"{ty:.2}\" x2=\"{right:.2}\" y2=\"{ty:.2}\" stroke=\"red\" stroke-width=\"1.5\"/>"
    );

    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mut pts = String::new();
        for p in &curve.points {
            let _ = write!(pts, "{:.2},{:.2} ", x_of(p.n, n_min, n_max), y_of(p.value));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            pts.trim_end()
        );
    }

    // Legend, top-left inside the plot area.
    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let y = TOP + 14.0 + 16.0 * ci as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            LEFT + 8.0,
            LEFT + 32.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            LEFT + 38.0,
            y + 4.0,
            esc(&curve.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}
