//! Static SVG of a normalized entropy curve over its precision labeling.

use std::fmt::Write as _;

use crate::entropy::EntropySeries;
use crate::error::{Error, Result};
use crate::segment::{z_scores, PrecisionLabeling};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 300.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 16.0;
const BOTTOM: f64 = 40.0;

const PRECISION_FILL: &str = "#2ca02c";
const CASUAL_FILL: &str = "#d62728";

pub fn plot_file_name(i: usize) -> String {
    format!("plot_{i}.svg")
}

struct Frame {
    len: usize,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn plot_width() -> f64 {
        WIDTH - LEFT - RIGHT
    }

    fn x(&self, t: f64) -> f64 {
        let x = if self.len <= 1 {
            LEFT + Self::plot_width() / 2.0
        } else {
            LEFT + (t - 1.0) / (self.len - 1) as f64 * Self::plot_width()
        };
        x.clamp(LEFT, WIDTH - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + (self.hi - v) / (self.hi - self.lo) * h
    }
}

/// Renders the z-scored entropy as one polyline, with a green band behind
/// every precision run and a red band behind every casual run.
pub fn render_svg(series: &EntropySeries, labeling: &PrecisionLabeling) -> Result<String> {
    let len = series.len();
    if labeling.len() != len {
        return Err(Error::InvalidData(format!(
            "entropy series has {len} frames but labeling has {}",
            labeling.len()
        )));
    }
    if len == 0 {
        return Err(Error::InvalidData("cannot plot an empty series".into()));
    }
    let z = z_scores(&series.values);
    let (mut lo, mut hi) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let frame = Frame {
        len,
        lo: lo - pad,
        hi: hi + pad,
    };
    let bottom = HEIGHT - BOTTOM;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"#
    );
    let _ = writeln!(svg, "<title>normalized entropy: {}</title>", escape(&series.trajectory));
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#);

    let mut runs: Vec<(usize, usize, bool)> = labeling
        .precision_runs()
        .iter()
        .map(|r| (r.start, r.end, true))
        .chain(labeling.casual_runs().into_iter().map(|r| (r.start, r.end, false)))
        .collect();
    runs.sort();
    for (start, end, precision) in runs {
        let x0 = frame.x(start as f64 - 0.5);
        let x1 = frame.x(end as f64 - 0.5);
        let (class, fill) = if precision {
            ("precision", PRECISION_FILL)
        } else {
            ("casual", CASUAL_FILL)
        };
        let _ = writeln!(
            svg,
            r#"<rect class="band {class}" x="{x0:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.2"/>"#,
            x1 - x0,
            bottom - TOP
        );
    }

    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT:.2},{bottom:.2} H{:.2} M{LEFT:.2},{bottom:.2} V{TOP:.2}" stroke="black" fill="none"/>"#,
        WIDTH - RIGHT
    );
    let step = len.div_ceil(10);
    for t in (step..=len).step_by(step) {
        let x = frame.x(t as f64);
        let _ = writeln!(
            svg,
            r#"<line class="tick" x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t}</text>"#,
            bottom + 5.0,
            bottom + 18.0
        );
    }
    for v in [lo, 0.0, hi] {
        let y = frame.y(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">frame</text>"#,
        LEFT + Frame::plot_width() / 2.0,
        HEIGHT - 6.0
    );

    let points: Vec<String> = z
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", frame.x((i + 1) as f64), frame.y(v)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f3b73" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
