//! Deterministic SVG rendering of boxplots, QQ-plots and Voronoi
//! tessellations.
//!
//! Coordinates are written with three decimals (`-0.000` becomes `0.000`);
//! nothing depends on time, locale or hashing, so equal inputs give
//! byte-identical documents.

use std::fmt::{self, Write as _};

use crate::diagnostics::BoxplotStats;
use crate::error::{Error, Result};
use crate::geometry::VoronoiDiagram;

/// Layout and style constants shared by every plot.
pub mod style {
    pub const WIDTH: f64 = 640.0;
    pub const HEIGHT: f64 = 480.0;
    pub const MARGIN_LEFT: f64 = 70.0;
    pub const MARGIN_RIGHT: f64 = 20.0;
    pub const MARGIN_TOP: f64 = 40.0;
    pub const MARGIN_BOTTOM: f64 = 60.0;
    pub const FONT_FAMILY: &str = "sans-serif";
    pub const FONT_SIZE: f64 = 12.0;
    pub const TITLE_SIZE: f64 = 14.0;
    pub const AXIS_COLOR: &str = "#000000";
    pub const GRID_TICKS: usize = 5;
    pub const TICK_LENGTH: f64 = 5.0;
    pub const BOX_FILL: &str = "#9ecae1";
    pub const BOX_WIDTH_FRACTION: f64 = 0.5;
    pub const BOX_MAX_WIDTH: f64 = 60.0;
    pub const MARKER_RADIUS: f64 = 3.0;
    pub const MARKER_COLOR: &str = "#1f77b4";
    pub const REFERENCE_COLOR: &str = "#d62728";
    pub const SITE_RADIUS: f64 = 2.5;
    pub const SITE_COLOR: &str = "#000000";
    pub const CELL_STROKE: &str = "#ffffff";
    /// Categorical colors, cycled by label.
    pub const PALETTE: [&str; 8] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];
    /// Endpoints of the scalar ramp, interpolated linearly per RGB channel.
    pub const RAMP_LOW: [u8; 3] = [0x21, 0x66, 0xac];
    pub const RAMP_HIGH: [u8; 3] = [0xb2, 0x18, 0x2b];
}

use style::*;

/// Fixed-precision coordinate text.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Anchor {
    Start,
    Middle,
    End,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        fill: String,
        stroke: String,
    },
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        stroke: String,
        dashed: bool,
    },
    Polygon {
        points: Vec<(f64, f64)>,
        fill: String,
        stroke: String,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
        fill: String,
    },
    Text {
        x: f64,
        y: f64,
        text: String,
        size: f64,
        anchor: Anchor,
        rotate: bool,
    },
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Rect {
                x,
                y,
                width,
                height,
                fill,
                stroke,
            } => write!(
                f,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#,
                fmt_num(*x),
                fmt_num(*y),
                fmt_num(*width),
                fmt_num(*height)
            ),
            Element::Line {
                x1,
                y1,
                x2,
                y2,
                stroke,
                dashed,
            } => write!(
                f,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1"{}/>"#,
                fmt_num(*x1),
                fmt_num(*y1),
                fmt_num(*x2),
                fmt_num(*y2),
                if *dashed { r#" stroke-dasharray="4 3""# } else { "" }
            ),
            Element::Polygon { points, fill, stroke } => {
                let pts: Vec<String> = points
                    .iter()
                    .map(|(x, y)| format!("{},{}", fmt_num(*x), fmt_num(*y)))
                    .collect();
                write!(
                    f,
                    r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#,
                    pts.join(" ")
                )
            }
            Element::Circle { cx, cy, r, fill } => write!(
                f,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{fill}"/>"#,
                fmt_num(*cx),
                fmt_num(*cy),
                fmt_num(*r)
            ),
            Element::Text {
                x,
                y,
                text,
                size,
                anchor,
                rotate,
            } => {
                let anchor = match anchor {
                    Anchor::Start => "start",
                    Anchor::Middle => "middle",
                    Anchor::End => "end",
                };
                let rotate = if *rotate {
                    format!(r#" transform="rotate(-90 {} {})""#, fmt_num(*x), fmt_num(*y))
                } else {
                    String::new()
                };
                write!(
                    f,
                    r#"<text x="{}" y="{}" font-family="{FONT_FAMILY}" font-size="{}" text-anchor="{anchor}"{rotate}>{}</text>"#,
                    fmt_num(*x),
                    fmt_num(*y),
                    fmt_num(*size),
                    escape(text)
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgDocument {
    pub width: f64,
    pub height: f64,
    pub elements: Vec<Element>,
}

impl SvgDocument {
    fn new() -> Self {
        Self {
            width: WIDTH,
            height: HEIGHT,
            elements: Vec::new(),
        }
    }

    fn push(&mut self, e: Element) {
        self.elements.push(e);
    }

    pub fn polygons(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter().filter(|e| matches!(e, Element::Polygon { .. }))
    }

    pub fn circles(&self) -> impl Iterator<Item = &Element> {
        self.elements.iter().filter(|e| matches!(e, Element::Circle { .. }))
    }
}

impl fmt::Display for SvgDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(
            f,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = fmt_num(self.width),
            h = fmt_num(self.height)
        )?;
        for e in &self.elements {
            writeln!(f, "{e}")?;
        }
        writeln!(f, "</svg>")
    }
}

/// Plot rectangle in pixels.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn standard() -> Self {
        Self {
            left: MARGIN_LEFT,
            top: MARGIN_TOP,
            width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        }
    }

    fn bottom(&self) -> f64 {
        self.top + self.height
    }
}

/// `[lo, hi]` widened by 5% per side, or by 0.5 when flat.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let p = 0.05 * (hi - lo);
        (lo - p, hi + p)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn scale(v: f64, (lo, hi): (f64, f64), start: f64, length: f64) -> f64 {
    start + (v - lo) / (hi - lo) * length
}

fn text(x: f64, y: f64, s: impl Into<String>, size: f64, anchor: Anchor) -> Element {
    Element::Text {
        x,
        y,
        text: s.into(),
        size,
        anchor,
        rotate: false,
    }
}

fn line(x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) -> Element {
    Element::Line {
        x1,
        y1,
        x2,
        y2,
        stroke: stroke.into(),
        dashed: false,
    }
}

fn title(doc: &mut SvgDocument, s: &str) {
    doc.push(text(
        WIDTH / 2.0,
        MARGIN_TOP / 2.0 + TITLE_SIZE / 2.0,
        s,
        TITLE_SIZE,
        Anchor::Middle,
    ));
}

fn y_axis(doc: &mut SvgDocument, frame: &Frame, range: (f64, f64), label: &str) {
    doc.push(line(frame.left, frame.top, frame.left, frame.bottom(), AXIS_COLOR));
    for k in 0..GRID_TICKS {
        let v = range.0 + (range.1 - range.0) * k as f64 / (GRID_TICKS - 1) as f64;
        let y = frame.bottom() - scale(v, range, 0.0, frame.height);
        doc.push(line(frame.left - TICK_LENGTH, y, frame.left, y, AXIS_COLOR));
        doc.push(text(
            frame.left - TICK_LENGTH - 2.0,
            y + FONT_SIZE / 3.0,
            fmt_num(v),
            FONT_SIZE,
            Anchor::End,
        ));
    }
    doc.push(Element::Text {
        x: FONT_SIZE * 1.5,
        y: frame.top + frame.height / 2.0,
        text: label.into(),
        size: FONT_SIZE,
        anchor: Anchor::Middle,
        rotate: true,
    });
}

fn x_axis(doc: &mut SvgDocument, frame: &Frame, range: (f64, f64), label: &str) {
    doc.push(line(
        frame.left,
        frame.bottom(),
        frame.left + frame.width,
        frame.bottom(),
        AXIS_COLOR,
    ));
    for k in 0..GRID_TICKS {
        let v = range.0 + (range.1 - range.0) * k as f64 / (GRID_TICKS - 1) as f64;
        let x = scale(v, range, frame.left, frame.width);
        doc.push(line(x, frame.bottom(), x, frame.bottom() + TICK_LENGTH, AXIS_COLOR));
        doc.push(text(
            x,
            frame.bottom() + TICK_LENGTH + FONT_SIZE,
            fmt_num(v),
            FONT_SIZE,
            Anchor::Middle,
        ));
    }
    doc.push(text(
        frame.left + frame.width / 2.0,
        HEIGHT - FONT_SIZE,
        label,
        FONT_SIZE,
        Anchor::Middle,
    ));
}

/// One box-and-whisker glyph per named summary on a shared value axis.
pub fn render_boxplots(summaries: &[(String, BoxplotStats)], plot_title: &str) -> SvgDocument {
    let mut doc = SvgDocument::new();
    title(&mut doc, plot_title);
    let frame = Frame::standard();
    let values = summaries.iter().flat_map(|(_, s)| {
        [s.lower_whisker, s.upper_whisker]
            .into_iter()
            .chain(s.outliers.iter().copied())
    });
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = if lo.is_finite() {
        padded_range(lo, hi)
    } else {
        (0.0, 1.0)
    };
    y_axis(&mut doc, &frame, range, "value");
    doc.push(line(
        frame.left,
        frame.bottom(),
        frame.left + frame.width,
        frame.bottom(),
        AXIS_COLOR,
    ));

    let y = |v: f64| frame.bottom() - scale(v, range, 0.0, frame.height);
    let slot = frame.width / summaries.len().max(1) as f64;
    let box_w = (slot * BOX_WIDTH_FRACTION).min(BOX_MAX_WIDTH);
    for (i, (name, s)) in summaries.iter().enumerate() {
        let cx = frame.left + (i as f64 + 0.5) * slot;
        let (l, r) = (cx - box_w / 2.0, cx + box_w / 2.0);
        let cap = box_w / 4.0;
        doc.push(line(cx, y(s.lower_whisker), cx, y(s.q1), AXIS_COLOR));
        doc.push(line(cx, y(s.q3), cx, y(s.upper_whisker), AXIS_COLOR));
        doc.push(line(
            cx - cap,
            y(s.lower_whisker),
            cx + cap,
            y(s.lower_whisker),
            AXIS_COLOR,
        ));
        doc.push(line(
            cx - cap,
            y(s.upper_whisker),
            cx + cap,
            y(s.upper_whisker),
            AXIS_COLOR,
        ));
        doc.push(Element::Rect {
            x: l,
            y: y(s.q3),
            width: box_w,
            height: y(s.q1) - y(s.q3),
            fill: BOX_FILL.into(),
            stroke: AXIS_COLOR.into(),
        });
        doc.push(line(l, y(s.median), r, y(s.median), AXIS_COLOR));
        for &o in &s.outliers {
            doc.push(Element::Circle {
                cx,
                cy: y(o),
                r: MARKER_RADIUS,
                fill: MARKER_COLOR.into(),
            });
        }
        doc.push(text(
            cx,
            frame.bottom() + TICK_LENGTH + FONT_SIZE,
            name.as_str(),
            FONT_SIZE,
            Anchor::Middle,
        ));
    }
    doc
}

/// Scatter of quantile pairs `(predicted, actual)` with the `y = x` line.
pub fn render_qq(points: &[(f64, f64)], plot_title: &str) -> SvgDocument {
    let mut doc = SvgDocument::new();
    title(&mut doc, plot_title);
    let frame = Frame::standard();
    let (lo, hi) = points
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = if lo.is_finite() {
        padded_range(lo, hi)
    } else {
        (0.0, 1.0)
    };
    x_axis(&mut doc, &frame, range, "predicted quantiles");
    y_axis(&mut doc, &frame, range, "actual quantiles");
    let px = |v: f64| scale(v, range, frame.left, frame.width);
    let py = |v: f64| frame.bottom() - scale(v, range, 0.0, frame.height);
    doc.push(Element::Line {
        x1: px(range.0),
        y1: py(range.0),
        x2: px(range.1),
        y2: py(range.1),
        stroke: REFERENCE_COLOR.into(),
        dashed: true,
    });
    for &(a, b) in points {
        doc.push(Element::Circle {
            cx: px(a),
            cy: py(b),
            r: MARKER_RADIUS,
            fill: MARKER_COLOR.into(),
        });
    }
    doc
}

/// Per-site fill for a tessellation.
#[derive(Clone, Debug, PartialEq)]
pub enum Coloring {
    /// Categorical label per site, drawn from [`style::PALETTE`].
    Labels(Vec<usize>),
    /// Scalar per site on the [`style::RAMP_LOW`] to [`style::RAMP_HIGH`] ramp,
    /// normalized by the observed minimum and maximum.
    Scalars(Vec<f64>),
}

pub fn palette_color(label: usize) -> &'static str {
    PALETTE[label % PALETTE.len()]
}

/// Ramp color at `t` in `[0, 1]` (clamped).
pub fn ramp_color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let c: Vec<u8> = (0..3)
        .map(|k| (RAMP_LOW[k] as f64 + t * (RAMP_HIGH[k] as f64 - RAMP_LOW[k] as f64)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// One filled polygon per cell and one dot per site. The box keeps its
/// aspect ratio inside the plot frame.
pub fn render_voronoi(diagram: &VoronoiDiagram, coloring: &Coloring, plot_title: &str) -> Result<SvgDocument> {
    let n = diagram.len();
    let fills: Vec<String> = match coloring {
        Coloring::Labels(l) if l.len() == n => l.iter().map(|&v| palette_color(v).to_string()).collect(),
        Coloring::Scalars(s) if s.len() == n => {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite cell value".into()));
            }
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            s.iter()
                .map(|&v| ramp_color(if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }))
                .collect()
        }
        Coloring::Labels(v) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            })
        }
        Coloring::Scalars(v) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            })
        }
    };
    let mut doc = SvgDocument::new();
    title(&mut doc, plot_title);
    let frame = Frame::standard();
    let b = diagram.bounding_box;
    let k = (frame.width / b.width()).min(frame.height / b.height());
    let (ox, oy) = (
        frame.left + (frame.width - k * b.width()) / 2.0,
        frame.top + (frame.height - k * b.height()) / 2.0,
    );
    let map = |p: [f64; 2]| (ox + k * (p[0] - b.xmin), oy + k * (b.ymax - p[1]));
    for (cell, fill) in diagram.cells.iter().zip(fills) {
        doc.push(Element::Polygon {
            points: cell.iter().map(|&p| map(p)).collect(),
            fill,
            stroke: CELL_STROKE.into(),
        });
    }
    for &s in &diagram.sites {
        let (cx, cy) = map(s);
        doc.push(Element::Circle {
            cx,
            cy,
            r: SITE_RADIUS,
            fill: SITE_COLOR.into(),
        });
    }
    Ok(doc)
}

/// Rendered text of a document.
pub fn to_svg_string(doc: &SvgDocument) -> String {
    let mut s = String::new();
    let _ = write!(s, "{doc}");
    s
}
