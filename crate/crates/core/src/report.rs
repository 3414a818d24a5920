//! CSV and SVG artifact writers for the experiment harness.
//!
//! The plots are assembled by hand instead of pulling in a charting
//! dependency: the harness promises byte-identical output for identical
//! inputs so report files can be diffed across runs, and that is easiest to
//! guarantee when every byte comes from our own formatting.

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Line colours, reused in order when a plot has more curves than entries.
pub const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 340.0;
const ML: f64 = 68.0;
const MR: f64 = 18.0;
const MT: f64 = 30.0;
const MB: f64 = 46.0;

/// One labelled polyline.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Curve { label: label.into(), points }
    }

    /// Stride-decimate to at most `max_points` samples (always keeping the
    /// last one) so long time traces do not bloat the SVG.
    pub fn decimated(label: impl Into<String>, points: &[(f64, f64)], max_points: usize) -> Self {
        let max_points = max_points.max(2);
        if points.len() <= max_points {
            return Curve::new(label, points.to_vec());
        }
        let stride = points.len().div_ceil(max_points);
        let mut kept: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
        if let Some(&last) = points.last() {
            if kept.last() != Some(&last) {
                kept.push(last);
            }
        }
        Curve::new(label, kept)
    }
}

/// A single x/y panel; combine with [`stacked_svg`] for multi-panel figures.
#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub curves: Vec<Curve>,
}

impl Plot {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_log: false,
            curves: Vec::new(),
        }
    }

    pub fn logx(mut self) -> Self {
        self.x_log = true;
        self
    }

    pub fn curve(mut self, c: Curve) -> Self {
        self.curves.push(c);
        self
    }

    pub fn to_svg(&self) -> String {
        stacked_svg(std::slice::from_ref(self))
    }

    fn x_coord(&self, x: f64) -> f64 {
        if self.x_log {
            x.log10()
        } else {
            x
        }
    }

    /// Data ranges in plot coordinates (log-x already applied), padded.
    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for c in &self.curves {
            for &(x, y) in &c.points {
                if self.x_log && x <= 0.0 {
                    continue;
                }
                let xv = self.x_coord(x);
                if xv.is_finite() && y.is_finite() {
                    xs.push(xv);
                    ys.push(y);
                }
            }
        }
        (padded_range(&xs), padded_range(&ys))
    }

    fn render(&self, out: &mut String, y_off: f64) {
        use std::fmt::Write;

        let ((x0, x1), (y0, y1)) = self.ranges();
        let px = |x: f64| ML + (x - x0) / (x1 - x0) * (PANEL_W - ML - MR);
        let py = |y: f64| y_off + PANEL_H - MB - (y - y0) / (y1 - y0) * (PANEL_H - MT - MB);

        let _ = write!(
            out,
            "<rect x=\"{ML:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
             fill=\"white\" stroke=\"#444\" stroke-width=\"1\"/>\n",
            y_off + MT,
            PANEL_W - ML - MR,
            PANEL_H - MT - MB
        );

        // Grid and tick labels.
        let x_ticks = if self.x_log {
            log_ticks(x0, x1)
        } else {
            lin_ticks(x0, x1)
        };
        for &t in &x_ticks {
            let x = px(t);
            let _ = write!(
                out,
                "<line x1=\"{x:.2}\" y1=\"{:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" \
                 stroke=\"#ddd\" stroke-width=\"0.7\"/>\n",
                y_off + MT,
                y_off + PANEL_H - MB
            );
            let shown = if self.x_log { 10f64.powf(t) } else { t };
            let _ = write!(
                out,
                "<text x=\"{x:.2}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" \
                 fill=\"#333\">{}</text>\n",
                y_off + PANEL_H - MB + 15.0,
                fmt_tick(shown)
            );
        }
        for &t in &lin_ticks(y0, y1) {
            let y = py(t);
            let _ = write!(
                out,
                "<line x1=\"{ML:.1}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" \
                 stroke=\"#ddd\" stroke-width=\"0.7\"/>\n",
                PANEL_W - MR
            );
            let _ = write!(
                out,
                "<text x=\"{:.1}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" \
                 fill=\"#333\">{}</text>\n",
                ML - 6.0,
                y + 3.5,
                fmt_tick(t)
            );
        }

        // Axis labels and title.
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
             fill=\"#111\">{}</text>\n",
            (ML + PANEL_W - MR) / 2.0,
            y_off + PANEL_H - 8.0,
            xml_escape(&self.x_label)
        );
        let _ = write!(
            out,
            "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#111\" \
             transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
            y_off + (MT + PANEL_H - MB) / 2.0,
            y_off + (MT + PANEL_H - MB) / 2.0,
            xml_escape(&self.y_label)
        );
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
             fill=\"#111\">{}</text>\n",
            (ML + PANEL_W - MR) / 2.0,
            y_off + 18.0,
            xml_escape(&self.title)
        );

        // Curves; non-finite points split the polyline.
        for (i, c) in self.curves.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let mut segment: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, out: &mut String| {
                if seg.len() >= 2 {
                    let _ = write!(
                        out,
                        "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" \
                         points=\"{}\"/>\n",
                        seg.join(" ")
                    );
                }
                seg.clear();
            };
            for &(x, y) in &c.points {
                let usable = y.is_finite() && (!self.x_log || x > 0.0);
                if !usable {
                    flush(&mut segment, out);
                    continue;
                }
                let xv = self.x_coord(x);
                segment.push(format!("{:.2},{:.2}", px(xv), py(y)));
            }
            flush(&mut segment, out);
        }

        // Legend, top-right inside the frame.
        if !self.curves.is_empty() {
            let lx = PANEL_W - MR - 150.0;
            let ly = y_off + MT + 8.0;
            let _ = write!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"144\" height=\"{:.1}\" fill=\"white\" \
                 fill-opacity=\"0.85\" stroke=\"#bbb\" stroke-width=\"0.7\"/>\n",
                lx,
                ly,
                6.0 + 16.0 * self.curves.len() as f64
            );
            for (i, c) in self.curves.iter().enumerate() {
                let colour = PALETTE[i % PALETTE.len()];
                let yy = ly + 14.0 + 16.0 * i as f64;
                let _ = write!(
                    out,
                    "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" \
                     stroke=\"{colour}\" stroke-width=\"2\"/>\n",
                    lx + 6.0,
                    yy - 4.0,
                    lx + 26.0,
                    yy - 4.0
                );
                let _ = write!(
                    out,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#111\">{}</text>\n",
                    lx + 32.0,
                    yy,
                    xml_escape(&c.label)
                );
            }
        }
    }
}

/// Render panels stacked vertically into one SVG document.
pub fn stacked_svg(panels: &[Plot]) -> String {
    let height = PANEL_H * panels.len().max(1) as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {PANEL_W:.0} {height:.0}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
    );
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Write `contents` to `path`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Round a raw step to the nearest 1/2/5 decade multiple.
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.abs().log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn lin_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step((hi - lo) / 5.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        // Snap tiny float residue so labels read "0" rather than "2.8e-17".
        out.push(if t.abs() < 1e-9 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Tick positions for a log axis, in log10 units: decades plus 2× and 5×
/// subdivisions when the span is narrow.
fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let sub = hi - lo < 2.5;
    let mut d = lo.floor();
    while d <= hi.ceil() {
        for m in if sub { vec![1.0f64, 2.0, 5.0] } else { vec![1.0] } {
            let t = d + m.log10();
            if t >= lo - 1e-9 && t <= hi + 1e-9 {
                out.push(t);
            }
        }
        d += 1.0;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if a >= 10000.0 || a < 0.001 {
        format!("{v:.0e}")
    } else if a >= 10.0 {
        let s = format!("{v:.0}");
        s
    } else if a >= 1.0 {
        trim_zeros(format!("{v:.2}"))
    } else {
        trim_zeros(format!("{v:.3}"))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
