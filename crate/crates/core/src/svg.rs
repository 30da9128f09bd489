//! Minimal static SVG charts: line panels, stacked areas with masked gaps,
//! box-and-density panels, and multi-panel layouts with shared or free
//! value axes.

use std::fmt::Write as _;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 46.0;
const HEADER: f64 = 36.0;
const LEGEND_ROW: f64 = 18.0;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn color(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

/// A polyline; `None` values break it. Isolated points become dots.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub color: usize,
    pub dashed: bool,
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PanelContent {
    Lines(Vec<Line>),
    /// Stacked shares over `x`; a `None` row leaves a gap.
    Stacked {
        x: Vec<f64>,
        rows: Vec<Option<Vec<f64>>>,
    },
    /// Box plot over a histogram density of `values`.
    Distribution {
        values: Vec<f64>,
        color: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub content: PanelContent,
    /// Extra dots drawn on top, `(x, y, color)`.
    pub markers: Vec<(f64, f64, usize)>,
}

impl Panel {
    pub fn new(title: impl Into<String>, content: PanelContent) -> Self {
        Self {
            title: title.into(),
            content,
            markers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub panels: Vec<Panel>,
    /// One value axis for all panels instead of one per panel.
    pub shared_axis: bool,
    pub columns: usize,
    pub legend: Vec<(String, usize, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    fn empty() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        if v.is_finite() {
            self.lo = self.lo.min(v);
            self.hi = self.hi.max(v);
        }
    }

    fn merge(self, other: Range) -> Range {
        Range {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Padded range with a nonzero span; constant data gets a symmetric band.
    pub fn padded(self) -> Range {
        if self.lo > self.hi {
            return Range { lo: 0.0, hi: 1.0 };
        }
        let span = self.hi - self.lo;
        if span <= 1e-12 * self.lo.abs().max(1.0) {
            let pad = (self.lo.abs() * 0.1).max(1.0);
            return Range {
                lo: self.lo - pad,
                hi: self.hi + pad,
            };
        }
        Range {
            lo: self.lo - 0.05 * span,
            hi: self.hi + 0.05 * span,
        }
    }

    fn map(self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn nice_step(raw: f64) -> f64 {
    let exp = raw.log10().floor();
    let base = 10f64.powf(exp);
    let f = raw / base;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * base
}

/// Round-number ticks inside `range` with their labels.
pub fn ticks(range: Range, target: usize) -> Vec<(f64, String)> {
    let step = nice_step((range.hi - range.lo) / target.max(1) as f64);
    let decimals = (-step.log10().floor()).clamp(0.0, 8.0) as usize;
    let mut v = (range.lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= range.hi + step * 1e-9 {
        let shown = if v.abs() < step * 1e-9 { 0.0 } else { v };
        out.push((shown, format!("{shown:.decimals$}")));
        v += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn x_range(panel: &Panel) -> Range {
    let mut r = Range::empty();
    match &panel.content {
        PanelContent::Lines(lines) => {
            for l in lines {
                for (x, _) in &l.points {
                    r.include(*x);
                }
            }
        }
        PanelContent::Stacked { x, .. } => x.iter().for_each(|v| r.include(*v)),
        PanelContent::Distribution { values, .. } => values.iter().for_each(|v| r.include(*v)),
    }
    for (x, _, _) in &panel.markers {
        r.include(*x);
    }
    r
}

fn y_range(panel: &Panel) -> Range {
    let mut r = Range::empty();
    match &panel.content {
        PanelContent::Lines(lines) => {
            for l in lines {
                for y in l.points.iter().filter_map(|p| p.1) {
                    r.include(y);
                }
            }
        }
        PanelContent::Stacked { .. } | PanelContent::Distribution { .. } => {}
    }
    for (_, y, _) in &panel.markers {
        r.include(*y);
    }
    r
}

struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
    x: Range,
    y: Range,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x.map(x, self.left, self.right)
    }

    fn py(&self, y: f64) -> f64 {
        self.y.map(y, self.bottom, self.top)
    }
}

/// Renders `chart` as a standalone SVG document.
pub fn render(chart: &Chart) -> String {
    let cols = chart.columns.clamp(1, chart.panels.len().max(1));
    let rows = chart.panels.len().div_ceil(cols).max(1);
    let legend_rows = chart.legend.len().div_ceil(4);
    let header = HEADER + legend_rows as f64 * LEGEND_ROW;
    let width = cols as f64 * PANEL_W;
    let height = header + rows as f64 * PANEL_H;

    // The value axis is y for line and area panels and x for distributions.
    let is_distribution = |p: &Panel| matches!(p.content, PanelContent::Distribution { .. });
    let shared_y = chart
        .panels
        .iter()
        .filter(|p| !is_distribution(p))
        .map(y_range)
        .fold(Range::empty(), Range::merge)
        .padded();
    let shared_dist = chart
        .panels
        .iter()
        .filter(|p| is_distribution(p))
        .map(x_range)
        .fold(Range::empty(), Range::merge)
        .padded();
    let shared_x = chart
        .panels
        .iter()
        .filter(|p| !is_distribution(p))
        .map(x_range)
        .fold(Range::empty(), Range::merge)
        .padded();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        width / 2.0,
        escape(&chart.title)
    );
    for (k, (label, c, dashed)) in chart.legend.iter().enumerate() {
        let x = 20.0 + (k % 4) as f64 * (width - 40.0) / 4.0;
        let y = HEADER + (k / 4) as f64 * LEGEND_ROW;
        let dash = if *dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 4.0,
            x + 22.0,
            y - 4.0,
            color(*c),
            x + 27.0,
            y,
            escape(label)
        );
    }

    for (k, panel) in chart.panels.iter().enumerate() {
        let ox = (k % cols) as f64 * PANEL_W;
        let oy = header + (k / cols) as f64 * PANEL_H;
        let dist = is_distribution(panel);
        let (x, y) = if dist {
            let x = if chart.shared_axis {
                shared_dist
            } else {
                x_range(panel).padded()
            };
            (x, Range { lo: 0.0, hi: 1.0 })
        } else {
            let y = match panel.content {
                PanelContent::Stacked { .. } => Range { lo: 0.0, hi: 1.0 },
                _ if chart.shared_axis => shared_y,
                _ => y_range(panel).padded(),
            };
            let x = if chart.shared_axis {
                shared_x
            } else {
                x_range(panel).padded()
            };
            (x, y)
        };
        let f = Frame {
            left: ox + MARGIN_L,
            top: oy + MARGIN_T,
            right: ox + PANEL_W - MARGIN_R,
            bottom: oy + PANEL_H - MARGIN_B,
            x,
            y,
        };
        draw_axes(&mut s, &f, panel, chart, dist);
        match &panel.content {
            PanelContent::Lines(lines) => draw_lines(&mut s, &f, lines),
            PanelContent::Stacked { x, rows } => draw_stacked(&mut s, &f, x, rows),
            PanelContent::Distribution { values, color } => draw_distribution(&mut s, &f, values, *color),
        }
        for (mx, my, c) in &panel.markers {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.6"/>"#,
                f.px(*mx),
                f.py(*my),
                color(*c)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn draw_axes(s: &mut String, f: &Frame, panel: &Panel, chart: &Chart, dist: bool) {
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{}</text>"#,
        (f.left + f.right) / 2.0,
        f.top - 12.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        f.left,
        f.top,
        f.right - f.left,
        f.bottom - f.top
    );
    for (v, label) in ticks(f.x, 6) {
        let px = f.px(v);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            f.bottom,
            f.bottom + 4.0,
            f.bottom + 16.0
        );
    }
    if !dist {
        for (v, label) in ticks(f.y, 5) {
            let py = f.py(v);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#444"/><line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                f.left - 4.0,
                f.left,
                f.left,
                f.right,
                f.left - 6.0,
                py + 4.0
            );
        }
    }
    let x_label = if dist { &chart.y_label } else { &chart.x_label };
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (f.left + f.right) / 2.0,
        f.bottom + 34.0,
        escape(x_label)
    );
    if !dist {
        let cy = (f.top + f.bottom) / 2.0;
        let cx = f.left - 46.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 {cx:.1} {cy:.1})">{}</text>"#,
            escape(&chart.y_label)
        );
    }
}

fn segments(points: &[(f64, Option<f64>)]) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for &(x, y) in points {
        match y {
            Some(y) if y.is_finite() => cur.push((x, y)),
            _ => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn draw_lines(s: &mut String, f: &Frame, lines: &[Line]) {
    for line in lines {
        let dash = if line.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        for seg in segments(&line.points) {
            if seg.len() == 1 {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                    f.px(seg[0].0),
                    f.py(seg[0].1),
                    color(line.color)
                );
                continue;
            }
            let pts: Vec<String> = seg
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.join(" "),
                color(line.color)
            );
        }
    }
}

fn draw_stacked(s: &mut String, f: &Frame, x: &[f64], rows: &[Option<Vec<f64>>]) {
    // Contiguous runs of defined rows, each drawn as its own set of bands.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (k, r) in rows.iter().enumerate() {
        match (r.is_some(), start) {
            (true, None) => start = Some(k),
            (false, Some(a)) => {
                runs.push((a, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push((a, rows.len()));
    }
    for (a, b) in runs {
        let width = rows[a].as_ref().map_or(0, Vec::len);
        // A single defined point becomes a thin bar.
        let half = if b - a == 1 {
            let dx = if x.len() > 1 { (x[1] - x[0]) * 0.2 } else { 0.5 };
            Some(dx)
        } else {
            None
        };
        let mut lower = vec![0.0; b - a];
        for c in 0..width {
            let upper: Vec<f64> = (a..b)
                .zip(&lower)
                .map(|(k, lo)| lo + rows[k].as_ref().expect("defined in run")[c])
                .collect();
            let mut pts = Vec::new();
            let xs: Vec<f64> = match half {
                Some(dx) => vec![x[a] - dx, x[a] + dx],
                None => x[a..b].to_vec(),
            };
            let up: Vec<f64> = if half.is_some() {
                vec![upper[0]; 2]
            } else {
                upper.clone()
            };
            let low: Vec<f64> = if half.is_some() {
                vec![lower[0]; 2]
            } else {
                lower.clone()
            };
            for (xv, yv) in xs.iter().zip(&up) {
                pts.push(format!("{:.2},{:.2}", f.px(*xv), f.py(*yv)));
            }
            for (xv, yv) in xs.iter().zip(&low).rev() {
                pts.push(format!("{:.2},{:.2}", f.px(*xv), f.py(*yv)));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.85" stroke="none"/>"#,
                pts.join(" "),
                color(c)
            );
            lower = upper;
        }
    }
}

/// Quartiles by linear interpolation on sorted values.
fn quartiles(sorted: &[f64]) -> [f64; 3] {
    let at = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < sorted.len() {
            sorted[i] + frac * (sorted[i + 1] - sorted[i])
        } else {
            sorted[i]
        }
    };
    [at(0.25), at(0.5), at(0.75)]
}

fn draw_distribution(s: &mut String, f: &Frame, values: &[f64], c: usize) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no values</text>"#,
            (f.left + f.right) / 2.0,
            (f.top + f.bottom) / 2.0
        );
        return;
    }
    v.sort_by(f64::total_cmp);
    let split = f.top + (f.bottom - f.top) * 0.3;

    // Histogram density in the lower part.
    let bins = 30usize;
    let width = (f.x.hi - f.x.lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &v {
        let b = (((x - f.x.lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let peak = *counts.iter().max().expect("bins") as f64;
    for (b, n) in counts.iter().enumerate().filter(|(_, n)| **n > 0) {
        let h = (*n as f64 / peak) * (f.bottom - split - 6.0);
        let x0 = f.x.lo + b as f64 * width;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5" stroke="#fff"/>"##,
            f.px(x0),
            f.bottom - h,
            f.px(x0 + width) - f.px(x0),
            h,
            color(c)
        );
    }

    // Box with whiskers at 1.5 IQR (clipped to the data).
    let [q1, q2, q3] = quartiles(&v);
    let iqr = q3 - q1;
    let lo = v.iter().copied().find(|x| *x >= q1 - 1.5 * iqr).unwrap_or(v[0]);
    let hi = v
        .iter()
        .rev()
        .copied()
        .find(|x| *x <= q3 + 1.5 * iqr)
        .unwrap_or(v[v.len() - 1]);
    let (top, bot) = (f.top + 10.0, split - 6.0);
    let mid = (top + bot) / 2.0;
    let stroke = color(c);
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{mid:.2}" x2="{:.2}" y2="{mid:.2}" stroke="{stroke}"/><line x1="{:.2}" y1="{mid:.2}" x2="{:.2}" y2="{mid:.2}" stroke="{stroke}"/>"#,
        f.px(lo),
        f.px(q1),
        f.px(q3),
        f.px(hi)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{stroke}" fill-opacity="0.25" stroke="{stroke}"/><line x1="{:.2}" y1="{top:.2}" x2="{:.2}" y2="{bot:.2}" stroke="{stroke}" stroke-width="2"/>"#,
        f.px(q1),
        (f.px(q3) - f.px(q1)).max(1.0),
        bot - top,
        f.px(q2),
        f.px(q2)
    );
    for x in v.iter().filter(|x| **x < lo || **x > hi) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{mid:.2}" r="1.8" fill="none" stroke="{stroke}"/>"#,
            f.px(*x)
        );
    }
}
