//! Static SVG figures: main-effect dot-and-bar plots, interaction line plots
//! and histograms. Plain text output, no rendering backend.

use std::fmt::Write;

use crate::analysis::{EffectTable, Histogram, InteractionTable};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round step of roughly `span / 5`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 { 1.0 } else if r < 3.5 { 2.0 } else if r < 7.5 { 5.0 } else { 10.0 }
}

struct Frame {
    y_lo: f64,
    y_hi: f64,
    svg: String,
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, lo: f64, hi: f64) -> Self {
        let (lo, hi) = match (lo.is_finite() && hi.is_finite(), hi > lo) {
            (false, _) => (0.0, 1.0),
            (true, true) => (lo, hi),
            (true, false) => (lo - 1.0, hi + 1.0),
        };
        let pad = 0.05 * (hi - lo);
        let mut f = Self { y_lo: lo - pad, y_hi: hi + pad, svg: String::new() };
        let _ = write!(
            f.svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
             font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            W / 2.0,
            escape(title)
        );
        let _ = write!(
            f.svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            LEFT + (W - LEFT - RIGHT) / 2.0,
            H - 15.0,
            escape(x_label),
            TOP + (H - TOP - BOTTOM) / 2.0,
            TOP + (H - TOP - BOTTOM) / 2.0,
            escape(y_label)
        );
        let _ = writeln!(
            f.svg,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        let step = tick_step(f.y_hi - f.y_lo);
        let mut t = (f.y_lo / step).ceil() * step;
        while t <= f.y_hi {
            let y = f.y(t);
            let label = if step >= 1.0 { format!("{t:.0}") } else { format!("{t:.*}", (-step.log10()).ceil() as usize) };
            let _ = write!(
                f.svg,
                "<line x1=\"{LEFT}\" x2=\"{}\" y1=\"{y:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>\n",
                W - RIGHT,
                LEFT - 6.0,
                y + 4.0
            );
            t += step;
        }
        f
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.y_hi - v) / (self.y_hi - self.y_lo) * (H - TOP - BOTTOM)
    }

    /// Centre of category `i` of `n`.
    fn cat_x(i: usize, n: usize) -> f64 {
        LEFT + (i as f64 + 0.5) * (W - LEFT - RIGHT) / n as f64
    }

    fn cat_labels(&mut self, labels: &[String]) {
        for (i, l) in labels.iter().enumerate() {
            let _ = writeln!(
                self.svg,
                "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                Self::cat_x(i, labels.len()),
                H - BOTTOM + 18.0,
                escape(l)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// Level means as dots with 95% interval bars.
pub fn effects_svg(table: &EffectTable) -> String {
    let spans = table.levels.iter().map(|l| {
        let h = l.half_width.unwrap_or(0.0);
        (l.mean - h, l.mean + h)
    });
    let (lo, hi) = spans.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| (a.min(l), b.max(h)));
    let title = format!("Main effect of {} on {}", table.factor, table.response);
    let mut f = Frame::new(&title, table.factor.as_str(), table.response.as_str(), lo, hi);
    let n = table.levels.len();
    let labels: Vec<String> = table.levels.iter().map(|l| format!("{} (n={})", l.level, l.count)).collect();
    f.cat_labels(&labels);
    let mut path = Vec::new();
    for (i, l) in table.levels.iter().enumerate() {
        let x = Frame::cat_x(i, n);
        if let Some(h) = l.half_width {
            let _ = write!(
                f.svg,
                "<line x1=\"{x:.2}\" x2=\"{x:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
                 <line x1=\"{:.2}\" x2=\"{:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
                 <line x1=\"{:.2}\" x2=\"{:.2}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
                f.y(l.mean - h),
                f.y(l.mean + h),
                x - 6.0,
                x + 6.0,
                f.y(l.mean - h),
                f.y(l.mean - h),
                x - 6.0,
                x + 6.0,
                f.y(l.mean + h),
                f.y(l.mean + h)
            );
        }
        path.push(format!("{x:.2},{:.2}", f.y(l.mean)));
        let _ = writeln!(f.svg, "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>", f.y(l.mean), PALETTE[0]);
    }
    let _ = writeln!(f.svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\"/>", path.join(" "), PALETTE[0]);
    f.finish()
}

/// One line per level of `factor_a` across the levels of `factor_b`; empty cells break the line.
pub fn interaction_svg(table: &InteractionTable) -> String {
    let means = table.cells.iter().flatten().flatten().map(|c| c.mean);
    let (lo, hi) = means.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), m| (a.min(m), b.max(m)));
    let title = format!("Interaction {} x {} on {}", table.factor_a, table.factor_b, table.response);
    let mut f = Frame::new(&title, table.factor_b.as_str(), table.response.as_str(), lo, hi);
    f.cat_labels(&table.levels_b);
    let n = table.levels_b.len();
    for (i, (level, row)) in table.levels_a.iter().zip(&table.cells).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut runs: Vec<Vec<String>> = vec![Vec::new()];
        for (j, cell) in row.iter().enumerate() {
            match cell {
                Some(c) => {
                    let (x, y) = (Frame::cat_x(j, n), f.y(c.mean));
                    runs.last_mut().expect("non-empty").push(format!("{x:.2},{y:.2}"));
                    let _ = writeln!(f.svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>");
                }
                None => runs.push(Vec::new()),
            }
        }
        for run in runs.iter().filter(|r| r.len() > 1) {
            let _ = writeln!(f.svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"/>", run.join(" "));
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = write!(
            f.svg,
            "<line x1=\"{}\" x2=\"{}\" y1=\"{ly:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{:.2}\">{}={}</text>\n",
            W - RIGHT - 150.0,
            W - RIGHT - 130.0,
            W - RIGHT - 125.0,
            ly + 4.0,
            table.factor_a,
            escape(level)
        );
    }
    f.finish()
}

/// Bar chart of bin counts; `mean` is marked with a dashed line when given.
pub fn histogram_svg(hist: &Histogram, x_label: &str, mean: Option<f64>) -> String {
    let max = hist.counts.iter().copied().max().unwrap_or(0) as f64;
    let mut f = Frame::new("Histogram", x_label, "count", 0.0, max.max(1.0));
    let (lo, hi) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT);
    for (i, &c) in hist.counts.iter().enumerate() {
        let (x0, x1) = (x(hist.edges[i]), x(hist.edges[i + 1]));
        let (y0, y1) = (f.y(c as f64), f.y(0.0));
        let _ = writeln!(
            f.svg,
            "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"white\"/>",
            x1 - x0,
            y1 - y0,
            PALETTE[0]
        );
    }
    for v in [lo, hi] {
        let _ = writeln!(
            f.svg,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{v:.3}</text>",
            x(v),
            H - BOTTOM + 18.0
        );
    }
    if let Some(m) = mean {
        let _ = writeln!(
            f.svg,
            "<line x1=\"{0:.2}\" x2=\"{0:.2}\" y1=\"{TOP}\" y2=\"{1}\" stroke=\"black\" stroke-dasharray=\"4 3\"/>",
            x(m),
            H - BOTTOM
        );
    }
    f.finish()
}
