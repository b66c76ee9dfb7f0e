//! Minimal SVG output: line plots and heatmaps from plain primitives.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric band half-widths, one per point.
    pub band: Option<Vec<f64>>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn num(x: f64) -> String {
    format!("{x:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

impl LinePlot {
    pub fn render(&self) -> String {
        let all = || {
            self.series.iter().flat_map(|s| {
                s.points.iter().enumerate().map(move |(i, p)| {
                    let b = s.band.as_ref().map_or(0.0, |b| b[i]);
                    (p.0, p.1 - b, p.1 + b)
                })
            })
        };
        let (x0, x1) = range(all().map(|p| p.0));
        let (y0, y1) = range(all().flat_map(|p| [p.1, p.2]));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut out = String::new();
        header(&mut out, &self.title);
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            "<polyline points=\"{},{} {},{} {},{}\" fill=\"none\" stroke=\"black\"/>",
            num(l),
            num(t),
            num(l),
            num(b),
            num(r),
            num(b)
        );
        for (v, anchor_y) in [(y0, b), (y1, t)] {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{v:.3e}</text>",
                num(l - 4.0),
                num(anchor_y + 4.0)
            );
        }
        for (v, anchor_x) in [(x0, l), (x1, r)] {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{v:.3}</text>",
                num(anchor_x),
                num(b + 16.0)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            num(WIDTH / 2.0),
            num(HEIGHT - 12.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            num(HEIGHT / 2.0),
            num(HEIGHT / 2.0),
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            if let Some(band) = &s.band {
                let upper = s.points.iter().zip(band).map(|(p, w)| format!("{},{}", num(sx(p.0)), num(sy(p.1 + w))));
                let lower = s
                    .points
                    .iter()
                    .zip(band)
                    .rev()
                    .map(|(p, w)| format!("{},{}", num(sx(p.0)), num(sy(p.1 - w))));
                let pts: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(
                    out,
                    "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
                    pts.join(" ")
                );
            }
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.1.is_finite())
                .map(|p| format!("{},{}", num(sx(p.0)), num(sy(p.1))))
                .collect();
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                pts.join(" ")
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
                num(r - 150.0),
                num(t + 14.0 * (k as f64 + 1.0)),
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Values on a regular `rows x cols` grid, drawn with a blue-white-red scale
/// symmetric about zero.
pub struct Heatmap {
    pub title: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let side = (HEIGHT - 2.0 * MARGIN).min(WIDTH - 2.0 * MARGIN);
        let (cw, ch) = (side / self.cols as f64, side / self.rows as f64);
        let left = (WIDTH - side) / 2.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.values[i * self.cols + j] / scale;
                let fade = (255.0 * (1.0 - v.abs())).round() as u8;
                let color = if v >= 0.0 {
                    format!("#ff{fade:02x}{fade:02x}")
                } else {
                    format!("#{fade:02x}{fade:02x}ff")
                };
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
                    num(left + j as f64 * cw),
                    num(MARGIN + (self.rows - 1 - i) as f64 * ch),
                    num(cw + 0.01),
                    num(ch + 0.01)
                );
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">max |value| = {scale:.3e}</text>",
            num(WIDTH / 2.0),
            num(HEIGHT - 16.0)
        );
        out.push_str("</svg>\n");
        out
    }
}
