//! Minimal static SVG renderings of the report tables.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Posterior mean with 68% and 95% bands.
pub struct Bands<'a> {
    pub mean: &'a [f64],
    pub lo68: &'a [f64],
    pub hi68: &'a [f64],
    pub lo95: &'a [f64],
    pub hi95: &'a [f64],
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[&[f64]]) -> Self {
        let (x0, x1) = extent(xs.iter().copied());
        let (mut y0, mut y1) = extent(ys.iter().flat_map(|s| s.iter().copied()));
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Self { x0, x1: if x1 > x0 { x1 } else { x0 + 1.0 }, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, svg: &mut String, title: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ =
            write!(svg, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = write!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
        for (v, x, y, anchor) in [
            (self.x0, l, b + 16.0, "start"),
            (self.x1, r, b + 16.0, "end"),
            (self.y0, l - 4.0, b, "end"),
            (self.y1, l - 4.0, t + 10.0, "end"),
        ] {
            let _ = write!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.3}</text>"#);
        }
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn open() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#)
}

fn polyline(f: &Frame, xs: &[f64], ys: &[f64]) -> String {
    xs.iter().zip(ys).map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect::<Vec<_>>().join(" ")
}

fn band(svg: &mut String, f: &Frame, xs: &[f64], lo: &[f64], hi: &[f64], opacity: f64) {
    let rev_x: Vec<f64> = xs.iter().rev().copied().collect();
    let rev_lo: Vec<f64> = lo.iter().rev().copied().collect();
    let _ = write!(
        svg,
        r#"<polygon points="{} {}" fill="steelblue" fill-opacity="{opacity}" stroke="none"/>"#,
        polyline(f, xs, hi),
        polyline(f, &rev_x, &rev_lo)
    );
}

pub fn band_plot(title: &str, t: &[f64], truth: Option<&[f64]>, b: &Bands) -> String {
    let mut series = vec![b.mean, b.lo95, b.hi95];
    if let Some(tr) = truth {
        series.push(tr);
    }
    let f = Frame::new(t, &series);
    let mut svg = open();
    band(&mut svg, &f, t, b.lo95, b.hi95, 0.2);
    band(&mut svg, &f, t, b.lo68, b.hi68, 0.35);
    let _ = write!(svg, r#"<polyline points="{}" fill="none" stroke="navy"/>"#, polyline(&f, t, b.mean));
    if let Some(tr) = truth {
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="crimson" stroke-dasharray="4 3"/>"#,
            polyline(&f, t, tr)
        );
    }
    f.axes(&mut svg, title);
    svg.push_str("</svg>\n");
    svg
}

pub fn histogram(edges: &[f64], mass: &[f64]) -> String {
    let zero = [0.0];
    let f = Frame::new(edges, &[mass, &zero]);
    let mut svg = open();
    for (e, &m) in edges.windows(2).zip(mass) {
        let (x, y) = (f.px(e[0]), f.py(m));
        let _ = write!(
            svg,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="steelblue" stroke="white"/>"#,
            (f.px(e[1]) - x).max(0.5),
            f.py(0.0) - y
        );
    }
    f.axes(&mut svg, "sigma_E posterior");
    svg.push_str("</svg>\n");
    svg
}

/// Absolute error over `(x, t)`, time on the horizontal axis.
pub fn heatmap(times: &[f64], xs: &[f64], values: &[Vec<f64>]) -> String {
    let f = Frame::new(times, &[xs]);
    let top = values.iter().flatten().copied().fold(0.0f64, f64::max).max(1e-300);
    let mut svg = open();
    let dx = (W - 2.0 * MARGIN) / times.len() as f64;
    let dy = (H - 2.0 * MARGIN) / xs.len() as f64;
    for (i, row) in values.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v / top)).round() as u8;
            let _ = write!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb(255,{shade},{shade})"/>"#,
                MARGIN + i as f64 * dx,
                H - MARGIN - (k + 1) as f64 * dy,
                dx + 0.05,
                dy + 0.05
            );
        }
    }
    f.axes(&mut svg, &format!("absolute error (max {top:.3e})"));
    svg.push_str("</svg>\n");
    svg
}
