//! Minimal SVG line charts and heat maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional shaded band as `(x, low, high)`.
    pub band: Vec<(f64, f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            band: Vec::new(),
        }
    }

    pub fn with_band(mut self, band: Vec<(f64, f64, f64)>) -> Self {
        self.band = band;
        self
    }
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Scale {
            lo,
            hi,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / n as f64)
            .collect()
    }
}

fn label(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e4) {
        format!("{:.3}", v)
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{}</text>
"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title),
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label),
    );
}

fn axes(out: &mut String, xs: &Scale, ys: &Scale) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in xs.ticks(5) {
        let px = xs.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            label(t)
        );
    }
    for t in ys.ticks(5) {
        let py = ys.map(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            label(t)
        );
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    xr = (xr.0.min(x), xr.1.max(x));
                    yr = (yr.0.min(y), yr.1.max(y));
                }
            }
            for &(x, lo, hi) in &s.band {
                if lo.is_finite() && hi.is_finite() {
                    xr = (xr.0.min(x), xr.1.max(x));
                    yr = (yr.0.min(lo), yr.1.max(hi));
                }
            }
        }
        if !xr.0.is_finite() {
            xr = (0.0, 1.0);
            yr = (0.0, 1.0);
        }
        let xs = Scale::new(xr.0, xr.1, LEFT, WIDTH - RIGHT);
        let ys = Scale::new(yr.0, yr.1, HEIGHT - BOTTOM, TOP);

        let mut out = String::new();
        frame(&mut out, &self.title, &self.x_label, &self.y_label);
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if !s.band.is_empty() {
                let upper = s
                    .band
                    .iter()
                    .map(|&(x, _, hi)| format!("{:.2},{:.2}", xs.map(x), ys.map(hi)));
                let lower = s
                    .band
                    .iter()
                    .rev()
                    .map(|&(x, lo, _)| format!("{:.2},{:.2}", xs.map(x), ys.map(lo)));
                let pts: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", xs.map(x), ys.map(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
                pts.join(" ")
            );
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        axes(&mut out, &xs, &ys);
        out.push_str("</svg>\n");
        out
    }
}

pub struct HeatMap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Cells as `(x, y, value)` on a regular grid.
    pub cells: Vec<(f64, f64, f64)>,
    pub value_range: (f64, f64),
    pub marker: Option<(f64, f64, String)>,
}

/// Blue-white-red ramp over `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (33.0 + u * 222.0, 102.0 + u * 153.0, 172.0 + u * 83.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (255.0 - u * 77.0, 255.0 - u * 231.0, 255.0 - u * 212.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

impl HeatMap {
    pub fn render(&self) -> String {
        let mut xsv: Vec<f64> = self.cells.iter().map(|c| c.0).collect();
        let mut ysv: Vec<f64> = self.cells.iter().map(|c| c.1).collect();
        for v in [&mut xsv, &mut ysv] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let (nx, ny) = (xsv.len().max(1), ysv.len().max(1));
        let (xlo, xhi) = (
            xsv.first().copied().unwrap_or(0.0),
            xsv.last().copied().unwrap_or(1.0),
        );
        let (ylo, yhi) = (
            ysv.first().copied().unwrap_or(0.0),
            ysv.last().copied().unwrap_or(1.0),
        );
        let dx = if nx > 1 {
            (xhi - xlo) / (nx - 1) as f64
        } else {
            1.0
        };
        let dy = if ny > 1 {
            (yhi - ylo) / (ny - 1) as f64
        } else {
            1.0
        };
        let xs = Scale::new(xlo - dx / 2.0, xhi + dx / 2.0, LEFT, WIDTH - RIGHT);
        let ys = Scale::new(ylo - dy / 2.0, yhi + dy / 2.0, HEIGHT - BOTTOM, TOP);
        let (vlo, vhi) = self.value_range;
        let norm = |v: f64| {
            if vhi > vlo {
                (v - vlo) / (vhi - vlo)
            } else {
                0.5
            }
        };

        let mut out = String::new();
        frame(&mut out, &self.title, &self.x_label, &self.y_label);
        let w = (xs.map(xlo + dx / 2.0) - xs.map(xlo - dx / 2.0)).abs();
        let h = (ys.map(ylo + dy / 2.0) - ys.map(ylo - dy / 2.0)).abs();
        for &(x, y, v) in &self.cells {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xs.map(x - dx / 2.0),
                ys.map(y + dy / 2.0),
                w + 0.3,
                h + 0.3,
                ramp(norm(v))
            );
        }
        if let Some((mx, my, text)) = &self.marker {
            let (px, py) = (xs.map(*mx), ys.map(*my));
            let _ = writeln!(
                out,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="6" fill="#7b2cbf" stroke="white"/><text x="{:.2}" y="{:.2}" fill="#7b2cbf" text-anchor="end">{}</text>"##,
                px - 9.0,
                py + 16.0,
                escape(text)
            );
        }
        axes(&mut out, &xs, &ys);
        // Colour bar.
        let bx = WIDTH - RIGHT + 30.0;
        let steps = 20;
        let bar_h = (HEIGHT - BOTTOM - TOP) / steps as f64;
        for k in 0..steps {
            let t = 1.0 - (k as f64 + 0.5) / steps as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{bx}" y="{:.2}" width="18" height="{:.2}" fill="{}"/>"#,
                TOP + k as f64 * bar_h,
                bar_h + 0.3,
                ramp(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            bx + 24.0,
            TOP + 10.0,
            label(vhi)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            bx + 24.0,
            HEIGHT - BOTTOM,
            label(vlo)
        );
        out.push_str("</svg>\n");
        out
    }
}
