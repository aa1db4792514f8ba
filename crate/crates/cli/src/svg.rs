//! Three stacked panels: generating code, observed signal, reconstruction
//! (field, thresholded code, and generating code outline).

use std::fmt::Write;

use tvbar_core::{BarCode, GridSamples, Signal};

const WIDTH: f64 = 900.0;
const ROW: f64 = 180.0;
const MARGIN: f64 = 40.0;

struct Frame {
    top: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, y: f64) -> f64 {
        let h = ROW - 50.0;
        self.top + 30.0 + (1.0 - (y - self.y_lo) / (self.y_hi - self.y_lo)) * h
    }
}

fn bars(out: &mut String, f: &Frame, code: &BarCode, style: &str) {
    for (a, b) in code.bars() {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            f.x(a),
            f.y(1.0),
            (f.x(b) - f.x(a)).max(0.5),
            f.y(0.0) - f.y(1.0)
        );
    }
}

fn polyline(out: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, stroke: &str) {
    let mut s = String::new();
    for (x, y) in pts {
        let _ = write!(s, "{:.2},{:.2} ", f.x(x), f.y(y.clamp(f.y_lo, f.y_hi)));
    }
    let _ = writeln!(out, r#"<polyline fill="none" stroke="{stroke}" stroke-width="1" points="{}"/>"#, s.trim_end());
}

fn label(out: &mut String, f: &Frame, text: &str) {
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="14">{text}</text>"#, f.top + 20.0);
}

/// At most ~2000 points per curve.
fn samples(g: &GridSamples) -> impl Iterator<Item = (f64, f64)> + '_ {
    let stride = (g.values.len() / 2000).max(1);
    (0..g.values.len()).step_by(stride).map(move |i| (g.x(i), g.values[i]))
}

pub fn render(truth: Option<&BarCode>, observed: &Signal, field: &GridSamples, code: &BarCode) -> String {
    let (x_lo, x_hi) = (field.x0, field.x(field.values.len() - 1));
    let frame = |row: usize, y_lo: f64, y_hi: f64| Frame { top: row as f64 * ROW, x_lo, x_hi, y_lo, y_hi };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{}" viewBox="0 0 {WIDTH} {}">"#,
        3.0 * ROW,
        3.0 * ROW
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let f0 = frame(0, 0.0, 1.0);
    match truth {
        Some(z) => {
            label(&mut out, &f0, "generating code");
            bars(&mut out, &f0, z, r#"fill="black""#);
        }
        None => label(&mut out, &f0, "generating code (not supplied)"),
    }

    let obs = observed.to_grid(field.h).ok();
    let (lo, hi) = obs.as_ref().map_or((0.0, 1.0), |g| {
        g.values.iter().fold((0.0f64, 1.0f64), |(l, h), &v| (l.min(v), h.max(v)))
    });
    let f1 = frame(1, lo, hi);
    label(&mut out, &f1, "observed signal");
    if let Some(g) = &obs {
        polyline(&mut out, &f1, samples(g), "steelblue");
    }

    let f2 = frame(2, -0.25, 1.25);
    label(&mut out, &f2, "reconstruction");
    bars(&mut out, &f2, code, r#"fill="lightgray""#);
    if let Some(z) = truth {
        bars(&mut out, &f2, z, r#"fill="none" stroke="black" stroke-width="1""#);
    }
    polyline(&mut out, &f2, samples(field), "crimson");
    out.push_str("</svg>\n");
    out
}
