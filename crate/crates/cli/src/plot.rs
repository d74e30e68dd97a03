//! Minimal SVG line plots: one panel per series, stacked vertically.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const PANEL: f64 = 140.0;
const MARGIN: f64 = 50.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|a| a.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), a| (l.min(a), h.max(a)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Non-finite values break the polyline into separate segments.
pub fn polylines(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let height = MARGIN + series.len() as f64 * (PANEL + MARGIN);
    let (x0, x1) = range(x.iter().copied());
    let plot_w = WIDTH - 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="14">{}</text>"#, esc(title));
    for (p, ser) in series.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL + MARGIN);
        let (y0, y1) = range(ser.values.iter().copied());
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{top}" width="{plot_w}" height="{PANEL}" fill="none" stroke="gray"/>"#
        );
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">{}</text>"#, top - 6.0, esc(ser.name));
        let _ = writeln!(s, r#"<text x="4" y="{}">{y1:.3}</text>"#, top + 10.0);
        let _ = writeln!(s, r#"<text x="4" y="{}">{y0:.3}</text>"#, top + PANEL);
        let mut seg: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, seg.join(" "));
            }
            seg.clear();
        };
        for (&xi, &yi) in x.iter().zip(&ser.values) {
            if !(xi.is_finite() && yi.is_finite()) {
                flush(&mut seg, &mut s);
                continue;
            }
            let px = MARGIN + (xi - x0) / (x1 - x0) * plot_w;
            let py = top + PANEL - (yi - y0) / (y1 - y0) * PANEL;
            seg.push(format!("{px:.2},{py:.2}"));
        }
        flush(&mut seg, &mut s);
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}">{}: {x0:.3} .. {x1:.3}</text>"#,
        height - 12.0,
        esc(x_label)
    );
    s.push_str("</svg>\n");
    s
}
