//! Fixed 800x800 scatter plots, written as plain SVG.

use std::fmt::Write;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Scatter of `(series, x, y)` points; each series gets its own colour.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(usize, f64, f64)]) -> String {
    let finite: Vec<_> = points.iter().filter(|p| p.1.is_finite() && p.2.is_finite()).collect();
    let bounds = |f: fn(&&(usize, f64, f64)) -> f64| {
        let (lo, hi) = finite.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (-1.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 1.0, hi + 1.0)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = bounds(|p| p.1);
    let (y0, y1) = bounds(|p| p.2);
    let span = SIZE - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * span;
    let sy = |y: f64| SIZE - MARGIN - (y - y0) / (y1 - y0) * span;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#);
    let _ = writeln!(s, r#"<rect width="800" height="800" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="400" y="35" font-size="18" text-anchor="middle">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<text x="400" y="785" font-size="14" text-anchor="middle">{}</text>"#, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="400" font-size="14" text-anchor="middle" transform="rotate(-90 20 400)">{}</text>"#,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", MARGIN, SIZE - MARGIN + 18.0),
        (x1, "end", SIZE - MARGIN, SIZE - MARGIN + 18.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="12" text-anchor="{anchor}">{v:.3}</text>"#);
    }
    for (v, y) in [(y0, SIZE - MARGIN), (y1, MARGIN + 12.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" font-size="12" text-anchor="end">{v:.3}</text>"#, MARGIN - 6.0);
    }
    for (series, x, y) in finite {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{}"/>"#,
            sx(*x),
            sy(*y),
            PALETTE[series % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
