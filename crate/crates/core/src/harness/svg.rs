//! Minimal SVG scatter of overhead fraction against granularity, log-scaled G.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 48.0;
const G_LO: f64 = -2.0;
const G_HI: f64 = 3.0;

fn x_of(g: f64) -> f64 {
    let lg = g.max(1e-300).log10().clamp(G_LO, G_HI);
    MARGIN + (lg - G_LO) / (G_HI - G_LO) * (W - 2.0 * MARGIN)
}

fn y_of(omega_pct: f64) -> f64 {
    H - MARGIN - omega_pct.clamp(0.0, 100.0) / 100.0 * (H - 2.0 * MARGIN)
}

/// `measured` and `reference` are `(G, Ω%)` pairs; unbounded `G` is drawn
/// at the right edge.
pub fn scatter(measured: &[(f64, f64)], reference: &[(f64, f64)]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
    .unwrap();
    for g in [1.0, 10.0] {
        let x = x_of(g);
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
            H - MARGIN
        )
        .unwrap();
    }
    if !reference.is_empty() {
        let pts: Vec<String> = reference
            .iter()
            .map(|&(g, o)| format!("{:.2},{:.2}", x_of(g), y_of(o)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }
    for &(g, o) in measured {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            x_of(g),
            y_of(o)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">G (log)</text>"#,
        W / 2.0,
        H - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="12" y="{}" transform="rotate(-90 12 {})">overhead %</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
