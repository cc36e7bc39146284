// SPDX-License-Identifier: Apache-2.0

//! Minimal SVG charts: grouped bars and grid heatmaps.

use std::fmt::Write;

use o3net::metrics::{GridField, SitePoint};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Grouped bar chart: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let (w, h) = (80.0 + 60.0 * categories.len().max(1) as f64, 360.0);
    let (left, bottom, top) = (60.0, 300.0, 40.0);
    let max = series.iter().flat_map(|(_, v)| v.iter().flatten().copied()).fold(0.0_f64, f64::max).max(1e-9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#, w - 10.0);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{max:.2}</text>"#, left - 4.0, top + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{bottom}" text-anchor="end">0</text>"#, left - 4.0);
    let group = 60.0;
    let bar = (group - 10.0) / series.len().max(1) as f64;
    for (ci, cat) in categories.iter().enumerate() {
        let x0 = left + 5.0 + ci as f64 * group;
        for (si, (_, vals)) in series.iter().enumerate() {
            if let Some(Some(v)) = vals.get(ci) {
                let bh = (bottom - top) * v / max;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    x0 + si as f64 * bar,
                    bottom - bh,
                    bar,
                    bh,
                    PALETTE[si % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + (group - 10.0) / 2.0,
            bottom + 14.0,
            escape(cat)
        );
    }
    for (si, (name, _)) in series.iter().enumerate() {
        let y = bottom + 32.0 + 14.0 * si as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[si % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, left + 14.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Maps `t` in `[0, 1]` onto a blue-to-red ramp.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of `field` (north up) with site markers, coloured on `[lo, hi]`.
pub fn heatmap(title: &str, field: &GridField, sites: &[SitePoint], lo: f64, hi: f64) -> String {
    let px = (480.0 / field.cols.max(field.rows) as f64).max(1.0);
    let (gw, gh) = (px * field.cols as f64, px * field.rows as f64);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="11">"#,
        gw + 20.0,
        gh + 60.0
    );
    let _ = writeln!(s, r#"<text x="10" y="18" font-size="14">{}</text>"#, escape(title));
    for r in 0..field.rows {
        for c in 0..field.cols {
            let y = 30.0 + (field.rows - 1 - r) as f64 * px;
            let x = 10.0 + c as f64 * px;
            let color = ramp((field.value(r, c) - lo) / span);
            let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y:.2}" width="{px:.2}" height="{px:.2}" fill="{color}"/>"#);
        }
    }
    let bb = &field.bbox;
    for p in sites {
        let x = 10.0 + (p.lon - bb.lon_min) / field.cell_deg * px;
        let y = 30.0 + gh - (p.lat - bb.lat_min) / field.cell_deg * px;
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="none" stroke="black"><title>{} {:.1}</title></circle>"#,
            escape(&p.id),
            p.value
        );
    }
    let _ = writeln!(s, r#"<text x="10" y="{:.0}">{lo:.1} to {hi:.1} ppb</text>"#, gh + 48.0);
    s.push_str("</svg>\n");
    s
}
