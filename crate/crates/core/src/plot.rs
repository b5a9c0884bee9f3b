//! Minimal SVG bar charts for pass-count distributions.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 2] = ["#4c72b0", "#dd8452"];

/// A named frequency table; index is the pass count.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub counts: Vec<usize>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart of up to two series, bars scaled to each series'
/// share of its total so datasets of different sizes are comparable.
pub fn histogram_svg(title: &str, series: &[Series]) -> String {
    assert!(!series.is_empty() && series.len() <= COLORS.len(), "one or two series");
    let bins = series.iter().map(|s| s.counts.len()).max().unwrap_or(0).max(1);
    let shares: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let total = s.counts.iter().sum::<usize>().max(1) as f64;
            (0..bins).map(|i| s.counts.get(i).copied().unwrap_or(0) as f64 / total).collect()
        })
        .collect();
    let top = shares.iter().flatten().copied().fold(0.0, f64::max).max(1e-9);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = plot_w / bins as f64;
    let bar = slot * 0.8 / series.len() as f64;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let base = HEIGHT - MARGIN;
    let _ = writeln!(out, r##"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="#333"/>"##, WIDTH - MARGIN);
    let _ = writeln!(out, r##"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="#333"/>"##);
    for (si, s) in shares.iter().enumerate() {
        for (i, v) in s.iter().enumerate() {
            let h = v / top * plot_h;
            let x = MARGIN + i as f64 * slot + slot * 0.1 + si as f64 * bar;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{}"><title>{}: {} = {:.3}</title></rect>"#,
                base - h,
                COLORS[si],
                escape(&series[si].label),
                i,
                v
            );
        }
    }
    for i in 0..bins {
        let x = MARGIN + (i as f64 + 0.5) * slot;
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{i}</text>"#, base + 14.0);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">pass count</text>"#, WIDTH / 2.0, HEIGHT - 8.0);
    let _ = writeln!(out, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">share of samples (max {top:.3})</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    for (si, s) in series.iter().enumerate() {
        let y = MARGIN + 14.0 * si as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/>"#, WIDTH - MARGIN - 150.0, y - 9.0, COLORS[si]);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, WIDTH - MARGIN - 135.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}
