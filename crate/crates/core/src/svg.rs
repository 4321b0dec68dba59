//! Minimal SVG histograms and heatmaps.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Bar chart of `counts` over bins starting at `lo` with width `width`.
pub fn histogram(title: &str, lo: f64, width: f64, counts: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let max = counts
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let n = counts.len().max(1) as f64;
    let bw = (W - 2.0 * PAD) / n;
    for (i, c) in counts.iter().enumerate() {
        let h = (H - 2.0 * PAD) * c / max;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"/>"##,
            PAD + i as f64 * bw,
            H - PAD - h,
            bw.max(0.5),
            h
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let hi = lo + width * counts.len() as f64;
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">{lo:.3}</text>"#,
        H - PAD + 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{hi:.3}</text>"#,
        W - PAD,
        H - PAD + 15.0
    );
    out.push_str("</svg>\n");
    out
}

/// Grey-scale heatmap of a row-major `rows x cols` array.
pub fn heatmap(
    title: &str,
    rows: usize,
    cols: usize,
    values: &[f64],
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let max = values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cw = (W - 2.0 * PAD) / rows.max(1) as f64;
    let ch = (H - 2.0 * PAD) / cols.max(1) as f64;
    for i in 0..rows {
        for j in 0..cols {
            let v = values[i * cols + j] / max;
            if v < 1e-3 {
                continue;
            }
            let shade = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                PAD + i as f64 * cw,
                H - PAD - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">x1 in [{:.2}, {:.2}], x2 in [{:.2}, {:.2}]</text>"#,
        H - PAD + 15.0,
        x_range.0,
        x_range.1,
        y_range.0,
        y_range.1
    );
    out.push_str("</svg>\n");
    out
}

/// Counts of `data` in `bins` equal bins spanning its range.
pub fn bin(data: &[f64], bins: usize) -> (f64, f64, Vec<f64>) {
    let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || hi <= lo {
        return (lo.min(0.0), 1.0, vec![data.len() as f64]);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for x in data {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1.0;
    }
    (lo, width, counts)
}
