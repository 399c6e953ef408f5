//! Static SVG pyramid of per-coefficient Bayes factors.
//!
//! Scale `s` is drawn as row `s`, location `l` at the centre of its genomic
//! interval. Larger Bayes factors give larger, darker points; every
//! coefficient with `BF > 1` also shades its interval in the band under the
//! pyramid.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use wavescream::screening::BfDetail;

const WIDTH: f64 = 800.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const ROW: f64 = 28.0;
const R_MIN: f64 = 1.5;
const R_MAX: f64 = 9.0;

/// Strength in `[0, 1)`, zero for `BF ≤ 1` and increasing in `BF`.
pub fn strength(bf: f64) -> f64 {
    if bf > 1.0 {
        1.0 - 1.0 / bf
    } else {
        0.0
    }
}

pub fn render_svg(detail: &BfDetail) -> anyhow::Result<String> {
    if detail.entries.is_empty() {
        bail!("no Bayes factors to plot");
    }
    let depth = detail.depth();
    let plot_w = WIDTH - LEFT - RIGHT;
    let band_y = TOP + (depth as f64 + 1.0) * ROW;
    let band_h = 16.0;
    let axis_y = band_y + band_h + 6.0;
    let height = axis_y + 40.0;
    let span = (detail.end_bp - detail.start_bp) as f64;
    let x_of = |frac: f64| LEFT + frac * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT:.2}" y="18">chr{} {}-{} ({} coefficients)</text>"#,
        detail.chromosome, detail.start_bp, detail.end_bp, detail.kind
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT:.2}" y="{band_y:.2}" width="{plot_w:.2}" height="{band_h:.2}" fill="none" stroke="#999999"/>"##
    );

    for e in detail.entries.iter().filter(|e| e.bf.is_some_and(|b| b > 1.0)) {
        let n = (1u64 << e.scale) as f64;
        let (a, b) = (e.location as f64 / n, (e.location as f64 + 1.0) / n);
        let start = detail.start_bp as f64 + a * span;
        let end = detail.start_bp as f64 + b * span;
        let g = strength(e.bf.unwrap_or(1.0));
        let _ = writeln!(
            s,
            r##"<rect class="highlight" data-scale="{}" data-location="{}" data-start-bp="{:.0}" data-end-bp="{:.0}" x="{:.2}" y="{band_y:.2}" width="{:.2}" height="{band_h:.2}" fill="#d62728" fill-opacity="{:.3}"/>"##,
            e.scale,
            e.location,
            start,
            end,
            x_of(a),
            x_of(b) - x_of(a),
            0.15 + 0.5 * g
        );
    }

    for s_idx in 0..=depth {
        let y = TOP + s_idx as f64 * ROW + ROW / 2.0;
        let _ = writeln!(s, r#"<text x="8" y="{:.2}">s={s_idx}</text>"#, y + 4.0);
    }
    for e in &detail.entries {
        let n = (1u64 << e.scale) as f64;
        let cx = x_of((e.location as f64 + 0.5) / n);
        let cy = TOP + e.scale as f64 * ROW + ROW / 2.0;
        match e.bf {
            Some(bf) => {
                let g = strength(bf);
                let r = R_MIN + (R_MAX - R_MIN) * g;
                let level = (220.0 * (1.0 - g)).round() as u8;
                let _ = writeln!(
                    s,
                    r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="#{level:02x}{level:02x}{level:02x}"><title>s={} l={} BF={bf:.4e}</title></circle>"##,
                    e.scale, e.location
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r##"<circle class="na" cx="{cx:.2}" cy="{cy:.2}" r="{R_MIN:.2}" fill="none" stroke="#bbbbbb"/>"##
                );
            }
        }
    }

    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="#000000"/>"##,
        LEFT + plot_w
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let bp = detail.start_bp as f64 + frac * span;
        let x = x_of(frac);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{axis_y:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/>"##,
            axis_y + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{bp:.0}</text>"#,
            axis_y + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">position (bp)</text>"#,
        LEFT + plot_w / 2.0,
        axis_y + 34.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_pyramid_plot(detail: &BfDetail, out_path: &Path) -> anyhow::Result<()> {
    let svg = render_svg(detail)?;
    std::fs::write(out_path, svg).with_context(|| format!("writing {}", out_path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavescream::screening::{BfEntry, CoefficientKind};

    fn detail(bfs: impl Fn(u32, usize) -> f64) -> BfDetail {
        let mut entries = Vec::new();
        for s in 0..=4u32 {
            for l in 0..(1usize << s) {
                entries.push(BfEntry { scale: s, location: l, bf: Some(bfs(s, l)), posterior_gamma: Some(0.0) });
            }
        }
        BfDetail { chromosome: "5".into(), start_bp: 0, end_bp: 800_000, kind: CoefficientKind::D, entries }
    }

    #[test]
    fn null_map_has_uniform_points_and_no_highlight() {
        let svg = render_svg(&detail(|_, _| 1.0)).unwrap();
        assert!(!svg.contains("class=\"highlight\""));
        let radii: std::collections::BTreeSet<&str> = svg
            .split("<circle")
            .skip(1)
            .map(|t| t.split(" r=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(radii.len(), 1);
    }

    #[test]
    fn single_strong_coefficient_highlights_one_octile() {
        let svg = render_svg(&detail(|s, l| if (s, l) == (3, 5) { 50.0 } else { 0.5 })).unwrap();
        assert_eq!(svg.matches("class=\"highlight\"").count(), 1);
        assert!(svg.contains(r#"data-start-bp="500000" data-end-bp="600000""#));
    }

    #[test]
    fn strength_is_monotone() {
        let xs = [0.1, 1.0, 1.5, 3.0, 50.0, 1e6];
        for w in xs.windows(2) {
            assert!(strength(w[1]) >= strength(w[0]));
        }
        assert_eq!(strength(0.3), 0.0);
    }

    #[test]
    fn empty_map_is_rejected() {
        let d = BfDetail { entries: vec![], ..detail(|_, _| 1.0) };
        assert!(render_svg(&d).is_err());
    }
}
