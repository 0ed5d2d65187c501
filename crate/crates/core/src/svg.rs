//! Standalone SVG plots.

use std::fmt::Write as _;

use crate::agreement::{LabelDimCorrMap, LabelFrequency};
use crate::bayes::PosteriorReport;
use crate::corpus::{DimensionId, LabelId};

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1b6ca8", "#d1495b", "#3c8d2f", "#8e5ea2"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Medians and 95% credible intervals of cell means on the z scale, one
/// panel per representation, strategies along x and one colour per test
/// corpus. The ROPE is the shaded band.
pub fn interval_plot(report: &PosteriorReport, rope_bound_z: f64) -> String {
    let mut reps: Vec<&str> = Vec::new();
    let mut strategies: Vec<&str> = Vec::new();
    let mut corpora: Vec<&str> = Vec::new();
    for c in &report.cells {
        for (list, v) in [(&mut reps, &c.representation), (&mut strategies, &c.strategy), (&mut corpora, &c.test_corpus)] {
            if !list.contains(&v.as_str()) {
                list.push(v);
            }
        }
    }
    let lo = report.cells.iter().map(|c| c.rope.ci_low).fold(-rope_bound_z, f64::min);
    let hi = report.cells.iter().map(|c| c.rope.ci_high).fold(rope_bound_z, f64::max);
    let (lo, hi) = ((lo * 10.0).floor() / 10.0, (hi * 10.0).ceil() / 10.0);
    let y = |v: f64| MARGIN + (hi - v) / (hi - lo) * PANEL_H;
    let width = MARGIN * 2.0 + PANEL_W * reps.len() as f64;
    let height = MARGIN * 2.0 + PANEL_H + 20.0;

    let mut s = String::new();
    open(&mut s, width, height);
    for (pi, rep) in reps.iter().enumerate() {
        let x0 = MARGIN + PANEL_W * pi as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{x0}" y="{:.2}" width="{PANEL_W}" height="{:.2}" fill="#9ecae1" fill-opacity="0.5"/>"##,
            y(rope_bound_z),
            y(-rope_bound_z) - y(rope_bound_z)
        );
        let _ = writeln!(s, r#"<rect x="{x0}" y="{MARGIN}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x0 + PANEL_W / 2.0, MARGIN - 8.0, esc(rep));
        let step = PANEL_W / strategies.len() as f64;
        for (si, strat) in strategies.iter().enumerate() {
            let xc = x0 + step * (si as f64 + 0.5);
            let _ = writeln!(s, r#"<text x="{xc:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN + PANEL_H + 16.0, esc(strat));
            for (ci, corpus) in corpora.iter().enumerate() {
                let Some(c) = report.cells.iter().find(|c| c.representation == *rep && c.strategy == *strat && c.test_corpus == *corpus) else {
                    continue;
                };
                let x = xc + (ci as f64 - (corpora.len() - 1) as f64 / 2.0) * 14.0;
                let color = COLORS[ci % COLORS.len()];
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                    y(c.rope.ci_low),
                    y(c.rope.ci_high)
                );
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, y(c.rope.median));
            }
        }
    }
    let mut tick = lo;
    while tick <= hi + 1e-9 {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.1}</text>"#, MARGIN - 4.0, y(tick) + 4.0);
        tick += 0.1 * ((hi - lo) / 1.0).ceil().max(1.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.2}" transform="rotate(-90 12 {:.2})" text-anchor="middle">z-CCC</text>"#,
        MARGIN + PANEL_H / 2.0,
        MARGIN + PANEL_H / 2.0
    );
    for (ci, corpus) in corpora.iter().enumerate() {
        let x = MARGIN + 90.0 * ci as f64;
        let ly = height - 10.0;
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="4" fill="{}"/>"#, ly - 4.0, COLORS[ci % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, x + 8.0, esc(corpus));
    }
    s.push_str("</svg>\n");
    s
}

fn open(s: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Grouped bars of how many sequences at least 1, 2 and 3 annotators marked
/// per label, labels sorted by the first count.
pub fn frequency_chart(freqs: &[LabelFrequency]) -> String {
    let mut rows: Vec<&LabelFrequency> = freqs.iter().collect();
    rows.sort_by(|a, b| b.ge1.cmp(&a.ge1).then(a.label.cmp(&b.label)));
    let max = rows.iter().map(|f| f.ge1).max().unwrap_or(0).max(1) as f64;
    let (row_h, bar_w, label_w) = (18.0, 420.0, 110.0);
    let width = label_w + bar_w + MARGIN;
    let height = MARGIN * 2.0 + row_h * rows.len() as f64;
    let mut s = String::new();
    open(&mut s, width, height);
    for (i, f) in rows.iter().enumerate() {
        let y0 = MARGIN + row_h * i as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, label_w - 6.0, y0 + 12.0, f.label);
        for (j, n) in [f.ge1, f.ge2, f.ge3].into_iter().enumerate() {
            let w = n as f64 / max * bar_w;
            let _ = writeln!(
                s,
                r#"<rect x="{label_w}" y="{:.2}" width="{w:.2}" height="5" fill="{}"><title>{} &gt;= {}: {n}</title></rect>"#,
                y0 + 3.0 + 5.0 * j as f64,
                COLORS[j],
                f.label,
                j + 1
            );
        }
    }
    for (j, name) in [">= 1 annotator", ">= 2 annotators", ">= 3 annotators"].iter().enumerate() {
        let x = label_w + 130.0 * j as f64;
        let _ = writeln!(s, r#"<rect x="{x}" y="{:.2}" width="10" height="10" fill="{}"/>"#, MARGIN - 30.0, COLORS[j]);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 14.0, MARGIN - 21.0, esc(name));
    }
    let _ = writeln!(s, r#"<text x="{label_w}" y="{:.2}">0</text>"#, height - MARGIN + 16.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{max}</text>"#, label_w + bar_w, height - MARGIN + 16.0);
    s.push_str("</svg>\n");
    s
}

/// Label by dimension grid of consistent mean correlations, red positive
/// and blue negative; blank cells have no consistent link.
pub fn label_dimension_heatmap(map: &LabelDimCorrMap) -> String {
    let (cell, label_w, head_h) = (22.0, 110.0, 90.0);
    let width = label_w + cell * DimensionId::ALL.len() as f64 + MARGIN;
    let height = head_h + cell * LabelId::ALL.len() as f64 + MARGIN;
    let mut s = String::new();
    open(&mut s, width, height);
    for (j, d) in DimensionId::ALL.iter().enumerate() {
        let x = label_w + cell * (j as f64 + 0.5);
        let y = head_h - 6.0;
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" transform="rotate(-60 {x:.2} {y:.2})">{d}</text>"#);
    }
    for (i, l) in LabelId::ALL.iter().enumerate() {
        let y0 = head_h + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{l}</text>"#, label_w - 6.0, y0 + 15.0);
        for (j, d) in DimensionId::ALL.iter().enumerate() {
            let x0 = label_w + cell * j as f64;
            let fill = match map.get(*l, *d) {
                Some(r) => {
                    // Full saturation at |r| = 0.5.
                    let a = (r.abs() * 2.0).min(1.0);
                    let (red, blue) = if r >= 0.0 { (255.0, 255.0 * (1.0 - a)) } else { (255.0 * (1.0 - a), 255.0) };
                    let green = 255.0 * (1.0 - a);
                    format!(r#"fill="rgb({},{},{})"><title>{l} / {d}: {r:.3}</title></rect>"#, red.round(), green.round(), blue.round())
                }
                None => r#"fill="white"/>"#.to_string(),
            };
            let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" stroke="#cccccc" {fill}"##);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{analyze, grid, BayesConfig, RopeSpec};

    #[test]
    fn plot_has_one_interval_per_cell() {
        let r = grid(|_, _, c, t| 0.2 + 0.1 * c as f64 + 0.02 * t as f64);
        let rep = analyze(&r, &BayesConfig { iterations: 2000, warmup: 1000, ..BayesConfig::default() }).unwrap();
        let svg = interval_plot(&rep, RopeSpec::default().bound_z());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<line").count(), 18);
        assert_eq!(svg.matches("<circle").count(), 18 + 2);
        assert!(svg.contains(">dim_continuous<"));
    }

    #[test]
    fn heatmap_colours_only_consistent_links() {
        use crate::agreement::LabelDimEntry;
        let entries = LabelId::ALL
            .iter()
            .flat_map(|&label| {
                DimensionId::ALL.iter().map(move |&dimension| LabelDimEntry {
                    label,
                    dimension,
                    mean_pcc: (label == LabelId::Relaxed && dimension == DimensionId::ALL[1]).then_some(0.4),
                    n_consistent: 0,
                })
            })
            .collect();
        let svg = label_dimension_heatmap(&LabelDimCorrMap { entries });
        assert_eq!(svg.matches("<title>").count(), 1);
        assert_eq!(svg.matches("<rect x=").count(), LabelId::ALL.len() * DimensionId::ALL.len());
    }

    #[test]
    fn frequency_bars_scale_to_the_largest_count() {
        let freqs: Vec<LabelFrequency> =
            LabelId::ALL.iter().enumerate().map(|(i, &label)| LabelFrequency { label, ge1: 10 * i, ge2: 5 * i, ge3: i }).collect();
        let svg = frequency_chart(&freqs);
        assert_eq!(svg.matches("<title>").count(), 3 * LabelId::ALL.len());
        assert!(svg.contains(r#"width="420.00""#));
    }
}
