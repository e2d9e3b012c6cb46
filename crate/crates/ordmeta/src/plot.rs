//! SVG output: summary ROC, accuracy against threshold and forest plots.
//!
//! Output depends only on the input values, so equal inputs give equal
//! bytes.

use std::fmt::Write;

use ordmeta_core::nma::PairwiseRow;
use ordmeta_core::posterior::AccuracySummary;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#8d6a46", "#4d4d4d"];

type Pt = (f64, f64);

/// Convex hull, counter-clockwise, without repeated end point.
pub fn convex_hull(mut pts: Vec<Pt>) -> Vec<Pt> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Pt, a: Pt, b: Pt| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<Pt> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Pt> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Point in a convex counter-clockwise polygon, boundary included.
pub fn contains(poly: &[Pt], p: Pt) -> bool {
    if poly.len() < 3 {
        return false;
    }
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= -1e-12
    })
}

/// Median operating points `(1 - Sp, Se)` in threshold order.
pub fn median_points(s: &AccuracySummary) -> Vec<Pt> {
    s.rows.iter().map(|r| (1.0 - r.sp.median, r.se.median)).collect()
}

fn hull_of_boxes(boxes: impl Iterator<Item = (Pt, Pt)>) -> Vec<Pt> {
    let mut pts = Vec::new();
    for ((x0, x1), (y0, y1)) in boxes {
        pts.extend([(x0, y0), (x0, y1), (x1, y0), (x1, y1)]);
    }
    convex_hull(pts)
}

/// Hull of the per-threshold credible boxes.
pub fn credible_region(s: &AccuracySummary) -> Vec<Pt> {
    hull_of_boxes(s.rows.iter().map(|r| ((1.0 - r.sp.hi, 1.0 - r.sp.lo), (r.se.lo, r.se.hi))))
}

/// Hull of the per-threshold prediction boxes.
pub fn prediction_region(s: &AccuracySummary) -> Vec<Pt> {
    hull_of_boxes(s.rows.iter().map(|r| ((1.0 - r.sp_pred.1, 1.0 - r.sp_pred.0), (r.se_pred.0, r.se_pred.1))))
}

struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn map(&self, p: Pt) -> Pt {
        (self.x + p.0 * self.w, self.y + (1.0 - p.1) * self.h)
    }

    fn axes(&self, out: &mut String, xlab: &str, ylab: &str, title: &str) {
        let (x, y, w, h) = (self.x, self.y, self.w, self.h);
        writeln!(out, r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#000"/>"##).unwrap();
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let (px, _) = self.map((t, 0.0));
            let (_, py) = self.map((0.0, t));
            writeln!(out, r#"<text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle">{t:.2}</text>"#, y + h + 14.0).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{t:.2}</text>"#, x - 4.0, py + 3.0).unwrap();
        }
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, x + w / 2.0, y + h + 30.0, esc(xlab)).unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            x - 34.0,
            y + h / 2.0,
            x - 34.0,
            y + h / 2.0,
            esc(ylab)
        )
        .unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#, x + w / 2.0, y - 8.0, esc(title)).unwrap();
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polygon(out: &mut String, f: &Frame, pts: &[Pt], fill: &str, opacity: f64) {
    if pts.len() < 3 {
        return;
    }
    let d: Vec<String> = pts.iter().map(|&p| f.map(p)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(out, r#"<polygon points="{}" fill="{fill}" fill-opacity="{opacity}" stroke="none"/>"#, d.join(" ")).unwrap();
}

fn polyline(out: &mut String, f: &Frame, pts: &[Pt], stroke: &str, dash: bool) {
    let d: Vec<String> = pts.iter().map(|&p| f.map(p)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dash { r#" stroke-dasharray="4 3""# } else { "" };
    writeln!(out, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#, d.join(" ")).unwrap();
}

fn header(w: f64, h: f64) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#).unwrap();
    writeln!(s, r##"<rect width="100%" height="100%" fill="#fff"/>"##).unwrap();
    s
}

fn sroc_panel(out: &mut String, f: &Frame, tests: &[(usize, &AccuracySummary)], title: &str) {
    f.axes(out, "1 - Specificity", "Sensitivity", title);
    polyline(out, f, &[(0.0, 0.0), (1.0, 1.0)], "#999", true);
    for &(i, s) in tests {
        let c = PALETTE[i % PALETTE.len()];
        polygon(out, f, &prediction_region(s), c, 0.10);
        polygon(out, f, &credible_region(s), c, 0.25);
        let mut curve = median_points(s);
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        polyline(out, f, &curve, c, false);
        for p in median_points(s) {
            let (x, y) = f.map(p);
            writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{c}"/>"#).unwrap();
        }
    }
}

fn legend(out: &mut String, x: f64, y: f64, tests: &[(usize, &AccuracySummary)]) {
    for (row, &(i, s)) in tests.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let yy = y + 16.0 * row as f64;
        writeln!(out, r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{c}"/>"#, yy - 9.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{yy:.2}" font-size="11">{}</text>"#, x + 14.0, esc(&s.test)).unwrap();
    }
    let yy = y + 16.0 * tests.len() as f64 + 4.0;
    writeln!(out, r#"<text x="{x:.2}" y="{yy:.2}" font-size="10">dark: 95% credible, light: 95% prediction</text>"#).unwrap();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrocLayout {
    /// All tests on one panel.
    Single,
    /// One panel per test.
    Grid,
}

pub fn render_sroc(summaries: &[AccuracySummary], layout: SrocLayout) -> Result<String> {
    let tests: Vec<(usize, &AccuracySummary)> = summaries.iter().enumerate().filter(|(_, s)| !s.rows.is_empty()).collect();
    if tests.is_empty() {
        return Err(Error::Input("no thresholds".into()));
    }
    let side = 320.0;
    let mut out;
    match layout {
        SrocLayout::Single => {
            out = header(side + 260.0, side + 90.0);
            let f = Frame { x: 60.0, y: 30.0, w: side, h: side };
            sroc_panel(&mut out, &f, &tests, "Summary ROC");
            legend(&mut out, side + 80.0, 50.0, &tests);
        }
        SrocLayout::Grid => {
            let cols = (tests.len() as f64).sqrt().ceil() as usize;
            let rows = tests.len().div_ceil(cols);
            let (cw, ch) = (side + 90.0, side + 80.0);
            out = header(cw * cols as f64, ch * rows as f64);
            for (j, t) in tests.iter().enumerate() {
                let f = Frame { x: 60.0 + cw * (j % cols) as f64, y: 30.0 + ch * (j / cols) as f64, w: side, h: side };
                sroc_panel(&mut out, &f, std::slice::from_ref(t), &t.1.test);
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Se and Sp medians with credible bars against the threshold index.
pub fn render_thresholds(s: &AccuracySummary) -> Result<String> {
    if s.rows.is_empty() {
        return Err(Error::Input("no thresholds".into()));
    }
    let (w, h) = (520.0, 320.0);
    let mut out = header(w + 150.0, h + 90.0);
    let f = Frame { x: 60.0, y: 30.0, w, h };
    f.axes(&mut out, "Threshold", "Accuracy", &s.test);
    let kmin = s.rows.first().unwrap().threshold as f64;
    let kmax = s.rows.last().unwrap().threshold as f64;
    let xs = |k: usize| if kmax > kmin { 0.03 + 0.94 * (k as f64 - kmin) / (kmax - kmin) } else { 0.5 };
    for (q, c) in [("Se", PALETTE[0]), ("Sp", PALETTE[1])] {
        let pick = |r: &ordmeta_core::posterior::ThresholdSummary| if q == "Se" { r.se } else { r.sp };
        let line: Vec<Pt> = s.rows.iter().map(|r| (xs(r.threshold), pick(r).median)).collect();
        polyline(&mut out, &f, &line, c, false);
        for r in &s.rows {
            let iv = pick(r);
            let (x, y0) = f.map((xs(r.threshold), iv.lo));
            let (_, y1) = f.map((xs(r.threshold), iv.hi));
            writeln!(out, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{c}"/>"#).unwrap();
        }
    }
    writeln!(out, r#"<text x="{:.2}" y="50" font-size="11" fill="{}">Sensitivity</text>"#, w + 75.0, PALETTE[0]).unwrap();
    writeln!(out, r#"<text x="{:.2}" y="66" font-size="11" fill="{}">Specificity</text>"#, w + 75.0, PALETTE[1]).unwrap();
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10">thresholds {}..{}</text>"#, w + 75.0, 84.0, kmin, kmax).unwrap();
    out.push_str("</svg>\n");
    Ok(out)
}

/// Forest plot of pairwise Se and Sp differences.
pub fn render_forest(rows: &[PairwiseRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Input("no comparisons".into()));
    }
    let row_h = 18.0;
    let (w, label_w) = (260.0, 190.0);
    let h = row_h * rows.len() as f64;
    let mut out = header(label_w + 2.0 * w + 60.0, h + 80.0);
    let lo = rows.iter().flat_map(|r| [r.d_se.lo, r.d_sp.lo]).fold(0.0f64, f64::min);
    let hi = rows.iter().flat_map(|r| [r.d_se.hi, r.d_sp.hi]).fold(0.0f64, f64::max);
    let span = (hi - lo).max(1e-9);
    for (p, title) in [(0usize, "Difference in Se"), (1, "Difference in Sp")] {
        let x0 = label_w + p as f64 * (w + 30.0);
        let sx = |v: f64| x0 + (v - lo) / span * w;
        writeln!(out, r#"<text x="{:.2}" y="20" font-size="12" text-anchor="middle">{title}</text>"#, x0 + w / 2.0).unwrap();
        writeln!(out, r##"<line x1="{0:.2}" y1="30" x2="{0:.2}" y2="{1:.2}" stroke="#999" stroke-dasharray="3 3"/>"##, sx(0.0), 30.0 + h).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let iv = if p == 0 { r.d_se } else { r.d_sp };
            let y = 30.0 + row_h * (i as f64 + 0.5);
            writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}"/>"#, sx(iv.lo), sx(iv.hi), PALETTE[0]).unwrap();
            writeln!(out, r#"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, sx(iv.median), PALETTE[0]).unwrap();
        }
        writeln!(out, r#"<text x="{x0:.2}" y="{:.2}" font-size="10">{lo:.3}</text>"#, h + 48.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{hi:.3}</text>"#, x0 + w, h + 48.0).unwrap();
    }
    for (i, r) in rows.iter().enumerate() {
        let y = 30.0 + row_h * (i as f64 + 0.5) + 4.0;
        let lab = format!("{} k={} vs {} k={}", r.test_a, r.k_a, r.test_b, r.k_b);
        writeln!(out, r#"<text x="8" y="{y:.2}" font-size="11">{}</text>"#, esc(&lab)).unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}
