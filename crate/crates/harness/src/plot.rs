//! Self-contained SVG boxplots.
//!
//! Quartiles use linear interpolation between order statistics (type 7):
//! the `p`-quantile of sorted `x₀ ≤ … ≤ x_{n−1}` is
//! `x_⌊h⌋ + (h − ⌊h⌋)(x_{⌊h⌋+1} − x_⌊h⌋)` with `h = (n − 1)p`. Whiskers reach
//! the most extreme values within 1.5 IQR of the box; points beyond are drawn
//! as outliers.

use std::fmt::Write;
use std::path::Path;

use crate::error::Result;
use crate::output::write_text;

/// Type-7 quantile of already sorted, nonempty values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    /// Statistics of the non-NaN values; panics if there are none.
    pub fn from_values(values: &[f64]) -> Self {
        let v = sorted(values);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v
            .iter()
            .copied()
            .filter(|x| *x >= fence_lo && *x <= fence_hi)
            .collect();
        Self {
            min: v[0],
            q1,
            median: quantile_sorted(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: v
                .iter()
                .copied()
                .filter(|x| *x < fence_lo || *x > fence_hi)
                .collect(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH_PER_GROUP: f64 = 120.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const PLOT_HEIGHT: f64 = 320.0;
const MARGIN_BOTTOM: f64 = 90.0;
const BOX_WIDTH: f64 = 50.0;

/// One box per group on a shared y-axis, with a dashed zero line.
pub fn render_boxplot_svg(groups: &[(String, Vec<f64>)], title: &str, y_label: &str) -> String {
    let stats: Vec<BoxStats> = groups
        .iter()
        .map(|(_, v)| BoxStats::from_values(v))
        .collect();
    let mut lo = stats.iter().map(|s| s.min).fold(0.0, f64::min);
    let mut hi = stats.iter().map(|s| s.max).fold(0.0, f64::max);
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let width = MARGIN_LEFT + MARGIN_RIGHT + WIDTH_PER_GROUP * groups.len().max(1) as f64;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let y = |v: f64| MARGIN_TOP + PLOT_HEIGHT * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let x0 = MARGIN_LEFT;
    let x1 = width - MARGIN_RIGHT;
    let _ = writeln!(
        s,
        r#"<line x1="{x0:.1}" y1="{:.1}" x2="{x0:.1}" y2="{:.1}" stroke="black"/>"#,
        MARGIN_TOP,
        MARGIN_TOP + PLOT_HEIGHT
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{yy:.1}" x2="{x0:.1}" y2="{yy:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y(v) + 4.0,
            yy = y(v),
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        MARGIN_TOP + PLOT_HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r#"<line class="zero" x1="{x0:.1}" y1="{:.1}" x2="{x1:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
        y(0.0),
        y(0.0)
    );
    for (k, ((label, _), st)) in groups.iter().zip(&stats).enumerate() {
        let cx = MARGIN_LEFT + WIDTH_PER_GROUP * (k as f64 + 0.5);
        let (bl, br) = (cx - BOX_WIDTH / 2.0, cx + BOX_WIDTH / 2.0);
        let _ = writeln!(s, r#"<g class="box">"#);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(st.whisker_high),
            y(st.q3)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
            y(st.q1),
            y(st.whisker_low)
        );
        for w in [st.whisker_low, st.whisker_high] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
                cx - BOX_WIDTH / 4.0,
                y(w),
                cx + BOX_WIDTH / 4.0,
                y(w)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{bl:.1}" y="{:.1}" width="{BOX_WIDTH:.1}" height="{:.1}" fill="lightsteelblue" stroke="black"/>"#,
            y(st.q3),
            (y(st.q1) - y(st.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line class="median" x1="{bl:.1}" y1="{:.1}" x2="{br:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
            y(st.median),
            y(st.median)
        );
        for o in &st.outliers {
            let _ = writeln!(
                s,
                r#"<circle class="outlier" cx="{cx:.1}" cy="{:.1}" r="3" fill="none" stroke="black"/>"#,
                y(*o)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-30 {cx:.1} {:.1})">{}</text>"#,
            MARGIN_TOP + PLOT_HEIGHT + 16.0,
            MARGIN_TOP + PLOT_HEIGHT + 16.0,
            escape(label)
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_boxplot_svg(groups: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    write_text(
        path,
        &render_boxplot_svg(
            groups,
            "Advantage of the r-weighted learner",
            "IG^R(θ*) − IG^c(θ*)",
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_quartiles() {
        let s = BoxStats::from_values(&[5.0, 3.0, 1.0, 4.0, 2.0]);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn far_point_is_outlier() {
        let s = BoxStats::from_values(&[1.0, 1.2, 0.8, 1.1, 0.9, 100.0]);
        assert_eq!(s.outliers, vec![100.0]);
        assert!(s.whisker_high < 2.0);
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render_boxplot_svg(&[("a<b&c".into(), vec![1.0])], "t", "y");
        assert!(svg.contains("a&lt;b&amp;c"));
    }
}
