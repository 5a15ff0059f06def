//! Standalone SVG line plots.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

/// One polyline through the finite points of `(x, y)`; non-positive values
/// are dropped on log axes.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], axes: Axes) -> String {
    let tx = |v: f64| if axes.log_x { v.log10() } else { v };
    let ty = |v: f64| if axes.log_y { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| (!axes.log_x || **a > 0.0) && (!axes.log_y || **b > 0.0))
        .map(|(&a, &b)| (tx(a), ty(b)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#, W / 2.0, escape(title));
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if x1 == x0 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 == y0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 1.5 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 1.8 * PAD);
    let _ = writeln!(
        s,
        r#"<path d="M{l},{t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = PAD,
        t = 0.8 * PAD,
        b = H - PAD,
        r = W - 0.5 * PAD
    );
    for (v, anchor, is_x) in [(x0, "start", true), (x1, "end", true), (y0, "end", false), (y1, "end", false)] {
        let shown = if (is_x && axes.log_x) || (!is_x && axes.log_y) { format!("1e{v:.1}") } else { format!("{v:.3}") };
        if is_x {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{shown}</text>"#, px(v), H - PAD + 16.0);
        } else {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{shown}</text>"#, PAD - 4.0, py(v) + 4.0);
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#, W / 2.0, H - 18.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    s.push_str(r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.2" points=""##);
    for (i, &(a, b)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", px(a), py(b));
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_non_positive_on_log_axes() {
        let svg = line_plot("t", "x", "y", &[1.0, 10.0, 100.0], &[1.0, 0.0, 0.01], Axes { log_x: true, log_y: true });
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }
}
