//! Static log-log SVG for a rate report.

use std::fmt::Write;

use torus_ot_core::rate::RateReport;

use crate::error::LabError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, log_n: f64) -> f64 {
        MARGIN + (log_n - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, log_v: f64) -> f64 {
        HEIGHT - MARGIN - (log_v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Core(torus_ot_core::Error::InvalidInput(msg.into()))
}

/// Renders means with ±1 SE bars, the fitted power law and a dashed guide of
/// slope `reference_slope` through the first point. Both lines are drawn
/// over the same `n` range, so equal slopes give coincident segments.
pub fn render_plot(report: &RateReport, reference_slope: f64) -> Result<String, LabError> {
    let pts = &report.points;
    if pts.len() < 2 {
        return Err(invalid("a plot needs at least two sample sizes"));
    }
    if pts.iter().any(|p| !(p.mean > 0.0 && p.mean.is_finite() && p.std_error.is_finite())) {
        return Err(invalid("plotted means must be positive and finite"));
    }
    if !reference_slope.is_finite() || !report.fit.slope.is_finite() {
        return Err(invalid("slopes must be finite"));
    }
    let lx: Vec<f64> = pts.iter().map(|p| (p.n as f64).log10()).collect();
    let (xmin, xmax) = (lx[0], lx[lx.len() - 1]);
    if xmax <= xmin {
        return Err(invalid("sample sizes must span a range"));
    }
    let lo = |p: &torus_ot_core::rate::RatePoint| (p.mean - p.std_error).max(p.mean * 0.1).log10();
    let hi = |p: &torus_ot_core::rate::RatePoint| (p.mean + p.std_error).log10();
    let fit_at = |x: f64| (report.fit.intercept + report.fit.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
    let ref_at = |x: f64| pts[0].mean.log10() + reference_slope * (x - xmin);
    let mut ys: Vec<f64> = pts.iter().flat_map(|p| [lo(p), hi(p)]).collect();
    ys.extend([fit_at(xmin), fit_at(xmax), ref_at(xmin), ref_at(xmax)]);
    let (mut y0, mut y1) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let pad_x = 0.05 * (xmax - xmin);
    let fr = Frame { x0: xmin - pad_x, x1: xmax + pad_x, y0: y0 - pad, y1: y1 + pad };

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        w,
        r#"<g id="axes" stroke="black"><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>"#
    );
    let _ = writeln!(w, r#"<g id="ticks" font-family="sans-serif" font-size="11">"#);
    for k in fr.x0.ceil() as i64..=fr.x1.floor() as i64 {
        let x = fr.x(k as f64);
        let _ = writeln!(w, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"#, bottom + 18.0);
    }
    for k in fr.y0.ceil() as i64..=fr.y1.floor() as i64 {
        let y = fr.y(k as f64);
        let _ = writeln!(w, r#"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, left - 8.0, y + 4.0);
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">n (log10)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">mean W_{} (log10)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        report.p
    );
    let line = |w: &mut String, id: &str, extra: &str, f: &dyn Fn(f64) -> f64| {
        let _ = writeln!(
            w,
            r#"<line id="{id}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke-width="1.5" {extra}/>"#,
            fr.x(xmin),
            fr.y(f(xmin)),
            fr.x(xmax),
            fr.y(f(xmax))
        );
    };
    line(w, "fit", r#"stroke="steelblue""#, &fit_at);
    line(w, "reference", r#"stroke="gray" stroke-dasharray="6 4""#, &ref_at);
    let _ = writeln!(w, r#"<g id="points" stroke="black" fill="black">"#);
    for (p, &x) in pts.iter().zip(&lx) {
        let cx = fr.x(x);
        let _ = writeln!(
            w,
            r#"<line class="error-bar" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}"/>"#,
            fr.y(lo(p)),
            fr.y(hi(p))
        );
        let _ = writeln!(w, r#"<circle class="point" cx="{cx:.2}" cy="{:.2}" r="3"/>"#, fr.y(p.mean.log10()));
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">slope {:.3} (reference {:.3})</text>"#,
        left + 8.0,
        top - 12.0,
        report.fit.slope,
        reference_slope
    );
    let _ = writeln!(w, "</svg>");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use torus_ot_core::rate::RatePoint;

    fn report(ns: &[usize], e: f64) -> RateReport {
        let pts = ns.iter().map(|&n| RatePoint::from_values(n, vec![0.5 * (n as f64).powf(e) * 0.9, 0.5 * (n as f64).powf(e) * 1.1]).unwrap()).collect();
        RateReport::from_points(1, 2.0, pts, 0).unwrap()
    }

    #[test]
    fn two_points() {
        let svg = render_plot(&report(&[10, 100], -0.5), -0.5).unwrap();
        assert_eq!(svg.matches(r#"class="point""#).count(), 2);
        assert_eq!(svg.matches(r#"id="fit""#).count(), 1);
        assert_eq!(svg, render_plot(&report(&[10, 100], -0.5), -0.5).unwrap());
    }

    #[test]
    fn degenerate_reports_are_rejected() {
        let mut r = report(&[10, 100], -0.5);
        r.points.truncate(1);
        assert!(render_plot(&r, -0.5).is_err());
        let mut r = report(&[10, 100], -0.5);
        r.points[1].mean = 0.0;
        assert!(render_plot(&r, -0.5).is_err());
        assert!(render_plot(&report(&[10, 100], -0.5), f64::NAN).is_err());
    }
}
