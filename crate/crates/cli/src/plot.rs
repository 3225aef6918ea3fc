//! Static SVG line plot of predicted and true horizon-averaged SoC.

use std::fmt::Write;

use ginet_core::train::Prediction;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Windows are laid out left to right in report order. Every window gets a
/// marker whose tooltip names its cycle and origin slot.
pub fn prediction_svg(predictions: &[Prediction], title: &str, config_digest: &str) -> String {
    let n = predictions.len().max(1);
    let values = predictions.iter().flat_map(|p| [p.y_soc_pred, p.y_soc_true]);
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n.saturating_sub(1).max(1)) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let line = |f: fn(&Prediction) -> f64| {
        predictions
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.2},{:.2}", x(i), y(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, "<!-- config_digest={config_digest} -->");
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let (x0, x1, yb, yt) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{yt} L{x0},{yb} L{x1},{yb}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x0}" y="{}" font-family="sans-serif" font-size="11">window (ordered by cycle, origin slot)</text>"#,
        HEIGHT - 15.0
    );
    for v in [lo, (lo + hi) / 2.0, hi] {
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.2}" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
        line(|p| p.y_soc_true)
    );
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="crimson" stroke-width="1" points="{}"/>"#,
        line(|p| p.y_soc_pred)
    );
    let _ = writeln!(svg, r#"<g fill="crimson">"#);
    for (i, p) in predictions.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"><title>{} t_origin={} pred={:.4} true={:.4}</title></circle>"#,
            x(i),
            y(p.y_soc_pred),
            escape(&p.cycle_id),
            p.t_origin,
            p.y_soc_pred,
            p.y_soc_true
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="12" fill="black">true</text><text x="{}" y="24" font-family="sans-serif" font-size="12" fill="crimson">predicted</text>"#,
        WIDTH - 170.0,
        WIDTH - 120.0
    );
    svg.push_str("</svg>\n");
    svg
}
