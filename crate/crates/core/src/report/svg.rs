//! Scatter-plus-gradient figures as standalone SVG text.

use std::fmt::Write;

use crate::features::display_name;
use crate::gradients::GradientField;
use crate::synth::STYLE_NAMES;

use super::tables::ReducedView;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const PLOT: f64 = 700.0;
const MARGIN: f64 = 30.0;
const LEGEND_X: f64 = MARGIN + PLOT + 20.0;
const WIDTH: f64 = LEGEND_X + 170.0;
const HEIGHT: f64 = MARGIN + PLOT + 40.0;
/// Arrow length for APCC 1 as a share of the plot diagonal.
pub const ARROW_SHARE: f64 = 0.25;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Legend order: known style names first in their canonical order, then the rest sorted.
pub fn style_order(styles: &[String]) -> Vec<String> {
    let mut unique: Vec<String> = styles.to_vec();
    unique.sort();
    unique.dedup();
    unique.sort_by_key(|s| {
        (
            STYLE_NAMES
                .iter()
                .position(|k| k == s)
                .unwrap_or(usize::MAX),
            s.clone(),
        )
    });
    unique
}

/// Length in pixels of an arrow for a given APCC.
pub fn arrow_length(apcc: f64) -> f64 {
    apcc * ARROW_SHARE * PLOT * std::f64::consts::SQRT_2
}

/// One scatter point per utterance coloured by style, one arrow path per gradient from the
/// centroid, labels at the tips and a provenance footer. Equal scaling on both axes keeps
/// arrow angles true to the data.
pub fn render_svg(view: &ReducedView, field: Option<&GradientField>) -> String {
    let coords = &view.reduced.coords;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in coords {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    if coords.is_empty() {
        (xmin, xmax, ymin, ymax) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = (xmax - xmin).max(ymax - ymin).max(1e-12) * 1.1;
    let (cx, cy) = ((xmin + xmax) / 2.0, (ymin + ymax) / 2.0);
    let scale = PLOT / span;
    let sx = |x: f64| MARGIN + PLOT / 2.0 + (x - cx) * scale;
    let sy = |y: f64| MARGIN + PLOT / 2.0 - (y - cy) * scale;

    let order = style_order(&view.styles);
    let colour =
        |style: &str| PALETTE[order.iter().position(|s| s == style).unwrap_or(0) % PALETTE.len()];

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="#cccccc"/>"##
    );
    let _ = writeln!(out, r#"<g class="points">"#);
    for (p, style) in coords.iter().zip(&view.styles) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
            sx(p[0]),
            sy(p[1]),
            colour(style)
        );
    }
    let _ = writeln!(out, "</g>");

    if let Some(field) = field {
        let c = view.reduced.centroid();
        let (x0, y0) = (sx(c[0]), sy(c[1]));
        let _ = writeln!(
            out,
            r#"<g class="gradients" stroke="black" fill="none" stroke-width="2">"#
        );
        for g in &field.gradients {
            let len = arrow_length(g.apcc);
            // screen y grows downwards
            let (ux, uy) = (g.direction[0], -g.direction[1]);
            let (x1, y1) = (x0 + ux * len, y0 + uy * len);
            let head = 8.0f64.min(len / 2.0);
            let (bx, by) = (x1 - ux * head, y1 - uy * head);
            let (px, py) = (-uy * head * 0.5, ux * head * 0.5);
            let dash = if g.low_confidence {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                out,
                r#"<path d="M {x0:.2} {y0:.2} L {x1:.2} {y1:.2} M {:.2} {:.2} L {x1:.2} {y1:.2} L {:.2} {:.2}"{dash}><title>{} APCC {:.3}</title></path>"#,
                bx + px,
                by + py,
                bx - px,
                by - py,
                escape(&g.feature),
                g.apcc
            );
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(out, r#"<g class="labels" font-size="12">"#);
        for g in &field.gradients {
            let len = arrow_length(g.apcc) + 6.0;
            let (x, y) = (x0 + g.direction[0] * len, y0 - g.direction[1] * len);
            let anchor = if g.direction[0] < -0.2 {
                "end"
            } else if g.direction[0] > 0.2 {
                "start"
            } else {
                "middle"
            };
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
                escape(&display_name(&g.feature))
            );
        }
        let _ = writeln!(out, "</g>");
    }

    let _ = writeln!(out, r#"<g class="legend" font-size="13">"#);
    for (i, style) in order.iter().enumerate() {
        let y = MARGIN + 10.0 + 22.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{LEGEND_X}" y="{y:.2}" width="12" height="12" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            colour(style),
            LEGEND_X + 18.0,
            y + 11.0,
            escape(style)
        );
    }
    let _ = writeln!(out, "</g>");

    let params: Vec<String> = view
        .reduced
        .params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(
        out,
        r##"<text class="footer" x="{MARGIN}" y="{:.2}" font-size="11" fill="#555555">{} | {} | seed={} | {} | styleprobe {}</text>"##,
        HEIGHT - 12.0,
        escape(&view.task),
        view.reduced.reducer.label(),
        view.reduced.seed,
        escape(&params.join(", ")),
        env!("CARGO_PKG_VERSION")
    );
    out.push_str("</svg>\n");
    out
}

/// Every figure on one page: tasks as rows, reducers as columns, each panel half size.
pub fn contact_sheet(panels: &[(usize, usize, String)]) -> String {
    let rows = panels.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let cols = panels.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    let (pw, ph) = (WIDTH / 2.0, HEIGHT / 2.0);
    let (w, h) = (pw * cols as f64, ph * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for (r, c, doc) in panels {
        let inner = doc
            .trim_end()
            .strip_prefix("<svg ")
            .map(|rest| {
                format!(
                    "<svg x=\"{}\" y=\"{}\" width=\"{pw}\" height=\"{ph}\" {}",
                    *c as f64 * pw,
                    *r as f64 * ph,
                    strip_size(rest)
                )
            })
            .unwrap_or_default();
        out.push_str(&inner);
        out.push('\n');
    }
    out.push_str("</svg>\n");
    out
}

/// Drops the width/height attributes of a root tag so the nested panel can be resized.
fn strip_size(rest: &str) -> String {
    let end = rest.find('>').unwrap_or(rest.len());
    let (tag, body) = rest.split_at(end);
    let kept: Vec<&str> = tag
        .split(' ')
        .filter(|a| !a.starts_with("width=") && !a.starts_with("height="))
        .collect();
    format!("{}{}", kept.join(" "), body)
}
