//! Scatter biplots rendered to standalone SVG.
//!
//! Every point becomes one `<circle>` carrying its data coordinates in
//! `data-x` / `data-y` attributes, so plots can be checked against the CSV
//! export without rasterizing.

use std::fmt::Write;

use crate::export::{fmt_num, BiplotData, PointKind};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 60.0;

fn color(kind: PointKind) -> &'static str {
    match kind {
        PointKind::Row | PointKind::Individual => "#1f77b4",
        PointKind::Col | PointKind::Category => "#d62728",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Symmetric axis range around the origin covering every point.
fn extent(data: &BiplotData) -> f64 {
    let m = data
        .points
        .iter()
        .flat_map(|p| p.coords.iter().take(2))
        .filter(|x| x.is_finite())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m > 0.0 {
        1.1 * m
    } else {
        1.0
    }
}

pub fn render_svg(data: &BiplotData) -> String {
    let r = extent(data);
    let sx = (WIDTH - 2.0 * MARGIN) / (2.0 * r);
    let sy = (HEIGHT - 2.0 * MARGIN) / (2.0 * r);
    let px = |x: f64| WIDTH / 2.0 + sx * x;
    let py = |y: f64| HEIGHT / 2.0 - sy * y;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&data.title)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        MARGIN,
        HEIGHT / 2.0,
        WIDTH - MARGIN,
        HEIGHT / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        WIDTH / 2.0,
        MARGIN,
        WIDTH / 2.0,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT / 2.0 - 6.0,
        escape(&data.axis_labels[0])
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" transform="rotate(-90 {} {})">{}</text>"#,
        WIDTH / 2.0 - 6.0,
        MARGIN,
        WIDTH / 2.0 - 6.0,
        MARGIN,
        escape(&data.axis_labels[1])
    );
    let _ = writeln!(s, r#"<g class="points">"#);
    for p in &data.points {
        let x = p.coords.first().copied().unwrap_or(0.0);
        let y = p.coords.get(1).copied().unwrap_or(0.0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}" data-id="{}" data-kind="{}" data-x="{}" data-y="{}"><title>{}</title></circle>"#,
            px(x),
            py(y),
            color(p.kind),
            escape(&p.id),
            p.kind.as_str(),
            fmt_num(x),
            fmt_num(y),
            escape(&p.id)
        );
        if matches!(p.kind, PointKind::Col | PointKind::Category | PointKind::Row) && data.points.len() <= 200 {
            let _ = writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" fill="{}">{}</text>"#,
                px(x) + 5.0,
                py(y) - 5.0,
                color(p.kind),
                escape(&p.id)
            );
        }
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

/// `(id, kind, x, y)` of every marker in an SVG produced by [`render_svg`].
pub fn parse_markers(svg: &str) -> Vec<(String, String, f64, f64)> {
    fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
        let key = format!(" {}=\"", name);
        let start = tag.find(&key)? + key.len();
        let len = tag[start..].find('"')?;
        Some(&tag[start..start + len])
    }
    svg.split("<circle")
        .skip(1)
        .filter_map(|tag| {
            let tag = &tag[..tag.find('>')?];
            Some((
                attr(tag, "data-id")?
                    .replace("&quot;", "\"")
                    .replace("&lt;", "<")
                    .replace("&gt;", ">")
                    .replace("&amp;", "&"),
                attr(tag, "data-kind")?.to_string(),
                attr(tag, "data-x")?.parse().ok()?,
                attr(tag, "data-y")?.parse().ok()?,
            ))
        })
        .collect()
}
