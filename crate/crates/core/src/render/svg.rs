use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::catalog::{Corner, ShapeKind};

use super::{Badge, Scene, SceneNode};

const LABEL_SIZE: u32 = 14;
const BADGE_SIZE: u32 = 16;
const ICON_SIZE: u32 = 18;
/// Horizontal distance between markers stacked at one spot.
const MARKER_SPACING: f64 = 12.0;

/// Fixed-precision coordinate text: at most two decimals, no trailing zeros.
fn num(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Marker ids may only hold a restricted character set.
fn arrow_id(color: &str) -> String {
    let safe: String = color.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("arrow-{safe}")
}

fn corner_position(node: &SceneNode, corner: Corner) -> (f64, f64) {
    let inset = 4.0;
    let (dx, dy) = (node.half_width - inset, node.half_height - inset);
    match corner {
        Corner::TopLeft => (node.x - dx, node.y - dy),
        Corner::TopRight => (node.x + dx, node.y - dy),
        Corner::BottomLeft => (node.x - dx, node.y + dy),
        Corner::BottomRight => (node.x + dx, node.y + dy),
    }
}

fn glyph_text(out: &mut String, class: &str, (x, y): (f64, f64), size: u32, color: &str, glyph: &str) {
    let _ = writeln!(
        out,
        "      <text class=\"{class}\" x=\"{}\" y=\"{}\" font-size=\"{size}\" font-weight=\"bold\" fill=\"{}\" text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>",
        num(x),
        num(y),
        esc(color),
        esc(glyph)
    );
}

fn badges(out: &mut String, node: &SceneNode, items: &[Badge]) {
    // stack badges sharing a corner towards the node's center
    let mut used: Vec<Corner> = Vec::new();
    for b in items {
        let nth = used.iter().filter(|c| **c == b.corner).count() as f64;
        used.push(b.corner);
        let (x, y) = corner_position(node, b.corner);
        let toward = if x > node.x { -1.0 } else { 1.0 };
        glyph_text(out, "badge", (x + toward * nth * MARKER_SPACING, y), BADGE_SIZE, &b.color, &b.glyph);
    }
}

/// Emits a standalone SVG 1.1 document. Nodes come first, sorted by name,
/// then edges, sorted by name. Identical scenes give identical bytes.
pub fn render_svg(scene: &Scene) -> String {
    let mut nodes: Vec<&SceneNode> = scene.nodes.iter().collect();
    nodes.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));
    let mut edges: Vec<_> = scene.edges.iter().collect();
    edges.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let (w, h) = (num(scene.width), num(scene.height));
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );

    let strokes: BTreeSet<&str> = edges.iter().map(|e| e.stroke.as_str()).collect();
    if !strokes.is_empty() {
        out.push_str("  <defs>\n");
        for s in strokes {
            let _ = writeln!(
                out,
                "    <marker id=\"{}\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"8\" markerHeight=\"8\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"{}\"/></marker>",
                arrow_id(s),
                esc(s)
            );
        }
        out.push_str("  </defs>\n");
    }

    out.push_str("  <g id=\"diagram\">\n");
    for n in nodes {
        let _ = writeln!(out, "    <g class=\"node\" data-kind=\"{}\" data-name=\"{}\">", esc(&n.kind), esc(&n.name));
        let fill = esc(&n.fill);
        let _ = match n.shape {
            ShapeKind::Circle => writeln!(
                out,
                "      <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"2\"/>",
                num(n.x),
                num(n.y),
                num(n.half_width)
            ),
            ShapeKind::Oval => writeln!(
                out,
                "      <ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"2\"/>",
                num(n.x),
                num(n.y),
                num(n.half_width),
                num(n.half_height)
            ),
            ShapeKind::Rectangle => writeln!(
                out,
                "      <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"6\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"2\"/>",
                num(n.x - n.half_width),
                num(n.y - n.half_height),
                num(2.0 * n.half_width),
                num(2.0 * n.half_height)
            ),
        };
        let _ = writeln!(
            out,
            "      <text class=\"label\" x=\"{}\" y=\"{}\" font-size=\"{LABEL_SIZE}\" fill=\"black\" text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>",
            num(n.x),
            num(n.y),
            esc(&n.name)
        );
        if let Some(icon) = &n.icon {
            let pos = (n.x, n.y + n.half_height * 0.5);
            glyph_text(&mut out, "icon", pos, ICON_SIZE, &icon.color, &icon.glyph);
        }
        badges(&mut out, n, &n.badges);
        out.push_str("    </g>\n");
    }
    for e in edges {
        let [(x0, y0), (cx, cy), (x1, y1)] = e.path;
        let _ = writeln!(
            out,
            "    <g class=\"edge\" data-kind=\"{}\" data-name=\"{}\" data-source=\"{}\" data-target=\"{}\">",
            esc(&e.kind),
            esc(&e.name),
            esc(&e.source),
            esc(&e.target)
        );
        let _ = writeln!(
            out,
            "      <path d=\"M {} {} Q {} {} {} {}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" marker-end=\"url(#{})\"/>",
            num(x0),
            num(y0),
            num(cx),
            num(cy),
            num(x1),
            num(y1),
            esc(&e.stroke),
            arrow_id(&e.stroke)
        );
        let (mx, my) = e.midpoint();
        let _ = writeln!(
            out,
            "      <text class=\"label\" x=\"{}\" y=\"{}\" font-size=\"{LABEL_SIZE}\" fill=\"black\" text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>",
            num(mx),
            num(my - 10.0),
            esc(&e.name)
        );
        for (i, m) in e.markers.iter().enumerate() {
            let pos = (mx + MARKER_SPACING * (i as f64 + 1.0), my + 8.0);
            glyph_text(&mut out, "badge", pos, BADGE_SIZE, &m.color, &m.glyph);
        }
        out.push_str("    </g>\n");
    }
    out.push_str("  </g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_short_and_stable() {
        assert_eq!(num(80.0), "80");
        assert_eq!(num(12.345), "12.35");
        assert_eq!(num(-0.001), "0");
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn empty_scene_has_minimum_viewport() {
        let svg = render_svg(&Scene { width: 100.0, height: 100.0, nodes: vec![], edges: vec![] });
        assert!(svg.contains("viewBox=\"0 0 100 100\""));
        assert!(svg.contains("<g id=\"diagram\">\n  </g>"));
    }
}
