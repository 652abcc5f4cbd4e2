use serde::Serialize;

use crate::catalog::{compile_effect, Corner, Effect, FillRule, IconSource, Selector, ShapeKind};
use crate::meta::Role;
use crate::model::{Model, ModelElement};
use crate::registry::EffectiveBlock;
use crate::validate::Diagnostic;

use super::{Badge, Icon};

/// Colors handed out by the distinct-fill policy, in order.
pub const PALETTE: [&str; 8] =
    ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5"];

const ICON_GLYPHS: &[(&str, &str)] = &[
    ("check", "\u{2713}"),
    ("bars", "\u{2261}"),
    ("cross", "\u{2717}"),
    ("info", "i"),
    ("warning", "\u{26a0}"),
    ("star", "\u{2605}"),
    ("clock", "\u{23f1}"),
    ("bolt", "\u{26a1}"),
];

/// Text glyph for a named icon; unknown names render as `?`.
pub fn glyph_for_icon(name: &str) -> &'static str {
    ICON_GLYPHS.iter().find(|(n, _)| *n == name).map_or("?", |(_, g)| g)
}

/// A resolved value and the nuance that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sourced<T> {
    pub value: T,
    pub nuance: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodeStyle {
    pub kind: String,
    pub name: String,
    pub shape: Option<Sourced<ShapeKind>>,
    pub fill: Option<Sourced<String>>,
    /// At most one per corner.
    pub badges: Vec<Sourced<Badge>>,
    /// One per diagnostic marked on this element.
    pub markers: Vec<Sourced<Badge>>,
    pub icon: Option<Sourced<Icon>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EdgeStyle {
    pub kind: String,
    pub name: String,
    pub stroke: Option<Sourced<String>>,
    pub markers: Vec<Sourced<Badge>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StyleResolution {
    /// Model order.
    pub nodes: Vec<NodeStyle>,
    pub edges: Vec<EdgeStyle>,
}

impl StyleResolution {
    pub fn node(&self, kind: &str, name: &str) -> Option<&NodeStyle> {
        self.nodes.iter().find(|n| n.kind == kind && n.name == name)
    }

    pub fn edge(&self, kind: &str, name: &str) -> Option<&EdgeStyle> {
        self.edges.iter().find(|e| e.kind == kind && e.name == name)
    }
}

/// A candidate value for one property. Higher `rank` wins.
struct Candidate<T> {
    rank: (bool, u8, usize),
    value: T,
    nuance: String,
}

fn pick<T>(candidates: Vec<Candidate<T>>) -> Option<Sourced<T>> {
    candidates
        .into_iter()
        .max_by_key(|c| c.rank)
        .map(|c| Sourced { value: c.value, nuance: c.nuance })
}

/// Compiled styling effects in effective declaration order.
fn styling_effects(block: &EffectiveBlock) -> Vec<(usize, String, Effect)> {
    let mut out = Vec::new();
    for n in &block.nuances {
        for clause in &n.effects {
            if let Ok(effect) = compile_effect(clause.kind, &clause.params, Some(&block.elements)) {
                out.push((out.len(), n.id.clone(), effect));
            }
        }
    }
    out
}

/// Decides every node's and edge's visual properties. For each property
/// the most specific selector wins (name over attribute over kind), then
/// the later declaration; a fixed fill always beats the palette.
pub fn resolve_styles(model: &Model, block: &EffectiveBlock, diags: &[Diagnostic]) -> StyleResolution {
    let effects = styling_effects(block);
    let mut res = StyleResolution::default();

    for el in model.nodes() {
        let mut shapes = Vec::new();
        let mut fills = Vec::new();
        let mut icons = Vec::new();
        let mut badges: Vec<(Corner, Candidate<Badge>)> = Vec::new();
        for (order, nuance, effect) in &effects {
            let rank = |sel: &Selector| (false, sel.specificity(), *order);
            match effect {
                Effect::Shape { target, shape } if target.matches(el) => {
                    shapes.push(Candidate { rank: rank(target), value: *shape, nuance: nuance.clone() })
                }
                Effect::Fill { target, rule } if target.matches(el) => {
                    let (fixed, value) = match rule {
                        FillRule::Fixed(c) => (true, Some(c.clone())),
                        FillRule::Distinct => (false, None),
                    };
                    let (_, s, o) = rank(target);
                    fills.push(Candidate { rank: (fixed, s, o), value, nuance: nuance.clone() });
                }
                Effect::Badge { target, glyph, corner, color } if target.matches(el) => badges.push((
                    *corner,
                    Candidate {
                        rank: rank(target),
                        value: Badge { glyph: glyph.clone(), corner: *corner, color: color.clone() },
                        nuance: nuance.clone(),
                    },
                )),
                Effect::IconSlot { target, source, color } if target.matches(el) => {
                    let name = match source {
                        IconSource::Fixed(name) => Some(name.clone()),
                        IconSource::Attribute(attr) => el.attr_text(attr).filter(|v| !v.trim().is_empty()),
                    };
                    if let Some(name) = name {
                        let glyph = glyph_for_icon(&name).to_string();
                        icons.push(Candidate {
                            rank: rank(target),
                            value: Icon { name, glyph, color: color.clone() },
                            nuance: nuance.clone(),
                        });
                    }
                }
                _ => {}
            }
        }
        let mut corners: Vec<Corner> = badges.iter().map(|(c, _)| *c).collect();
        corners.sort();
        corners.dedup();
        let badges = corners
            .into_iter()
            .filter_map(|corner| {
                let at: Vec<Candidate<Badge>> = badges
                    .iter()
                    .filter(|(c, _)| *c == corner)
                    .map(|(_, b)| Candidate { rank: b.rank, value: b.value.clone(), nuance: b.nuance.clone() })
                    .collect();
                pick(at)
            })
            .collect();
        res.nodes.push(NodeStyle {
            kind: el.kind.clone(),
            name: el.name.clone(),
            shape: pick(shapes),
            // palette colors are filled in below, once all winners are known
            fill: pick(fills).map(|s| Sourced { value: s.value.unwrap_or_default(), nuance: s.nuance }),
            badges,
            markers: Vec::new(),
            icon: pick(icons),
        });
    }
    let mut next_color = 0;
    for style in &mut res.nodes {
        if let Some(fill) = style.fill.as_mut().filter(|f| f.value.is_empty()) {
            fill.value = PALETTE[next_color % PALETTE.len()].to_string();
            next_color += 1;
        }
    }

    for el in model.edges() {
        let mut strokes = Vec::new();
        for (order, nuance, effect) in &effects {
            if let Effect::EdgeStyle { target, stroke, missing } = effect {
                let applies = target.matches(el)
                    && missing.as_ref().is_none_or(|attr| el.attr_text(attr).is_none_or(|v| v.trim().is_empty()));
                if applies {
                    strokes.push(Candidate {
                        rank: (false, target.specificity(), *order),
                        value: stroke.clone(),
                        nuance: nuance.clone(),
                    });
                }
            }
        }
        res.edges.push(EdgeStyle {
            kind: el.kind.clone(),
            name: el.name.clone(),
            stroke: pick(strokes),
            markers: Vec::new(),
        });
    }

    attach_markers(model, &effects, diags, &mut res);
    res
}

/// Each marked diagnostic becomes one marker on its first target.
fn attach_markers(model: &Model, effects: &[(usize, String, Effect)], diags: &[Diagnostic], res: &mut StyleResolution) {
    for d in diags {
        let (Some(id), Some(target)) = (&d.nuance_marker, d.targets.first()) else { continue };
        let Some(marker) = effects.iter().find_map(|(_, n, e)| match e {
            Effect::ViolationMarker(m) if n == id => Some(m),
            _ => None,
        }) else {
            continue;
        };
        let kind = marker.check.subject_kind();
        let Some(el) = model.find(kind, target) else { continue };
        let badge = Sourced {
            value: Badge { glyph: marker.glyph.clone(), corner: marker.corner, color: marker.color.clone() },
            nuance: id.clone(),
        };
        match el.role {
            Role::Node => {
                if let Some(s) = find_node(res, el) {
                    s.markers.push(badge);
                }
            }
            Role::Edge => {
                if let Some(s) = res.edges.iter_mut().find(|s| s.kind == el.kind && s.name == el.name) {
                    s.markers.push(badge);
                }
            }
            Role::Datum => {}
        }
    }
}

fn find_node<'a>(res: &'a mut StyleResolution, el: &ModelElement) -> Option<&'a mut NodeStyle> {
    res.nodes.iter_mut().find(|s| s.kind == el.kind && s.name == el.name)
}
