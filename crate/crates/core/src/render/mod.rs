//! Diagram rendering: layout, nuance styling and SVG emission.
//!
//! The pipeline is `layout` (geometry with default styles), then
//! `resolve_styles` (which nuance sets which property), then
//! [`Scene::styled`], then `render_svg`. [`render_model`] runs all of it.

mod layout;
mod style;
mod svg;

use serde::Serialize;

use crate::catalog::{Corner, ShapeKind};
use crate::model::{bind, BindError, Model};
use crate::registry::EffectiveBlock;
use crate::validate::validate;

pub use layout::layout;
pub use style::{glyph_for_icon, resolve_styles, EdgeStyle, NodeStyle, Sourced, StyleResolution, PALETTE};
pub use svg::render_svg;

pub const NODE_RADIUS: f64 = 40.0;
pub const LAYER_GAP: f64 = 60.0;
pub const PADDING: f64 = 40.0;
pub const MIN_VIEWPORT: f64 = 100.0;

pub const DEFAULT_FILL: &str = "white";
pub const DEFAULT_STROKE: &str = "black";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Badge {
    pub glyph: String,
    pub corner: Corner,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Icon {
    pub name: String,
    pub glyph: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneNode {
    pub kind: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub half_width: f64,
    pub half_height: f64,
    pub shape: ShapeKind,
    pub fill: String,
    pub badges: Vec<Badge>,
    pub icon: Option<Icon>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneEdge {
    pub kind: String,
    pub name: String,
    pub source: String,
    pub target: String,
    /// Start, control and end point of a quadratic curve.
    pub path: [(f64, f64); 3],
    pub stroke: String,
    /// Drawn at the middle of the curve.
    pub markers: Vec<Badge>,
}

impl SceneEdge {
    pub fn midpoint(&self) -> (f64, f64) {
        let [(x0, y0), (cx, cy), (x1, y1)] = self.path;
        (0.25 * x0 + 0.5 * cx + 0.25 * x1, 0.25 * y0 + 0.5 * cy + 0.25 * y1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub width: f64,
    pub height: f64,
    pub nodes: Vec<SceneNode>,
    pub edges: Vec<SceneEdge>,
}

impl Scene {
    /// Applies resolved styles; elements without an entry keep defaults.
    pub fn styled(mut self, styles: &StyleResolution) -> Scene {
        for node in &mut self.nodes {
            let Some(s) = styles.node(&node.kind, &node.name) else { continue };
            if let Some(shape) = &s.shape {
                node.shape = shape.value;
                (node.half_width, node.half_height) = shape_extents(shape.value);
            }
            if let Some(fill) = &s.fill {
                node.fill = fill.value.clone();
            }
            node.badges = s.badges.iter().map(|b| b.value.clone()).collect();
            node.badges.extend(s.markers.iter().map(|m| m.value.clone()));
            node.icon = s.icon.as_ref().map(|i| i.value.clone());
        }
        for edge in &mut self.edges {
            let Some(s) = styles.edge(&edge.kind, &edge.name) else { continue };
            if let Some(stroke) = &s.stroke {
                edge.stroke = stroke.value.clone();
            }
            edge.markers = s.markers.iter().map(|m| m.value.clone()).collect();
        }
        self
    }
}

/// Half width and height of a node shape.
pub fn shape_extents(shape: ShapeKind) -> (f64, f64) {
    match shape {
        ShapeKind::Circle => (NODE_RADIUS, NODE_RADIUS),
        ShapeKind::Oval => (NODE_RADIUS, NODE_RADIUS * 0.75),
        ShapeKind::Rectangle => (NODE_RADIUS, NODE_RADIUS * 0.75),
    }
}

/// Validates, lays out, styles and renders `model`.
pub fn render_model(model: &Model, block: &EffectiveBlock) -> Result<String, BindError> {
    bind(model, block)?;
    let diags = validate(model, block);
    let styles = resolve_styles(model, block, &diags);
    Ok(render_svg(&layout(model, block)?.styled(&styles)))
}
