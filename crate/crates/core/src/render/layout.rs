use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::catalog::{compile_check, compile_effect, Check, Effect, Selector, ShapeKind};
use crate::model::{bind, BindError, Model, ModelElement};
use crate::registry::EffectiveBlock;

use super::{
    shape_extents, Scene, SceneEdge, SceneNode, DEFAULT_FILL, DEFAULT_STROKE, LAYER_GAP, MIN_VIEWPORT,
    NODE_RADIUS, PADDING,
};

const STEP: f64 = 2.0 * NODE_RADIUS + LAYER_GAP;
const MIN_BOW: f64 = 20.0;
const BOW_FACTOR: f64 = 0.25;

/// The last layout-order effect in the block, if any.
fn layout_order(block: &EffectiveBlock) -> Option<(String, Vec<String>)> {
    block
        .nuances
        .iter()
        .flat_map(|n| &n.effects)
        .filter_map(|c| match compile_effect(c.kind, &c.params, Some(&block.elements)) {
            Ok(Effect::LayoutOrder { kind, order }) => Some((kind, order)),
            _ => None,
        })
        .last()
}

/// Root selector and edge kind of the block's first reachability clause.
fn reachability_roots(block: &EffectiveBlock) -> Option<(Selector, Option<String>)> {
    block.constraints.iter().flat_map(|c| &c.clauses).find_map(|c| {
        match compile_check(c.kind, &c.params, Some(&block.elements)) {
            Ok(Check::Reachability { nodes, via }) => Some((nodes, via)),
            _ => None,
        }
    })
}

/// Places nodes on a grid of columns and routes edges as quadratic curves.
///
/// Nodes named by a layout-order nuance fill column 0 top to bottom in that
/// order. The rest are layered by breadth-first rank from the roots of the
/// first reachability constraint (or from nodes without incoming edges),
/// one column per rank, sorted by name within a column. Nodes never
/// reached form a last column.
pub fn layout(model: &Model, block: &EffectiveBlock) -> Result<Scene, BindError> {
    bind(model, block)?;
    let nodes: Vec<&ModelElement> = model.nodes().collect();

    let mut cells: BTreeMap<(usize, usize), &ModelElement> = BTreeMap::new();
    let mut placed: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut first_free_column = 0;
    if let Some((kind, order)) = layout_order(block) {
        let mut row = 0;
        for name in &order {
            if let Some(n) = nodes.iter().find(|n| n.kind == kind && n.name == *name) {
                cells.insert((0, row), n);
                placed.insert((&n.kind, &n.name));
                row += 1;
            }
        }
        if row > 0 {
            first_free_column = 1;
        }
    }

    let rest: Vec<&ModelElement> =
        nodes.iter().copied().filter(|n| !placed.contains(&(n.kind.as_str(), n.name.as_str()))).collect();
    let ranks = rank_nodes(model, block, &rest);
    let mut columns: BTreeMap<usize, Vec<&ModelElement>> = BTreeMap::new();
    for n in &rest {
        columns.entry(ranks[&(n.kind.as_str(), n.name.as_str())]).or_default().push(n);
    }
    for (offset, (_, mut members)) in columns.into_iter().enumerate() {
        members.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));
        for (row, n) in members.into_iter().enumerate() {
            cells.insert((first_free_column + offset, row), n);
        }
    }

    let (default_hw, default_hh) = shape_extents(ShapeKind::Rectangle);
    let mut scene_nodes: Vec<SceneNode> = cells
        .iter()
        .map(|(&(col, row), n)| SceneNode {
            kind: n.kind.clone(),
            name: n.name.clone(),
            x: col as f64 * STEP,
            y: row as f64 * STEP,
            half_width: default_hw,
            half_height: default_hh,
            shape: ShapeKind::Rectangle,
            fill: DEFAULT_FILL.to_string(),
            badges: Vec::new(),
            icon: None,
        })
        .collect();
    scene_nodes.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));

    let mut scene_edges = route_edges(model, block, &scene_nodes);
    scene_edges.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));

    Ok(fit_viewport(Scene { width: 0.0, height: 0.0, nodes: scene_nodes, edges: scene_edges }))
}

fn rank_nodes<'a>(
    model: &'a Model,
    block: &EffectiveBlock,
    nodes: &[&'a ModelElement],
) -> BTreeMap<(&'a str, &'a str), usize> {
    let key = |n: &'a ModelElement| (n.kind.as_str(), n.name.as_str());
    let roots_sel = reachability_roots(block);
    let via = roots_sel.as_ref().and_then(|(_, v)| v.clone());
    let edges: Vec<&ModelElement> = model.edges().filter(|e| via.as_ref().is_none_or(|v| e.kind == *v)).collect();

    let mut roots: Vec<&ModelElement> = match &roots_sel {
        Some((sel, _)) => nodes.iter().copied().filter(|n| sel.matches(n)).collect(),
        None => Vec::new(),
    };
    if roots.is_empty() {
        roots = nodes.iter().copied().filter(|n| !edges.iter().any(|e| e.target() == n.name)).collect();
    }
    if roots.is_empty() {
        roots = nodes.iter().copied().min_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind))).into_iter().collect();
    }

    let mut ranks = BTreeMap::new();
    let mut queue = VecDeque::new();
    for r in roots {
        ranks.insert(key(r), 0);
        queue.push_back(r);
    }
    while let Some(current) = queue.pop_front() {
        let rank = ranks[&key(current)];
        let mut next: Vec<&ModelElement> =
            edges
            .iter()
            .filter(|e| e.source() == current.name)
            .flat_map(|e| nodes.iter().copied().filter(move |n| n.name == e.target()))
            .collect();
        next.sort_by(|a, b| (&a.name, &a.kind).cmp(&(&b.name, &b.kind)));
        for n in next {
            if !ranks.contains_key(&key(n)) {
                ranks.insert(key(n), rank + 1);
                queue.push_back(n);
            }
        }
    }
    let unreached = ranks.values().max().map_or(0, |m| m + 1);
    for n in nodes {
        ranks.entry(key(n)).or_insert(unreached);
    }
    ranks
}

fn route_edges(model: &Model, block: &EffectiveBlock, nodes: &[SceneNode]) -> Vec<SceneEdge> {
    let mut seen_pairs: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut out = Vec::new();
    for e in model.edges() {
        let Some(ep) = block.kind(&e.kind).and_then(|k| k.endpoints.as_ref()) else { continue };
        let find = |kind: &str, name: &str| nodes.iter().find(|n| n.kind == kind && n.name == name);
        let (Some(s), Some(t)) = (find(&ep.source, e.source()), find(&ep.target, e.target())) else { continue };
        let nth = seen_pairs.entry((e.source().to_string(), e.target().to_string())).or_insert(0);
        *nth += 1;
        let path = if s.name == t.name && s.kind == t.kind {
            self_loop(s.x, s.y, *nth as f64)
        } else {
            curve((s.x, s.y), (t.x, t.y), *nth as f64)
        };
        out.push(SceneEdge {
            kind: e.kind.clone(),
            name: e.name.clone(),
            source: e.source().to_string(),
            target: e.target().to_string(),
            path,
            stroke: DEFAULT_STROKE.to_string(),
            markers: Vec::new(),
        });
    }
    out
}

/// A curve between two node centers, trimmed at the node footprints. It
/// bows to the left of its direction, so an edge and its reverse separate;
/// repeated edges between the same pair bow further out.
fn curve(p: (f64, f64), q: (f64, f64), nth: f64) -> [(f64, f64); 3] {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let dist = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = (dx / dist, dy / dist);
    let (nx, ny) = (uy, -ux);
    let bow = (BOW_FACTOR * dist).max(MIN_BOW) * nth;
    let (mx, my) = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
    let control = (mx + nx * bow, my + ny * bow);
    let trim = |from: (f64, f64)| {
        let (vx, vy) = (control.0 - from.0, control.1 - from.1);
        let len = (vx * vx + vy * vy).sqrt();
        (from.0 + vx / len * NODE_RADIUS, from.1 + vy / len * NODE_RADIUS)
    };
    [trim(p), control, trim(q)]
}

fn self_loop(x: f64, y: f64, nth: f64) -> [(f64, f64); 3] {
    let dx = NODE_RADIUS * 0.5;
    let dy = NODE_RADIUS * 0.866;
    [(x - dx, y - dy), (x, y - NODE_RADIUS * (1.5 + nth)), (x + dx, y - dy)]
}

/// Shifts everything so the drawing starts at the padding and sizes the
/// viewport to fit, never below the minimum; small drawings are centered.
fn fit_viewport(mut scene: Scene) -> Scene {
    let mut points: Vec<(f64, f64)> = Vec::new();
    for n in &scene.nodes {
        points.push((n.x - NODE_RADIUS, n.y - NODE_RADIUS));
        points.push((n.x + NODE_RADIUS, n.y + NODE_RADIUS));
    }
    for e in &scene.edges {
        points.extend(e.path);
    }
    if points.is_empty() {
        scene.width = MIN_VIEWPORT;
        scene.height = MIN_VIEWPORT;
        return scene;
    }
    let min_x = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let width = (max_x - min_x + 2.0 * PADDING).max(MIN_VIEWPORT);
    let height = (max_y - min_y + 2.0 * PADDING).max(MIN_VIEWPORT);
    let shift_x = (width - (max_x - min_x)) / 2.0 - min_x;
    let shift_y = (height - (max_y - min_y)) / 2.0 - min_y;
    for n in &mut scene.nodes {
        n.x += shift_x;
        n.y += shift_y;
    }
    for e in &mut scene.edges {
        for p in &mut e.path {
            p.0 += shift_x;
            p.1 += shift_y;
        }
    }
    scene.width = width;
    scene.height = height;
    scene
}
