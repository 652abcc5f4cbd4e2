//! Evaluates an effective block's constraints and violation markers
//! against a model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{compile_check, compile_effect, Check, Direction, Effect, Selector};
use crate::meta::{Role, Severity};
use crate::model::{bind, Model, ModelElement};
use crate::registry::EffectiveBlock;

/// Code of the single diagnostic reported when a model does not bind.
pub const BINDING_CODE: &str = "binding";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostic {
    /// Constraint id, nuance id for marker checks, or [`BINDING_CODE`].
    pub code: String,
    pub severity: Severity,
    pub targets: Vec<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nuance_marker: Option<String>,
}

impl Diagnostic {
    pub fn is_binding_failure(&self) -> bool {
        self.code == BINDING_CODE
    }
}

/// `<severity> <code> [<targets>] <message>`
impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} [{}] {}", self.severity, self.code, self.targets.join(", "), self.message)
    }
}

/// Diagnostics as text, one line each.
pub fn format_lines(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{d}\n")).collect()
}

/// True when some diagnostic is at `threshold` severity or above.
pub fn any_at_least(diags: &[Diagnostic], threshold: Severity) -> bool {
    diags.iter().any(|d| d.severity >= threshold)
}

/// One violation found by a check, before message rendering.
#[derive(Debug, Clone, PartialEq)]
struct Finding {
    targets: Vec<String>,
    count: usize,
}

impl Finding {
    fn one(name: &str) -> Self {
        Finding { targets: vec![name.to_string()], count: 1 }
    }
}

/// All diagnostics for `model` under `block`, ordered by code, then by first
/// target. A model that does not bind yields exactly one diagnostic.
pub fn validate(model: &Model, block: &EffectiveBlock) -> Vec<Diagnostic> {
    if let Err(e) = bind(model, block) {
        let targets = if model.has_element_named(e.element()) { vec![e.element().to_string()] } else { vec![] };
        return vec![Diagnostic {
            code: BINDING_CODE.to_string(),
            severity: Severity::Error,
            targets,
            message: e.to_string(),
            nuance_marker: None,
        }];
    }

    let mut diags = Vec::new();
    for c in &block.constraints {
        for clause in &c.clauses {
            match compile_check(clause.kind, &clause.params, Some(&block.elements)) {
                Ok(check) => diags.extend(evaluate(&check, model).into_iter().map(|f| Diagnostic {
                    code: c.id.clone(),
                    severity: c.severity,
                    message: render_message(&c.message, &f),
                    targets: f.targets,
                    nuance_marker: None,
                })),
                Err(errs) => diags.push(unevaluable(&c.id, &errs)),
            }
        }
    }
    for n in &block.nuances {
        for clause in &n.effects {
            if clause.kind != crate::meta::NuanceEffect::ViolationMarker {
                continue;
            }
            match compile_effect(clause.kind, &clause.params, Some(&block.elements)) {
                Ok(Effect::ViolationMarker(m)) => diags.extend(evaluate(&m.check, model).into_iter().map(|f| {
                    Diagnostic {
                        code: n.id.clone(),
                        severity: m.severity,
                        message: render_message(&m.message, &f),
                        targets: f.targets,
                        nuance_marker: Some(n.id.clone()),
                    }
                })),
                Ok(_) => {}
                Err(errs) => diags.push(unevaluable(&n.id, &errs)),
            }
        }
    }
    diags.sort_by(|a, b| (&a.code, a.targets.first()).cmp(&(&b.code, b.targets.first())));
    diags
}

fn unevaluable(code: &str, errs: &[String]) -> Diagnostic {
    Diagnostic {
        code: code.to_string(),
        severity: Severity::Error,
        targets: vec![],
        message: format!("cannot be evaluated: {}", errs.join("; ")),
        nuance_marker: None,
    }
}

/// Fills `{element}`, `{elements}` and `{count}`.
fn render_message(template: &str, f: &Finding) -> String {
    template
        .replace("{elements}", &f.targets.join(", "))
        .replace("{element}", f.targets.first().map_or("", String::as_str))
        .replace("{count}", &f.count.to_string())
}

/// The diagnostic's message, followed by the reason of the nuance that
/// marks it, if any.
pub fn explain(diag: &Diagnostic, block: &EffectiveBlock) -> String {
    match diag.nuance_marker.as_deref().and_then(|id| block.nuance(id)) {
        Some(n) => format!("{}\nReason ({}): {}", diag.message, n.id, n.reason),
        None => diag.message.clone(),
    }
}

fn edges_via<'a>(model: &'a Model, via: Option<&'a str>) -> impl Iterator<Item = &'a ModelElement> + 'a {
    model.edges().filter(move |e| via.is_none_or(|v| e.kind == v))
}

/// Names of nodes reachable from the nodes matching `roots` along directed
/// edges (of kind `via`, when given), roots included.
pub fn reachable_set(model: &Model, roots: &Selector, via: Option<&str>) -> BTreeSet<String> {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges_via(model, via) {
        adjacency.entry(e.source()).or_default().push(e.target());
    }
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut queue: VecDeque<&str> = VecDeque::new();
    for root in model.nodes().filter(|n| roots.matches(n)) {
        if seen.insert(root.name.clone()) {
            queue.push_back(&root.name);
        }
    }
    while let Some(current) = queue.pop_front() {
        for next in adjacency.get(current).into_iter().flatten() {
            if seen.insert(next.to_string()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

fn evaluate(check: &Check, model: &Model) -> Vec<Finding> {
    match check {
        Check::Reachability { nodes, via } => {
            let reached = reachable_set(model, nodes, via.as_deref());
            model
                .of_kind(&nodes.kind)
                .filter(|n| n.role == Role::Node && !reached.contains(&n.name))
                .map(|n| Finding::one(&n.name))
                .collect()
        }
        Check::NoParallelEdges { kind } => {
            let mut groups: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
            let mut order = Vec::new();
            for e in model.of_kind(kind).filter(|e| e.role == Role::Edge) {
                let key = (e.source(), e.target());
                let group = groups.entry(key).or_default();
                if group.is_empty() {
                    order.push(key);
                }
                group.push(e.name.clone());
            }
            order
                .into_iter()
                .filter_map(|k| groups.remove(&k))
                .filter(|g| g.len() > 1)
                .map(|g| Finding { count: g.len(), targets: g })
                .collect()
        }
        Check::DegreeBound { nodes, direction, min, max, counterpart, via } => {
            let mut out = Vec::new();
            for node in model.nodes().filter(|n| nodes.matches(n)) {
                let incident: Vec<(&ModelElement, &str)> = edges_via(model, via.as_deref())
                    .filter_map(|e| match direction {
                        Direction::In if e.target() == node.name => Some((e, e.source())),
                        Direction::Out if e.source() == node.name => Some((e, e.target())),
                        _ => None,
                    })
                    .collect();
                let n = incident.len() as u64;
                let offending: Vec<&ModelElement> = if n < *min || max.is_some_and(|m| n > m) {
                    incident.iter().map(|(e, _)| *e).collect()
                } else if let (Some(value), Some((attr, _))) = (counterpart, &nodes.filter) {
                    incident
                        .iter()
                        .filter(|(_, other)| {
                            model
                                .find(&nodes.kind, other)
                                .and_then(|o| o.attr_text(attr))
                                .is_none_or(|v| v != *value)
                        })
                        .map(|(e, _)| *e)
                        .collect()
                } else {
                    Vec::new()
                };
                let below_min = n < *min;
                if below_min || !offending.is_empty() {
                    let mut targets = vec![node.name.clone()];
                    targets.extend(offending.iter().map(|e| e.name.clone()));
                    let count = if below_min { incident.len() } else { offending.len() };
                    out.push(Finding { targets, count });
                }
            }
            out
        }
        Check::EdgeAttributeRequired { kind, attr } => model
            .of_kind(kind)
            .filter(|e| e.attr_text(attr).is_none_or(|v| v.trim().is_empty()))
            .map(|e| Finding::one(&e.name))
            .collect(),
        Check::DurationWellFormed { kind, attr, pattern } => model
            .of_kind(kind)
            .filter(|e| e.attr_text(attr).and_then(|t| pattern.seconds(&t)).is_none())
            .map(|e| Finding::one(&e.name))
            .collect(),
        Check::ForbidElementValue { kind, attr, value } => model
            .of_kind(kind)
            .filter(|e| e.attr_text(attr).as_deref() == Some(value.as_str()))
            .map(|e| Finding::one(&e.name))
            .collect(),
        Check::NoIsolatedNodes { kind, via } => {
            let mut touched: BTreeSet<&str> = BTreeSet::new();
            for e in edges_via(model, via.as_deref()) {
                touched.insert(e.source());
                touched.insert(e.target());
            }
            model
                .of_kind(kind)
                .filter(|n| n.role == Role::Node && !touched.contains(n.name.as_str()))
                .map(|n| Finding::one(&n.name))
                .collect()
        }
    }
}
