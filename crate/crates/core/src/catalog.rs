//! Typed forms of the constraint, nuance and predicate catalogs.
//!
//! Blocks store catalog clauses as keyword + parameter map. Compiling a
//! clause checks that its parameters are complete and, when element kinds
//! are supplied, that every kind and attribute it names is declared. The
//! block checker and every evaluator share these compilers, so a block that
//! passes the checker always compiles downstream.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::meta::{
    ConstraintKind, ElementKind, Literal, NuanceEffect, Params, PredicateKind, Role, Severity,
    ValueType, IMPLICIT_NAME,
};
use crate::model::ModelElement;

/// Kind plus an optional `attr = value` filter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selector {
    pub kind: String,
    pub filter: Option<(String, String)>,
}

impl Selector {
    pub fn kind(kind: impl Into<String>) -> Self {
        Selector { kind: kind.into(), filter: None }
    }

    pub fn with(kind: impl Into<String>, attr: impl Into<String>, value: impl Into<String>) -> Self {
        Selector { kind: kind.into(), filter: Some((attr.into(), value.into())) }
    }

    pub fn matches(&self, el: &ModelElement) -> bool {
        el.kind == self.kind
            && match &self.filter {
                None => true,
                Some((attr, value)) => el.attr_text(attr).as_deref() == Some(value.as_str()),
            }
    }

    /// Name filters beat attribute filters beat kind-wide selectors.
    pub fn specificity(&self) -> u8 {
        match &self.filter {
            None => 0,
            Some((attr, _)) if attr == IMPLICIT_NAME => 2,
            Some(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

/// A duration template such as `Wait {seconds} seconds`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DurationPattern {
    prefix: String,
    suffix: String,
}

pub const SECONDS_PLACEHOLDER: &str = "{seconds}";

impl DurationPattern {
    pub fn new(template: &str) -> Result<Self, String> {
        match template.split_once(SECONDS_PLACEHOLDER) {
            Some((prefix, suffix)) if !suffix.contains(SECONDS_PLACEHOLDER) => Ok(DurationPattern {
                prefix: normalize_ws(prefix),
                suffix: normalize_ws(suffix),
            }),
            _ => Err(format!("pattern must contain {SECONDS_PLACEHOLDER} exactly once")),
        }
    }

    /// Extracts the positive number of seconds, if `text` fits the pattern.
    /// Whitespace is collapsed and letters compared case-insensitively.
    pub fn seconds(&self, text: &str) -> Option<f64> {
        let text = normalize_ws(text);
        let lower = text.to_lowercase();
        let rest = lower.strip_prefix(&self.prefix.to_lowercase())?;
        let number = rest.strip_suffix(&self.suffix.to_lowercase())?.trim();
        let value: f64 = number.parse().ok()?;
        (value.is_finite() && value > 0.0).then_some(value)
    }
}

fn normalize_ws(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    // keep one boundary space so "Wait {seconds}" still needs a separator
    let lead = if s.starts_with(char::is_whitespace) && !collapsed.is_empty() { " " } else { "" };
    let trail = if s.ends_with(char::is_whitespace) && !collapsed.is_empty() { " " } else { "" };
    format!("{lead}{collapsed}{trail}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// Every node of `nodes.kind` not matched by the root filter must be
    /// reachable from a root.
    Reachability { nodes: Selector, via: Option<String> },
    NoParallelEdges { kind: String },
    DegreeBound {
        nodes: Selector,
        direction: Direction,
        min: u64,
        max: Option<u64>,
        /// Incident edges must come from (or go to) nodes whose filter
        /// attribute has this value.
        counterpart: Option<String>,
        via: Option<String>,
    },
    EdgeAttributeRequired { kind: String, attr: String },
    DurationWellFormed { kind: String, attr: String, pattern: DurationPattern },
    ForbidElementValue { kind: String, attr: String, value: String },
    NoIsolatedNodes { kind: String, via: Option<String> },
}

impl Check {
    /// The element kind whose elements this check reports.
    pub fn subject_kind(&self) -> &str {
        match self {
            Check::Reachability { nodes, .. } | Check::DegreeBound { nodes, .. } => &nodes.kind,
            Check::NoParallelEdges { kind }
            | Check::EdgeAttributeRequired { kind, .. }
            | Check::DurationWellFormed { kind, .. }
            | Check::ForbidElementValue { kind, .. }
            | Check::NoIsolatedNodes { kind, .. } => kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub fn from_keyword(s: &str) -> Option<Corner> {
        match s {
            "top-left" => Some(Corner::TopLeft),
            "top-right" => Some(Corner::TopRight),
            "bottom-left" => Some(Corner::BottomLeft),
            "bottom-right" => Some(Corner::BottomRight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circle,
    Oval,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FillRule {
    Fixed(String),
    /// Palette colors in declaration order.
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum IconSource {
    Fixed(String),
    Attribute(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub check: Check,
    pub severity: Severity,
    pub message: String,
    pub glyph: String,
    pub corner: Corner,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Effect {
    AutoCreate { kind: String, name: String, attrs: Vec<(String, Literal)> },
    Shape { target: Selector, shape: ShapeKind },
    Fill { target: Selector, rule: FillRule },
    Badge { target: Selector, glyph: String, corner: Corner, color: String },
    ViolationMarker(Marker),
    EdgeStyle { target: Selector, stroke: String, missing: Option<String> },
    IconSlot { target: Selector, source: IconSource, color: String },
    LayoutOrder { kind: String, order: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Predicate {
    ElementCountAtLeast { kind: String, n: u64 },
    AllOfKindHaveAttribute { kind: String, attr: String },
    ModelValid { threshold: Severity },
    ManualConfirm,
}

/// Parameter reader that records every problem instead of stopping at the
/// first, and flags parameters nobody asked for.
struct Reader<'a> {
    params: &'a Params,
    kinds: Option<&'a [ElementKind]>,
    used: BTreeSet<&'a str>,
    issues: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(params: &'a Params, kinds: Option<&'a [ElementKind]>) -> Self {
        Reader { params, kinds, used: BTreeSet::new(), issues: Vec::new() }
    }

    fn optional(&mut self, key: &str) -> Option<String> {
        let (k, v) = self.params.0.iter().find(|(k, _)| k == key)?;
        self.used.insert(k.as_str());
        Some(v.as_text())
    }

    fn required(&mut self, key: &str) -> String {
        self.optional(key).unwrap_or_else(|| {
            self.issues.push(format!("missing parameter '{key}'"));
            String::new()
        })
    }

    fn number(&mut self, key: &str) -> Option<u64> {
        let raw = self.optional(key)?;
        match raw.parse::<u64>() {
            Ok(n) => Some(n),
            Err(_) => {
                self.issues.push(format!("parameter '{key}' must be a non-negative integer, got '{raw}'"));
                None
            }
        }
    }

    fn lookup(&self, kind: &str) -> Option<&'a ElementKind> {
        self.kinds?.iter().find(|k| k.name == kind)
    }

    /// Verifies `kind` exists with one of `roles`.
    fn kind_ref(&mut self, kind: &str, roles: &[Role]) {
        if kind.is_empty() || self.kinds.is_none() {
            return;
        }
        match self.lookup(kind) {
            None => self.issues.push(format!("unknown element kind '{kind}'")),
            Some(k) if !roles.contains(&k.role) => {
                let want: Vec<&str> = roles.iter().map(|r| r.keyword()).collect();
                self.issues.push(format!("'{kind}' is a {} kind, expected {}", k.role, want.join(" or ")))
            }
            _ => {}
        }
    }

    fn attr_ref(&mut self, kind: &str, attr: &str) {
        if attr.is_empty() {
            return;
        }
        if let Some(k) = self.lookup(kind) {
            if !k.has_attribute(attr) {
                self.issues.push(format!("kind '{kind}' has no attribute '{attr}'"));
            }
        }
    }

    /// An enum-typed attribute compared against `value` must list it.
    fn value_ref(&mut self, kind: &str, attr: &str, value: &str) {
        if let Some(ValueType::Enum { values }) =
            self.lookup(kind).and_then(|k| k.attribute(attr)).map(|a| &a.value_type)
        {
            if !values.iter().any(|v| v == value) {
                self.issues.push(format!("'{value}' is not a value of {kind}.{attr}"));
            }
        }
    }

    /// `kind=` plus either `name=` or an `attr=`/`value=` pair.
    fn selector(&mut self, roles: &[Role]) -> Selector {
        let kind = self.required("kind");
        self.kind_ref(&kind, roles);
        let name = self.optional("name");
        let attr = self.optional("attr");
        let value = self.optional("value");
        let filter = match (name, attr, value) {
            (Some(n), None, None) => Some((IMPLICIT_NAME.to_string(), n)),
            (None, Some(a), Some(v)) => {
                self.attr_ref(&kind, &a);
                self.value_ref(&kind, &a, &v);
                Some((a, v))
            }
            (None, None, None) => None,
            (Some(_), _, _) => {
                self.issues.push("use either 'name' or 'attr'/'value', not both".to_string());
                None
            }
            (None, Some(_), None) => {
                self.issues.push("'attr' needs a matching 'value'".to_string());
                None
            }
            (None, None, Some(_)) => {
                self.issues.push("'value' needs a matching 'attr'".to_string());
                None
            }
        };
        Selector { kind, filter }
    }

    fn via(&mut self) -> Option<String> {
        let via = self.optional("via");
        if let Some(v) = &via {
            self.kind_ref(v, &[Role::Edge]);
        }
        via
    }

    fn finish<T>(mut self, value: T, extra_allowed: &[&str]) -> Result<T, Vec<String>> {
        for key in self.params.keys() {
            if !self.used.contains(key) && !extra_allowed.contains(&key) {
                self.issues.push(format!("unknown parameter '{key}'"));
            }
        }
        if self.issues.is_empty() {
            Ok(value)
        } else {
            Err(self.issues)
        }
    }
}

pub fn compile_check(
    kind: ConstraintKind,
    params: &Params,
    kinds: Option<&[ElementKind]>,
) -> Result<Check, Vec<String>> {
    let mut r = Reader::new(params, kinds);
    let check = read_check(&mut r, kind);
    r.finish(check, &[])
}

fn read_check(r: &mut Reader, kind: ConstraintKind) -> Check {
    match kind {
        ConstraintKind::Reachability => {
            let nodes = r.selector(&[Role::Node]);
            if nodes.filter.is_none() && !r.issues.iter().any(|i| i.contains("'kind'")) {
                r.issues.push("reachability needs a root filter ('name' or 'attr'/'value')".to_string());
            }
            Check::Reachability { nodes, via: r.via() }
        }
        ConstraintKind::NoParallelEdges => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Edge]);
            Check::NoParallelEdges { kind }
        }
        ConstraintKind::DegreeBound => {
            let nodes = r.selector(&[Role::Node]);
            let direction = match r.required("direction").as_str() {
                "in" => Direction::In,
                "out" => Direction::Out,
                "" => Direction::In,
                other => {
                    r.issues.push(format!("direction must be 'in' or 'out', got '{other}'"));
                    Direction::In
                }
            };
            let min = r.number("min");
            if min.is_none() && r.optional("min").is_none() {
                r.issues.push("missing parameter 'min'".to_string());
            }
            let max = r.number("max");
            if max.is_none() && r.optional("max").is_none() {
                r.issues.push("missing parameter 'max'".to_string());
            }
            let min = min.unwrap_or(0);
            if let Some(m) = max {
                if m < min {
                    r.issues.push(format!("max {m} is below min {min}"));
                }
            }
            let counterpart = r.optional("counterpart");
            if let Some(c) = &counterpart {
                match &nodes.filter {
                    Some((attr, _)) if attr != IMPLICIT_NAME => {
                        let (kind, attr) = (nodes.kind.clone(), attr.clone());
                        r.value_ref(&kind, &attr, c);
                    }
                    _ => r.issues.push("'counterpart' needs an 'attr'/'value' filter".to_string()),
                }
            }
            Check::DegreeBound { nodes, direction, min, max, counterpart, via: r.via() }
        }
        ConstraintKind::EdgeAttributeRequired => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Edge]);
            let attr = r.required("attr");
            r.attr_ref(&kind, &attr);
            Check::EdgeAttributeRequired { kind, attr }
        }
        ConstraintKind::DurationWellFormed => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node, Role::Edge, Role::Datum]);
            let attr = r.required("attr");
            r.attr_ref(&kind, &attr);
            let template = r.required("pattern");
            let pattern = DurationPattern::new(&template).unwrap_or_else(|e| {
                if !template.is_empty() {
                    r.issues.push(e);
                }
                DurationPattern { prefix: String::new(), suffix: String::new() }
            });
            Check::DurationWellFormed { kind, attr, pattern }
        }
        ConstraintKind::ForbidElementValue => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node, Role::Edge, Role::Datum]);
            let attr = r.required("attr");
            r.attr_ref(&kind, &attr);
            let value = r.required("value");
            r.value_ref(&kind, &attr, &value);
            Check::ForbidElementValue { kind, attr, value }
        }
        ConstraintKind::NoIsolatedNodes => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node]);
            Check::NoIsolatedNodes { kind, via: r.via() }
        }
    }
}

const MARKER_KEYS: &[&str] = &["check", "severity", "message", "glyph", "corner", "color"];

pub fn compile_effect(
    effect: NuanceEffect,
    params: &Params,
    kinds: Option<&[ElementKind]>,
) -> Result<Effect, Vec<String>> {
    if effect == NuanceEffect::ViolationMarker {
        return compile_marker(params, kinds);
    }
    let mut r = Reader::new(params, kinds);
    let mut extra: Vec<String> = Vec::new();
    let effect = match effect {
        NuanceEffect::AutoCreate => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node, Role::Datum]);
            let name = r.required("name");
            let element = r.lookup(&kind);
            let mut attrs = Vec::new();
            for (key, value) in &params.0 {
                if key == "kind" || key == "name" {
                    continue;
                }
                extra.push(key.clone());
                match element.map(|k| (k, k.attribute(key))) {
                    Some((_, Some(spec))) => match spec.value_type.conform(value) {
                        Ok(v) => attrs.push((key.clone(), v)),
                        Err(e) => r.issues.push(format!("{kind}.{key}: {e}")),
                    },
                    Some((_, None)) => r.issues.push(format!("kind '{kind}' has no attribute '{key}'")),
                    None => attrs.push((key.clone(), value.clone())),
                }
            }
            Effect::AutoCreate { kind, name, attrs }
        }
        NuanceEffect::Shape => {
            let target = r.selector(&[Role::Node]);
            let shape = match r.required("shape").as_str() {
                "circle" => ShapeKind::Circle,
                "oval" => ShapeKind::Oval,
                "rectangle" => ShapeKind::Rectangle,
                "" => ShapeKind::Rectangle,
                other => {
                    r.issues.push(format!("unknown shape '{other}'"));
                    ShapeKind::Rectangle
                }
            };
            Effect::Shape { target, shape }
        }
        NuanceEffect::Fill => {
            let target = r.selector(&[Role::Node]);
            let rule = match (r.optional("color"), r.optional("palette")) {
                (Some(c), None) => FillRule::Fixed(c),
                (None, Some(p)) if p == "distinct" => FillRule::Distinct,
                (None, Some(p)) => {
                    r.issues.push(format!("unknown palette '{p}'"));
                    FillRule::Distinct
                }
                _ => {
                    r.issues.push("fill needs exactly one of 'color' or 'palette'".to_string());
                    FillRule::Distinct
                }
            };
            Effect::Fill { target, rule }
        }
        NuanceEffect::Badge => {
            let target = r.selector(&[Role::Node]);
            let glyph = r.required("glyph");
            let corner = read_corner(&mut r, Corner::TopLeft);
            let color = r.optional("color").unwrap_or_else(|| "black".to_string());
            Effect::Badge { target, glyph, corner, color }
        }
        NuanceEffect::EdgeStyle => {
            let target = r.selector(&[Role::Edge]);
            let stroke = r.required("stroke");
            let missing = r.optional("missing");
            if let Some(m) = &missing {
                let k = target.kind.clone();
                r.attr_ref(&k, m);
            }
            // accepted for readability; all edges are drawn curved
            r.optional("curve");
            Effect::EdgeStyle { target, stroke, missing }
        }
        NuanceEffect::IconSlot => {
            let target = r.selector(&[Role::Node]);
            let source = match (r.optional("icon"), r.optional("from")) {
                (Some(i), None) => IconSource::Fixed(i),
                (None, Some(a)) => {
                    let k = target.kind.clone();
                    r.attr_ref(&k, &a);
                    IconSource::Attribute(a)
                }
                _ => {
                    r.issues.push("icon-slot needs exactly one of 'icon' or 'from'".to_string());
                    IconSource::Fixed(String::new())
                }
            };
            let color = r.optional("color").unwrap_or_else(|| "black".to_string());
            Effect::IconSlot { target, source, color }
        }
        NuanceEffect::LayoutOrder => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node]);
            let order: Vec<String> = r
                .required("order")
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let mut seen = BTreeSet::new();
            if order.is_empty() && r.optional("order").is_some() {
                r.issues.push("layout order is empty".to_string());
            }
            for name in &order {
                if !seen.insert(name) {
                    r.issues.push(format!("'{name}' appears twice in the layout order"));
                }
            }
            Effect::LayoutOrder { kind, order }
        }
        NuanceEffect::ViolationMarker => unreachable!("handled above"),
    };
    let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
    r.finish(effect, &extra)
}

fn read_corner(r: &mut Reader, default: Corner) -> Corner {
    match r.optional("corner") {
        None => default,
        Some(c) => Corner::from_keyword(&c).unwrap_or_else(|| {
            r.issues.push(format!("unknown corner '{c}'"));
            default
        }),
    }
}

fn compile_marker(params: &Params, kinds: Option<&[ElementKind]>) -> Result<Effect, Vec<String>> {
    let mut r = Reader::new(params, kinds);
    let check_kw = r.required("check");
    let severity_kw = r.required("severity");
    let message = r.required("message");
    let glyph = r.optional("glyph").unwrap_or_else(|| "!".to_string());
    let corner = read_corner(&mut r, Corner::TopRight);
    let color = r.optional("color").unwrap_or_else(|| "red".to_string());

    let severity = Severity::from_keyword(&severity_kw);
    if severity.is_none() && !severity_kw.is_empty() {
        r.issues.push(format!("severity must be 'error' or 'warning', got '{severity_kw}'"));
    }
    let check_kind = ConstraintKind::from_keyword(&check_kw);
    if check_kind.is_none() && !check_kw.is_empty() {
        r.issues.push(format!("unknown check '{check_kw}'"));
    }

    // everything that is not a marker setting belongs to the wrapped check
    let inner = Params(
        params.0.iter().filter(|(k, _)| !MARKER_KEYS.contains(&k.as_str())).cloned().collect(),
    );
    let inner_keys: Vec<&str> = inner.keys().collect();
    let mut issues = r.finish((), &inner_keys).err().unwrap_or_default();
    let check = match check_kind.map(|k| compile_check(k, &inner, kinds)) {
        Some(Ok(c)) => Some(c),
        Some(Err(mut e)) => {
            issues.append(&mut e);
            None
        }
        None => None,
    };
    match (check, severity) {
        (Some(check), Some(severity)) if issues.is_empty() => {
            Ok(Effect::ViolationMarker(Marker { check, severity, message, glyph, corner, color }))
        }
        _ => Err(issues),
    }
}

pub fn compile_predicate(
    kind: PredicateKind,
    params: &Params,
    kinds: Option<&[ElementKind]>,
) -> Result<Predicate, Vec<String>> {
    let mut r = Reader::new(params, kinds);
    let pred = match kind {
        PredicateKind::ElementCountAtLeast => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node, Role::Edge, Role::Datum]);
            let n = r.number("n");
            if n.is_none() && r.optional("n").is_none() {
                r.issues.push("missing parameter 'n'".to_string());
            }
            Predicate::ElementCountAtLeast { kind, n: n.unwrap_or(0) }
        }
        PredicateKind::AllOfKindHaveAttribute => {
            let kind = r.required("kind");
            r.kind_ref(&kind, &[Role::Node, Role::Edge, Role::Datum]);
            let attr = r.required("attr");
            r.attr_ref(&kind, &attr);
            Predicate::AllOfKindHaveAttribute { kind, attr }
        }
        PredicateKind::ModelValid => {
            let raw = r.required("severity");
            let threshold = Severity::from_keyword(&raw).unwrap_or_else(|| {
                if !raw.is_empty() {
                    r.issues.push(format!("severity must be 'error' or 'warning', got '{raw}'"));
                }
                Severity::Error
            });
            Predicate::ModelValid { threshold }
        }
        PredicateKind::ManualConfirm => Predicate::ManualConfirm,
    };
    r.finish(pred, &[])
}
