//! Models: instance graphs of typed elements, versioned as immutable values.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{compile_effect, Effect};
use crate::meta::{
    is_implicit_attribute, ElementKind, Literal, Role, ValueType, IMPLICIT_NAME, IMPLICIT_SOURCE,
    IMPLICIT_TARGET,
};
use crate::registry::EffectiveBlock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Model {
    pub id: String,
    pub block_name: String,
    pub version: u64,
    /// Creation order.
    pub elements: Vec<ModelElement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelElement {
    pub name: String,
    pub kind: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub attrs: BTreeMap<String, Literal>,
}

impl ModelElement {
    pub fn node(kind: &str, name: &str) -> Self {
        ModelElement {
            name: name.to_string(),
            kind: kind.to_string(),
            role: Role::Node,
            source: None,
            target: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn datum(kind: &str, name: &str) -> Self {
        ModelElement { role: Role::Datum, ..ModelElement::node(kind, name) }
    }

    pub fn edge(kind: &str, name: &str, source: &str, target: &str) -> Self {
        ModelElement {
            role: Role::Edge,
            source: Some(source.to_string()),
            target: Some(target.to_string()),
            ..ModelElement::node(kind, name)
        }
    }

    pub fn with_attr(mut self, attr: &str, value: Literal) -> Self {
        self.attrs.insert(attr.to_string(), value);
        self
    }

    /// Textual value of a declared or implicit attribute.
    pub fn attr_text(&self, attr: &str) -> Option<String> {
        match attr {
            IMPLICIT_NAME => Some(self.name.clone()),
            IMPLICIT_SOURCE if self.role == Role::Edge => self.source.clone(),
            IMPLICIT_TARGET if self.role == Role::Edge => self.target.clone(),
            _ => self.attrs.get(attr).map(Literal::as_text),
        }
    }

    pub fn source(&self) -> &str {
        self.source.as_deref().unwrap_or_default()
    }

    pub fn target(&self) -> &str {
        self.target.as_deref().unwrap_or_default()
    }
}

impl Model {
    pub fn empty(id: &str, block_name: &str) -> Self {
        Model { id: id.to_string(), block_name: block_name.to_string(), version: 1, elements: Vec::new() }
    }

    /// Appends `el` at the end of its role group. Elements are kept grouped
    /// as nodes, data, edges so that creation order survives a save/load.
    pub fn insert(&mut self, el: ModelElement) {
        let rank = group_rank(el.role);
        let at = self.elements.iter().rposition(|e| group_rank(e.role) <= rank).map_or(0, |i| i + 1);
        self.elements.insert(at, el);
    }

    pub fn find(&self, kind: &str, name: &str) -> Option<&ModelElement> {
        self.elements.iter().find(|e| e.kind == kind && e.name == name)
    }

    fn position(&self, kind: &str, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.kind == kind && e.name == name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ModelElement> {
        self.elements.iter().filter(|e| e.role == Role::Node)
    }

    pub fn data(&self) -> impl Iterator<Item = &ModelElement> {
        self.elements.iter().filter(|e| e.role == Role::Datum)
    }

    pub fn edges(&self) -> impl Iterator<Item = &ModelElement> {
        self.elements.iter().filter(|e| e.role == Role::Edge)
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a ModelElement> + 'a {
        self.elements.iter().filter(move |e| e.kind == kind)
    }

    pub fn has_element_named(&self, name: &str) -> bool {
        self.elements.iter().any(|e| e.name == name)
    }
}

fn group_rank(role: Role) -> u8 {
    match role {
        Role::Node => 0,
        Role::Datum => 1,
        Role::Edge => 2,
    }
}

/// Why a model does not conform to a block.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error("element {element}: unknown kind '{kind}'")]
    UnknownKind { element: String, kind: String },
    #[error("element {element}: '{kind}' is a {expected} kind, but the element is a {found}")]
    RoleMismatch { element: String, kind: String, expected: Role, found: Role },
    #[error("element {element}: duplicate {kind} name")]
    Duplicate { element: String, kind: String },
    #[error("element {element}: unknown attribute '{attr}'")]
    UnknownAttribute { element: String, attr: String },
    #[error("element {element}: attribute '{attr}': {detail}")]
    TypeMismatch { element: String, attr: String, detail: String },
    #[error("element {element}: missing required attribute '{attr}'")]
    MissingRequired { element: String, attr: String },
    #[error("element {element}: {end} '{name}' is not a {kind}")]
    DanglingEndpoint { element: String, end: &'static str, name: String, kind: String },
    #[error("element {element}: attribute '{attr}' names no {kind} '{name}'")]
    DanglingRef { element: String, attr: String, name: String, kind: String },
}

impl BindError {
    /// The model element at fault.
    pub fn element(&self) -> &str {
        match self {
            BindError::UnknownKind { element, .. }
            | BindError::RoleMismatch { element, .. }
            | BindError::Duplicate { element, .. }
            | BindError::UnknownAttribute { element, .. }
            | BindError::TypeMismatch { element, .. }
            | BindError::MissingRequired { element, .. }
            | BindError::DanglingEndpoint { element, .. }
            | BindError::DanglingRef { element, .. } => element,
        }
    }
}

/// Checks that every element conforms to `block`; reports the first
/// problem in element order.
pub fn bind(model: &Model, block: &EffectiveBlock) -> Result<(), BindError> {
    let mut seen = HashSet::new();
    for el in &model.elements {
        let element = el.name.clone();
        let kind = block
            .kind(&el.kind)
            .ok_or_else(|| BindError::UnknownKind { element: element.clone(), kind: el.kind.clone() })?;
        if kind.role != el.role {
            return Err(BindError::RoleMismatch {
                element,
                kind: kind.name.clone(),
                expected: kind.role,
                found: el.role,
            });
        }
        if !seen.insert((el.kind.as_str(), el.name.as_str())) {
            return Err(BindError::Duplicate { element, kind: el.kind.clone() });
        }
        for (attr, value) in &el.attrs {
            let spec = kind
                .attribute(attr)
                .ok_or_else(|| BindError::UnknownAttribute { element: element.clone(), attr: attr.clone() })?;
            spec.value_type.conform(value).map_err(|detail| BindError::TypeMismatch {
                element: element.clone(),
                attr: attr.clone(),
                detail,
            })?;
            if let ValueType::Ref { kind: target } = &spec.value_type {
                let name = value.as_text();
                if model.find(target, &name).is_none() {
                    return Err(BindError::DanglingRef { element, attr: attr.clone(), name, kind: target.clone() });
                }
            }
        }
        if let Some(missing) = kind.attributes.iter().find(|a| a.required && !el.attrs.contains_key(&a.name)) {
            return Err(BindError::MissingRequired { element, attr: missing.name.clone() });
        }
        if let Some(ep) = &kind.endpoints {
            for (end, name, want) in [("source", el.source(), &ep.source), ("target", el.target(), &ep.target)] {
                if model.find(want, name).is_none_or(|n| n.role != Role::Node) {
                    return Err(BindError::DanglingEndpoint {
                        element,
                        end,
                        name: name.to_string(),
                        kind: want.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Binds `model` and returns it with every attribute value normalized to
/// its declared type (e.g. bare words in text attributes become text).
pub fn conform_model(model: &Model, block: &EffectiveBlock) -> Result<Model, BindError> {
    bind(model, block)?;
    let mut out = model.clone();
    for el in &mut out.elements {
        let Some(kind) = block.kind(&el.kind) else { continue };
        for (attr, value) in el.attrs.iter_mut() {
            if let Some(spec) = kind.attribute(attr) {
                if let Ok(v) = spec.value_type.conform(value) {
                    *value = v;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstantiateError {
    #[error("nuance {nuance}: {detail}")]
    BadNuance { nuance: String, detail: String },
    #[error(transparent)]
    Binding(#[from] BindError),
}

/// Creates version 1 of a model, holding exactly the elements demanded by
/// the block's auto-create nuances.
pub fn instantiate(block: &EffectiveBlock, model_name: &str) -> Result<Model, InstantiateError> {
    let mut model = Model::empty(model_name, &block.name);
    for nuance in &block.nuances {
        for clause in &nuance.effects {
            let Effect::AutoCreate { kind, name, attrs } = compile_effect(clause.kind, &clause.params, Some(&block.elements))
                .map_err(|e| InstantiateError::BadNuance { nuance: nuance.id.clone(), detail: e.join("; ") })?
            else {
                continue;
            };
            let spec = block.kind(&kind).ok_or_else(|| InstantiateError::BadNuance {
                nuance: nuance.id.clone(),
                detail: format!("unknown element kind '{kind}'"),
            })?;
            let mut el = ModelElement { role: spec.role, ..ModelElement::node(&kind, &name) };
            el.attrs = with_defaults(spec, attrs.into_iter().collect());
            model.insert(el);
        }
    }
    bind(&model, block)?;
    Ok(model)
}

fn with_defaults(spec: &ElementKind, mut attrs: BTreeMap<String, Literal>) -> BTreeMap<String, Literal> {
    for a in &spec.attributes {
        if let (Some(default), false) = (&a.default, attrs.contains_key(&a.name)) {
            let value = a.value_type.conform(default).unwrap_or_else(|_| default.clone());
            attrs.insert(a.name.clone(), value);
        }
    }
    attrs
}

/// One edit. Names are resolved within the given kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum ChangeOp {
    AddElement {
        kind: String,
        name: String,
        #[serde(default)]
        attrs: BTreeMap<String, Literal>,
    },
    RemoveElement { kind: String, name: String },
    SetAttr {
        kind: String,
        name: String,
        attr: String,
        /// `None` clears the attribute.
        #[serde(default)]
        value: Option<Literal>,
    },
    AddEdge {
        kind: String,
        name: String,
        source: String,
        target: String,
        #[serde(default)]
        attrs: BTreeMap<String, Literal>,
    },
    RemoveEdge { kind: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeSet {
    pub base_version: u64,
    pub ops: Vec<ChangeOp>,
}

impl ChangeSet {
    pub fn new(base_version: u64) -> Self {
        ChangeSet { base_version, ops: Vec::new() }
    }

    pub fn op(mut self, op: ChangeOp) -> Self {
        self.ops.push(op);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error("version conflict: change is based on version {base}, model is at version {current}")]
    VersionConflict { base: u64, current: u64 },
    #[error("unknown kind '{0}'")]
    UnknownKind(String),
    #[error("'{kind}' is a {role} kind; use {hint}")]
    WrongOp { kind: String, role: Role, hint: &'static str },
    #[error("{kind} '{name}' already exists")]
    Exists { kind: String, name: String },
    #[error("no {kind} named '{name}'")]
    NotFound { kind: String, name: String },
    #[error("cannot remove {kind} '{name}': still connected by {}", .edges.join(", "))]
    BlockingEdges { kind: String, name: String, edges: Vec<String> },
    #[error("cannot remove {kind} '{name}': still referenced by {}", .referrers.join(", "))]
    Referenced { kind: String, name: String, referrers: Vec<String> },
    #[error("attribute '{0}' is implicit and cannot be set")]
    ImplicitAttribute(String),
    #[error(transparent)]
    Binding(#[from] BindError),
}

/// Applies `change` to `model`, producing the next version. The input model
/// is never modified; any failure leaves no partial result.
pub fn apply(model: &Model, block: &EffectiveBlock, change: &ChangeSet) -> Result<Model, ApplyError> {
    if change.base_version != model.version {
        return Err(ApplyError::VersionConflict { base: change.base_version, current: model.version });
    }
    let mut next = model.clone();
    for op in &change.ops {
        apply_op(&mut next, block, op)?;
    }
    bind(&next, block)?;
    next.version = model.version + 1;
    Ok(next)
}

fn kind_of<'a>(block: &'a EffectiveBlock, kind: &str) -> Result<&'a ElementKind, ApplyError> {
    block.kind(kind).ok_or_else(|| ApplyError::UnknownKind(kind.to_string()))
}

fn conform_all(
    spec: &ElementKind,
    element: &str,
    attrs: &BTreeMap<String, Literal>,
) -> Result<BTreeMap<String, Literal>, ApplyError> {
    let mut out = BTreeMap::new();
    for (attr, value) in attrs {
        out.insert(attr.clone(), conform_one(spec, element, attr, value)?);
    }
    Ok(with_defaults(spec, out))
}

fn conform_one(spec: &ElementKind, element: &str, attr: &str, value: &Literal) -> Result<Literal, ApplyError> {
    if is_implicit_attribute(spec.role, attr) {
        return Err(ApplyError::ImplicitAttribute(attr.to_string()));
    }
    let a = spec.attribute(attr).ok_or_else(|| BindError::UnknownAttribute {
        element: element.to_string(),
        attr: attr.to_string(),
    })?;
    Ok(a.value_type.conform(value).map_err(|detail| BindError::TypeMismatch {
        element: element.to_string(),
        attr: attr.to_string(),
        detail,
    })?)
}

fn apply_op(model: &mut Model, block: &EffectiveBlock, op: &ChangeOp) -> Result<(), ApplyError> {
    match op {
        ChangeOp::AddElement { kind, name, attrs } => {
            let spec = kind_of(block, kind)?;
            if spec.role == Role::Edge {
                return Err(ApplyError::WrongOp { kind: kind.clone(), role: spec.role, hint: "add-edge" });
            }
            if model.find(kind, name).is_some() {
                return Err(ApplyError::Exists { kind: kind.clone(), name: name.clone() });
            }
            let mut el = ModelElement { role: spec.role, ..ModelElement::node(kind, name) };
            el.attrs = conform_all(spec, name, attrs)?;
            model.insert(el);
        }
        ChangeOp::AddEdge { kind, name, source, target, attrs } => {
            let spec = kind_of(block, kind)?;
            if spec.role != Role::Edge {
                return Err(ApplyError::WrongOp { kind: kind.clone(), role: spec.role, hint: "add-element" });
            }
            if model.find(kind, name).is_some() {
                return Err(ApplyError::Exists { kind: kind.clone(), name: name.clone() });
            }
            let mut el = ModelElement::edge(kind, name, source, target);
            el.attrs = conform_all(spec, name, attrs)?;
            model.insert(el);
        }
        ChangeOp::RemoveElement { kind, name } => {
            let spec = kind_of(block, kind)?;
            if spec.role == Role::Edge {
                return Err(ApplyError::WrongOp { kind: kind.clone(), role: spec.role, hint: "remove-edge" });
            }
            let idx = model
                .position(kind, name)
                .ok_or_else(|| ApplyError::NotFound { kind: kind.clone(), name: name.clone() })?;
            if spec.role == Role::Node {
                let edges: Vec<String> = model
                    .edges()
                    .filter(|e| {
                        block.kind(&e.kind).and_then(|k| k.endpoints.as_ref()).is_some_and(|ep| {
                            (ep.source == *kind && e.source() == name) || (ep.target == *kind && e.target() == name)
                        })
                    })
                    .map(|e| e.name.clone())
                    .collect();
                if !edges.is_empty() {
                    return Err(ApplyError::BlockingEdges { kind: kind.clone(), name: name.clone(), edges });
                }
            }
            let referrers = referrers(model, block, kind, name);
            if !referrers.is_empty() {
                return Err(ApplyError::Referenced { kind: kind.clone(), name: name.clone(), referrers });
            }
            model.elements.remove(idx);
        }
        ChangeOp::RemoveEdge { kind, name } => {
            let spec = kind_of(block, kind)?;
            if spec.role != Role::Edge {
                return Err(ApplyError::WrongOp { kind: kind.clone(), role: spec.role, hint: "remove-element" });
            }
            let idx = model
                .position(kind, name)
                .ok_or_else(|| ApplyError::NotFound { kind: kind.clone(), name: name.clone() })?;
            let referrers = referrers(model, block, kind, name);
            if !referrers.is_empty() {
                return Err(ApplyError::Referenced { kind: kind.clone(), name: name.clone(), referrers });
            }
            model.elements.remove(idx);
        }
        ChangeOp::SetAttr { kind, name, attr, value } => {
            let spec = kind_of(block, kind)?;
            let idx = model
                .position(kind, name)
                .ok_or_else(|| ApplyError::NotFound { kind: kind.clone(), name: name.clone() })?;
            match value {
                Some(v) => {
                    let v = conform_one(spec, name, attr, v)?;
                    model.elements[idx].attrs.insert(attr.clone(), v);
                }
                None => {
                    conform_one(spec, name, attr, &Literal::Symbol(String::new())).or_else(|e| match e {
                        ApplyError::Binding(BindError::TypeMismatch { .. }) => Ok(Literal::Number(0.0)),
                        other => Err(other),
                    })?;
                    model.elements[idx].attrs.remove(attr);
                }
            }
        }
    }
    Ok(())
}

/// Names of elements whose ref attributes point at `kind`/`name`.
fn referrers(model: &Model, block: &EffectiveBlock, kind: &str, name: &str) -> Vec<String> {
    model
        .elements
        .iter()
        .filter(|el| {
            block.kind(&el.kind).is_some_and(|spec| {
                el.attrs.iter().any(|(attr, value)| {
                    matches!(spec.attribute(attr).map(|a| &a.value_type), Some(ValueType::Ref { kind: k }) if k == kind)
                        && value.as_text() == name
                })
            })
        })
        .map(|el| el.name.clone())
        .collect()
}
