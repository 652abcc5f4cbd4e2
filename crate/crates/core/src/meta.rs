//! Building block definitions: the language, method and nucleus parts of a
//! reusable DSL, as plain immutable values.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Attribute names every element carries without declaring them.
pub const IMPLICIT_NAME: &str = "name";
/// Implicit attributes of edge kinds, naming their endpoints.
pub const IMPLICIT_SOURCE: &str = "source";
pub const IMPLICIT_TARGET: &str = "target";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingBlock {
    pub name: String,
    pub extends: Option<String>,
    pub elements: Vec<ElementKind>,
    pub constraints: Vec<ConstraintSpec>,
    pub method: MethodSpec,
    pub nuances: Vec<NuanceSpec>,
    pub docs: Vec<DocEntry>,
}

impl BuildingBlock {
    pub fn new(name: impl Into<String>) -> Self {
        BuildingBlock {
            name: name.into(),
            extends: None,
            elements: Vec::new(),
            constraints: Vec::new(),
            method: MethodSpec::default(),
            nuances: Vec::new(),
            docs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Node,
    Edge,
    Datum,
}

impl Role {
    pub fn keyword(self) -> &'static str {
        match self {
            Role::Node => "node",
            Role::Edge => "edge",
            Role::Datum => "datum",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Role> {
        match s {
            "node" => Some(Role::Node),
            "edge" => Some(Role::Edge),
            "datum" => Some(Role::Datum),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementKind {
    pub name: String,
    pub role: Role,
    pub attributes: Vec<AttributeSpec>,
    /// Endpoint kinds; set for edge kinds only.
    pub endpoints: Option<Endpoints>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    pub source: String,
    pub target: String,
}

impl ElementKind {
    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// True when `name` is declared or implicit for this kind.
    pub fn has_attribute(&self, name: &str) -> bool {
        is_implicit_attribute(self.role, name) || self.attribute(name).is_some()
    }
}

pub fn is_implicit_attribute(role: Role, name: &str) -> bool {
    name == IMPLICIT_NAME || (role == Role::Edge && (name == IMPLICIT_SOURCE || name == IMPLICIT_TARGET))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub value_type: ValueType,
    pub required: bool,
    pub default: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ValueType {
    Text,
    Number,
    /// Seconds.
    Duration,
    Enum { values: Vec<String> },
    Ref { kind: String },
}

impl ValueType {
    /// Checks a literal against this type, returning the normalized literal.
    ///
    /// The model syntax does not distinguish bare words, numbers and quoted
    /// text well, so any literal is accepted where its text form fits.
    pub fn conform(&self, lit: &Literal) -> Result<Literal, String> {
        match (self, lit) {
            (ValueType::Text, lit) => Ok(Literal::Text(lit.as_text())),
            (ValueType::Number | ValueType::Duration, _) => {
                let n = match lit {
                    Literal::Number(n) => Some(*n),
                    Literal::Symbol(s) => s.trim().parse::<f64>().ok(),
                    Literal::Text(_) => None,
                };
                match n.filter(|n| n.is_finite()) {
                    None => Err(format!("expected {self}, got {lit}")),
                    Some(n) if *self == ValueType::Duration && n < 0.0 => {
                        Err(format!("duration must not be negative, got {}", format_number(n)))
                    }
                    Some(n) => Ok(Literal::Number(n)),
                }
            }
            (ValueType::Enum { values }, lit) => {
                let v = lit.as_text();
                if values.contains(&v) {
                    Ok(Literal::Symbol(v))
                } else {
                    Err(format!("expected one of {}, got {lit}", values.join(", ")))
                }
            }
            (ValueType::Ref { kind }, lit) => match lit.as_text() {
                v if v.is_empty() => Err(format!("expected a {kind} name, got {lit}")),
                v => Ok(Literal::Symbol(v)),
            },
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Text => f.write_str("text"),
            ValueType::Number => f.write_str("number"),
            ValueType::Duration => f.write_str("duration"),
            ValueType::Enum { values } => write!(f, "enum({})", values.join(", ")),
            ValueType::Ref { kind } => write!(f, "ref({kind})"),
        }
    }
}

/// An attribute or parameter value.
///
/// In JSON both text and symbols are strings; a deserialized string is a
/// symbol until [`ValueType::conform`] normalizes it.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(f64),
    /// Quoted text.
    Text(String),
    /// A bare word: enum value, element name, identifier.
    Symbol(String),
}

impl Serialize for Literal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Literal::Number(n) => serializer.serialize_f64(*n),
            Literal::Text(s) | Literal::Symbol(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for Literal {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Str(String),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::Number(n) => Literal::Number(n),
            Raw::Str(s) => Literal::Symbol(s),
        })
    }
}

impl Literal {
    /// Name-like view of the literal: symbols and numbers (element names
    /// such as `1` lex as numbers).
    pub fn as_symbol(&self) -> Option<String> {
        match self {
            Literal::Symbol(s) => Some(s.clone()),
            Literal::Number(n) => Some(format_number(*n)),
            Literal::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> String {
        match self {
            Literal::Symbol(s) | Literal::Text(s) => s.clone(),
            Literal::Number(n) => format_number(*n),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Literal::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Loose equality used by selectors: compares the textual forms.
    pub fn matches(&self, value: &str) -> bool {
        self.as_text() == value
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(&format_number(*n)),
            Literal::Symbol(s) => f.write_str(s),
            Literal::Text(s) => f.write_str(&quote(s)),
        }
    }
}

pub fn format_number(n: f64) -> String {
    format!("{n}")
}

/// Double-quotes `s`, escaping backslashes, quotes and control characters.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Ordered `key=value` parameters of a catalog clause.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub Vec<(String, Literal)>);

impl Params {
    pub fn get(&self, key: &str) -> Option<&Literal> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn text(&self, key: &str) -> Option<String> {
        self.get(key).map(Literal::as_text)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(k, _)| k.as_str())
    }

    pub fn with(mut self, key: &str, value: Literal) -> Self {
        self.0.push((key.to_string(), value));
        self
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl Severity {
    pub fn keyword(self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Severity> {
        match s {
            "warning" => Some(Severity::Warning),
            "error" => Some(Severity::Error),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $kw:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $kw)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn keyword(self) -> &'static str {
                match self {
                    $($name::$variant => $kw),+
                }
            }

            pub fn from_keyword(s: &str) -> Option<Self> {
                match s {
                    $($kw => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.keyword())
            }
        }
    };
}

keyword_enum!(
    /// The fixed catalog of well-formedness checks.
    ConstraintKind {
        Reachability => "reachability",
        NoParallelEdges => "no-parallel-edges",
        DegreeBound => "degree-bound",
        EdgeAttributeRequired => "edge-attribute-required",
        DurationWellFormed => "duration-well-formed",
        ForbidElementValue => "forbid-element-value",
        NoIsolatedNodes => "no-isolated-nodes",
    }
);

keyword_enum!(
    /// The fixed catalog of nucleus effects.
    NuanceEffect {
        AutoCreate => "auto-create",
        Shape => "shape",
        Fill => "fill",
        Badge => "badge",
        ViolationMarker => "violation-marker",
        EdgeStyle => "edge-style",
        IconSlot => "icon-slot",
        LayoutOrder => "layout-order",
    }
);

keyword_enum!(
    /// Completion predicates of method steps.
    PredicateKind {
        ElementCountAtLeast => "element-count-at-least",
        AllOfKindHaveAttribute => "all-of-kind-have-attribute",
        ModelValid => "model-valid",
        ManualConfirm => "manual-confirm",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause<K> {
    pub kind: K,
    pub params: Params,
}

impl<K: fmt::Display> fmt::Display for Clause<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.params)
    }
}

/// A constraint is one or more catalog clauses sharing an id, severity and
/// message; a diagnostic is produced for each violation of any clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub id: String,
    pub clauses: Vec<Clause<ConstraintKind>>,
    pub severity: Severity,
    pub message: String,
}

impl ConstraintSpec {
    pub fn kind(&self) -> ConstraintKind {
        self.clauses[0].kind
    }
}

/// A nuance groups one or more effects under one id and one reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuanceSpec {
    pub id: String,
    pub effects: Vec<Clause<NuanceEffect>>,
    pub reason: String,
}

impl NuanceSpec {
    pub fn effect(&self) -> NuanceEffect {
        self.effects[0].kind
    }

    pub fn has_effect(&self, effect: NuanceEffect) -> bool {
        self.effects.iter().any(|e| e.kind == effect)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub steps: Vec<MethodStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStep {
    pub id: String,
    pub title: String,
    pub description: String,
    pub completion: Clause<PredicateKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub element: String,
    pub attribute: Option<String>,
    pub description: String,
}

impl DocEntry {
    pub fn key(&self) -> (String, Option<String>) {
        (self.element.clone(), self.attribute.clone())
    }
}
