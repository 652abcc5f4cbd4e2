//! Static consistency of building block definitions.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hash;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog::{compile_check, compile_effect, compile_predicate};
use crate::meta::{is_implicit_attribute, BuildingBlock, ElementKind, Role, ValueType};
use crate::syntax::{ParseError, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefinitionIssue {
    pub file: Option<PathBuf>,
    pub block: Option<String>,
    /// The entry at fault, e.g. `constraint C1` or `element Transition`.
    pub subject: Option<String>,
    pub span: Option<SourceSpan>,
    pub message: String,
}

impl DefinitionIssue {
    fn new(block: &str, subject: impl Into<String>, message: impl Into<String>) -> Self {
        DefinitionIssue {
            file: None,
            block: Some(block.to_string()),
            subject: Some(subject.into()),
            span: None,
            message: message.into(),
        }
    }

    pub fn in_file(file: &Path, message: impl Into<String>) -> Self {
        DefinitionIssue { file: Some(file.to_path_buf()), block: None, subject: None, span: None, message: message.into() }
    }

    pub fn parse(error: ParseError) -> Self {
        DefinitionIssue {
            file: error.span.file.clone(),
            block: None,
            subject: None,
            span: Some(error.span),
            message: error.message,
        }
    }

    pub fn with_file(mut self, file: &Path) -> Self {
        self.file = Some(file.to_path_buf());
        self
    }

    pub fn for_block(mut self, block: &str) -> Self {
        self.block = Some(block.to_string());
        self
    }
}

impl fmt::Display for DefinitionIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.span, &self.file) {
            (Some(span), _) => write!(f, "{span}: ")?,
            (None, Some(file)) => write!(f, "{}: ", file.display())?,
            _ => {}
        }
        if let Some(block) = &self.block {
            write!(f, "block {block}: ")?;
        }
        if let Some(subject) = &self.subject {
            write!(f, "{subject}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Checks a block on its own. References are resolved against the block's
/// own kinds when it has no parent; for an extending block they are skipped
/// here and checked by [`check_block_against`] once the lineage is known.
pub fn check_block(block: &BuildingBlock) -> Vec<DefinitionIssue> {
    let kinds = block.extends.is_none().then_some(block.elements.as_slice());
    check_block_against(block, kinds)
}

/// Checks a block, resolving every kind and attribute reference against
/// `kinds` (typically the effective kinds of its lineage).
pub fn check_block_against(block: &BuildingBlock, kinds: Option<&[ElementKind]>) -> Vec<DefinitionIssue> {
    let mut issues = Vec::new();
    let name = block.name.as_str();
    let mut issue = |subject: String, message: String| issues.push(DefinitionIssue::new(name, subject, message));

    for dup in duplicates(block.elements.iter().map(|e| e.name.as_str())) {
        issue(format!("element {dup}"), "duplicate element kind".into());
    }
    for dup in duplicates(block.constraints.iter().map(|c| c.id.as_str())) {
        issue(format!("constraint {dup}"), "duplicate constraint id".into());
    }
    for dup in duplicates(block.nuances.iter().map(|n| n.id.as_str())) {
        issue(format!("nuance {dup}"), "duplicate nuance id".into());
    }
    for dup in duplicates(block.method.steps.iter().map(|s| s.id.as_str())) {
        issue(format!("step {dup}"), "duplicate step id".into());
    }
    for (element, attr) in duplicates(block.docs.iter().map(|d| (d.element.as_str(), d.attribute.as_deref()))) {
        let path = attr.map_or_else(|| element.to_string(), |a| format!("{element}.{a}"));
        issue(format!("doc {path}"), "duplicate documentation entry".into());
    }

    for el in &block.elements {
        let subject = format!("element {}", el.name);
        for dup in duplicates(el.attributes.iter().map(|a| a.name.as_str())) {
            issue(subject.clone(), format!("duplicate attribute '{dup}'"));
        }
        if let (Role::Edge, Some(kinds), Some(ep)) = (el.role, kinds, &el.endpoints) {
            for end in [&ep.source, &ep.target] {
                match kinds.iter().find(|k| k.name == *end) {
                    None => issue(subject.clone(), format!("endpoint kind '{end}' is not declared")),
                    Some(k) if k.role != Role::Node => {
                        issue(subject.clone(), format!("endpoint kind '{end}' is a {} kind, expected node", k.role))
                    }
                    _ => {}
                }
            }
        }
        for attr in &el.attributes {
            let subject = format!("element {}: attribute {}", el.name, attr.name);
            if is_implicit_attribute(el.role, &attr.name) {
                issue(subject.clone(), "this attribute is implicit and cannot be declared".into());
            }
            match &attr.value_type {
                ValueType::Enum { values } => {
                    if values.is_empty() {
                        issue(subject.clone(), "enum needs at least one value".into());
                    }
                    for dup in duplicates(values.iter().map(String::as_str)) {
                        issue(subject.clone(), format!("duplicate enum value '{dup}'"));
                    }
                }
                ValueType::Ref { kind } => {
                    if let Some(kinds) = kinds {
                        if !kinds.iter().any(|k| k.name == *kind) {
                            issue(subject.clone(), format!("referenced kind '{kind}' is not declared"));
                        }
                    }
                }
                _ => {}
            }
            if let Some(default) = &attr.default {
                if let Err(e) = attr.value_type.conform(default) {
                    issue(subject.clone(), format!("default does not conform: {e}"));
                }
            }
        }
    }

    for c in &block.constraints {
        for clause in &c.clauses {
            if let Err(errs) = compile_check(clause.kind, &clause.params, kinds) {
                for e in errs {
                    issue(format!("constraint {}", c.id), format!("{}: {e}", clause.kind));
                }
            }
        }
    }

    if block.extends.is_none() && block.method.steps.is_empty() {
        issue("method".into(), "the method needs at least one step".into());
    }
    for step in &block.method.steps {
        if let Err(errs) = compile_predicate(step.completion.kind, &step.completion.params, kinds) {
            for e in errs {
                issue(format!("step {}", step.id), format!("{}: {e}", step.completion.kind));
            }
        }
    }

    for n in &block.nuances {
        if n.reason.trim().is_empty() {
            issue(format!("nuance {}", n.id), "a nuance needs a reason".into());
        }
        for effect in &n.effects {
            if let Err(errs) = compile_effect(effect.kind, &effect.params, kinds) {
                for e in errs {
                    issue(format!("nuance {}", n.id), format!("{}: {e}", effect.kind));
                }
            }
        }
    }

    if let Some(kinds) = kinds {
        for d in &block.docs {
            let subject = match &d.attribute {
                Some(a) => format!("doc {}.{a}", d.element),
                None => format!("doc {}", d.element),
            };
            match (kinds.iter().find(|k| k.name == d.element), &d.attribute) {
                (None, _) => issue(subject, format!("element kind '{}' is not declared", d.element)),
                (Some(k), Some(a)) if !k.has_attribute(a) => {
                    issue(subject, format!("kind '{}' has no attribute '{a}'", d.element))
                }
                _ => {}
            }
        }
    }

    issues
}

/// Items occurring more than once, each reported once, in order of their
/// second occurrence.
fn duplicates<T: Eq + Hash + Copy>(items: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    items
        .into_iter()
        .filter(|i| !seen.insert(*i) && reported.insert(*i))
        .collect()
}
