//! Markdown documentation of a block: the syntax table and the method guide.

use std::fmt::Write as _;

use serde::Serialize;

use crate::catalog::{compile_predicate, Predicate};
use crate::meta::{DocEntry, MethodStep, Role, Severity, IMPLICIT_NAME, IMPLICIT_SOURCE, IMPLICIT_TARGET};
use crate::registry::EffectiveBlock;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DocRow {
    pub syntax_element: String,
    pub attribute: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DocTable {
    pub rows: Vec<DocRow>,
}

fn row(d: &DocEntry) -> DocRow {
    DocRow { syntax_element: d.element.clone(), attribute: d.attribute.clone(), description: d.description.clone() }
}

/// Rows in element declaration order; each element's own row comes before
/// its attribute rows (implicit attributes first, then declared ones).
/// Entries naming undeclared elements or attributes are kept at the end.
pub fn doc_table(block: &EffectiveBlock) -> DocTable {
    let mut taken = vec![false; block.docs.len()];
    let mut rows = Vec::new();
    let mut take = |element: &str, attribute: Option<&str>, rows: &mut Vec<DocRow>| {
        if let Some(i) = block
            .docs
            .iter()
            .position(|d| d.element == element && d.attribute.as_deref() == attribute)
        {
            if !taken[i] {
                taken[i] = true;
                rows.push(row(&block.docs[i]));
            }
        }
    };
    for kind in &block.elements {
        take(&kind.name, None, &mut rows);
        let mut attrs: Vec<&str> = vec![IMPLICIT_NAME];
        if kind.role == Role::Edge {
            attrs.extend([IMPLICIT_SOURCE, IMPLICIT_TARGET]);
        }
        attrs.extend(kind.attributes.iter().map(|a| a.name.as_str()));
        for a in attrs {
            take(&kind.name, Some(a), &mut rows);
        }
    }
    for (d, done) in block.docs.iter().zip(&taken) {
        if !done {
            rows.push(row(d));
        }
    }
    DocTable { rows }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// A three-column markdown table of the block's documentation entries.
pub fn generate_docs(block: &EffectiveBlock) -> String {
    let mut out = format!("# {}\n\n", block.name);
    out.push_str("| Syntax Element | Attribute | Description |\n");
    out.push_str("| --- | --- | --- |\n");
    let mut previous: Option<&str> = None;
    let table = doc_table(block);
    for r in &table.rows {
        // like a printed table, the element is named once per group
        let element = if r.attribute.is_some() && previous == Some(r.syntax_element.as_str()) {
            ""
        } else {
            r.syntax_element.as_str()
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            cell(element),
            cell(r.attribute.as_deref().unwrap_or("")),
            cell(&r.description)
        );
        previous = Some(r.syntax_element.as_str());
    }
    out
}

/// Human-readable completion criterion of a step.
pub fn describe_completion(step: &MethodStep, block: &EffectiveBlock) -> String {
    match compile_predicate(step.completion.kind, &step.completion.params, Some(&block.elements)) {
        Ok(Predicate::ElementCountAtLeast { kind, n }) => {
            format!("the model has at least {n} [{kind}] element{}", if n == 1 { "" } else { "s" })
        }
        Ok(Predicate::AllOfKindHaveAttribute { kind, attr }) => format!("every [{kind}] has a value for '{attr}'"),
        Ok(Predicate::ModelValid { threshold: Severity::Error }) => {
            "validation reports no errors".to_string()
        }
        Ok(Predicate::ModelValid { threshold: Severity::Warning }) => {
            "validation reports no errors or warnings".to_string()
        }
        Ok(Predicate::ManualConfirm) => "confirmed by the user".to_string(),
        Err(_) => format!("{}({})", step.completion.kind, step.completion.params),
    }
}

/// The constraints with their messages, then the numbered method steps.
pub fn generate_method_doc(block: &EffectiveBlock) -> String {
    let mut out = format!("# {} method\n\n## Constraints\n\n", block.name);
    if block.constraints.is_empty() {
        out.push_str("None.\n");
    }
    for c in &block.constraints {
        let kinds: Vec<String> = c.clauses.iter().map(|cl| cl.kind.to_string()).collect();
        let _ = writeln!(out, "- **{}** ({}, {}): {}", c.id, c.severity, kinds.join(" & "), c.message);
    }
    out.push_str("\n## Steps\n\n");
    for (i, step) in block.method.steps.iter().enumerate() {
        let _ = writeln!(out, "{}. **{}** ({})", i + 1, step.title, step.id);
        if !step.description.is_empty() {
            let _ = writeln!(out, "   {}", step.description.replace('\n', "\n   "));
        }
        let _ = writeln!(out, "   Done when: {}.", describe_completion(step, block));
    }
    out
}
