use std::fmt::Write as _;

use crate::meta::{
    quote, AttributeSpec, BuildingBlock, Clause, ConstraintKind, ConstraintSpec, DocEntry,
    ElementKind, Endpoints, Literal, MethodStep, NuanceEffect, NuanceSpec, Params, PredicateKind,
    Role, Severity, ValueType,
};

use super::lexer::{lex, Cursor, Line, Tok};
use super::{decode, ParseError};

/// Where indented continuation lines (`attr`, `description`) attach.
#[derive(Clone, Copy)]
enum Anchor {
    None,
    Element(usize),
    Step(usize),
    /// The owning line failed to parse; its continuation lines are skipped.
    Broken,
}

pub fn parse_block_bytes(bytes: &[u8]) -> Result<BuildingBlock, Vec<ParseError>> {
    parse_block(decode(bytes).map_err(|e| vec![e])?)
}

pub fn parse_block(text: &str) -> Result<BuildingBlock, Vec<ParseError>> {
    let (lines, mut errors) = lex(text);
    let mut iter = lines.iter();

    let mut block = match iter.next() {
        None => {
            errors.push(ParseError::expected(1, 1, "'block' header", "end of input"));
            None
        }
        Some(first) => match parse_header(first) {
            Ok(b) => Some(b),
            Err(e) => {
                errors.push(e);
                None
            }
        },
    };
    // Keep scanning without a header so later errors are still reported.
    let mut scratch = BuildingBlock::new("");
    let target = block.as_mut().unwrap_or(&mut scratch);

    let mut anchor = Anchor::None;
    for line in iter {
        let mut cur = Cursor::new(line);
        let result = match cur.peek_tok() {
            Some(Tok::Word(w)) => match w.as_str() {
                "element" => match parse_element(&mut cur) {
                    Ok(el) => {
                        target.elements.push(el);
                        anchor = Anchor::Element(target.elements.len() - 1);
                        Ok(())
                    }
                    Err(e) => {
                        anchor = Anchor::Broken;
                        Err(e)
                    }
                },
                "attr" => match anchor {
                    Anchor::Element(i) => {
                        parse_attr(&mut cur).map(|a| target.elements[i].attributes.push(a))
                    }
                    Anchor::Broken => Ok(()),
                    _ => Err(cur.error_msg("'attr' must follow an 'element' line")),
                },
                "step" => match parse_step(&mut cur) {
                    Ok(step) => {
                        target.method.steps.push(step);
                        anchor = Anchor::Step(target.method.steps.len() - 1);
                        Ok(())
                    }
                    Err(e) => {
                        anchor = Anchor::Broken;
                        Err(e)
                    }
                },
                "description" => match anchor {
                    Anchor::Step(i) => parse_description(&mut cur, &mut target.method.steps[i]),
                    Anchor::Broken => Ok(()),
                    _ => Err(cur.error_msg("'description' must follow a 'step' line")),
                },
                "constraint" => {
                    anchor = Anchor::None;
                    parse_constraint(&mut cur).map(|c| target.constraints.push(c))
                }
                "nuance" => {
                    anchor = Anchor::None;
                    parse_nuance(&mut cur).map(|n| target.nuances.push(n))
                }
                "doc" => {
                    anchor = Anchor::None;
                    parse_doc(&mut cur).map(|d| target.docs.push(d))
                }
                "block" => Err(cur.error_msg("duplicate 'block' header")),
                _ => Err(cur.error("a declaration keyword")),
            },
            _ => Err(cur.error("a declaration keyword")),
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }

    match block {
        Some(b) if errors.is_empty() => Ok(b),
        _ => Err(errors),
    }
}

fn parse_header(line: &Line) -> Result<BuildingBlock, ParseError> {
    let mut cur = Cursor::new(line);
    cur.keyword("block").map_err(|_| cur.error("'block' header"))?;
    let name = cur.ident("block name")?;
    let mut block = BuildingBlock::new(name);
    if cur.eat_keyword("extends") {
        block.extends = Some(cur.ident("parent block name")?);
        if cur.eat_keyword("extends") {
            return Err(cur.error_msg("a block extends at most one parent"));
        }
    }
    cur.end()?;
    Ok(block)
}

fn parse_element(cur: &mut Cursor) -> Result<ElementKind, ParseError> {
    cur.keyword("element")?;
    let role_col = cur.column();
    let (role_word, _) = cur.word("element role")?;
    let role = Role::from_keyword(&role_word).ok_or_else(|| {
        ParseError::expected(cur.line_number(), role_col, "'node', 'edge' or 'datum'", &format!("'{role_word}'"))
    })?;
    let name = cur.ident("element name")?;
    let endpoints = if cur.eat_keyword("from") {
        let source = cur.ident("source kind")?;
        cur.keyword("to")?;
        let target = cur.ident("target kind")?;
        Some(Endpoints { source, target })
    } else {
        None
    };
    match (role, &endpoints) {
        (Role::Edge, None) => return Err(cur.error("'from'")),
        (Role::Node | Role::Datum, Some(_)) => {
            return Err(cur.error_msg(format!("only edge kinds take 'from'/'to', '{name}' is a {role}")))
        }
        _ => {}
    }
    cur.end()?;
    Ok(ElementKind { name, role, attributes: Vec::new(), endpoints })
}

fn parse_attr(cur: &mut Cursor) -> Result<AttributeSpec, ParseError> {
    cur.keyword("attr")?;
    let name = cur.ident("attribute name")?;
    cur.punct(':')?;
    let value_type = parse_value_type(cur)?;
    let required = cur.eat_keyword("required");
    let default = if cur.eat_punct('=') { Some(cur.literal()?) } else { None };
    cur.end()?;
    Ok(AttributeSpec { name, value_type, required, default })
}

fn parse_value_type(cur: &mut Cursor) -> Result<ValueType, ParseError> {
    let col = cur.column();
    let (word, _) = cur.word("attribute type")?;
    match word.as_str() {
        "text" => Ok(ValueType::Text),
        "number" => Ok(ValueType::Number),
        "duration" => Ok(ValueType::Duration),
        "enum" => {
            cur.punct('(')?;
            let mut values = Vec::new();
            if !cur.eat_punct(')') {
                loop {
                    values.push(cur.ident("enum value")?);
                    if cur.eat_punct(')') {
                        break;
                    }
                    cur.punct(',')?;
                }
            }
            if values.is_empty() {
                return Err(ParseError::new(cur.line_number(), col, "enum needs at least one value"));
            }
            Ok(ValueType::Enum { values })
        }
        "ref" => {
            cur.punct('(')?;
            let kind = cur.ident("referenced kind")?;
            cur.punct(')')?;
            Ok(ValueType::Ref { kind })
        }
        other => Err(ParseError::expected(
            cur.line_number(),
            col,
            "'text', 'number', 'duration', 'enum(...)' or 'ref(...)'",
            &format!("'{other}'"),
        )),
    }
}

/// `name(key=value, ...)` with the name looked up in a keyword catalog.
fn parse_clause<K>(
    cur: &mut Cursor,
    what: &str,
    lookup: impl Fn(&str) -> Option<K>,
) -> Result<Clause<K>, ParseError> {
    let col = cur.column();
    let (word, _) = cur.word(what)?;
    let kind = lookup(&word).ok_or_else(|| {
        ParseError::new(cur.line_number(), col, format!("unknown {what} '{word}'"))
    })?;
    let params = parse_params(cur)?;
    Ok(Clause { kind, params })
}

fn parse_params(cur: &mut Cursor) -> Result<Params, ParseError> {
    cur.punct('(')?;
    let mut params = Vec::<(String, Literal)>::new();
    if cur.eat_punct(')') {
        return Ok(Params(params));
    }
    loop {
        let col = cur.column();
        let key = cur.ident("parameter name")?;
        if params.iter().any(|(k, _)| *k == key) {
            return Err(ParseError::new(cur.line_number(), col, format!("duplicate parameter '{key}'")));
        }
        cur.punct('=')?;
        params.push((key, cur.literal()?));
        if cur.eat_punct(')') {
            break;
        }
        cur.punct(',')?;
    }
    Ok(Params(params))
}

fn parse_clauses<K>(
    cur: &mut Cursor,
    what: &str,
    lookup: impl Fn(&str) -> Option<K> + Copy,
) -> Result<Vec<Clause<K>>, ParseError> {
    let mut clauses = vec![parse_clause(cur, what, lookup)?];
    while cur.eat_punct('&') {
        clauses.push(parse_clause(cur, what, lookup)?);
    }
    Ok(clauses)
}

/// Trailing `key=value` settings after the clauses; each key at most once.
fn parse_settings(cur: &mut Cursor, allowed: &[&str]) -> Result<Vec<(String, Literal, usize)>, ParseError> {
    let mut out: Vec<(String, Literal, usize)> = Vec::new();
    while !cur.at_end() {
        let col = cur.column();
        let key = cur.ident(&allowed.join("' or '"))?;
        if !allowed.contains(&key.as_str()) {
            return Err(ParseError::expected(
                cur.line_number(),
                col,
                &format!("'{}'", allowed.join("' or '")),
                &format!("'{key}'"),
            ));
        }
        if out.iter().any(|(k, _, _)| *k == key) {
            return Err(ParseError::new(cur.line_number(), col, format!("duplicate '{key}'")));
        }
        cur.punct('=')?;
        let vcol = cur.column();
        out.push((key, cur.literal()?, vcol));
    }
    Ok(out)
}

fn take_setting(
    cur: &Cursor,
    settings: &mut Vec<(String, Literal, usize)>,
    key: &str,
) -> Result<(Literal, usize), ParseError> {
    match settings.iter().position(|(k, _, _)| k == key) {
        Some(i) => {
            let (_, v, c) = settings.remove(i);
            Ok((v, c))
        }
        None => Err(cur.error(&format!("'{key}='"))),
    }
}

fn expect_text(cur: &Cursor, lit: Literal, col: usize, what: &str) -> Result<String, ParseError> {
    match lit {
        Literal::Text(s) => Ok(s),
        other => Err(ParseError::expected(cur.line_number(), col, what, &format!("'{other}'"))),
    }
}

fn parse_constraint(cur: &mut Cursor) -> Result<ConstraintSpec, ParseError> {
    cur.keyword("constraint")?;
    let id = cur.ident("constraint id")?;
    let clauses = parse_clauses(cur, "constraint kind", ConstraintKind::from_keyword)?;
    let mut settings = parse_settings(cur, &["severity", "message"])?;
    let (sev, sev_col) = take_setting(cur, &mut settings, "severity")?;
    let severity = Severity::from_keyword(&sev.as_text()).ok_or_else(|| {
        ParseError::expected(cur.line_number(), sev_col, "'error' or 'warning'", &format!("'{sev}'"))
    })?;
    let (msg, msg_col) = take_setting(cur, &mut settings, "message")?;
    let message = expect_text(cur, msg, msg_col, "a quoted message")?;
    Ok(ConstraintSpec { id, clauses, severity, message })
}

fn parse_nuance(cur: &mut Cursor) -> Result<NuanceSpec, ParseError> {
    cur.keyword("nuance")?;
    let id = cur.ident("nuance id")?;
    let effects = parse_clauses(cur, "nuance effect", NuanceEffect::from_keyword)?;
    let mut settings = parse_settings(cur, &["reason"])?;
    let (reason, col) = take_setting(cur, &mut settings, "reason")?;
    let reason = expect_text(cur, reason, col, "a quoted reason")?;
    Ok(NuanceSpec { id, effects, reason })
}

fn parse_step(cur: &mut Cursor) -> Result<MethodStep, ParseError> {
    cur.keyword("step")?;
    let id = cur.ident("step id")?;
    let title = cur.string("a quoted step title")?;
    cur.keyword("done-when")?;
    let completion = parse_clause(cur, "completion predicate", PredicateKind::from_keyword)?;
    cur.end()?;
    Ok(MethodStep { id, title, description: String::new(), completion })
}

fn parse_description(cur: &mut Cursor, step: &mut MethodStep) -> Result<(), ParseError> {
    cur.keyword("description")?;
    if !step.description.is_empty() {
        return Err(cur.error_msg(format!("step {} already has a description", step.id)));
    }
    let text = cur.string("a quoted description")?;
    cur.end()?;
    step.description = text;
    Ok(())
}

fn parse_doc(cur: &mut Cursor) -> Result<DocEntry, ParseError> {
    cur.keyword("doc")?;
    let col = cur.column();
    let (path, _) = cur.word("documented element")?;
    let mut parts = path.split('.');
    let element = parts.next().unwrap_or_default().to_string();
    let attribute = parts.next().map(str::to_string);
    if element.is_empty() || attribute.as_deref() == Some("") || parts.next().is_some() {
        return Err(ParseError::new(cur.line_number(), col, format!("expected Element or Element.attribute, found '{path}'")));
    }
    let description = cur.string("a quoted description")?;
    cur.end()?;
    Ok(DocEntry { element, attribute, description })
}

/// Writes the canonical form: header, then elements, constraints, method,
/// nuances and docs, each group separated by a blank line.
pub fn serialize_block(block: &BuildingBlock) -> String {
    let mut sections: Vec<String> = Vec::new();

    let mut header = format!("block {}", block.name);
    if let Some(parent) = &block.extends {
        let _ = write!(header, " extends {parent}");
    }
    sections.push(header + "\n");

    let mut s = String::new();
    for el in &block.elements {
        let _ = write!(s, "element {} {}", el.role, el.name);
        if let Some(ep) = &el.endpoints {
            let _ = write!(s, " from {} to {}", ep.source, ep.target);
        }
        s.push('\n');
        for a in &el.attributes {
            let _ = write!(s, "  attr {}: {}", a.name, a.value_type);
            if a.required {
                s.push_str(" required");
            }
            if let Some(d) = &a.default {
                let _ = write!(s, " = {}", literal_source(d));
            }
            s.push('\n');
        }
    }
    sections.push(s);

    let mut s = String::new();
    for c in &block.constraints {
        let _ = writeln!(
            s,
            "constraint {} {} severity={} message={}",
            c.id,
            clauses_source(&c.clauses),
            c.severity,
            quote(&c.message)
        );
    }
    sections.push(s);

    let mut s = String::new();
    for step in &block.method.steps {
        let _ = writeln!(
            s,
            "step {} {} done-when {}",
            step.id,
            quote(&step.title),
            clause_source(&step.completion)
        );
        if !step.description.is_empty() {
            let _ = writeln!(s, "  description {}", quote(&step.description));
        }
    }
    sections.push(s);

    let mut s = String::new();
    for n in &block.nuances {
        let _ = writeln!(s, "nuance {} {} reason={}", n.id, clauses_source(&n.effects), quote(&n.reason));
    }
    sections.push(s);

    let mut s = String::new();
    for d in &block.docs {
        match &d.attribute {
            Some(a) => {
                let _ = writeln!(s, "doc {}.{} {}", d.element, a, quote(&d.description));
            }
            None => {
                let _ = writeln!(s, "doc {} {}", d.element, quote(&d.description));
            }
        }
    }
    sections.push(s);

    sections.retain(|s| !s.is_empty());
    sections.join("\n")
}

fn clauses_source<K: std::fmt::Display>(clauses: &[Clause<K>]) -> String {
    clauses.iter().map(clause_source).collect::<Vec<_>>().join(" & ")
}

fn clause_source<K: std::fmt::Display>(clause: &Clause<K>) -> String {
    let params: Vec<String> = clause
        .params
        .0
        .iter()
        .map(|(k, v)| format!("{k}={}", literal_source(v)))
        .collect();
    format!("{}({})", clause.kind, params.join(", "))
}

/// Source form of a literal. Symbols that would not lex back as a single
/// word are quoted.
pub(crate) fn literal_source(lit: &Literal) -> String {
    match lit {
        Literal::Symbol(s) if is_plain_word(s) => s.clone(),
        Literal::Symbol(s) => quote(s),
        other => other.to_string(),
    }
}

fn is_plain_word(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    let rest: Vec<char> = chars.collect();
    rest.iter().enumerate().all(|(i, &c)| {
        c.is_alphanumeric() || c == '_' || c == '.' || (c == '-' && rest.get(i + 1) != Some(&'>'))
    })
}
