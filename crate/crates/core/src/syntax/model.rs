use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::meta::{Literal, Role};
use crate::model::{Model, ModelElement};

use super::block::literal_source;
use super::lexer::{lex, Cursor, Line, Tok};
use super::{decode, ParseError};

const SECTIONS: [(&str, Role); 3] = [("nodes", Role::Node), ("data", Role::Datum), ("edges", Role::Edge)];

fn section_name(role: Role) -> &'static str {
    SECTIONS.iter().find(|(_, r)| *r == role).map_or("nodes", |(n, _)| n)
}

pub fn parse_model_bytes(bytes: &[u8]) -> Result<Model, Vec<ParseError>> {
    parse_model(decode(bytes).map_err(|e| vec![e])?)
}

/// Parses a `.dslm` model. Elements are returned grouped by section
/// (nodes, data, edges), each group in file order.
pub fn parse_model(text: &str) -> Result<Model, Vec<ParseError>> {
    let (lines, mut errors) = lex(text);
    let mut iter = lines.iter();

    let header = match iter.next() {
        None => {
            errors.push(ParseError::expected(1, 1, "'model' header", "end of input"));
            None
        }
        Some(first) => parse_header(first).map_err(|e| errors.push(e)).ok(),
    };

    let mut section: Option<Role> = None;
    let mut elements: Vec<ModelElement> = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for line in iter {
        let mut cur = Cursor::new(line);
        let result = match cur.peek_tok() {
            Some(Tok::Punct('[')) => match section {
                None => Err(cur.error("a section header ('nodes', 'data' or 'edges')")),
                Some(role) => parse_element(&mut cur, role).and_then(|(el, col)| {
                    if seen.insert((el.kind.clone(), el.name.clone())) {
                        elements.push(el);
                        Ok(())
                    } else {
                        Err(ParseError::new(
                            line.number,
                            col,
                            format!("duplicate element [{}: {}]", el.kind, el.name),
                        ))
                    }
                }),
            },
            Some(Tok::Word(w)) if w == "model" => Err(cur.error_msg("duplicate 'model' header")),
            Some(Tok::Word(w)) => match SECTIONS.iter().find(|(name, _)| name == w) {
                Some((_, role)) => {
                    cur.bump();
                    section = Some(*role);
                    cur.end()
                }
                None => Err(cur.error_msg(format!("unknown section '{w}'"))),
            },
            _ => Err(cur.error("a section header or '['")),
        };
        if let Err(e) = result {
            errors.push(e);
        }
    }

    match header {
        Some((id, block_name, version)) if errors.is_empty() => {
            let mut model = Model { id, block_name, version, elements: Vec::new() };
            for el in elements {
                model.insert(el);
            }
            Ok(model)
        }
        _ => Err(errors),
    }
}

fn parse_header(line: &Line) -> Result<(String, String, u64), ParseError> {
    let mut cur = Cursor::new(line);
    cur.keyword("model").map_err(|_| cur.error("'model' header"))?;
    let id = cur.ident("model name")?;
    cur.punct(':')?;
    let block = cur.ident("block name")?;
    let mut version = 1;
    if cur.eat_keyword("version") {
        let col = cur.column();
        let (word, _) = cur.word("a version number")?;
        version = word
            .parse::<u64>()
            .ok()
            .filter(|v| *v >= 1)
            .ok_or_else(|| ParseError::expected(line.number, col, "a positive version number", &format!("'{word}'")))?;
    }
    cur.end()?;
    Ok((id, block, version))
}

/// `[Kind: Name] [Src -> Tgt] [{ attr = value, ... }]`; also returns the
/// column of the name for duplicate reporting.
fn parse_element(cur: &mut Cursor, role: Role) -> Result<(ModelElement, usize), ParseError> {
    cur.punct('[')?;
    let kind = cur.ident("element kind")?;
    cur.punct(':')?;
    let name_col = cur.column();
    let (name, _) = cur.word("element name")?;
    cur.punct(']')?;

    let mut el = ModelElement { role, ..ModelElement::node(&kind, &name) };
    if role == Role::Edge {
        let (source, _) = cur.word("source element name")?;
        if cur.peek_tok() != Some(&Tok::Arrow) {
            return Err(cur.error("'->'"));
        }
        cur.bump();
        let (target, _) = cur.word("target element name")?;
        el.source = Some(source);
        el.target = Some(target);
    } else if cur.peek_tok() == Some(&Tok::Arrow) || matches!(cur.peek_tok(), Some(Tok::Word(_))) {
        return Err(cur.error_msg(format!("endpoints are only allowed in the 'edges' section, not '{}'", section_name(role))));
    }

    if cur.eat_punct('{') {
        el.attrs = parse_attrs(cur)?;
    }
    cur.end()?;
    Ok((el, name_col))
}

fn parse_attrs(cur: &mut Cursor) -> Result<BTreeMap<String, Literal>, ParseError> {
    let mut attrs = BTreeMap::new();
    if cur.eat_punct('}') {
        return Ok(attrs);
    }
    loop {
        let col = cur.column();
        let key = cur.ident("attribute name")?;
        if attrs.contains_key(&key) {
            return Err(ParseError::new(cur.line_number(), col, format!("duplicate attribute '{key}'")));
        }
        cur.punct('=')?;
        attrs.insert(key, cur.literal()?);
        if cur.eat_punct('}') {
            return Ok(attrs);
        }
        cur.punct(',')?;
    }
}

/// Canonical text: header, then the non-empty sections nodes, data and
/// edges, each in creation order. An empty model is the header alone.
pub fn serialize_model(model: &Model) -> String {
    let mut out = format!("model {} : {} version {}\n", model.id, model.block_name, model.version);
    for (section, role) in SECTIONS {
        let mut els = model.elements.iter().filter(|e| e.role == role).peekable();
        if els.peek().is_none() {
            continue;
        }
        let _ = writeln!(out, "\n{section}");
        for el in els {
            let _ = write!(out, "  [{}: {}]", el.kind, el.name);
            if role == Role::Edge {
                let _ = write!(out, " {} -> {}", el.source(), el.target());
            }
            if !el.attrs.is_empty() {
                let attrs: Vec<String> =
                    el.attrs.iter().map(|(k, v)| format!("{k} = {}", literal_source(v))).collect();
                let _ = write!(out, " {{ {} }}", attrs.join(", "));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_line() {
        let m = parse_model("model m : TrafficSignal\nnodes\n[State: Go] { type = Initial }\n").unwrap();
        assert_eq!(m.version, 1);
        assert_eq!(m.elements.len(), 1);
        let go = &m.elements[0];
        assert_eq!((go.kind.as_str(), go.name.as_str(), go.role), ("State", "Go", Role::Node));
        assert_eq!(go.attrs["type"], Literal::Symbol("Initial".into()));
    }

    #[test]
    fn edge_line() {
        let m = parse_model("model m : TrafficSignal\nedges\n[Transition: 1] Go -> Slow { action = T1 }\n").unwrap();
        let e = &m.elements[0];
        assert_eq!((e.name.as_str(), e.source(), e.target()), ("1", "Go", "Slow"));
        assert_eq!(e.attrs["action"], Literal::Symbol("T1".into()));
    }

    #[test]
    fn missing_colon_points_at_name() {
        let errs = parse_model("model m : B\nnodes\n[State Go]\n").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!((errs[0].span.line, errs[0].span.column), (3, 8));
    }

    #[test]
    fn unknown_section_and_duplicate_attr() {
        let errs = parse_model("model m : B\nthings\nnodes\n[S: a] { x = 1, x = 2 }\n").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs[0].message.contains("unknown section 'things'"));
        assert!(errs[1].message.contains("duplicate attribute 'x'"));
    }

    #[test]
    fn empty_model_is_header_only() {
        let m = Model::empty("m", "B");
        assert_eq!(serialize_model(&m), "model m : B version 1\n");
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }
}
