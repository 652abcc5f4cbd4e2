use crate::meta::{format_number, Literal};

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    Punct(char),
    Arrow,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Str(_) => "a string".to_string(),
            Tok::Punct(c) => format!("'{c}'"),
            Tok::Arrow => "'->'".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub column: usize,
}

/// One source line, lexed.
#[derive(Debug)]
pub(crate) struct Line {
    pub number: usize,
    pub tokens: Vec<Token>,
    /// Column just past the last character, for end-of-line errors.
    pub end_column: usize,
}

fn is_word_start(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

/// Splits `text` into lines (LF or CRLF) and lexes each. Lines that are
/// blank or comment-only are dropped; lexing errors are collected and the
/// offending line is dropped.
pub(crate) fn lex(text: &str) -> (Vec<Line>, Vec<ParseError>) {
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        match lex_line(idx + 1, raw) {
            Ok(line) if line.tokens.is_empty() => {}
            Ok(line) => lines.push(line),
            Err(e) => errors.push(e),
        }
    }
    (lines, errors)
}

fn lex_line(number: usize, raw: &str) -> Result<Line, ParseError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(ParseError::new(number, column, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let escaped = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('r') => '\r',
                            Some('t') => '\t',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some(other) => {
                                return Err(ParseError::new(
                                    number,
                                    i + 1,
                                    format!("unknown escape '\\{other}'"),
                                ))
                            }
                            None => {
                                return Err(ParseError::new(number, column, "unterminated string"))
                            }
                        };
                        s.push(escaped);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            tokens.push(Token { tok: Tok::Str(s), column });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            tokens.push(Token { tok: Tok::Arrow, column });
            i += 2;
        } else if is_word_start(c) || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() {
                let ch = chars[i];
                // '-' continues a word unless it begins an arrow
                if is_word_char(ch) || (ch == '-' && chars.get(i + 1) != Some(&'>')) {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token { tok: Tok::Word(chars[start..i].iter().collect()), column });
        } else if "[]{}():,=&".contains(c) {
            tokens.push(Token { tok: Tok::Punct(c), column });
            i += 1;
        } else {
            return Err(ParseError::new(number, column, format!("unexpected character '{c}'")));
        }
    }
    Ok(Line { number, tokens, end_column: chars.len() + 1 })
}

/// Converts a bare word into a literal: canonical numbers become numbers,
/// everything else stays a symbol so names like `007` survive.
pub(crate) fn word_literal(word: &str) -> Literal {
    match word.parse::<f64>() {
        Ok(n) if n.is_finite() && format_number(n) == word => Literal::Number(n),
        _ => Literal::Symbol(word.to_string()),
    }
}

/// Token cursor over a single line.
pub(crate) struct Cursor<'a> {
    line: &'a Line,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(line: &'a Line) -> Self {
        Cursor { line, pos: 0 }
    }

    pub fn line_number(&self) -> usize {
        self.line.number
    }

    pub fn peek(&self) -> Option<&'a Token> {
        self.line.tokens.get(self.pos)
    }

    pub fn peek_tok(&self) -> Option<&'a Tok> {
        self.peek().map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.line.tokens.len()
    }

    /// Column of the next token, or end of line.
    pub fn column(&self) -> usize {
        self.peek().map_or(self.line.end_column, |t| t.column)
    }

    pub fn bump(&mut self) -> Option<&'a Token> {
        let t = self.line.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn found(&self) -> String {
        self.peek_tok().map_or_else(|| "end of line".to_string(), Tok::describe)
    }

    pub fn error(&self, what: &str) -> ParseError {
        ParseError::expected(self.line.number, self.column(), what, &self.found())
    }

    pub fn error_msg(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line.number, self.column(), message)
    }

    pub fn word(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), column }) => {
                self.pos += 1;
                Ok((w.clone(), *column))
            }
            _ => Err(self.error(what)),
        }
    }

    /// A word that must be a plain identifier (letters, digits, `_`, `-`).
    pub fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let col = self.column();
        let (w, _) = self.word(what)?;
        if w.contains('.') {
            return Err(ParseError::new(self.line.number, col, format!("'{w}' is not a valid {what}")));
        }
        Ok(w)
    }

    pub fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek_tok() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("'{kw}'"))),
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        match self.peek_tok() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    pub fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.error(&format!("'{c}'")))
        }
    }

    pub fn eat_punct(&mut self, c: char) -> bool {
        if self.peek_tok() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn string(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek_tok() {
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.error(what)),
        }
    }

    /// A literal value: quoted string or bare word.
    pub fn literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek_tok() {
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Literal::Text(s.clone()))
            }
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(word_literal(w))
            }
            _ => Err(self.error("a value")),
        }
    }

    pub fn end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("end of line"))
        }
    }
}
