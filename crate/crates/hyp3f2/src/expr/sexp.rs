//! Generic s-expression reader with position diagnostics.
//!
//! Shared by the expression grammar and the catalog file format. Atoms are
//! bare tokens; only `(`, `)`, whitespace, and `;` comments structure the
//! input.

use crate::error::{Error, Result};

/// One node of an s-expression tree, tagged with source position.
#[derive(Clone, Debug, PartialEq)]
pub enum SExp {
    Atom { text: String, line: usize, col: usize },
    List { items: Vec<SExp>, line: usize, col: usize },
}

impl SExp {
    pub fn line(&self) -> usize {
        match self {
            SExp::Atom { line, .. } | SExp::List { line, .. } => *line,
        }
    }

    pub fn col(&self) -> usize {
        match self {
            SExp::Atom { col, .. } | SExp::List { col, .. } => *col,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExp::Atom { text, .. } => Some(text),
            SExp::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExp]> {
        match self {
            SExp::List { items, .. } => Some(items),
            SExp::Atom { .. } => None,
        }
    }

    /// Head atom of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|items| items.first()).and_then(|h| h.as_atom())
    }

    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line(), col: self.col(), msg: msg.into() }
    }
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if (c as char).is_whitespace() => {
                    self.bump();
                }
                Some(b';') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn parse_error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    fn read_node(&mut self) -> Result<SExp> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        match self.peek() {
            None => Err(self.parse_error("unexpected end of input")),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(Error::Parse {
                                line,
                                col,
                                msg: "unclosed parenthesis".into(),
                            })
                        }
                        Some(b')') => {
                            self.bump();
                            return Ok(SExp::List { items, line, col });
                        }
                        _ => items.push(self.read_node()?),
                    }
                }
            }
            Some(b')') => Err(self.parse_error("unmatched closing parenthesis")),
            Some(b'"') => {
                // quoted string atom (used for source labels in catalogs)
                self.bump();
                let mut text = String::from("\"");
                loop {
                    match self.bump() {
                        None => {
                            return Err(Error::Parse { line, col, msg: "unclosed string".into() })
                        }
                        Some(b'"') => break,
                        Some(c) => text.push(c as char),
                    }
                }
                text.push('"');
                Ok(SExp::Atom { text, line, col })
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(c) = self.peek() {
                    if (c as char).is_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    text.push(c as char);
                    self.bump();
                }
                Ok(SExp::Atom { text, line, col })
            }
        }
    }
}

/// Read a single s-expression; trailing content is an error.
pub fn read_one(src: &str) -> Result<SExp> {
    let mut r = Reader::new(src);
    let node = r.read_node()?;
    r.skip_trivia();
    if r.peek().is_some() {
        return Err(r.parse_error("trailing content after expression"));
    }
    Ok(node)
}

/// Read every top-level s-expression in the input.
pub fn read_all(src: &str) -> Result<Vec<SExp>> {
    let mut r = Reader::new(src);
    let mut out = Vec::new();
    loop {
        r.skip_trivia();
        if r.peek().is_none() {
            return Ok(out);
        }
        out.push(r.read_node()?);
    }
}

/// Serialize a tree back to canonical single-space text.
pub fn write(node: &SExp) -> String {
    match node {
        SExp::Atom { text, .. } => text.clone(),
        SExp::List { items, .. } => {
            let inner: Vec<String> = items.iter().map(write).collect();
            format!("({})", inner.join(" "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_lists_and_comments() {
        let src = "; a catalog fragment\n(top 2 a (- 1 n)) ; trailing\n(bottom b)";
        let nodes = read_all(src).unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[0].head(), Some("top"));
        assert_eq!(write(&nodes[0]), "(top 2 a (- 1 n))");
        assert_eq!(nodes[1].line(), 3);
    }

    #[test]
    fn string_atoms_round_trip() {
        let src = "(source \"Gessel-Stanton (1.9) : T8\")";
        let n = read_one(src).unwrap();
        assert_eq!(write(&n), src);
    }

    #[test]
    fn error_positions() {
        let err = read_one("(+ 1 (2").unwrap_err();
        match err {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 6);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(read_one("(+ 1 2) extra").is_err());
        assert!(read_one(")").is_err());
    }
}
