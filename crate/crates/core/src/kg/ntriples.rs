//! Line-oriented N-Triples reader and writer.

use std::fmt::{self, Write as _};
use std::iter::Peekable;
use std::str::CharIndices;

use super::{Iri, KgError, Literal, Term, Triple};

/// Parses a document, returning triples in document order (duplicates kept).
pub fn parse_ntriples(text: &str) -> Result<Vec<Triple>, KgError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(LineParser::new(trimmed, line_no).statement()?);
    }
    Ok(out)
}

/// One statement per line, in the given order.
pub fn write_ntriples(triples: &[Triple]) -> String {
    let mut out = String::new();
    for t in triples {
        writeln!(out, "{t}").expect("writing to a String");
    }
    out
}

pub(crate) fn write_escaped(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    Ok(())
}

struct LineParser<'a> {
    line: &'a str,
    line_no: usize,
    chars: Peekable<CharIndices<'a>>,
}

impl<'a> LineParser<'a> {
    fn new(line: &'a str, line_no: usize) -> Self {
        LineParser { line, line_no, chars: line.char_indices().peekable() }
    }

    fn error(&self, message: impl Into<String>) -> KgError {
        KgError::Parse { line: self.line_no, message: message.into() }
    }

    fn unsupported(&self, feature: &str) -> KgError {
        KgError::Unsupported { line: self.line_no, feature: feature.to_string() }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        self.chars.next().map(|(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), KgError> {
        match self.bump() {
            Some(c) if c == want => Ok(()),
            Some(c) => Err(self.error(format!("expected '{want}', found '{c}'"))),
            None => Err(self.error(format!("expected '{want}', found end of line"))),
        }
    }

    fn statement(mut self) -> Result<Triple, KgError> {
        let subject = match self.peek() {
            Some('<') => self.iri()?,
            Some('_') => return Err(self.unsupported("blank node subject")),
            _ => return Err(self.error("subject must be an IRI")),
        };
        self.skip_ws();
        let predicate = match self.peek() {
            Some('<') => self.iri()?,
            _ => return Err(self.error("predicate must be an IRI")),
        };
        self.skip_ws();
        let object: Term = match self.peek() {
            Some('<') => self.iri()?.into(),
            Some('"') => self.literal()?.into(),
            Some('_') => return Err(self.unsupported("blank node object")),
            _ => return Err(self.error("object must be an IRI or a literal")),
        };
        self.skip_ws();
        self.expect('.')?;
        self.skip_ws();
        match self.peek() {
            None | Some('#') => Ok(Triple { subject, predicate, object }),
            Some(c) => Err(self.error(format!("trailing content starting at '{c}'"))),
        }
    }

    fn iri(&mut self) -> Result<Iri, KgError> {
        self.expect('<')?;
        let mut value = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some('\\') => value.push(self.uchar()?),
                Some(c) if super::is_forbidden_iri_char(c) => {
                    return Err(self.error(format!("character {c:?} not allowed in IRI")))
                }
                Some(c) => value.push(c),
                None => return Err(self.error("unterminated IRI")),
            }
        }
        Iri::new(value).map_err(|e| self.error(e.to_string()))
    }

    fn uchar(&mut self) -> Result<char, KgError> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("invalid escape in IRI")),
        };
        self.hex_char(width)
    }

    fn hex_char(&mut self, width: usize) -> Result<char, KgError> {
        let mut code = 0u32;
        for _ in 0..width {
            let digit =
                self.bump().and_then(|c| c.to_digit(16)).ok_or_else(|| self.error("invalid hex digit in escape"))?;
            code = code * 16 + digit;
        }
        char::from_u32(code).ok_or_else(|| self.error(format!("invalid code point U+{code:X}")))
    }

    fn literal(&mut self) -> Result<Literal, KgError> {
        self.expect('"')?;
        let mut lexical = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex_char(4)?,
                        Some('U') => self.hex_char(8)?,
                        _ => return Err(self.error("invalid string escape")),
                    };
                    lexical.push(c);
                }
                Some('\n' | '\r') => return Err(self.error("raw line break in literal")),
                Some(c) => lexical.push(c),
                None => return Err(self.error("unterminated literal")),
            }
        }
        match self.peek() {
            Some('^') => {
                self.bump();
                self.expect('^')?;
                let datatype = self.iri()?;
                Ok(Literal::typed(lexical, datatype))
            }
            Some('@') => {
                self.bump();
                let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.line.len());
                let mut end = start;
                while let Some(&(i, c)) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        end = i + c.len_utf8();
                        self.bump();
                    } else {
                        break;
                    }
                }
                let tag = &self.line[start..end];
                if !valid_lang_tag(tag) {
                    return Err(self.error(format!("invalid language tag {tag:?}")));
                }
                Ok(Literal::lang(lexical, tag))
            }
            _ => Ok(Literal::simple(lexical)),
        }
    }
}

fn valid_lang_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or("");
    !primary.is_empty()
        && primary.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
}
