//! Text form of the supported SPARQL subset: `ASK` and `SELECT` over a
//! single basic graph pattern. Anything else is reported as unsupported so
//! callers can flag it rather than fail.

use std::fmt::Write as _;

use thiserror::Error;

use super::query::{PatternTerm, Query, QueryError, QueryForm, TriplePattern, Variable};
use super::{vocab, Iri, Literal};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparqlError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported SPARQL feature: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Ordered prefix → namespace bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTable {
    entries: Vec<(String, String)>,
}

impl Default for PrefixTable {
    /// The compact-rendering table: `dbr:`, `dbo:`, `rdfs:`.
    fn default() -> Self {
        PrefixTable::from_pairs([("dbr", vocab::DBR), ("dbo", vocab::DBO), ("rdfs", vocab::RDFS)])
    }
}

impl PrefixTable {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut table = PrefixTable { entries: Vec::new() };
        for (p, ns) in pairs {
            table.insert(p, ns);
        }
        table
    }

    /// Prefixes commonly found in DBpedia benchmark queries.
    pub fn well_known() -> Self {
        PrefixTable::from_pairs([
            ("dbr", vocab::DBR),
            ("dbo", vocab::DBO),
            ("dbp", vocab::DBP),
            ("rdf", vocab::RDF),
            ("rdfs", vocab::RDFS),
            ("xsd", vocab::XSD),
            ("skos", vocab::SKOS),
            ("foaf", vocab::FOAF),
            ("res", vocab::DBR),
        ])
    }

    pub fn insert(&mut self, prefix: &str, namespace: &str) {
        match self.entries.iter_mut().find(|(p, _)| p == prefix) {
            Some(entry) => entry.1 = namespace.to_string(),
            None => self.entries.push((prefix.to_string(), namespace.to_string())),
        }
    }

    pub fn namespace(&self, prefix: &str) -> Option<&str> {
        self.entries.iter().find(|(p, _)| p == prefix).map(|(_, ns)| ns.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(p, ns)| (p.as_str(), ns.as_str()))
    }

    /// `dbr:Nikola_Tesla` when a prefix applies and the local part is a
    /// plain name; otherwise `<full-iri>`.
    pub fn compact(&self, iri: &Iri) -> String {
        for (prefix, ns) in &self.entries {
            if let Some(local) = iri.as_str().strip_prefix(ns.as_str()) {
                if is_plain_local_name(local) {
                    return format!("{prefix}:{local}");
                }
            }
        }
        iri.to_string()
    }

    fn compact_literal(&self, lit: &Literal) -> String {
        let mut out = String::from("\"");
        for c in lit.lexical_form().chars() {
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
        if let Some(dt) = lit.datatype() {
            write!(out, "^^{}", self.compact(dt)).expect("write to String");
        } else if let Some(lang) = lit.language() {
            write!(out, "@{lang}").expect("write to String");
        }
        out
    }

    pub fn render_term(&self, term: &PatternTerm) -> String {
        match term {
            PatternTerm::Iri(i) => self.compact(i),
            PatternTerm::Literal(l) => self.compact_literal(l),
            PatternTerm::Variable(v) => v.to_string(),
        }
    }

    /// `ASK { s p o . }` or `SELECT ?x WHERE { s p o . }`, without PREFIX
    /// declarations.
    pub fn render_query(&self, query: &Query) -> String {
        let mut out = String::new();
        match query.form() {
            QueryForm::Ask => out.push_str("ASK {"),
            QueryForm::Select => {
                out.push_str("SELECT");
                for v in query.projection() {
                    write!(out, " {v}").expect("write to String");
                }
                out.push_str(" WHERE {");
            }
        }
        for p in query.patterns() {
            write!(
                out,
                " {} {} {} .",
                self.render_term(&p.subject),
                self.render_term(&p.predicate),
                self.render_term(&p.object)
            )
            .expect("write to String");
        }
        out.push_str(" }");
        out
    }
}

fn is_plain_local_name(local: &str) -> bool {
    !local.is_empty()
        && local.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        && local.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_')
}

/// Parses the supported subset, resolving prefixed names against `prefixes`
/// and any `PREFIX` declarations in the text.
pub fn parse_query(text: &str, prefixes: &PrefixTable) -> Result<Query, SparqlError> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0, prefixes: prefixes.clone() }.query()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    Prefixed(String, String),
    PrefixDecl(String),
    Var(String),
    Str(String),
    LangTag(String),
    DoubleCaret,
    Number(String),
    Word(String),
    Punct(char),
}

fn lex(text: &str) -> Result<Vec<Tok>, SparqlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let syntax = |m: String| SparqlError::Syntax(m);
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '<' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '>' {
                    if super::is_forbidden_iri_char(chars[j]) {
                        // `<` is also the less-than operator, only valid in FILTER
                        return Err(SparqlError::Unsupported("comparison operator".into()));
                    }
                    j += 1;
                }
                if j == chars.len() {
                    return Err(syntax("unterminated IRI".into()));
                }
                out.push(Tok::Iri(chars[start..j].iter().collect()));
                i = j + 1;
            }
            '?' | '$' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                if j == start {
                    return Err(syntax("empty variable name".into()));
                }
                out.push(Tok::Var(chars[start..j].iter().collect()));
                i = j;
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match chars.get(j) {
                        None => return Err(syntax("unterminated string".into())),
                        Some(&ch) if ch == quote => break,
                        Some('\\') => {
                            let esc = chars.get(j + 1).ok_or_else(|| syntax("dangling escape".into()))?;
                            s.push(match esc {
                                't' => '\t',
                                'n' => '\n',
                                'r' => '\r',
                                'b' => '\u{8}',
                                'f' => '\u{c}',
                                '"' => '"',
                                '\'' => '\'',
                                '\\' => '\\',
                                other => return Err(syntax(format!("unknown escape \\{other}"))),
                            });
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                out.push(Tok::Str(s));
                i = j + 1;
            }
            '@' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '-') {
                    j += 1;
                }
                if j == start {
                    return Err(syntax("empty language tag".into()));
                }
                out.push(Tok::LangTag(chars[start..j].iter().collect()));
                i = j;
            }
            '^' => {
                if chars.get(i + 1) != Some(&'^') {
                    return Err(syntax("expected ^^".into()));
                }
                out.push(Tok::DoubleCaret);
                i += 2;
            }
            '{' | '}' | '.' | ';' | ',' | '*' | '(' | ')' | '[' | ']' | '=' | '!' | '>' | '&' | '|' => {
                if c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    let (tok, j) = lex_number(&chars, i);
                    out.push(tok);
                    i = j;
                } else {
                    out.push(Tok::Punct(c));
                    i += 1;
                }
            }
            '+' | '-' if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                let (tok, j) = lex_number(&chars, i);
                out.push(tok);
                i = j;
            }
            c if c.is_ascii_digit() => {
                let (tok, j) = lex_number(&chars, i);
                out.push(tok);
                i = j;
            }
            c if c.is_alphabetic() || c == '_' || c == ':' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || matches!(chars[j], '_' | '-' | ':' | '.' | '%'))
                {
                    j += 1;
                }
                // a trailing '.' terminates the triple, it is not part of the name
                while j > start && chars[j - 1] == '.' {
                    j -= 1;
                }
                let word: String = chars[start..j].iter().collect();
                i = j;
                match word.split_once(':') {
                    Some((p, "")) if chars.get(j).is_some_and(|c| c.is_whitespace() || *c == '<') => {
                        // `PREFIX dbr: <...>` or a bare `dbr:` name
                        let last_is_prefix_kw =
                            matches!(out.last(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("prefix"));
                        if last_is_prefix_kw {
                            out.pop();
                            out.push(Tok::PrefixDecl(p.to_string()));
                        } else {
                            out.push(Tok::Prefixed(p.to_string(), String::new()));
                        }
                    }
                    Some((p, local)) => {
                        if p.starts_with('_') {
                            return Err(SparqlError::Unsupported("blank node".into()));
                        }
                        out.push(Tok::Prefixed(p.to_string(), local.to_string()))
                    }
                    None => out.push(Tok::Word(word)),
                }
            }
            other => return Err(syntax(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

fn lex_number(chars: &[char], start: usize) -> (Tok, usize) {
    let mut j = start;
    if matches!(chars[j], '+' | '-') {
        j += 1;
    }
    while j < chars.len() && (chars[j].is_ascii_digit() || matches!(chars[j], '.' | 'e' | 'E')) {
        // do not swallow the statement terminator
        if chars[j] == '.' && !chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
            break;
        }
        j += 1;
    }
    (Tok::Number(chars[start..j].iter().collect()), j)
}

const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "FILTER",
    "OPTIONAL",
    "UNION",
    "MINUS",
    "BIND",
    "VALUES",
    "GRAPH",
    "SERVICE",
    "ORDER",
    "GROUP",
    "HAVING",
    "LIMIT",
    "OFFSET",
    "COUNT",
    "CONSTRUCT",
    "DESCRIBE",
    "BASE",
    "FROM",
    "NOT",
    "EXISTS",
];

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
    prefixes: PrefixTable,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn check_unsupported(&self) -> Result<(), SparqlError> {
        match self.peek() {
            Some(Tok::Word(w)) if UNSUPPORTED_KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)) => {
                Err(SparqlError::Unsupported(w.to_uppercase()))
            }
            Some(Tok::Punct(c @ ('(' | '[' | '=' | '!' | '>' | '&' | '|'))) => {
                Err(SparqlError::Unsupported(format!("'{c}'")))
            }
            _ => Ok(()),
        }
    }

    fn expect_punct(&mut self, want: char) -> Result<(), SparqlError> {
        self.check_unsupported()?;
        match self.next() {
            Some(Tok::Punct(c)) if c == want => Ok(()),
            other => Err(SparqlError::Syntax(format!("expected '{want}', found {other:?}"))),
        }
    }

    fn query(mut self) -> Result<Query, SparqlError> {
        while let Some(Tok::PrefixDecl(_)) = self.peek() {
            let Some(Tok::PrefixDecl(p)) = self.next() else { unreachable!() };
            match self.next() {
                Some(Tok::Iri(ns)) => self.prefixes.insert(&p, &ns),
                other => return Err(SparqlError::Syntax(format!("expected namespace IRI, found {other:?}"))),
            }
        }
        self.check_unsupported()?;
        let (form, projection, star) = if self.keyword("ASK") {
            self.next();
            (QueryForm::Ask, Vec::new(), false)
        } else if self.keyword("SELECT") {
            self.next();
            if self.keyword("DISTINCT") || self.keyword("REDUCED") {
                self.next();
            }
            let mut vars = Vec::new();
            let mut star = false;
            loop {
                self.check_unsupported()?;
                match self.peek() {
                    Some(Tok::Var(_)) => {
                        let Some(Tok::Var(v)) = self.next() else { unreachable!() };
                        vars.push(Variable::new(v)?);
                    }
                    Some(Tok::Punct('*')) if vars.is_empty() => {
                        self.next();
                        star = true;
                        break;
                    }
                    _ => break,
                }
            }
            (QueryForm::Select, vars, star)
        } else {
            return Err(SparqlError::Syntax("expected ASK or SELECT".into()));
        };
        self.check_unsupported()?;
        if self.keyword("WHERE") {
            self.next();
        }
        self.expect_punct('{')?;
        let patterns = self.triples_block()?;
        self.expect_punct('}')?;
        self.check_unsupported()?;
        if let Some(t) = self.peek() {
            return Err(SparqlError::Syntax(format!("trailing token {t:?}")));
        }
        let projection = if star {
            let mut vars: Vec<Variable> = Vec::new();
            for v in patterns.iter().flat_map(TriplePattern::variables) {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
            vars
        } else {
            projection
        };
        Ok(Query::new(form, projection, patterns)?)
    }

    fn triples_block(&mut self) -> Result<Vec<TriplePattern>, SparqlError> {
        let mut out = Vec::new();
        loop {
            self.check_unsupported()?;
            match self.peek() {
                Some(Tok::Punct('}')) | None => return Ok(out),
                Some(Tok::Punct('{')) => return Err(SparqlError::Unsupported("nested group".into())),
                _ => {}
            }
            let subject = self.term()?;
            loop {
                let predicate = self.verb()?;
                loop {
                    let object = self.term()?;
                    out.push(TriplePattern { subject: subject.clone(), predicate: predicate.clone(), object });
                    if matches!(self.peek(), Some(Tok::Punct(','))) {
                        self.next();
                    } else {
                        break;
                    }
                }
                if matches!(self.peek(), Some(Tok::Punct(';'))) {
                    self.next();
                    if matches!(self.peek(), Some(Tok::Punct('.' | '}'))) {
                        break;
                    }
                } else {
                    break;
                }
            }
            self.check_unsupported()?;
            match self.peek() {
                Some(Tok::Punct('.')) => {
                    self.next();
                }
                Some(Tok::Punct('}')) => {}
                other => return Err(SparqlError::Syntax(format!("expected '.' or '}}', found {other:?}"))),
            }
        }
    }

    fn verb(&mut self) -> Result<PatternTerm, SparqlError> {
        if self.keyword("a") {
            self.next();
            return Ok(PatternTerm::Iri(vocab::rdf_type()));
        }
        self.term()
    }

    fn iri(&self, value: String) -> Result<Iri, SparqlError> {
        Iri::new(value).map_err(|e| SparqlError::Syntax(e.to_string()))
    }

    fn prefixed(&self, prefix: &str, local: &str) -> Result<Iri, SparqlError> {
        let ns =
            self.prefixes.namespace(prefix).ok_or_else(|| SparqlError::Syntax(format!("unknown prefix {prefix}:")))?;
        let local = local.replace('\\', "");
        self.iri(format!("{ns}{local}"))
    }

    fn term(&mut self) -> Result<PatternTerm, SparqlError> {
        self.check_unsupported()?;
        match self.next() {
            Some(Tok::Iri(v)) => Ok(PatternTerm::Iri(self.iri(v)?)),
            Some(Tok::Prefixed(p, l)) => Ok(PatternTerm::Iri(self.prefixed(&p, &l)?)),
            Some(Tok::Var(v)) => Ok(PatternTerm::Variable(Variable::new(v)?)),
            Some(Tok::Str(s)) => {
                let lit = match self.peek() {
                    Some(Tok::LangTag(_)) => {
                        let Some(Tok::LangTag(tag)) = self.next() else { unreachable!() };
                        Literal::lang(s, tag)
                    }
                    Some(Tok::DoubleCaret) => {
                        self.next();
                        let dt = match self.next() {
                            Some(Tok::Iri(v)) => self.iri(v)?,
                            Some(Tok::Prefixed(p, l)) => self.prefixed(&p, &l)?,
                            other => return Err(SparqlError::Syntax(format!("expected datatype, found {other:?}"))),
                        };
                        Literal::typed(s, dt)
                    }
                    _ => Literal::simple(s),
                };
                Ok(PatternTerm::Literal(lit))
            }
            Some(Tok::Number(n)) => {
                let dt = if n.contains(['e', 'E']) {
                    "double"
                } else if n.contains('.') {
                    "decimal"
                } else {
                    "integer"
                };
                Ok(PatternTerm::Literal(Literal::typed(n, Iri::new_unchecked(format!("{}{dt}", vocab::XSD)))))
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => {
                Ok(PatternTerm::Literal(Literal::typed(w, Iri::new_unchecked(format!("{}boolean", vocab::XSD)))))
            }
            other => Err(SparqlError::Syntax(format!("expected a term, found {other:?}"))),
        }
    }
}
