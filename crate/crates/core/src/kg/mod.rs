//! In-memory triple store.
//!
//! Terms are interned to dense ids and every triple is kept in three sorted
//! indexes (`spo`, `pos`, `osp`) so that any triple pattern with at least one
//! bound position resolves to a single range scan. A label index maps
//! normalized surface forms to the IRIs that carry them, which is what the
//! entity linker looks phrases up in.

mod ntriples;
mod query;
mod snapshot;
mod sparql;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ntriples::{parse_ntriples, write_ntriples};
pub use query::{evaluate, AnswerSet, PatternTerm, Query, QueryError, QueryForm, TriplePattern, Variable};
pub use snapshot::{read_snapshot, read_store, write_snapshot, Snapshot, SNAPSHOT_MAGIC};
pub use sparql::{parse_query, PrefixTable, SparqlError};

pub mod vocab {
    //! IRIs the store and the pipeline refer to by name.
    use super::Iri;

    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
    pub const SKOS: &str = "http://www.w3.org/2004/02/skos/core#";
    pub const DBR: &str = "http://dbpedia.org/resource/";
    pub const DBO: &str = "http://dbpedia.org/ontology/";
    pub const DBP: &str = "http://dbpedia.org/property/";
    pub const FOAF: &str = "http://xmlns.com/foaf/0.1/";

    pub fn rdfs_label() -> Iri {
        Iri::new_unchecked(format!("{RDFS}label"))
    }

    pub fn skos_alt_label() -> Iri {
        Iri::new_unchecked(format!("{SKOS}altLabel"))
    }

    pub fn rdf_type() -> Iri {
        Iri::new_unchecked(format!("{RDF}type"))
    }

    pub fn xsd_string() -> Iri {
        Iri::new_unchecked(format!("{XSD}string"))
    }

    pub fn rdf_lang_string() -> Iri {
        Iri::new_unchecked(format!("{RDF}langString"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KgError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported feature: {feature}")]
    Unsupported { line: usize, feature: String },
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),
    #[error("literal cannot carry both a datatype and a language tag")]
    DatatypeAndLanguage,
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// An IRI without its enclosing angle brackets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    /// Validates against the N-Triples `IRIREF` character rules.
    pub fn new(value: impl Into<String>) -> Result<Self, KgError> {
        let value = value.into();
        if value.is_empty() || value.chars().any(is_forbidden_iri_char) {
            return Err(KgError::InvalidIri(value));
        }
        Ok(Iri(value))
    }

    pub(crate) fn new_unchecked(value: String) -> Self {
        debug_assert!(!value.is_empty());
        Iri(value)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The segment after the last `/` or `#`, e.g. `award` for `dbo:award`.
    pub fn local_name(&self) -> &str {
        match self.0.rfind(['/', '#']) {
            Some(i) if i + 1 < self.0.len() => &self.0[i + 1..],
            _ => &self.0,
        }
    }
}

pub(crate) fn is_forbidden_iri_char(c: char) -> bool {
    c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
}

impl TryFrom<String> for Iri {
    type Error = KgError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "LiteralRepr")]
pub struct Literal {
    lexical_form: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    datatype: Option<Iri>,
    #[serde(skip_serializing_if = "Option::is_none")]
    language: Option<String>,
}

#[derive(Deserialize)]
struct LiteralRepr {
    lexical_form: String,
    datatype: Option<Iri>,
    language: Option<String>,
}

impl TryFrom<LiteralRepr> for Literal {
    type Error = KgError;

    fn try_from(r: LiteralRepr) -> Result<Self, Self::Error> {
        Literal::new(r.lexical_form, r.datatype, r.language)
    }
}

impl Literal {
    pub fn new(
        lexical_form: impl Into<String>,
        datatype: Option<Iri>,
        language: Option<String>,
    ) -> Result<Self, KgError> {
        if datatype.is_some() && language.is_some() {
            return Err(KgError::DatatypeAndLanguage);
        }
        Ok(Literal { lexical_form: lexical_form.into(), datatype, language })
    }

    pub fn simple(lexical_form: impl Into<String>) -> Self {
        Literal { lexical_form: lexical_form.into(), datatype: None, language: None }
    }

    pub fn typed(lexical_form: impl Into<String>, datatype: Iri) -> Self {
        Literal { lexical_form: lexical_form.into(), datatype: Some(datatype), language: None }
    }

    pub fn lang(lexical_form: impl Into<String>, language: impl Into<String>) -> Self {
        Literal { lexical_form: lexical_form.into(), datatype: None, language: Some(language.into()) }
    }

    pub fn lexical_form(&self) -> &str {
        &self.lexical_form
    }

    pub fn datatype(&self) -> Option<&Iri> {
        self.datatype.as_ref()
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("\"")?;
        ntriples::write_escaped(f, &self.lexical_form)?;
        f.write_str("\"")?;
        if let Some(dt) = &self.datatype {
            write!(f, "^^{dt}")?;
        } else if let Some(lang) = &self.language {
            write!(f, "@{lang}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Term {
    Iri { value: Iri },
    Literal { value: Literal },
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri { value } => Some(value),
            Term::Literal { .. } => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal { value } => Some(value),
            Term::Iri { .. } => None,
        }
    }
}

impl From<Iri> for Term {
    fn from(value: Iri) -> Self {
        Term::Iri { value }
    }
}

impl From<Literal> for Term {
    fn from(value: Literal) -> Self {
        Term::Literal { value }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri { value } => value.fmt(f),
            Term::Literal { value } => value.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple { subject, predicate, object: object.into() }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// Which predicates feed the label index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    pub label_predicate: Iri,
    /// Extra surface forms, e.g. `skos:altLabel "Tesla"` for `dbr:Nikola_Tesla`.
    pub alt_label_predicates: Vec<Iri>,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { label_predicate: vocab::rdfs_label(), alt_label_predicates: vec![vocab::skos_alt_label()] }
    }
}

impl GraphOptions {
    pub fn is_label_predicate(&self, iri: &Iri) -> bool {
        *iri == self.label_predicate || self.alt_label_predicates.contains(iri)
    }
}

pub(crate) type TermId = u32;
type Key = (TermId, TermId, TermId);

/// Lower-case, collapse internal whitespace, strip surrounding punctuation.
pub fn normalize_surface(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Graph {
    terms: Vec<Term>,
    ids: HashMap<Term, TermId>,
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
    labels: HashMap<String, BTreeSet<Iri>>,
    options: GraphOptions,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new(GraphOptions::default())
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.options == other.options && self.len() == other.len() && self.triples().all(|t| other.contains(&t))
    }
}

impl Eq for Graph {}

impl Graph {
    pub fn new(options: GraphOptions) -> Self {
        Graph {
            terms: Vec::new(),
            ids: HashMap::new(),
            spo: BTreeSet::new(),
            pos: BTreeSet::new(),
            osp: BTreeSet::new(),
            labels: HashMap::new(),
            options,
        }
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>, options: GraphOptions) -> Self {
        let mut graph = Graph::new(options);
        for triple in triples {
            graph.insert(triple);
        }
        graph
    }

    /// Parses an N-Triples document with the default label predicates.
    pub fn load_ntriples(text: &str) -> Result<Self, KgError> {
        Self::load_ntriples_with(text, GraphOptions::default())
    }

    pub fn load_ntriples_with(text: &str, options: GraphOptions) -> Result<Self, KgError> {
        Ok(Graph::from_triples(parse_ntriples(text)?, options))
    }

    fn intern(&mut self, term: Term) -> TermId {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = TermId::try_from(self.terms.len()).expect("term dictionary overflow");
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }

    fn insert(&mut self, triple: Triple) {
        if self.options.is_label_predicate(&triple.predicate) {
            if let Term::Literal { value } = &triple.object {
                let key = normalize_surface(value.lexical_form());
                if !key.is_empty() {
                    self.labels.entry(key).or_default().insert(triple.subject.clone());
                }
            }
        }
        let s = self.intern(triple.subject.into());
        let p = self.intern(triple.predicate.into());
        let o = self.intern(triple.object);
        if self.spo.insert((s, p, o)) {
            self.pos.insert((p, o, s));
            self.osp.insert((o, s, p));
        }
    }

    pub fn options(&self) -> &GraphOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    pub(crate) fn term(&self, id: TermId) -> &Term {
        &self.terms[id as usize]
    }

    pub(crate) fn term_id(&self, term: &Term) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    fn decode(&self, (s, p, o): Key) -> Triple {
        let subject = self.term(s).as_iri().expect("subject is an IRI").clone();
        let predicate = self.term(p).as_iri().expect("predicate is an IRI").clone();
        Triple { subject, predicate, object: self.term(o).clone() }
    }

    /// Triples in index order (deterministic for a given load order).
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&k| self.decode(k))
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        let ids = (
            self.term_id(&Term::from(triple.subject.clone())),
            self.term_id(&Term::from(triple.predicate.clone())),
            self.term_id(&triple.object),
        );
        match ids {
            (Some(s), Some(p), Some(o)) => self.spo.contains(&(s, p, o)),
            _ => false,
        }
    }

    /// All `(s, p, o)` id keys matching the bound positions.
    pub(crate) fn match_ids(
        &self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = Key> + '_> {
        const MAX: TermId = TermId::MAX;
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => Box::new(self.spo.contains(&(s, p, o)).then_some((s, p, o)).into_iter()),
            (Some(s), Some(p), None) => Box::new(self.spo.range((s, p, 0)..=(s, p, MAX)).copied()),
            (Some(s), None, None) => Box::new(self.spo.range((s, 0, 0)..=(s, MAX, MAX)).copied()),
            (None, Some(p), Some(o)) => Box::new(self.pos.range((p, o, 0)..=(p, o, MAX)).map(|&(p, o, s)| (s, p, o))),
            (None, Some(p), None) => Box::new(self.pos.range((p, 0, 0)..=(p, MAX, MAX)).map(|&(p, o, s)| (s, p, o))),
            (Some(s), None, Some(o)) => Box::new(self.osp.range((o, s, 0)..=(o, s, MAX)).map(|&(o, s, p)| (s, p, o))),
            (None, None, Some(o)) => Box::new(self.osp.range((o, 0, 0)..=(o, MAX, MAX)).map(|&(o, s, p)| (s, p, o))),
            (None, None, None) => Box::new(self.spo.iter().copied()),
        }
    }

    /// Triples matching a pattern where `None` is a wildcard.
    pub fn matching(&self, subject: Option<&Iri>, predicate: Option<&Iri>, object: Option<&Term>) -> Vec<Triple> {
        let lookup = |t: Option<Term>| -> Result<Option<TermId>, ()> {
            match t {
                None => Ok(None),
                Some(t) => self.term_id(&t).map(Some).ok_or(()),
            }
        };
        let (Ok(s), Ok(p), Ok(o)) = (
            lookup(subject.cloned().map(Term::from)),
            lookup(predicate.cloned().map(Term::from)),
            lookup(object.cloned()),
        ) else {
            return Vec::new();
        };
        self.match_ids(s, p, o).map(|k| self.decode(k)).collect()
    }

    /// Distinct predicates in IRI order.
    pub fn predicates(&self) -> BTreeSet<Iri> {
        let mut out = BTreeSet::new();
        let mut last = None;
        for &(p, _, _) in &self.pos {
            if last != Some(p) {
                out.insert(self.term(p).as_iri().expect("predicate is an IRI").clone());
                last = Some(p);
            }
        }
        out
    }

    /// Lexical forms of every label-predicate literal attached to `iri`.
    pub fn labels_of(&self, iri: &Iri) -> Vec<String> {
        let mut out = Vec::new();
        let preds = std::iter::once(&self.options.label_predicate).chain(self.options.alt_label_predicates.iter());
        for pred in preds {
            for t in self.matching(Some(iri), Some(pred), None) {
                if let Term::Literal { value } = t.object {
                    out.push(value.lexical_form);
                }
            }
        }
        out
    }

    /// IRIs whose normalized label equals the normalized phrase.
    pub fn lookup_surface_form(&self, phrase: &str) -> BTreeSet<Iri> {
        self.labels.get(&normalize_surface(phrase)).cloned().unwrap_or_default()
    }

    /// Longest label measured in whitespace-separated words.
    pub fn max_label_words(&self) -> usize {
        self.labels.keys().map(|k| k.split(' ').count()).max().unwrap_or(0)
    }

    /// Every term that appears anywhere in the graph.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    pub fn to_ntriples(&self) -> String {
        let mut triples: Vec<Triple> = self.triples().collect();
        triples.sort();
        write_ntriples(&triples)
    }
}
