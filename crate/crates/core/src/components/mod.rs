//! The three pipeline tasks and local stand-in components for each.
//!
//! Every component consumes the previous stage's output and produces a
//! [`ComponentOutput`]. The query builder deliberately sees only the linked
//! entities, relations and the expected answer type, never the raw text.

mod entity;
mod query_builder;
mod relation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kg::{Graph, Iri, Query};
use crate::question::{AnswerType, PosTag, Question};

pub use entity::{link_entities, LabelEntityLinker};
pub use query_builder::{build_query, candidate_patterns, RankedQueryBuilder};
pub use relation::{link_relations, parse_synonyms, LexiconRelationLinker, RelationLexicon, SynonymError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "NED")]
    Ned,
    #[serde(rename = "RL")]
    Rl,
    #[serde(rename = "QB")]
    Qb,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Ned, Task::Rl, Task::Qb];

    pub fn code(self) -> &'static str {
        match self {
            Task::Ned => "ned",
            Task::Rl => "rl",
            Task::Qb => "qb",
        }
    }

    pub fn stage_name(self) -> &'static str {
        match self {
            Task::Ned => "Entity Linking",
            Task::Rl => "Relation Linking",
            Task::Qb => "Query Building",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ned => "NED",
            Task::Rl => "RL",
            Task::Qb => "QB",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ned" | "el" => Ok(Task::Ned),
            "rl" => Ok(Task::Rl),
            "qb" => Ok(Task::Qb),
            _ => Err(format!("unknown task {s:?} (expected ned, rl or qb)")),
        }
    }
}

/// Half-open token range `[start, end)` with the text it covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl TokenSpan {
    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// PROPN or NOUN, whichever is more frequent among the covered tokens;
    /// `None` when neither occurs.
    pub fn dominant_pos(&self, tags: &[PosTag]) -> Option<PosTag> {
        let covered = tags.get(self.start..self.end.min(tags.len())).unwrap_or(&[]);
        let propn = covered.iter().filter(|&&t| t == PosTag::Propn).count();
        let noun = covered.iter().filter(|&&t| t == PosTag::Noun).count();
        match (propn, noun) {
            (0, 0) => None,
            (p, n) if p >= n => Some(PosTag::Propn),
            _ => Some(PosTag::Noun),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityLink {
    pub span: TokenSpan,
    pub entity: Iri,
    /// Length of the matched span in tokens.
    pub score: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationLink {
    pub span: TokenSpan,
    pub predicate: Iri,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum Payload {
    Entities(Vec<EntityLink>),
    Relations(Vec<RelationLink>),
    Query(Option<Query>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentOutput {
    task: Task,
    component: String,
    payload: Payload,
    empty: bool,
}

impl ComponentOutput {
    pub fn entities(component: impl Into<String>, links: Vec<EntityLink>) -> Self {
        let empty = links.is_empty();
        ComponentOutput { task: Task::Ned, component: component.into(), payload: Payload::Entities(links), empty }
    }

    pub fn relations(component: impl Into<String>, links: Vec<RelationLink>) -> Self {
        let empty = links.is_empty();
        ComponentOutput { task: Task::Rl, component: component.into(), payload: Payload::Relations(links), empty }
    }

    pub fn query(component: impl Into<String>, query: Option<Query>) -> Self {
        let empty = query.is_none();
        ComponentOutput { task: Task::Qb, component: component.into(), payload: Payload::Query(query), empty }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn component(&self) -> &str {
        &self.component
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Number of output items: links for NED/RL, 0 or 1 for QB.
    pub fn arity(&self) -> usize {
        match &self.payload {
            Payload::Entities(v) => v.len(),
            Payload::Relations(v) => v.len(),
            Payload::Query(q) => usize::from(q.is_some()),
        }
    }

    pub fn entity_links(&self) -> &[EntityLink] {
        match &self.payload {
            Payload::Entities(v) => v,
            _ => &[],
        }
    }

    pub fn relation_links(&self) -> &[RelationLink] {
        match &self.payload {
            Payload::Relations(v) => v,
            _ => &[],
        }
    }

    pub fn built_query(&self) -> Option<&Query> {
        match &self.payload {
            Payload::Query(q) => q.as_ref(),
            _ => None,
        }
    }

    /// Surface spans of the linked items, in output order.
    pub fn spans(&self) -> Vec<&TokenSpan> {
        match &self.payload {
            Payload::Entities(v) => v.iter().map(|l| &l.span).collect(),
            Payload::Relations(v) => v.iter().map(|l| &l.span).collect(),
            Payload::Query(_) => Vec::new(),
        }
    }
}

pub trait EntityLinker: Send + Sync {
    fn name(&self) -> &str;
    fn link(&self, question: &Question, graph: &Graph) -> ComponentOutput;
}

pub trait RelationLinker: Send + Sync {
    fn name(&self) -> &str;
    fn link(&self, question: &Question, graph: &Graph, entities: &ComponentOutput) -> ComponentOutput;
}

pub trait QueryBuilder: Send + Sync {
    fn name(&self) -> &str;
    fn build(
        &self,
        answer_type: AnswerType,
        entities: &ComponentOutput,
        relations: &ComponentOutput,
        graph: &Graph,
    ) -> ComponentOutput;
}

/// One component per task.
pub struct Components {
    pub entity_linker: Box<dyn EntityLinker>,
    pub relation_linker: Box<dyn RelationLinker>,
    pub query_builder: Box<dyn QueryBuilder>,
}

impl Components {
    pub fn standard(relation_synonyms: Vec<(String, Iri)>) -> Self {
        Components {
            entity_linker: Box::new(LabelEntityLinker),
            relation_linker: Box::new(LexiconRelationLinker::new(relation_synonyms)),
            query_builder: Box::new(RankedQueryBuilder),
        }
    }
}

impl fmt::Debug for Components {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Components")
            .field("entity_linker", &self.entity_linker.name())
            .field("relation_linker", &self.relation_linker.name())
            .field("query_builder", &self.query_builder.name())
            .finish()
    }
}

/// Joins tokens with spaces, attaching punctuation to the preceding token.
pub(crate) fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for t in tokens {
        let punct = t.chars().all(|c| c.is_ascii_punctuation());
        if !out.is_empty() && !punct {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// Greedy longest match: n-grams from the longest down to single tokens,
/// skipping spans that touch `blocked` or earlier matches, or that begin or
/// end with punctuation. Results are ordered by span start.
pub(crate) fn longest_matches<T>(
    tokens: &[String],
    blocked: &[bool],
    mut lookup: impl FnMut(&str) -> Option<T>,
) -> Vec<(TokenSpan, T)> {
    let is_punct = |t: &String| t.chars().all(|c| c.is_ascii_punctuation());
    let mut taken = blocked.to_vec();
    taken.resize(tokens.len(), false);
    let mut out = Vec::new();
    for n in (1..=tokens.len()).rev() {
        for start in 0..=tokens.len() - n {
            let end = start + n;
            if taken[start..end].iter().any(|&b| b) || is_punct(&tokens[start]) || is_punct(&tokens[end - 1]) {
                continue;
            }
            let text = detokenize(&tokens[start..end]);
            if let Some(hit) = lookup(&text) {
                taken[start..end].iter_mut().for_each(|b| *b = true);
                out.push((TokenSpan { start, end, text }, hit));
            }
        }
    }
    out.sort_by_key(|(span, _)| span.start);
    out
}
