use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::kg::{normalize_surface, vocab, Graph, Iri};
use crate::question::Question;

use super::{longest_matches, ComponentOutput, RelationLink, RelationLinker};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("synonym file line {line}: {message}")]
pub struct SynonymError {
    pub line: usize,
    pub message: String,
}

/// Parses `surface-form<TAB>predicate-IRI` lines; `#` starts a comment
/// line. The IRI may be wrapped in angle brackets.
pub fn parse_synonyms(text: &str) -> Result<Vec<(String, Iri)>, SynonymError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| SynonymError { line: i + 1, message };
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (surface, iri) = line.split_once('\t').ok_or_else(|| err("missing TAB separator".into()))?;
        let surface = surface.trim();
        if normalize_surface(surface).is_empty() {
            return Err(err("empty surface form".into()));
        }
        let iri = iri.trim();
        let iri = iri.strip_prefix('<').and_then(|s| s.strip_suffix('>')).unwrap_or(iri);
        let iri = Iri::new(iri).map_err(|e| err(e.to_string()))?;
        out.push((surface.to_string(), iri));
    }
    Ok(out)
}

/// `birthPlace` → `birth place`.
fn split_camel_case(name: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if c == '_' || c == '-' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        out.extend(c.to_lowercase());
    }
    out
}

/// Normalized surface form → predicates.
#[derive(Debug, Clone, Default)]
pub struct RelationLexicon {
    entries: HashMap<String, BTreeSet<Iri>>,
}

impl RelationLexicon {
    /// Predicate local names, predicate labels, then the synonym table.
    /// Label predicates and `rdf:type` are not relations a question asks
    /// about and are left out.
    pub fn build(graph: &Graph, synonyms: &[(String, Iri)]) -> Self {
        let mut lexicon = RelationLexicon::default();
        let rdf_type = vocab::rdf_type();
        for predicate in graph.predicates() {
            if graph.options().is_label_predicate(&predicate) || predicate == rdf_type {
                continue;
            }
            lexicon.add(&split_camel_case(predicate.local_name()), predicate.clone());
            for label in graph.labels_of(&predicate) {
                lexicon.add(&label, predicate.clone());
            }
        }
        for (surface, predicate) in synonyms {
            lexicon.add(surface, predicate.clone());
        }
        lexicon
    }

    fn add(&mut self, surface: &str, predicate: Iri) {
        let key = normalize_surface(surface);
        if !key.is_empty() {
            self.entries.entry(key).or_default().insert(predicate);
        }
    }

    pub fn lookup(&self, phrase: &str) -> Option<&BTreeSet<Iri>> {
        self.entries.get(&normalize_surface(phrase))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Longest-match relation linker over the tokens not claimed by entities.
#[derive(Debug, Clone, Default)]
pub struct LexiconRelationLinker {
    synonyms: Vec<(String, Iri)>,
}

impl LexiconRelationLinker {
    pub fn new(synonyms: Vec<(String, Iri)>) -> Self {
        LexiconRelationLinker { synonyms }
    }
}

impl RelationLinker for LexiconRelationLinker {
    fn name(&self) -> &str {
        "lexicon-relation-linker"
    }

    fn link(&self, question: &Question, graph: &Graph, entities: &ComponentOutput) -> ComponentOutput {
        link_relations(question, graph, entities, &self.synonyms)
    }
}

pub fn link_relations(
    question: &Question,
    graph: &Graph,
    entities: &ComponentOutput,
    synonyms: &[(String, Iri)],
) -> ComponentOutput {
    let lexicon = RelationLexicon::build(graph, synonyms);
    let mut blocked = vec![false; question.tokens.len()];
    for span in entities.spans() {
        for b in blocked.iter_mut().take(span.end).skip(span.start) {
            *b = true;
        }
    }
    let hits = longest_matches(&question.tokens, &blocked, |phrase| {
        lexicon.lookup(phrase).and_then(|set| set.iter().next().cloned())
    });
    let links = hits.into_iter().map(|(span, predicate)| RelationLink { span, predicate }).collect();
    ComponentOutput::relations("lexicon-relation-linker", links)
}

#[cfg(test)]
mod tests {
    use super::super::link_entities;
    use super::*;

    const DOC: &str = r#"
<http://dbpedia.org/resource/Nikola_Tesla> <http://www.w3.org/2004/02/skos/core#altLabel> "Tesla" .
<http://dbpedia.org/resource/Nobel_Prize_in_Physics> <http://www.w3.org/2000/01/rdf-schema#label> "Nobel Prize in Physics"@en .
<http://dbpedia.org/resource/Finland> <http://www.w3.org/2000/01/rdf-schema#label> "Finland"@en .
<http://dbpedia.org/resource/Nikola_Tesla> <http://dbpedia.org/ontology/award> <http://dbpedia.org/resource/Nobel_Prize_in_Physics> .
<http://dbpedia.org/resource/Finland> <http://dbpedia.org/ontology/capital> <http://dbpedia.org/resource/Helsinki> .
<http://dbpedia.org/resource/Nikola_Tesla> <http://dbpedia.org/ontology/birthPlace> <http://dbpedia.org/resource/Smiljan> .
<http://dbpedia.org/ontology/birthPlace> <http://www.w3.org/2000/01/rdf-schema#label> "place of birth"@en .
"#;

    fn synonyms() -> Vec<(String, Iri)> {
        parse_synonyms("# lexicon\nwin\t<http://dbpedia.org/ontology/award>\nwon\thttp://dbpedia.org/ontology/award\n")
            .unwrap()
    }

    fn relations(text: &str) -> Vec<(String, String)> {
        let g = Graph::load_ntriples(DOC).unwrap();
        let q = Question::from_text(text).unwrap();
        let ents = link_entities(&q, &g);
        link_relations(&q, &g, &ents, &synonyms())
            .relation_links()
            .iter()
            .map(|l| (l.span.text.clone(), l.predicate.local_name().to_string()))
            .collect()
    }

    #[test]
    fn synonym_maps_win_to_award() {
        assert_eq!(relations("Did Tesla win a nobel prize in physics?"), [("win".to_string(), "award".to_string())]);
    }

    #[test]
    fn local_name_maps_capital() {
        assert_eq!(relations("What is the capital of Finland?"), [("capital".to_string(), "capital".to_string())]);
    }

    #[test]
    fn camel_case_and_predicate_labels() {
        assert_eq!(split_camel_case("birthPlace"), "birth place");
        assert_eq!(split_camel_case("populationTotal"), "population total");
        assert_eq!(relations("What is the birth place of Tesla?")[0].1, "birthPlace");
        assert_eq!(relations("What is the place of birth of Tesla?")[0].1, "birthPlace");
    }

    #[test]
    fn unknown_verbs_give_empty_output() {
        let g = Graph::load_ntriples(DOC).unwrap();
        let q = Question::from_text("Did Tesla juggle?").unwrap();
        let ents = link_entities(&q, &g);
        assert!(link_relations(&q, &g, &ents, &synonyms()).is_empty());
    }

    #[test]
    fn label_predicates_are_not_relations() {
        let g = Graph::load_ntriples(DOC).unwrap();
        let lex = RelationLexicon::build(&g, &[]);
        assert!(lex.lookup("label").is_none());
        assert!(lex.lookup("alt label").is_none());
        assert!(lex.lookup("award").is_some());
    }

    #[test]
    fn synonym_file_errors() {
        assert_eq!(parse_synonyms("win award").unwrap_err().line, 1);
        assert!(parse_synonyms("\n?\thttp://x/y").is_err());
        assert!(parse_synonyms("win\tnot an iri").is_err());
    }
}
