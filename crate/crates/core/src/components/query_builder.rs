use crate::kg::{evaluate, AnswerSet, Graph, Query, TriplePattern, Variable};
use crate::question::AnswerType;

use super::{ComponentOutput, EntityLink, QueryBuilder, RelationLink};

/// Picks the candidate with the most KG-satisfied patterns.
#[derive(Debug, Clone, Copy, Default)]
pub struct RankedQueryBuilder;

impl QueryBuilder for RankedQueryBuilder {
    fn name(&self) -> &str {
        "ranked-query-builder"
    }

    fn build(
        &self,
        answer_type: AnswerType,
        entities: &ComponentOutput,
        relations: &ComponentOutput,
        graph: &Graph,
    ) -> ComponentOutput {
        build_query(answer_type, entities.entity_links(), relations.relation_links(), graph)
    }
}

fn answer_variable() -> Variable {
    Variable::new("x").expect("valid variable name")
}

/// Candidate single-pattern bodies in enumeration order.
///
/// Per relation: for ASK, each adjacent entity pair in both orders; then for
/// every entity, the entity as subject and as object with `?x` opposite.
pub fn candidate_patterns(ask: bool, entities: &[EntityLink], relations: &[RelationLink]) -> Vec<TriplePattern> {
    let x = answer_variable();
    let mut out = Vec::new();
    for rel in relations {
        let p = rel.predicate.clone();
        if ask {
            for pair in entities.windows(2) {
                let (a, b) = (&pair[0].entity, &pair[1].entity);
                out.push(TriplePattern::new(a.clone(), p.clone(), b.clone()));
                out.push(TriplePattern::new(b.clone(), p.clone(), a.clone()));
            }
        }
        for e in entities {
            out.push(TriplePattern::new(e.entity.clone(), p.clone(), x.clone()));
            out.push(TriplePattern::new(x.clone(), p.clone(), e.entity.clone()));
        }
    }
    out
}

fn satisfied_patterns(graph: &Graph, patterns: &[TriplePattern]) -> usize {
    patterns
        .iter()
        .filter(|p| {
            let probe = Query::ask(vec![(*p).clone()]).expect("single pattern ASK is valid");
            evaluate(graph, &probe) == AnswerSet::Ask { value: true }
        })
        .count()
}

/// ASK for boolean questions, otherwise `SELECT ?x`. Empty when there are no
/// entities or no relations.
pub fn build_query(
    answer_type: AnswerType,
    entities: &[EntityLink],
    relations: &[RelationLink],
    graph: &Graph,
) -> ComponentOutput {
    let name = RankedQueryBuilder.name();
    if entities.is_empty() || relations.is_empty() {
        return ComponentOutput::query(name, None);
    }
    let ask = answer_type == AnswerType::Boolean;
    let mut best: Option<(usize, Vec<TriplePattern>)> = None;
    for pattern in candidate_patterns(ask, entities, relations) {
        let body = vec![pattern];
        let hits = satisfied_patterns(graph, &body);
        // strict comparison keeps the earliest candidate among equals
        if best.as_ref().is_none_or(|(h, _)| hits > *h) {
            best = Some((hits, body));
        }
    }
    let query = best.map(|(_, body)| {
        if ask {
            Query::ask(body).expect("non-empty body")
        } else {
            Query::select(vec![answer_variable()], body).expect("?x occurs in every SELECT candidate")
        }
    });
    ComponentOutput::query(name, query)
}

#[cfg(test)]
mod tests {
    use super::super::{link_entities, link_relations, parse_synonyms};
    use super::*;
    use crate::kg::{PrefixTable, QueryForm};
    use crate::question::{answer_type, Question};

    const DOC: &str = r#"
<http://dbpedia.org/resource/Nikola_Tesla> <http://www.w3.org/2004/02/skos/core#altLabel> "Tesla" .
<http://dbpedia.org/resource/Nobel_Prize_in_Physics> <http://www.w3.org/2000/01/rdf-schema#label> "Nobel Prize in Physics"@en .
<http://dbpedia.org/resource/Finland> <http://www.w3.org/2000/01/rdf-schema#label> "Finland"@en .
<http://dbpedia.org/resource/Helsinki> <http://www.w3.org/2000/01/rdf-schema#label> "Helsinki"@en .
<http://dbpedia.org/resource/Nikola_Tesla> <http://dbpedia.org/ontology/award> <http://dbpedia.org/resource/Nobel_Prize_in_Physics> .
<http://dbpedia.org/resource/Finland> <http://dbpedia.org/ontology/capital> <http://dbpedia.org/resource/Helsinki> .
"#;

    fn built(text: &str) -> ComponentOutput {
        let g = Graph::load_ntriples(DOC).unwrap();
        let syn = parse_synonyms("win\thttp://dbpedia.org/ontology/award").unwrap();
        let q = Question::from_text(text).unwrap();
        let ents = link_entities(&q, &g);
        let rels = link_relations(&q, &g, &ents, &syn);
        build_query(answer_type(&q), ents.entity_links(), rels.relation_links(), &g)
    }

    #[test]
    fn worked_example_builds_ask() {
        let out = built("Did Tesla win a nobel prize in physics?");
        let q = out.built_query().unwrap();
        assert_eq!(q.form(), QueryForm::Ask);
        assert_eq!(
            PrefixTable::default().render_query(q),
            "ASK { dbr:Nikola_Tesla dbo:award dbr:Nobel_Prize_in_Physics . }"
        );
    }

    #[test]
    fn capital_question_builds_select() {
        // candidates: ⟨Finland capital ?x⟩ (1 hit), ⟨?x capital Finland⟩ (0 hits)
        let out = built("What is the capital of Finland?");
        assert_eq!(
            PrefixTable::default().render_query(out.built_query().unwrap()),
            "SELECT ?x WHERE { dbr:Finland dbo:capital ?x . }"
        );
    }

    #[test]
    fn no_relations_no_query() {
        let out = built("Did Tesla juggle?");
        assert!(out.is_empty());
        assert_eq!(out.arity(), 0);
    }

    #[test]
    fn enumeration_order() {
        let g = Graph::load_ntriples(DOC).unwrap();
        let syn = parse_synonyms("win\thttp://dbpedia.org/ontology/award").unwrap();
        let q = Question::from_text("Did Tesla win a nobel prize in physics?").unwrap();
        let ents = link_entities(&q, &g);
        let rels = link_relations(&q, &g, &ents, &syn);
        let c = candidate_patterns(true, ents.entity_links(), rels.relation_links());
        assert_eq!(c.len(), 6);
        assert!(c[0].variables().next().is_none());
        assert_eq!(c[1].subject, c[0].object);
        let select = candidate_patterns(false, ents.entity_links(), rels.relation_links());
        assert_eq!(select.len(), 4);
        assert!(select.iter().all(|p| p.variables().count() == 1));
    }
}
