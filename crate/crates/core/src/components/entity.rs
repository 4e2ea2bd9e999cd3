use crate::kg::Graph;
use crate::question::Question;

use super::{longest_matches, ComponentOutput, EntityLink, EntityLinker};

/// Dictionary linker over the graph's label index.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelEntityLinker;

impl EntityLinker for LabelEntityLinker {
    fn name(&self) -> &str {
        "label-linker"
    }

    fn link(&self, question: &Question, graph: &Graph) -> ComponentOutput {
        link_entities(question, graph)
    }
}

/// Greedy longest-match entity linking; ambiguous surface forms resolve to
/// the lexicographically smallest IRI. Labelled predicates are left to the
/// relation linker.
pub fn link_entities(question: &Question, graph: &Graph) -> ComponentOutput {
    let predicates = graph.predicates();
    let hits = longest_matches(&question.tokens, &[], |phrase| {
        graph.lookup_surface_form(phrase).into_iter().find(|iri| !predicates.contains(iri))
    });
    let links =
        hits.into_iter().map(|(span, entity)| EntityLink { score: span.end - span.start, span, entity }).collect();
    ComponentOutput::entities(LabelEntityLinker.name(), links)
}
