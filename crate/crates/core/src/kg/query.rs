//! Conjunctive ASK/SELECT queries over basic graph patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Graph, Iri, Literal, Term, TermId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query has no triple patterns")]
    NoPatterns,
    #[error("ASK queries have no projection")]
    AskWithProjection,
    #[error("SELECT needs at least one projected variable")]
    EmptyProjection,
    #[error("projected variable ?{0} does not occur in any pattern")]
    UnboundProjection(String),
    #[error("invalid variable name {0:?}")]
    InvalidVariable(String),
}

/// A variable name without the leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self, QueryError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(QueryError::InvalidVariable(name));
        }
        Ok(Variable(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Variable {
    type Error = QueryError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Variable::new(value)
    }
}

impl From<Variable> for String {
    fn from(v: Variable) -> Self {
        v.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum PatternTerm {
    Iri(Iri),
    Literal(Literal),
    Variable(Variable),
}

impl PatternTerm {
    pub fn as_variable(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Variable(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            PatternTerm::Iri(i) => Some(i),
            _ => None,
        }
    }

    fn constant(&self) -> Option<Term> {
        match self {
            PatternTerm::Iri(i) => Some(i.clone().into()),
            PatternTerm::Literal(l) => Some(l.clone().into()),
            PatternTerm::Variable(_) => None,
        }
    }
}

impl From<Iri> for PatternTerm {
    fn from(i: Iri) -> Self {
        PatternTerm::Iri(i)
    }
}

impl From<Variable> for PatternTerm {
    fn from(v: Variable) -> Self {
        PatternTerm::Variable(v)
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        match t {
            Term::Iri { value } => PatternTerm::Iri(value),
            Term::Literal { value } => PatternTerm::Literal(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<PatternTerm>,
        predicate: impl Into<PatternTerm>,
        object: impl Into<PatternTerm>,
    ) -> Self {
        TriplePattern { subject: subject.into(), predicate: predicate.into(), object: object.into() }
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.positions().into_iter().filter_map(PatternTerm::as_variable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryForm {
    Ask,
    Select,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "QueryRepr")]
pub struct Query {
    form: QueryForm,
    projection: Vec<Variable>,
    patterns: Vec<TriplePattern>,
}

#[derive(Deserialize)]
struct QueryRepr {
    form: QueryForm,
    projection: Vec<Variable>,
    patterns: Vec<TriplePattern>,
}

impl TryFrom<QueryRepr> for Query {
    type Error = QueryError;

    fn try_from(r: QueryRepr) -> Result<Self, Self::Error> {
        Query::new(r.form, r.projection, r.patterns)
    }
}

impl Query {
    pub fn new(form: QueryForm, projection: Vec<Variable>, patterns: Vec<TriplePattern>) -> Result<Self, QueryError> {
        if patterns.is_empty() {
            return Err(QueryError::NoPatterns);
        }
        match form {
            QueryForm::Ask if !projection.is_empty() => return Err(QueryError::AskWithProjection),
            QueryForm::Select if projection.is_empty() => return Err(QueryError::EmptyProjection),
            _ => {}
        }
        for v in &projection {
            if !patterns.iter().any(|p| p.variables().any(|pv| pv == v)) {
                return Err(QueryError::UnboundProjection(v.0.clone()));
            }
        }
        Ok(Query { form, projection, patterns })
    }

    pub fn ask(patterns: Vec<TriplePattern>) -> Result<Self, QueryError> {
        Query::new(QueryForm::Ask, Vec::new(), patterns)
    }

    pub fn select(projection: Vec<Variable>, patterns: Vec<TriplePattern>) -> Result<Self, QueryError> {
        Query::new(QueryForm::Select, projection, patterns)
    }

    pub fn form(&self) -> QueryForm {
        self.form
    }

    pub fn projection(&self) -> &[Variable] {
        &self.projection
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }

    /// Distinct variables in order of first occurrence.
    pub fn variables(&self) -> Vec<Variable> {
        let mut out: Vec<Variable> = Vec::new();
        for v in self.patterns.iter().flat_map(TriplePattern::variables) {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }
}

/// Result of evaluating a [`Query`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum AnswerSet {
    Ask { value: bool },
    Select { variables: Vec<Variable>, rows: BTreeSet<Vec<Term>> },
}

impl AnswerSet {
    /// `false` is an answer; only a SELECT without rows is empty.
    pub fn is_empty(&self) -> bool {
        match self {
            AnswerSet::Ask { .. } => false,
            AnswerSet::Select { rows, .. } => rows.is_empty(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnswerSet::Ask { .. } => 1,
            AnswerSet::Select { rows, .. } => rows.len(),
        }
    }

    pub fn bindings(&self) -> Vec<BTreeMap<Variable, Term>> {
        match self {
            AnswerSet::Ask { .. } => Vec::new(),
            AnswerSet::Select { variables, rows } => {
                rows.iter().map(|row| variables.iter().cloned().zip(row.iter().cloned()).collect()).collect()
            }
        }
    }

    /// Answers as comparable strings, independent of variable names.
    pub fn items(&self) -> BTreeSet<String> {
        match self {
            AnswerSet::Ask { value } => BTreeSet::from([value.to_string()]),
            AnswerSet::Select { rows, .. } => {
                rows.iter().map(|row| row.iter().map(Term::to_string).collect::<Vec<_>>().join(" ")).collect()
            }
        }
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerSet::Ask { value } => write!(f, "{value}"),
            AnswerSet::Select { .. } => {
                let items: Vec<String> = self.items().into_iter().collect();
                write!(f, "{}", items.join(", "))
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Const(TermId),
    Var(usize),
}

struct Plan {
    patterns: Vec<[Slot; 3]>,
    var_count: usize,
}

fn compile(graph: &Graph, query: &Query, vars: &[Variable]) -> Option<Plan> {
    let mut patterns = Vec::with_capacity(query.patterns.len());
    for p in &query.patterns {
        let mut slots = [Slot::Var(0); 3];
        for (slot, pos) in slots.iter_mut().zip(p.positions()) {
            *slot = match pos {
                PatternTerm::Variable(v) => Slot::Var(vars.iter().position(|x| x == v).expect("variable collected")),
                // a constant unknown to the graph can never match
                other => Slot::Const(graph.term_id(&other.constant().expect("constant"))?),
            };
        }
        patterns.push(slots);
    }
    Some(Plan { patterns, var_count: vars.len() })
}

struct Solver<'g> {
    graph: &'g Graph,
    plan: Plan,
    bound: Vec<Option<TermId>>,
    done: Vec<bool>,
}

impl Solver<'_> {
    fn resolve(&self, slot: Slot) -> Option<TermId> {
        match slot {
            Slot::Const(id) => Some(id),
            Slot::Var(v) => self.bound[v],
        }
    }

    /// Most-bound remaining pattern first; ties keep query order.
    fn next_pattern(&self) -> Option<usize> {
        (0..self.plan.patterns.len()).filter(|&i| !self.done[i]).max_by_key(|&i| {
            let bound = self.plan.patterns[i].iter().filter(|&&s| self.resolve(s).is_some()).count();
            (bound, std::cmp::Reverse(i))
        })
    }

    /// Calls `emit` for each solution; stops early when `emit` returns false.
    fn solve(&mut self, emit: &mut dyn FnMut(&[Option<TermId>]) -> bool) -> bool {
        let Some(i) = self.next_pattern() else {
            return emit(&self.bound);
        };
        let slots = self.plan.patterns[i];
        let [s, p, o] = slots.map(|slot| self.resolve(slot));
        let matches: Vec<_> = self.graph.match_ids(s, p, o).collect();
        self.done[i] = true;
        for (ks, kp, ko) in matches {
            let mut newly = Vec::new();
            let mut consistent = true;
            for (slot, value) in slots.iter().zip([ks, kp, ko]) {
                if let Slot::Var(v) = *slot {
                    match self.bound[v] {
                        Some(existing) if existing != value => {
                            consistent = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            self.bound[v] = Some(value);
                            newly.push(v);
                        }
                    }
                }
            }
            let keep_going = !consistent || self.solve(emit);
            for v in newly {
                self.bound[v] = None;
            }
            if !keep_going {
                self.done[i] = false;
                return false;
            }
        }
        self.done[i] = false;
        true
    }
}

/// Evaluates `query` with set semantics (SELECT rows are distinct).
pub fn evaluate(graph: &Graph, query: &Query) -> AnswerSet {
    let vars = query.variables();
    let empty = || match query.form {
        QueryForm::Ask => AnswerSet::Ask { value: false },
        QueryForm::Select => AnswerSet::Select { variables: query.projection.clone(), rows: BTreeSet::new() },
    };
    let Some(plan) = compile(graph, query, &vars) else {
        return empty();
    };
    let mut solver = Solver { graph, bound: vec![None; plan.var_count], done: vec![false; plan.patterns.len()], plan };
    match query.form {
        QueryForm::Ask => {
            let mut found = false;
            solver.solve(&mut |_| {
                found = true;
                false
            });
            AnswerSet::Ask { value: found }
        }
        QueryForm::Select => {
            let cols: Vec<usize> = query
                .projection
                .iter()
                .map(|v| vars.iter().position(|x| x == v).expect("projection validated"))
                .collect();
            let mut rows = BTreeSet::new();
            solver.solve(&mut |bound| {
                rows.insert(cols.iter().map(|&c| graph.term(bound[c].expect("all variables bound")).clone()).collect());
                true
            });
            AnswerSet::Select { variables: query.projection.clone(), rows }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Iri {
        Iri::new(format!("http://dbpedia.org/{s}")).unwrap()
    }

    fn var(s: &str) -> Variable {
        Variable::new(s).unwrap()
    }

    fn tesla_graph() -> Graph {
        Graph::from_triples(
            [
                super::super::Triple::new(
                    iri("resource/Nikola_Tesla"),
                    iri("ontology/award"),
                    iri("resource/Nobel_Prize_in_Physics"),
                ),
                super::super::Triple::new(
                    iri("resource/Albert_Einstein"),
                    iri("ontology/award"),
                    iri("resource/Nobel_Prize_in_Physics"),
                ),
            ],
            Default::default(),
        )
    }

    #[test]
    fn ask_worked_example_is_true() {
        let q = Query::ask(vec![TriplePattern::new(
            iri("resource/Nikola_Tesla"),
            iri("ontology/award"),
            iri("resource/Nobel_Prize_in_Physics"),
        )])
        .unwrap();
        assert_eq!(evaluate(&tesla_graph(), &q), AnswerSet::Ask { value: true });
    }

    #[test]
    fn absent_predicate_gives_empty_select() {
        let q =
            Query::select(vec![var("x")], vec![TriplePattern::new(var("x"), iri("ontology/nope"), var("y"))]).unwrap();
        let ans = evaluate(&tesla_graph(), &q);
        assert!(ans.is_empty());
        assert_eq!(ans.len(), 0);
    }

    #[test]
    fn join_on_shared_variable() {
        let q = Query::select(
            vec![var("a"), var("b")],
            vec![
                TriplePattern::new(var("a"), iri("ontology/award"), var("prize")),
                TriplePattern::new(var("b"), iri("ontology/award"), var("prize")),
            ],
        )
        .unwrap();
        // 2 winners of the same prize: all 4 ordered pairs
        assert_eq!(evaluate(&tesla_graph(), &q).len(), 4);
    }

    #[test]
    fn repeated_variable_within_pattern() {
        let g = Graph::from_triples(
            [
                super::super::Triple::new(iri("r/a"), iri("o/p"), iri("r/a")),
                super::super::Triple::new(iri("r/a"), iri("o/p"), iri("r/b")),
            ],
            Default::default(),
        );
        let q = Query::select(vec![var("x")], vec![TriplePattern::new(var("x"), iri("o/p"), var("x"))]).unwrap();
        let rows = evaluate(&g, &q).bindings();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][&var("x")], Term::from(iri("r/a")));
    }

    #[test]
    fn query_invariants() {
        let pat = TriplePattern::new(var("x"), iri("o/p"), var("y"));
        assert_eq!(Query::ask(vec![]), Err(QueryError::NoPatterns));
        assert_eq!(Query::new(QueryForm::Ask, vec![var("x")], vec![pat.clone()]), Err(QueryError::AskWithProjection));
        assert_eq!(Query::select(vec![], vec![pat.clone()]), Err(QueryError::EmptyProjection));
        assert_eq!(Query::select(vec![var("z")], vec![pat]), Err(QueryError::UnboundProjection("z".into())));
        assert!(Variable::new("bad name").is_err());
    }

    #[test]
    fn answer_items_ignore_variable_names() {
        let g = tesla_graph();
        let q1 = Query::select(
            vec![var("x")],
            vec![TriplePattern::new(var("x"), iri("ontology/award"), iri("resource/Nobel_Prize_in_Physics"))],
        )
        .unwrap();
        let q2 =
            Query::select(vec![var("uri")], vec![TriplePattern::new(var("uri"), iri("ontology/award"), var("any"))])
                .unwrap();
        assert_eq!(evaluate(&g, &q1).items(), evaluate(&g, &q2).items());
        assert_eq!(AnswerSet::Ask { value: false }.items(), BTreeSet::from(["false".to_string()]));
    }
}
