//! Benchmark harness: dataset loading with gold answers, per-component
//! evaluation, training-set construction and classifier reports.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{ComponentOutput, Components, Task};
use crate::kg::{evaluate, AnswerSet, Graph, Iri, PatternTerm, PrefixTable, Query};
use crate::outcome::{
    label_example, micro_f1, train, ClassifierKind, OutcomeClass, OutcomeError, Prf, TrainOptions, TrainingExample,
};
use crate::pipeline::StageModels;
use crate::question::{answer_type, extract_features, Question};

pub use report::{
    explanation_stats, report, write_report, ClassifierCell, ComponentRow, EvaluationReport, ExplanationStats,
    ReportOptions,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("dataset is not a JSON array of {{id, question, sparql}} records: {0}")]
    Format(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {0:?} has an empty question")]
    EmptyQuestion(String),
    #[error("{task}: {source}")]
    Training { task: Task, source: OutcomeError },
    #[error(transparent)]
    Pipeline(#[from] crate::pipeline::PipelineError),
}

/// One entry of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub question: String,
    pub sparql: String,
}

/// A retained record with gold data derived from its query.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub sparql: String,
    pub query: Query,
    /// IRIs in subject or object position of the gold query.
    pub gold_entities: BTreeSet<Iri>,
    /// IRIs in predicate position.
    pub gold_predicates: BTreeSet<Iri>,
    pub gold_answers: AnswerSet,
}

impl DatasetRecord {
    pub fn gold_items(&self, task: Task) -> BTreeSet<String> {
        match task {
            Task::Ned => self.gold_entities.iter().map(|i| i.as_str().to_string()).collect(),
            Task::Rl => self.gold_predicates.iter().map(|i| i.as_str().to_string()).collect(),
            Task::Qb => self.gold_answers.items(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub records: Vec<DatasetRecord>,
    pub dropped_empty: Vec<DroppedRecord>,
    pub dropped_unsupported: Vec<DroppedRecord>,
}

impl LoadedDataset {
    pub fn total(&self) -> usize {
        self.records.len() + self.dropped_empty.len() + self.dropped_unsupported.len()
    }
}

/// Blank input is an empty dataset.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetEntry>, BenchError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let entries: Vec<DatasetEntry> = serde_json::from_str(text).map_err(|e| BenchError::Format(e.to_string()))?;
    let mut ids = BTreeSet::new();
    for e in &entries {
        if !ids.insert(e.id.as_str()) {
            return Err(BenchError::DuplicateId(e.id.clone()));
        }
        if e.question.trim().is_empty() {
            return Err(BenchError::EmptyQuestion(e.id.clone()));
        }
    }
    Ok(entries)
}

fn gold_annotations(query: &Query) -> (BTreeSet<Iri>, BTreeSet<Iri>) {
    let mut entities = BTreeSet::new();
    let mut predicates = BTreeSet::new();
    for p in query.patterns() {
        for (pos, term) in p.positions().into_iter().enumerate() {
            if let PatternTerm::Iri(iri) = term {
                if pos == 1 { &mut predicates } else { &mut entities }.insert(iri.clone());
            }
        }
    }
    (entities, predicates)
}

/// Parses every gold query and computes its answers. Queries outside the
/// supported subset and queries with no answer are dropped and counted.
pub fn prepare_dataset(entries: Vec<DatasetEntry>, graph: &Graph, prefixes: &PrefixTable) -> LoadedDataset {
    let mut out = LoadedDataset { records: Vec::new(), dropped_empty: Vec::new(), dropped_unsupported: Vec::new() };
    for e in entries {
        let query = match crate::kg::parse_query(&e.sparql, prefixes) {
            Ok(q) => q,
            Err(err) => {
                out.dropped_unsupported.push(DroppedRecord { id: e.id, reason: err.to_string() });
                continue;
            }
        };
        let gold_answers = evaluate(graph, &query);
        if gold_answers.is_empty() {
            out.dropped_empty.push(DroppedRecord { id: e.id, reason: "gold query returns no answer".into() });
            continue;
        }
        let (gold_entities, gold_predicates) = gold_annotations(&query);
        out.records.push(DatasetRecord {
            id: e.id,
            question: e.question,
            sparql: e.sparql,
            query,
            gold_entities,
            gold_predicates,
            gold_answers,
        });
    }
    out
}

pub fn load_dataset(path: &Path, graph: &Graph, prefixes: &PrefixTable) -> Result<LoadedDataset, BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Ok(prepare_dataset(parse_dataset(&text)?, graph, prefixes))
}

/// Outputs of the three components for one question, plus the executed
/// answer of the built query.
#[derive(Debug, Clone)]
pub struct ComponentRun {
    pub question: Question,
    pub entities: ComponentOutput,
    pub relations: ComponentOutput,
    pub query: ComponentOutput,
    pub answer: Option<AnswerSet>,
}

impl ComponentRun {
    pub fn new(record: &DatasetRecord, graph: &Graph, components: &Components) -> Self {
        let question = Question::new(record.id.clone(), record.question.clone()).expect("non-empty question");
        let entities = components.entity_linker.link(&question, graph);
        let relations = components.relation_linker.link(&question, graph, &entities);
        let query = components.query_builder.build(answer_type(&question), &entities, &relations, graph);
        let answer = query.built_query().map(|q| evaluate(graph, q));
        ComponentRun { question, entities, relations, query, answer }
    }

    pub fn predicted_items(&self, task: Task) -> BTreeSet<String> {
        match task {
            Task::Ned => self.entities.entity_links().iter().map(|l| l.entity.as_str().to_string()).collect(),
            Task::Rl => self.relations.relation_links().iter().map(|l| l.predicate.as_str().to_string()).collect(),
            Task::Qb => self.answer.as_ref().map(AnswerSet::items).unwrap_or_default(),
        }
    }

    /// Query building counts as empty when no query was built or its
    /// execution returned no rows.
    pub fn is_empty(&self, task: Task) -> bool {
        match task {
            Task::Ned => self.entities.is_empty(),
            Task::Rl => self.relations.is_empty(),
            Task::Qb => self.answer.as_ref().is_none_or(AnswerSet::is_empty),
        }
    }
}

pub fn run_components(records: &[DatasetRecord], graph: &Graph, components: &Components) -> Vec<ComponentRun> {
    records.iter().map(|r| ComponentRun::new(r, graph, components)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub id: String,
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEvaluation {
    pub task: Task,
    pub per_question: Vec<QuestionScore>,
    /// Records whose gold set for this task is empty and were skipped.
    pub skipped: usize,
    pub macro_average: Prf,
}

/// Per-question micro P/R/F against the gold set of the task, averaged over
/// questions.
pub fn evaluate_component(records: &[DatasetRecord], runs: &[ComponentRun], task: Task) -> ComponentEvaluation {
    let mut per_question = Vec::new();
    let mut skipped = 0;
    for (record, run) in records.iter().zip(runs) {
        match micro_f1(&run.predicted_items(task), &record.gold_items(task)) {
            Ok(scores) => per_question.push(QuestionScore { id: record.id.clone(), scores }),
            Err(_) => skipped += 1,
        }
    }
    let n = per_question.len().max(1) as f64;
    let sum = |f: fn(&Prf) -> f64| per_question.iter().map(|q| f(&q.scores)).sum::<f64>() / n;
    let macro_average = Prf { precision: sum(|p| p.precision), recall: sum(|p| p.recall), f: sum(|p| p.f) };
    ComponentEvaluation { task, per_question, skipped, macro_average }
}

/// One labelled example per record with a non-empty gold set for the task.
pub fn build_training_set(records: &[DatasetRecord], runs: &[ComponentRun], task: Task) -> Vec<TrainingExample> {
    records
        .iter()
        .zip(runs)
        .filter_map(|(record, run)| {
            let gold = record.gold_items(task);
            let f = micro_f1(&run.predicted_items(task), &gold).ok()?.f;
            let label = label_example(run.is_empty(task), Some(&gold), f).ok()?;
            Some(TrainingExample {
                question_id: record.id.clone(),
                features: extract_features(&run.question),
                label,
                f_score: f,
            })
        })
        .collect()
}

pub fn label_distribution(examples: &[TrainingExample]) -> BTreeMap<OutcomeClass, usize> {
    let mut out: BTreeMap<OutcomeClass, usize> = OutcomeClass::ALL.iter().map(|&c| (c, 0)).collect();
    for e in examples {
        *out.entry(e.label).or_default() += 1;
    }
    out
}

/// Trains one model of `kind` per task with the default grid.
pub fn train_stage_models(
    records: &[DatasetRecord],
    runs: &[ComponentRun],
    kind: ClassifierKind,
    options: TrainOptions,
) -> Result<StageModels, BenchError> {
    let fit = |task: Task| {
        let examples = build_training_set(records, runs, task);
        train(kind, task, &examples, &kind.default_grid(), options)
            .map_err(|source| BenchError::Training { task, source })
    };
    Ok(StageModels::new(fit(Task::Ned)?, fit(Task::Rl)?, fit(Task::Qb)?)?)
}

/// Shared handles for [`report`] and [`explanation_stats`].
#[derive(Debug, Clone)]
pub struct BenchContext {
    pub graph: Arc<Graph>,
    pub components: Arc<Components>,
    pub prefixes: PrefixTable,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_parsing() {
        assert!(parse_dataset("").unwrap().is_empty());
        assert!(parse_dataset("[]").unwrap().is_empty());
        let dup = r#"[{"id":"1","question":"a?","sparql":"ASK {}"},{"id":"1","question":"b?","sparql":"ASK {}"}]"#;
        assert!(matches!(parse_dataset(dup), Err(BenchError::DuplicateId(_))));
        let extra = r#"[{"id":"1","question":"a?","sparql":"ASK {}","x":1}]"#;
        assert!(matches!(parse_dataset(extra), Err(BenchError::Format(_))));
    }

    #[test]
    fn gold_annotations_split_positions() {
        let q = crate::kg::parse_query(
            "SELECT ?x WHERE { dbr:Finland dbo:capital ?x . ?x dbo:country dbr:Finland }",
            &PrefixTable::well_known(),
        )
        .unwrap();
        let (e, p) = gold_annotations(&q);
        assert_eq!(e.len(), 1);
        assert_eq!(p.iter().map(|i| i.local_name()).collect::<Vec<_>>(), ["capital", "country"]);
    }
}
