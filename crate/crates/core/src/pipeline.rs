//! Runs entity linking, relation linking and query building for a question,
//! predicts each stage's outcome and explains it.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{ComponentOutput, Components, Task};
use crate::explain::{Explanation, TemplateRepository};
use crate::kg::{evaluate, AnswerSet, Graph, PrefixTable};
use crate::outcome::{ClassifierModel, OutcomeClass, Prediction};
use crate::question::{answer_type, extract_features, FeatureVector, PosTag, Question};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("model for {expected} is trained for {found}")]
    WrongTask { expected: Task, found: Task },
    #[error("the three stage models use different feature schemas")]
    SchemaDisagreement,
    #[error("{0}")]
    Model(String),
}

/// One trained outcome model per task.
#[derive(Debug, Clone)]
pub struct StageModels {
    pub ned: Arc<ClassifierModel>,
    pub rl: Arc<ClassifierModel>,
    pub qb: Arc<ClassifierModel>,
}

impl StageModels {
    pub fn new(ned: ClassifierModel, rl: ClassifierModel, qb: ClassifierModel) -> Result<Self, PipelineError> {
        let models = StageModels { ned: Arc::new(ned), rl: Arc::new(rl), qb: Arc::new(qb) };
        for task in Task::ALL {
            let found = models.get(task).task;
            if found != task {
                return Err(PipelineError::WrongTask { expected: task, found });
            }
        }
        if models.ned.schema != models.rl.schema || models.rl.schema != models.qb.schema {
            return Err(PipelineError::SchemaDisagreement);
        }
        Ok(models)
    }

    /// File name of a task's model inside a models directory.
    pub fn file_name(task: Task) -> String {
        format!("{}.json", task.code())
    }

    /// Loads `ned.json`, `rl.json` and `qb.json` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PipelineError> {
        let load = |task| {
            ClassifierModel::load(&dir.join(Self::file_name(task))).map_err(|e| PipelineError::Model(e.to_string()))
        };
        Self::new(load(Task::Ned)?, load(Task::Rl)?, load(Task::Qb)?)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        for task in Task::ALL {
            self.get(task).save(&dir.join(Self::file_name(task))).map_err(|e| PipelineError::Model(e.to_string()))?;
        }
        Ok(())
    }

    pub fn get(&self, task: Task) -> &ClassifierModel {
        match task {
            Task::Ned => &self.ned,
            Task::Rl => &self.rl,
            Task::Qb => &self.qb,
        }
    }
}

/// Everything a run needs; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub graph: Arc<Graph>,
    pub components: Arc<Components>,
    pub models: StageModels,
    pub templates: Arc<TemplateRepository>,
    pub prefixes: PrefixTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub task: Task,
    pub stage: String,
    pub output: ComponentOutput,
    /// True when the stage produced nothing usable. For query building
    /// this includes a query whose execution returned no rows.
    pub empty: bool,
    pub prediction: Prediction,
    /// The predicted class, or the class implied by emptiness when the two
    /// disagree.
    pub outcome_class: OutcomeClass,
    pub mismatch: bool,
    pub explanations: Vec<Explanation>,
}

/// Wall-clock time per stage in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ned_us: u64,
    pub rl_us: u64,
    pub qb_us: u64,
    pub execute_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub question: Question,
    pub features: FeatureVector,
    /// Always NED, RL, QB.
    pub stages: Vec<StageRecord>,
    /// Present exactly when a query was built.
    pub final_answer: Option<AnswerSet>,
    pub timings: StageTimings,
}

impl PipelineTrace {
    pub fn stage(&self, task: Task) -> &StageRecord {
        self.stages.iter().find(|s| s.task == task).expect("trace holds every stage")
    }

    /// The trace with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> PipelineTrace {
        PipelineTrace { timings: StageTimings::default(), ..self.clone() }
    }

    /// Removes explanation texts, leaving the answer and predicted classes.
    pub fn strip_explanations(&mut self) {
        for s in &mut self.stages {
            s.explanations.clear();
        }
    }
}

/// Stage explanations in NED, RL, QB order.
pub fn explanation_flow(trace: &PipelineTrace) -> Vec<&Explanation> {
    trace.stages.iter().flat_map(|s| &s.explanations).collect()
}

/// Emptiness wins over the classifier: an empty output is NoAnswer, and a
/// non-empty output predicted NoAnswer becomes the likelier of Success and
/// WrongAnswer (ties to Success).
pub fn reconcile(prediction: &Prediction, empty: bool) -> (OutcomeClass, bool) {
    let p = &prediction.probabilities;
    match (empty, prediction.class) {
        (true, OutcomeClass::NoAnswer) => (OutcomeClass::NoAnswer, false),
        (true, _) => (OutcomeClass::NoAnswer, true),
        (false, OutcomeClass::NoAnswer) => {
            let class = if p[OutcomeClass::Success.index()] >= p[OutcomeClass::WrongAnswer.index()] {
                OutcomeClass::Success
            } else {
                OutcomeClass::WrongAnswer
            };
            (class, true)
        }
        (false, class) => (class, false),
    }
}

fn micros(start: Instant) -> u64 {
    start.elapsed().as_micros().try_into().unwrap_or(u64::MAX)
}

impl PipelineConfig {
    fn stage(&self, output: ComponentOutput, empty: bool, features: &FeatureVector, tags: &[PosTag]) -> StageRecord {
        let task = output.task();
        let prediction = self.models.get(task).predict_values(&features.as_f64());
        let (class, mismatch) = reconcile(&prediction, empty);
        let explanations = self.templates.explain(class, &output, tags, &self.prefixes, mismatch).unwrap_or_else(|e| {
            vec![Explanation {
                task,
                outcome_class: class,
                template_id: String::new(),
                text: format!(
                    "The {} step ended with outcome {class}, but no template could describe it ({e}).",
                    task.stage_name()
                ),
                mismatch,
            }]
        });
        StageRecord {
            task,
            stage: task.stage_name().to_string(),
            output,
            empty,
            prediction,
            outcome_class: class,
            mismatch,
            explanations,
        }
    }

    /// Never fails once the question is non-empty: every failure becomes a
    /// NoAnswer or WrongAnswer explanation.
    pub fn answer_question(&self, text: &str) -> Result<PipelineTrace, PipelineError> {
        let question = Question::from_text(text).ok_or(PipelineError::EmptyQuestion)?;
        let features = extract_features(&question);
        let tags = question.pos_tags();
        let graph = &self.graph;
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let entities = self.components.entity_linker.link(&question, graph);
        timings.ned_us = micros(t);

        let t = Instant::now();
        let relations = self.components.relation_linker.link(&question, graph, &entities);
        timings.rl_us = micros(t);

        let t = Instant::now();
        let built = self.components.query_builder.build(answer_type(&question), &entities, &relations, graph);
        timings.qb_us = micros(t);

        let t = Instant::now();
        let final_answer = built.built_query().map(|q| evaluate(graph, q));
        timings.execute_us = micros(t);

        let qb_empty = final_answer.as_ref().is_none_or(AnswerSet::is_empty);
        let stages = vec![
            self.stage(entities.clone(), entities.is_empty(), &features, &tags),
            self.stage(relations.clone(), relations.is_empty(), &features, &tags),
            self.stage(built, qb_empty, &features, &tags),
        ];
        Ok(PipelineTrace { question, features, stages, final_answer, timings })
    }
}
