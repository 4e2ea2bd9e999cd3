use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    build_training_set, evaluate_component, label_distribution, run_components, BenchContext, BenchError,
    DatasetRecord, DroppedRecord, LoadedDataset,
};
use crate::components::Task;
use crate::explain::{has_unresolved_placeholder, TemplateRepository};
use crate::outcome::{
    cross_validate, fit, ClassifierKind, ClassifierModel, Dataset, OutcomeClass, OutcomeError, TrainOptions, CLASSES,
};
use crate::pipeline::{PipelineConfig, StageModels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub kinds: Vec<ClassifierKind>,
    pub train: TrainOptions,
    /// Upper bound on k; smaller training sets use k = n.
    pub folds: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { kinds: ClassifierKind::ALL.to_vec(), train: TrainOptions::default(), folds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub total: usize,
    pub retained: usize,
    pub dropped_empty: usize,
    pub dropped_unsupported: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub task: Task,
    pub component: String,
    pub questions: usize,
    pub skipped: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCell {
    pub task: Task,
    pub kind: ClassifierKind,
    pub examples: usize,
    pub k: usize,
    pub hyperparameters: String,
    pub mean_accuracy: f64,
    pub macro_accuracy: f64,
    pub fold_accuracy: Vec<f64>,
    pub confusion: [[usize; CLASSES]; CLASSES],
    pub majority_baseline: f64,
    /// Accuracy of the refitted model on its own training set.
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStats {
    pub model_kind: Option<ClassifierKind>,
    pub questions: usize,
    pub explanations: usize,
    pub unresolved_placeholders: usize,
    pub stages_without_explanation: usize,
    pub mismatches: usize,
    pub stage_classes: BTreeMap<Task, BTreeMap<OutcomeClass, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub folds: usize,
    pub counts: RecordCounts,
    pub dropped_empty: Vec<DroppedRecord>,
    pub dropped_unsupported: Vec<DroppedRecord>,
    pub components: Vec<ComponentRow>,
    pub labels: BTreeMap<Task, BTreeMap<OutcomeClass, usize>>,
    pub classifiers: Vec<ClassifierCell>,
    pub explanations: Option<ExplanationStats>,
}

fn training_accuracy(model: &ClassifierModel, data: &Dataset) -> f64 {
    let hits = data.x.iter().zip(&data.y).filter(|(x, y)| model.predict_values(x).class == **y).count();
    hits as f64 / data.len() as f64
}

/// Runs every question through the full pipeline and counts explanations.
pub fn explanation_stats(records: &[DatasetRecord], config: &PipelineConfig) -> Result<ExplanationStats, BenchError> {
    let mut stats = ExplanationStats { questions: records.len(), ..ExplanationStats::default() };
    for r in records {
        let trace = config.answer_question(&r.question)?;
        for stage in &trace.stages {
            stats.explanations += stage.explanations.len();
            stats.unresolved_placeholders +=
                stage.explanations.iter().filter(|e| has_unresolved_placeholder(&e.text)).count();
            stats.stages_without_explanation += usize::from(stage.explanations.is_empty());
            stats.mismatches += usize::from(stage.mismatch);
            *stats.stage_classes.entry(stage.task).or_default().entry(stage.outcome_class).or_default() += 1;
        }
    }
    Ok(stats)
}

/// Component table, cross-validated accuracy for every requested kind and
/// task, and, when templates are given, explanation statistics of a full
/// pipeline run using the first requested kind.
pub fn report(
    data: &LoadedDataset,
    ctx: &BenchContext,
    templates: Option<&Arc<TemplateRepository>>,
    options: &ReportOptions,
) -> Result<EvaluationReport, BenchError> {
    let records = &data.records;
    let runs = run_components(records, &ctx.graph, &ctx.components);

    let components = Task::ALL
        .iter()
        .map(|&task| {
            let eval = evaluate_component(records, &runs, task);
            let run_output = runs.first().map(|r| match task {
                Task::Ned => r.entities.component().to_string(),
                Task::Rl => r.relations.component().to_string(),
                Task::Qb => r.query.component().to_string(),
            });
            ComponentRow {
                task,
                component: run_output.unwrap_or_default(),
                questions: eval.per_question.len(),
                skipped: eval.skipped,
                precision: eval.macro_average.precision,
                recall: eval.macro_average.recall,
                f: eval.macro_average.f,
            }
        })
        .collect();

    let mut labels = BTreeMap::new();
    let mut classifiers = Vec::new();
    let mut first_models: BTreeMap<Task, ClassifierModel> = BTreeMap::new();
    for task in Task::ALL {
        let examples = build_training_set(records, &runs, task);
        labels.insert(task, label_distribution(&examples));
        if options.kinds.is_empty() {
            continue;
        }
        let train_err = |source: OutcomeError| BenchError::Training { task, source };
        let dataset = Dataset::from_examples(task, &examples).map_err(train_err)?;
        let k = options.folds.min(dataset.len());
        for (i, &kind) in options.kinds.iter().enumerate() {
            let cv = cross_validate(kind, &dataset, k, &kind.default_grid(), options.train).map_err(train_err)?;
            let model = fit(kind, &cv.hyperparameters, &dataset, options.train).map_err(train_err)?;
            classifiers.push(ClassifierCell {
                task,
                kind,
                examples: dataset.len(),
                k,
                hyperparameters: cv.hyperparameters.to_string(),
                mean_accuracy: cv.mean_accuracy,
                macro_accuracy: cv.macro_accuracy,
                fold_accuracy: cv.fold_accuracy,
                confusion: cv.confusion,
                majority_baseline: cv.majority_baseline,
                training_accuracy: training_accuracy(&model, &dataset),
            });
            if i == 0 {
                first_models.insert(task, model);
            }
        }
    }

    let explanations = match templates {
        Some(templates) if first_models.len() == Task::ALL.len() => {
            let mut take = |t: Task| first_models.remove(&t).expect("model per task");
            let config = PipelineConfig {
                graph: ctx.graph.clone(),
                components: ctx.components.clone(),
                models: StageModels::new(take(Task::Ned), take(Task::Rl), take(Task::Qb))?,
                templates: templates.clone(),
                prefixes: ctx.prefixes.clone(),
            };
            let mut stats = explanation_stats(records, &config)?;
            stats.model_kind = options.kinds.first().copied();
            Some(stats)
        }
        _ => None,
    };

    Ok(EvaluationReport {
        seed: options.train.seed,
        folds: options.folds,
        counts: RecordCounts {
            total: data.total(),
            retained: records.len(),
            dropped_empty: data.dropped_empty.len(),
            dropped_unsupported: data.dropped_unsupported.len(),
        },
        dropped_empty: data.dropped_empty.clone(),
        dropped_unsupported: data.dropped_unsupported.clone(),
        components,
        labels,
        classifiers,
        explanations,
    })
}

impl EvaluationReport {
    pub fn cell(&self, task: Task, kind: ClassifierKind) -> Option<&ClassifierCell> {
        self.classifiers.iter().find(|c| c.task == task && c.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.counts;
        let _ = writeln!(
            s,
            "Records: {} total, {} retained, {} dropped (no gold answer), {} dropped (unsupported query)",
            c.total, c.retained, c.dropped_empty, c.dropped_unsupported
        );
        let _ = writeln!(s, "Seed: {}, folds: {}\n", self.seed, self.folds);

        let _ = writeln!(s, "Component performance (per-question scores, macro-averaged)");
        let _ = writeln!(
            s,
            "{:<5} {:<26} {:>9} {:>9} {:>9} {:>9}",
            "Task", "Component", "Questions", "Precision", "Recall", "F-score"
        );
        for r in &self.components {
            let _ = writeln!(
                s,
                "{:<5} {:<26} {:>9} {:>9.4} {:>9.4} {:>9.4}",
                r.task.to_string(),
                r.component,
                r.questions,
                r.precision,
                r.recall,
                r.f
            );
        }

        let _ = writeln!(s, "\nTraining labels");
        let _ = writeln!(s, "{:<5} {:>8} {:>9} {:>12}", "Task", "Success", "NoAnswer", "WrongAnswer");
        for (task, dist) in &self.labels {
            let n = |c: OutcomeClass| dist.get(&c).copied().unwrap_or(0);
            let _ = writeln!(
                s,
                "{:<5} {:>8} {:>9} {:>12}",
                task.to_string(),
                n(OutcomeClass::Success),
                n(OutcomeClass::NoAnswer),
                n(OutcomeClass::WrongAnswer)
            );
        }

        if !self.classifiers.is_empty() {
            let _ = writeln!(s, "\nClassifier accuracy (k-fold cross-validation)");
            let _ = writeln!(
                s,
                "{:<5} {:<20} {:>4} {:>9} {:>10} {:>9} {:>9}  Chosen",
                "Task", "Classifier", "k", "Accuracy", "Macro acc", "Majority", "Train acc"
            );
            for cell in &self.classifiers {
                let _ = writeln!(
                    s,
                    "{:<5} {:<20} {:>4} {:>9.4} {:>10.4} {:>9.4} {:>9.4}  {}",
                    cell.task.to_string(),
                    cell.kind.display_name(),
                    cell.k,
                    cell.mean_accuracy,
                    cell.macro_accuracy,
                    cell.majority_baseline,
                    cell.training_accuracy,
                    cell.hyperparameters
                );
            }

            let _ = writeln!(s, "\nAccuracy by classifier and task");
            let _ = writeln!(s, "{:<20} {:>8} {:>8} {:>8}", "Classifier", "NED", "RL", "QB");
            let mut kinds: Vec<ClassifierKind> = Vec::new();
            for c in &self.classifiers {
                if !kinds.contains(&c.kind) {
                    kinds.push(c.kind);
                }
            }
            for kind in kinds {
                let acc = |t: Task| self.cell(t, kind).map_or("-".to_string(), |c| format!("{:.4}", c.mean_accuracy));
                let _ = writeln!(
                    s,
                    "{:<20} {:>8} {:>8} {:>8}",
                    kind.display_name(),
                    acc(Task::Ned),
                    acc(Task::Rl),
                    acc(Task::Qb)
                );
            }
        }

        if let Some(e) = &self.explanations {
            let _ = writeln!(s, "\nExplanations ({} models)", e.model_kind.map_or("-", |k| k.display_name()));
            let _ = writeln!(
                s,
                "{} questions, {} explanations, {} unresolved placeholders, {} stages without explanation, {} mismatches",
                e.questions, e.explanations, e.unresolved_placeholders, e.stages_without_explanation, e.mismatches
            );
        }
        s
    }
}

/// Writes `report.txt` and `report.json` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<(), BenchError> {
    let io =
        |path: &Path, e: std::io::Error| BenchError::Io { path: path.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, body) in [("report.txt", report.to_text()), ("report.json", report.to_json())] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
