//! Per-task outcome classifiers.
//!
//! Every component output is labelled Success, NoAnswer or WrongAnswer by
//! comparing it with gold data; five classifier families then learn to
//! predict that label from question features alone.

mod bayes;
mod cv;
mod linear;
mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::Task;
use crate::question::{FeatureSchema, FeatureVector};

pub use cv::{cross_validate, fold_assignment, ClassMetrics, CvReport};
pub use linear::{minimize, Descent, SoftmaxObjective};
pub use tree::{Node, Tree};

pub const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Success,
    NoAnswer,
    WrongAnswer,
}

impl OutcomeClass {
    /// Enum order doubles as the argmax tie-break order.
    pub const ALL: [OutcomeClass; CLASSES] = [OutcomeClass::Success, OutcomeClass::NoAnswer, OutcomeClass::WrongAnswer];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeClass::Success => "Success",
            OutcomeClass::NoAnswer => "NoAnswer",
            OutcomeClass::WrongAnswer => "WrongAnswer",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutcomeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace([' ', '_', '-'], "").as_str() {
            "success" => Ok(OutcomeClass::Success),
            "noanswer" => Ok(OutcomeClass::NoAnswer),
            "wronganswer" | "wrong" => Ok(OutcomeClass::WrongAnswer),
            _ => Err(format!("unknown outcome class {s:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OutcomeError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("no gold annotation for this question")]
    MissingGold,
    #[error("F-score {0} is outside [0, 1]")]
    FScoreRange(f64),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("{k}-fold cross-validation needs at least {k} examples, got {n}")]
    TooFewExamples { k: usize, n: usize },
    #[error("cross-validation needs k >= 2, got {0}")]
    InvalidFolds(usize),
    #[error("hyperparameters {hyper} do not apply to {kind}")]
    KindMismatch { kind: ClassifierKind, hyper: String },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Per-question set precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn micro_f1<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Result<Prf, OutcomeError> {
    if gold.is_empty() {
        return Err(OutcomeError::EmptyGold);
    }
    let hits = predicted.intersection(gold).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hits / predicted.len() as f64 };
    let recall = hits / gold.len() as f64;
    let f = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(Prf { precision, recall, f })
}

/// NoAnswer for an empty output, Success for an exact match (F = 1),
/// WrongAnswer otherwise.
pub fn label_example<T>(output_empty: bool, gold: Option<&BTreeSet<T>>, f: f64) -> Result<OutcomeClass, OutcomeError> {
    match gold {
        None => return Err(OutcomeError::MissingGold),
        Some(g) if g.is_empty() => return Err(OutcomeError::EmptyGold),
        Some(_) => {}
    }
    if !(0.0..=1.0).contains(&f) {
        return Err(OutcomeError::FScoreRange(f));
    }
    Ok(if output_empty {
        OutcomeClass::NoAnswer
    } else if f == 1.0 {
        OutcomeClass::Success
    } else {
        OutcomeClass::WrongAnswer
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub question_id: String,
    pub features: FeatureVector,
    pub label: OutcomeClass,
    pub f_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    LogisticRegression,
    LinearSvm,
    RandomForest,
    GaussianNb,
    DecisionTree,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::LogisticRegression,
        ClassifierKind::LinearSvm,
        ClassifierKind::RandomForest,
        ClassifierKind::GaussianNb,
        ClassifierKind::DecisionTree,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "lr",
            ClassifierKind::LinearSvm => "svm",
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::GaussianNb => "nb",
            ClassifierKind::DecisionTree => "dt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "Logistic Regression",
            ClassifierKind::LinearSvm => "Linear SVM",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::GaussianNb => "Gaussian NB",
            ClassifierKind::DecisionTree => "Decision Tree",
        }
    }

    /// Default grid, ordered so that earlier entries win CV ties: smaller
    /// regularization strength, shallower trees, fewer trees.
    pub fn default_grid(self) -> Vec<Hyperparameters> {
        match self {
            ClassifierKind::LogisticRegression | ClassifierKind::LinearSvm => {
                [0.01, 0.1, 1.0, 10.0].into_iter().map(Hyperparameters::Regularization).collect()
            }
            ClassifierKind::DecisionTree => {
                [Some(3), Some(5), Some(8), None].into_iter().map(Hyperparameters::MaxDepth).collect()
            }
            ClassifierKind::RandomForest => [10, 50]
                .into_iter()
                .map(|trees| Hyperparameters::Forest { trees, max_depth: None, max_features: None, bootstrap: true })
                .collect(),
            ClassifierKind::GaussianNb => vec![Hyperparameters::VarSmoothing(1e-9)],
        }
    }

    fn accepts(self, hyper: &Hyperparameters) -> bool {
        matches!(
            (self, hyper),
            (ClassifierKind::LogisticRegression | ClassifierKind::LinearSvm, Hyperparameters::Regularization(_))
                | (ClassifierKind::DecisionTree, Hyperparameters::MaxDepth(_))
                | (ClassifierKind::RandomForest, Hyperparameters::Forest { .. })
                | (ClassifierKind::GaussianNb, Hyperparameters::VarSmoothing(_))
        )
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace([' ', '_', '-'], "");
        match key.as_str() {
            "lr" | "logreg" | "logisticregression" => Ok(ClassifierKind::LogisticRegression),
            "svm" | "linearsvm" => Ok(ClassifierKind::LinearSvm),
            "rf" | "randomforest" => Ok(ClassifierKind::RandomForest),
            "nb" | "gnb" | "gaussiannb" | "naivebayes" => Ok(ClassifierKind::GaussianNb),
            "dt" | "decisiontree" | "tree" => Ok(ClassifierKind::DecisionTree),
            _ => Err(format!("unknown classifier kind {s:?} (expected lr, svm, rf, nb or dt)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameters {
    /// L2 strength for logistic regression and the linear SVM.
    Regularization(f64),
    /// `None` grows until leaves are pure.
    MaxDepth(Option<usize>),
    Forest {
        trees: usize,
        max_depth: Option<usize>,
        /// Features tried per split; `None` means ⌈√r⌉.
        max_features: Option<usize>,
        bootstrap: bool,
    },
    VarSmoothing(f64),
}

impl fmt::Display for Hyperparameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let depth = |d: &Option<usize>| d.map_or("inf".to_string(), |d| d.to_string());
        match self {
            Hyperparameters::Regularization(l) => write!(f, "lambda={l}"),
            Hyperparameters::MaxDepth(d) => write!(f, "depth={}", depth(d)),
            Hyperparameters::Forest { trees, max_depth, max_features, bootstrap } => {
                write!(f, "trees={trees},depth={}", depth(max_depth))?;
                if let Some(m) = max_features {
                    write!(f, ",features={m}")?;
                }
                if !bootstrap {
                    f.write_str(",no-bootstrap")?;
                }
                Ok(())
            }
            Hyperparameters::VarSmoothing(v) => write!(f, "var_smoothing={v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    /// Reweight examples inversely to class frequency.
    pub balanced: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { seed: 42, balanced: false }
    }
}

/// Dense design matrix with labels, the common input of every learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub schema: Arc<FeatureSchema>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<OutcomeClass>,
}

impl Dataset {
    pub fn from_examples(task: Task, examples: &[TrainingExample]) -> Result<Self, OutcomeError> {
        let first = examples.first().ok_or(OutcomeError::EmptyTrainingSet)?;
        let schema = first.features.schema.clone();
        for e in examples {
            check_schema(&schema, &e.features.schema)?;
            if e.features.values.len() != schema.len() {
                return Err(OutcomeError::SchemaMismatch {
                    expected: format!("{} values", schema.len()),
                    found: format!("{} values", e.features.values.len()),
                });
            }
        }
        Ok(Dataset {
            task,
            schema,
            x: examples.iter().map(|e| e.features.as_f64()).collect(),
            y: examples.iter().map(|e| e.label).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            task: self.task,
            schema: self.schema.clone(),
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut counts = [0; CLASSES];
        for c in &self.y {
            counts[c.index()] += 1;
        }
        counts
    }

    /// Most frequent class, ties to enum order.
    pub fn majority_class(&self) -> OutcomeClass {
        OutcomeClass::from_index(argmax(&self.class_counts().map(|c| c as f64))).expect("index < 3")
    }

    fn labels(&self) -> Vec<usize> {
        self.y.iter().map(|c| c.index()).collect()
    }

    fn sample_weights(&self, balanced: bool) -> Vec<f64> {
        if !balanced {
            return vec![1.0; self.len()];
        }
        let counts = self.class_counts();
        let present = counts.iter().filter(|&&c| c > 0).count() as f64;
        self.y.iter().map(|c| self.len() as f64 / (present * counts[c.index()] as f64)).collect()
    }
}

fn check_schema(expected: &FeatureSchema, found: &FeatureSchema) -> Result<(), OutcomeError> {
    if expected == found {
        return Ok(());
    }
    Err(OutcomeError::SchemaMismatch {
        expected: format!("v{} ({} features)", expected.version, expected.len()),
        found: format!("v{} ({} features)", found.version, found.len()),
    })
}

/// First index of the maximum; NaN never wins.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Parameters {
    /// One row of weights and a bias per class; `active` marks the classes
    /// seen in training, the others are never predicted.
    Linear {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        active: Vec<bool>,
    },
    Tree {
        tree: Tree,
    },
    Forest {
        trees: Vec<Tree>,
    },
    Gaussian {
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
        priors: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: OutcomeClass,
    pub probabilities: [f64; CLASSES],
}

impl Prediction {
    fn from_probabilities(mut probabilities: [f64; CLASSES]) -> Self {
        let total: f64 = probabilities.iter().sum();
        for p in &mut probabilities {
            *p /= total;
        }
        let class = OutcomeClass::from_index(argmax(&probabilities)).expect("index < 3");
        Prediction { class, probabilities }
    }
}

pub const MODEL_FORMAT: &str = "qaexplain-outcome-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format: String,
    pub version: u32,
    pub kind: ClassifierKind,
    pub task: Task,
    pub schema: Arc<FeatureSchema>,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub balanced: bool,
    pub parameters: Parameters,
}

impl ClassifierModel {
    pub fn predict(&self, features: &FeatureVector) -> Result<Prediction, OutcomeError> {
        check_schema(&self.schema, &features.schema)?;
        Ok(self.predict_values(&features.as_f64()))
    }

    /// Prediction for a raw feature row; the caller guarantees its width.
    pub fn predict_values(&self, x: &[f64]) -> Prediction {
        let probabilities = match (&self.kind, &self.parameters) {
            (ClassifierKind::LinearSvm, Parameters::Linear { weights, bias, active }) => {
                linear::svm_probabilities(weights, bias, active, x)
            }
            (_, Parameters::Linear { weights, bias, active }) => {
                linear::softmax_probabilities(weights, bias, active, x)
            }
            (_, Parameters::Tree { tree }) => tree.probabilities(x),
            (_, Parameters::Forest { trees }) => tree::vote_probabilities(trees, x),
            (_, Parameters::Gaussian { means, variances, priors }) => bayes::probabilities(means, variances, priors, x),
        };
        Prediction::from_probabilities(probabilities)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OutcomeError> {
        let model: ClassifierModel = serde_json::from_str(text).map_err(|e| OutcomeError::ModelFile(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(OutcomeError::ModelFile(format!(
                "unsupported model format {} v{}",
                model.format, model.version
            )));
        }
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), OutcomeError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| OutcomeError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, OutcomeError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| OutcomeError::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), OutcomeError> {
        let r = self.schema.len();
        let bad = |what: &str| Err(OutcomeError::ModelFile(format!("parameter shape mismatch: {what}")));
        if !self.kind.accepts(&self.hyperparameters) {
            return bad("hyperparameters");
        }
        match &self.parameters {
            Parameters::Linear { weights, bias, active } => {
                if weights.len() != CLASSES || bias.len() != CLASSES || active.len() != CLASSES {
                    return bad("linear class count");
                }
                if weights.iter().any(|w| w.len() != r) {
                    return bad("weight row width");
                }
            }
            Parameters::Tree { tree } => tree.validate(r).or_else(|e| bad(&e))?,
            Parameters::Forest { trees } => {
                for t in trees {
                    t.validate(r).or_else(|e| bad(&e))?;
                }
            }
            Parameters::Gaussian { means, variances, priors } => {
                if means.len() != CLASSES || variances.len() != CLASSES || priors.len() != CLASSES {
                    return bad("gaussian class count");
                }
                if means.iter().chain(variances).any(|v| v.len() != r) {
                    return bad("gaussian feature width");
                }
            }
        }
        Ok(())
    }
}

/// Fits one model with fixed hyperparameters.
pub fn fit(
    kind: ClassifierKind,
    hyper: &Hyperparameters,
    data: &Dataset,
    options: TrainOptions,
) -> Result<ClassifierModel, OutcomeError> {
    if data.is_empty() {
        return Err(OutcomeError::EmptyTrainingSet);
    }
    if !kind.accepts(hyper) {
        return Err(OutcomeError::KindMismatch { kind, hyper: hyper.to_string() });
    }
    let y = data.labels();
    let w = data.sample_weights(options.balanced);
    let parameters = match (kind, hyper) {
        (ClassifierKind::LogisticRegression, &Hyperparameters::Regularization(lambda)) => {
            linear::fit_logistic(&data.x, &y, &w, lambda, data.schema.len())
        }
        (ClassifierKind::LinearSvm, &Hyperparameters::Regularization(lambda)) => {
            linear::fit_svm(&data.x, &y, &w, lambda, data.schema.len())
        }
        (ClassifierKind::DecisionTree, &Hyperparameters::MaxDepth(depth)) => Parameters::Tree {
            tree: Tree::grow(&data.x, &y, &w, &tree::GrowOptions { max_depth: depth, max_features: None }, None),
        },
        (ClassifierKind::RandomForest, &Hyperparameters::Forest { trees, max_depth, max_features, bootstrap }) => {
            Parameters::Forest {
                trees: tree::grow_forest(&data.x, &y, &w, trees, max_depth, max_features, bootstrap, options.seed),
            }
        }
        (ClassifierKind::GaussianNb, &Hyperparameters::VarSmoothing(eps)) => {
            bayes::fit(&data.x, &y, &w, eps, data.schema.len())
        }
        _ => unreachable!("kind/hyperparameter agreement checked above"),
    };
    Ok(ClassifierModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        kind,
        task: data.task,
        schema: data.schema.clone(),
        hyperparameters: hyper.clone(),
        seed: options.seed,
        balanced: options.balanced,
        parameters,
    })
}

/// Picks the grid entry with the best mean CV accuracy (k = min(10, n)),
/// then refits on all examples.
pub fn train(
    kind: ClassifierKind,
    task: Task,
    examples: &[TrainingExample],
    grid: &[Hyperparameters],
    options: TrainOptions,
) -> Result<ClassifierModel, OutcomeError> {
    let data = Dataset::from_examples(task, examples)?;
    train_dataset(kind, &data, grid, options)
}

pub fn train_dataset(
    kind: ClassifierKind,
    data: &Dataset,
    grid: &[Hyperparameters],
    options: TrainOptions,
) -> Result<ClassifierModel, OutcomeError> {
    let first = grid.first().ok_or(OutcomeError::EmptyGrid)?;
    let k = data.len().min(10);
    let hyper = if grid.len() == 1 || k < 2 {
        first.clone()
    } else {
        cross_validate(kind, data, k, grid, options)?.hyperparameters
    };
    fit(kind, &hyper, data, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn micro_f1_examples() {
        let p = micro_f1(&set(&["a", "b"]), &set(&["b", "c"])).unwrap();
        assert_eq!((p.precision, p.recall, p.f), (0.5, 0.5, 0.5));
        let p = micro_f1(&set(&[]), &set(&["x"])).unwrap();
        assert_eq!((p.precision, p.recall, p.f), (0.0, 0.0, 0.0));
        let p = micro_f1(&set(&["x", "y"]), &set(&["x", "y"])).unwrap();
        assert_eq!((p.precision, p.recall, p.f), (1.0, 1.0, 1.0));
        assert_eq!(micro_f1(&set(&["x"]), &set(&[])), Err(OutcomeError::EmptyGold));
    }

    #[test]
    fn label_table() {
        let gold = set(&["dbr:Nikola_Tesla", "dbr:Nobel_Prize_in_Physics"]);
        let f = micro_f1(&gold, &gold).unwrap().f;
        assert_eq!(label_example(false, Some(&gold), f), Ok(OutcomeClass::Success));
        assert_eq!(label_example(true, Some(&gold), 0.0), Ok(OutcomeClass::NoAnswer));
        assert_eq!(label_example(false, Some(&gold), 0.5), Ok(OutcomeClass::WrongAnswer));
        assert_eq!(label_example::<String>(false, None, 1.0), Err(OutcomeError::MissingGold));
        assert!(label_example(false, Some(&gold), 1.5).is_err());
    }

    #[test]
    fn kind_and_class_names_parse() {
        for kind in ClassifierKind::ALL {
            assert_eq!(kind.code().parse::<ClassifierKind>(), Ok(kind));
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(serde_json::from_str::<ClassifierKind>(&json).unwrap(), kind);
        }
        for class in OutcomeClass::ALL {
            assert_eq!(class.name().parse::<OutcomeClass>(), Ok(class));
        }
        assert_eq!("No Answer".parse::<OutcomeClass>(), Ok(OutcomeClass::NoAnswer));
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn grid_kinds_agree() {
        for kind in ClassifierKind::ALL {
            assert!(kind.default_grid().iter().all(|h| kind.accepts(h)));
        }
    }
}
