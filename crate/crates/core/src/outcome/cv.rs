//! Stratified k-fold cross-validation with a hyperparameter sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit, ClassifierKind, Dataset, Hyperparameters, OutcomeClass, OutcomeError, TrainOptions, CLASSES};
use crate::components::Task;

/// Seeded shuffle, then the rows grouped by class are dealt round-robin,
/// so folds differ in size by at most one and every class is spread as
/// evenly as its count allows. Each fold lists row indices in ascending
/// order.
pub fn fold_assignment(labels: &[OutcomeClass], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, OutcomeError> {
    if k < 2 {
        return Err(OutcomeError::InvalidFolds(k));
    }
    if labels.len() < k {
        return Err(OutcomeError::TooFewExamples { k, n: labels.len() });
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&i| labels[i]);
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: OutcomeClass,
    pub support: usize,
    /// 0 when the class is never predicted.
    pub precision: f64,
    /// 0 when the class has no support.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub hyperparameters: Hyperparameters,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kind: ClassifierKind,
    pub task: Task,
    pub k: usize,
    pub seed: u64,
    /// Winner of the sweep; the remaining fields describe its folds.
    pub hyperparameters: Hyperparameters,
    pub grid: Vec<GridScore>,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    /// Arithmetic mean of `fold_accuracy`.
    pub mean_accuracy: f64,
    /// Mean recall over classes with support.
    pub macro_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predictions, pooled over folds.
    pub confusion: [[usize; CLASSES]; CLASSES],
    /// Share of the most frequent class in the whole data set.
    pub majority_baseline: f64,
}

struct FoldRun {
    accuracy: Vec<f64>,
    confusion: [[usize; CLASSES]; CLASSES],
}

fn run_folds(
    kind: ClassifierKind,
    data: &Dataset,
    folds: &[Vec<usize>],
    hyper: &Hyperparameters,
    options: TrainOptions,
) -> Result<FoldRun, OutcomeError> {
    let mut accuracy = Vec::with_capacity(folds.len());
    let mut confusion = [[0; CLASSES]; CLASSES];
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> =
            folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, rows)| rows.iter().copied()).collect();
        let model = fit(kind, hyper, &data.subset(&train), options)?;
        let mut correct = 0;
        for &i in test {
            let predicted = model.predict_values(&data.x[i]).class;
            confusion[data.y[i].index()][predicted.index()] += 1;
            correct += usize::from(predicted == data.y[i]);
        }
        accuracy.push(correct as f64 / test.len() as f64);
    }
    Ok(FoldRun { accuracy, confusion })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs k-fold CV for every grid entry on the same folds and reports the
/// entry with the best mean accuracy; ties keep the earlier entry.
pub fn cross_validate(
    kind: ClassifierKind,
    data: &Dataset,
    k: usize,
    grid: &[Hyperparameters],
    options: TrainOptions,
) -> Result<CvReport, OutcomeError> {
    if grid.is_empty() {
        return Err(OutcomeError::EmptyGrid);
    }
    let folds = fold_assignment(&data.y, k, options.seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, FoldRun)> = None;
    for (g, hyper) in grid.iter().enumerate() {
        let run = run_folds(kind, data, &folds, hyper, options)?;
        let m = mean(&run.accuracy);
        scores.push(GridScore { hyperparameters: hyper.clone(), mean_accuracy: m });
        if best.as_ref().is_none_or(|(b, _)| m > scores[*b].mean_accuracy) {
            best = Some((g, run));
        }
    }
    let (g, run) = best.expect("grid is non-empty");

    let confusion = run.confusion;
    let per_class: Vec<ClassMetrics> = OutcomeClass::ALL
        .iter()
        .map(|&class| {
            let c = class.index();
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..CLASSES).map(|t| confusion[t][c]).sum();
            let hits = confusion[c][c] as f64;
            ClassMetrics {
                class,
                support,
                precision: if predicted == 0 { 0.0 } else { hits / predicted as f64 },
                recall: if support == 0 { 0.0 } else { hits / support as f64 },
            }
        })
        .collect();
    let recalls: Vec<f64> = per_class.iter().filter(|m| m.support > 0).map(|m| m.recall).collect();
    let counts = data.class_counts();

    Ok(CvReport {
        kind,
        task: data.task,
        k,
        seed: options.seed,
        hyperparameters: grid[g].clone(),
        grid: scores,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        mean_accuracy: mean(&run.accuracy),
        fold_accuracy: run.accuracy,
        macro_accuracy: mean(&recalls),
        per_class,
        confusion,
        majority_baseline: *counts.iter().max().expect("three classes") as f64 / data.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<OutcomeClass> {
        (0..n).map(|i| OutcomeClass::ALL[i % 7 % 3]).collect()
    }

    #[test]
    fn fold_sizes_follow_remainder_rule() {
        let folds = fold_assignment(&labels(100), 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let sizes: Vec<usize> = fold_assignment(&labels(103), 10, 1).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, [11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
    }

    #[test]
    fn folds_partition_rows() {
        let folds = fold_assignment(&labels(57), 10, 3).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<OutcomeClass> =
            (0..40).map(|i| if i < 20 { OutcomeClass::Success } else { OutcomeClass::NoAnswer }).collect();
        for fold in fold_assignment(&y, 10, 5).unwrap() {
            assert_eq!(fold.iter().filter(|&&i| i < 20).count(), 2);
        }
    }

    #[test]
    fn too_few_examples() {
        assert_eq!(fold_assignment(&labels(9), 10, 0), Err(OutcomeError::TooFewExamples { k: 10, n: 9 }));
        assert_eq!(fold_assignment(&labels(9), 1, 0), Err(OutcomeError::InvalidFolds(1)));
    }
}
