use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dt_fit, knn_fit, rf_fit, ClassicalError, Classifier, ForestConfig, TreeConfig};
use crate::analytics::{confusion_metrics, describe, EvalMetrics};
use crate::data::Samples;

/// Per-row fold index in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_assignment.len()).partition(|&i| self.fold_assignment[i] != fold)
    }
}

/// Stratified fold assignment: each class is shuffled with `seed` and dealt
/// round-robin, continuing the deal from where the previous class stopped.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan, ClassicalError> {
    if k < 2 {
        return Err(ClassicalError::InvalidConfig(format!("k = {k}; k-fold needs k >= 2")));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        classes[usize::from(l == 1)].push(i);
    }
    if classes.iter().any(|c| c.len() < k) {
        return Err(ClassicalError::TooFewSamples {
            k,
            benign: classes[0].len(),
            malignant: classes[1].len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in classes.iter_mut() {
        class.shuffle(&mut rng);
        for &i in class.iter() {
            fold_assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, fold_assignment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "snake_case")]
pub enum Algorithm {
    Knn { k: usize },
    Dt(TreeConfig),
    Rf(ForestConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Knn { .. } => "knn",
            Algorithm::Dt(_) => "dt",
            Algorithm::Rf(_) => "rf",
        }
    }

    /// Defaults: k = 5 neighbors; unlimited-depth Gini tree; 100-tree forest.
    pub fn default_for(name: &str, seed: u64) -> Option<Self> {
        match name {
            "knn" => Some(Algorithm::Knn { k: 5 }),
            "dt" => Some(Algorithm::Dt(TreeConfig::default())),
            "rf" => Some(Algorithm::Rf(ForestConfig { seed, ..ForestConfig::default() })),
            _ => None,
        }
    }

    pub fn fit(&self, data: &Samples) -> Result<Box<dyn Classifier + Send + Sync>, ClassicalError> {
        Ok(match *self {
            Algorithm::Knn { k } => Box::new(knn_fit(data, k)?),
            Algorithm::Dt(cfg) => Box::new(dt_fit(data, cfg)?),
            Algorithm::Rf(cfg) => Box::new(rf_fit(data, cfg)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub algorithm: String,
    pub folds: Vec<EvalMetrics>,
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    /// Held-out score of every row, from the fold in which it was tested.
    pub out_of_fold_scores: Vec<f64>,
}

fn summarize(values: impl Iterator<Item = f64>) -> MetricSummary {
    let v: Vec<f64> = values.collect();
    let d = describe(&v).expect("at least two folds");
    MetricSummary {
        mean: d.mean,
        stddev: d.stddev,
    }
}

/// Fits on k-1 folds and evaluates on the held-out fold, for every fold.
pub fn cross_validate(algo: &Algorithm, data: &Samples, k: usize, seed: u64) -> Result<CvReport, ClassicalError> {
    let plan = stratified_kfold(data.labels(), k, seed)?;
    let per_fold: Vec<(Vec<usize>, Vec<f64>, EvalMetrics)> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (train, test) = plan.split(fold);
            let model = algo.fit(&data.select(&train))?;
            let scores: Vec<f64> = test.iter().map(|&i| model.score_unchecked(data.row(i))).collect();
            let predictions: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
            let labels: Vec<u8> = test.iter().map(|&i| data.label(i)).collect();
            let metrics = confusion_metrics(&predictions, &labels)?;
            Ok((test, scores, metrics))
        })
        .collect::<Result<_, ClassicalError>>()?;

    let mut out_of_fold_scores = vec![0.0; data.len()];
    let mut folds = Vec::with_capacity(k);
    for (test, scores, metrics) in per_fold {
        for (i, s) in test.into_iter().zip(scores) {
            out_of_fold_scores[i] = s;
        }
        folds.push(metrics);
    }
    Ok(CvReport {
        algorithm: algo.name().to_string(),
        accuracy: summarize(folds.iter().map(|m| m.accuracy)),
        precision: summarize(folds.iter().map(|m| m.precision)),
        recall: summarize(folds.iter().map(|m| m.recall)),
        f1: summarize(folds.iter().map(|m| m.f1)),
        folds,
        out_of_fold_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fold_counts(plan: &FoldPlan, labels: &[u8]) -> Vec<[usize; 2]> {
        let mut c = vec![[0usize; 2]; plan.k];
        for (i, &f) in plan.fold_assignment.iter().enumerate() {
            c[f][usize::from(labels[i])] += 1;
        }
        c
    }

    #[test]
    fn five_by_five() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let plan = stratified_kfold(&labels, 5, 1).unwrap();
        assert!(fold_counts(&plan, &labels).iter().all(|c| *c == [1, 1]));
    }

    #[test]
    fn ninety_ten_thousand() {
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 10 == 0)).collect();
        let plan = stratified_kfold(&labels, 10, 42).unwrap();
        assert!(fold_counts(&plan, &labels).iter().all(|c| *c == [90, 10]));
    }

    #[test]
    fn k_one_and_too_few() {
        assert!(matches!(stratified_kfold(&[0, 1], 1, 0), Err(ClassicalError::InvalidConfig(_))));
        assert!(matches!(
            stratified_kfold(&[0, 0, 0, 1], 2, 0),
            Err(ClassicalError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Samples::new(4);
        for i in 0..200 {
            let l = u8::from(i % 4 == 0);
            let base = if l == 1 { 5.0 } else { 0.0 };
            let row: Vec<f64> = (0..4).map(|_| base + rng.gen_range(0.0..1.0)).collect();
            s.push(&row, l);
        }
        for name in ["knn", "dt", "rf"] {
            let mut algo = Algorithm::default_for(name, 1).unwrap();
            if let Algorithm::Rf(cfg) = &mut algo {
                cfg.n_trees = 10;
            }
            let r = cross_validate(&algo, &s, 10, 3).unwrap();
            assert_eq!(r.accuracy.mean, 1.0, "{name}");
            assert_eq!(r.folds.len(), 10);
        }
    }

    #[test]
    fn permuted_labels_near_chance() {
        // Monte-Carlo: features carry no label information, so held-out
        // accuracy concentrates around 0.5
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = Samples::new(3);
        for i in 0..400 {
            let row: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            s.push(&row, (i % 2) as u8);
        }
        let r = cross_validate(&Algorithm::Dt(TreeConfig::default()), &s, 10, 1).unwrap();
        assert!((r.accuracy.mean - 0.5).abs() <= 0.1, "{}", r.accuracy.mean);
    }
}
