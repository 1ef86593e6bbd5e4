use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::Grower;
use super::{ClassicalError, Classifier, TreeConfig, TreeNode};
use crate::data::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
    /// Draw a bootstrap sample of size n per tree. Disabling it fits every tree on all rows.
    pub bootstrap: bool,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            features_per_split: None,
            seed: 0,
            bootstrap: true,
            tree: TreeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
    pub features_per_split: usize,
    pub bootstrap_seed: u64,
}

pub fn rf_fit(data: &Samples, config: ForestConfig) -> Result<ForestModel, ClassicalError> {
    if data.is_empty() {
        return Err(ClassicalError::EmptyData);
    }
    if config.n_trees == 0 {
        return Err(ClassicalError::InvalidConfig("n_trees must be at least 1".into()));
    }
    let d = data.dim();
    let m = config
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    if m == 0 || m > d {
        return Err(ClassicalError::InvalidConfig(format!(
            "features_per_split {m} outside [1, {d}]"
        )));
    }
    let n = data.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            // one independent stream per tree keeps the forest identical under any thread count
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Grower::new(data, config.tree, Some((m, &mut rng))).grow(&rows, 0)
        })
        .collect();
    Ok(ForestModel {
        n_features: d,
        trees,
        features_per_split: m,
        bootstrap_seed: config.seed,
    })
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Fraction of trees voting malignant.
    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.score(x) >= 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::dt_fit;

    fn separable(n: usize) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = Samples::new(3);
        for i in 0..n {
            let label = (i % 2) as u8;
            let shift = if label == 1 { 3.0 } else { -3.0 };
            let row: Vec<f64> = (0..3).map(|_| shift + rng.gen_range(-1.0..1.0)).collect();
            s.push(&row, label);
        }
        s
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let s = separable(40);
        let tree = dt_fit(&s, TreeConfig::default()).unwrap();
        let cfg = ForestConfig {
            n_trees: 1,
            features_per_split: Some(3),
            bootstrap: false,
            ..ForestConfig::default()
        };
        let f = rf_fit(&s, cfg).unwrap();
        assert_eq!(f.trees[0], tree.root);
    }

    #[test]
    fn separable_training_accuracy() {
        let s = separable(60);
        let f = rf_fit(&s, ForestConfig { n_trees: 10, seed: 3, ..ForestConfig::default() }).unwrap();
        assert_eq!(f.features_per_split, 2);
        for (row, label) in s.rows() {
            let (l, score) = f.predict(row).unwrap();
            assert_eq!(l, label);
            // scores are multiples of 1/n_trees
            assert!(((score * 10.0).round() - score * 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unanimous_vote_scores_one() {
        let s = separable(20);
        let f = rf_fit(&s, ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        assert_eq!(f.score(&[3.0, 3.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn seeded_forests_repeat() {
        let s = separable(30);
        let cfg = ForestConfig { n_trees: 8, seed: 9, ..ForestConfig::default() };
        assert_eq!(rf_fit(&s, cfg).unwrap(), rf_fit(&s, cfg).unwrap());
    }

    #[test]
    fn config_errors() {
        let s = separable(4);
        assert!(rf_fit(&s, ForestConfig { n_trees: 0, ..ForestConfig::default() }).is_err());
        assert!(rf_fit(&s, ForestConfig { features_per_split: Some(4), ..ForestConfig::default() }).is_err());
        assert!(matches!(rf_fit(&Samples::new(2), ForestConfig::default()), Err(ClassicalError::EmptyData)));
    }
}
