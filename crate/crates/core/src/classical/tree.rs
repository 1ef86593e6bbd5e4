use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassicalError, Classifier};
use crate::data::Samples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_samples_split: usize,
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// (benign, malignant) training rows reaching this leaf.
        class_counts: [u64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Rows with `x[feature] <= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Gini impurity of a (benign, malignant) count pair.
pub fn gini(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] as f64 / n, counts[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

impl TreeNode {
    pub fn leaf_for(&self, x: &[f64]) -> [u64; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class_counts } => return *class_counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Malignant proportion of the leaf reached by `x`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let [b, m] = self.leaf_for(x);
        m as f64 / (b + m) as f64
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<[u64; 2]> {
        match self {
            TreeNode::Leaf { class_counts } => vec![*class_counts],
            TreeNode::Split { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

/// A fitted tree together with the input width it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub root: TreeNode,
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.root.score(x)
    }
}

/// Exact weighted-Gini comparison key. Minimizing the weighted child impurity
/// is the same as maximizing `sq_l / n_l + sq_r / n_r` where `sq` is the sum of
/// squared class counts; the fraction is kept as an integer ratio.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(left: [u64; 2], right: [u64; 2]) -> Self {
        let sq = |c: [u64; 2]| u128::from(c[0]) * u128::from(c[0]) + u128::from(c[1]) * u128::from(c[1]);
        let nl = u128::from(left[0] + left[1]);
        let nr = u128::from(right[0] + right[1]);
        Purity {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn better_than(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

pub(crate) struct Grower<'a, R: Rng> {
    data: &'a Samples,
    config: TreeConfig,
    /// (features per split, rng) for random-forest style candidate sampling.
    sampler: Option<(usize, &'a mut R)>,
}

impl<'a, R: Rng> Grower<'a, R> {
    pub(crate) fn new(data: &'a Samples, config: TreeConfig, sampler: Option<(usize, &'a mut R)>) -> Self {
        Grower { data, config, sampler }
    }

    fn counts(&self, rows: &[usize]) -> [u64; 2] {
        let m = rows.iter().filter(|&&i| self.data.label(i) == 1).count() as u64;
        [rows.len() as u64 - m, m]
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.dim();
        match &mut self.sampler {
            Some((m, rng)) if *m < d => {
                let mut f = sample(*rng, d, *m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split_over(&self, rows: &[usize], features: &[usize]) -> Option<(usize, f64, Purity)> {
        let total = self.counts(rows);
        let mut best: Option<(usize, f64, Purity)> = None;
        let mut order = rows.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.data.row(a)[f].total_cmp(&self.data.row(b)[f]).then(a.cmp(&b)));
            let mut left = [0u64; 2];
            for w in 0..order.len() - 1 {
                left[usize::from(self.data.label(order[w]))] += 1;
                let (lo, hi) = (self.data.row(order[w])[f], self.data.row(order[w + 1])[f]);
                if lo == hi {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = Purity::of(left, right);
                // ascending feature then ascending threshold: only strict improvements replace
                if best.is_none_or(|(_, _, b)| score.better_than(b)) {
                    best = Some((f, lo + (hi - lo) / 2.0, score));
                }
            }
        }
        best
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let features = self.candidate_features();
        if let Some((f, t, _)) = self.best_split_over(rows, &features) {
            return Some((f, t));
        }
        // sampled features were all constant here; fall back to the rest
        let rest: Vec<usize> = (0..self.data.dim()).filter(|f| !features.contains(f)).collect();
        self.best_split_over(rows, &rest).map(|(f, t, _)| (f, t))
    }

    pub(crate) fn grow(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let counts = self.counts(rows);
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_reached = self.config.max_depth.is_some_and(|m| depth >= m);
        if pure || rows.len() < self.config.min_samples_split.max(2) || depth_reached {
            return TreeNode::Leaf { class_counts: counts };
        }
        let Some((feature, threshold)) = self.best_split(rows) else {
            return TreeNode::Leaf { class_counts: counts };
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.data.row(i)[feature] <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&l, depth + 1)),
            right: Box::new(self.grow(&r, depth + 1)),
        }
    }
}

/// Greedy CART with Gini impurity. Thresholds are midpoints between
/// consecutive distinct values; impurity ties go to the lowest feature index,
/// then the lowest threshold.
pub fn dt_fit(data: &Samples, config: TreeConfig) -> Result<TreeModel, ClassicalError> {
    if data.is_empty() {
        return Err(ClassicalError::EmptyData);
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut g: Grower<'_, rand_chacha::ChaCha8Rng> = Grower::new(data, config, None);
    Ok(TreeModel {
        n_features: data.dim(),
        root: g.grow(&rows, 0),
    })
}
