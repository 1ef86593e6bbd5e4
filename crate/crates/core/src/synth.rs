//! Seeded synthetic datasets for tests, demos and the desk-scale experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Samples;

/// Two spherical unit-variance Gaussians centred at `-shift` and `+shift` on
/// every coordinate. Labels alternate so any prefix is balanced.
pub fn two_gaussians(n: usize, dim: usize, shift: f64, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Samples::new(dim);
    let mut row = vec![0.0; dim];
    for i in 0..n {
        let label = (i % 2) as u8;
        let centre = if label == 1 { shift } else { -shift };
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = centre + z;
        }
        s.push(&row, label);
    }
    s
}

/// Splits rows round-robin into `k` equal-distribution shards.
pub fn iid_shards(data: &Samples, k: usize) -> Vec<Samples> {
    (0..k)
        .map(|s| {
            let idx: Vec<usize> = (s..data.len()).step_by(k).collect();
            data.select(&idx)
        })
        .collect()
}

/// Telemetry-like data: `informative` columns separate the classes by
/// `gap` standard deviations, the rest are pure noise on a positive scale.
pub fn behavioral(n: usize, dim: usize, informative: usize, gap: f64, malignant_every: usize, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Samples::new(dim);
    let mut row = vec![0.0; dim];
    for i in 0..n {
        let label = u8::from(malignant_every > 0 && i % malignant_every == 0);
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let base = 10.0 * (j + 1) as f64;
            *v = base + z + if j < informative && label == 1 { gap } else { 0.0 };
        }
        s.push(&row, label);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_seeded() {
        let a = two_gaussians(100, 3, 1.0, 1);
        assert_eq!(a.positives(), 50);
        assert_eq!(a, two_gaussians(100, 3, 1.0, 1));
        assert_ne!(a, two_gaussians(100, 3, 1.0, 2));
    }

    #[test]
    fn shards_cover_all_rows() {
        let a = two_gaussians(70, 2, 1.0, 1);
        let shards = iid_shards(&a, 7);
        assert!(shards.iter().all(|s| s.len() == 10));
        assert_eq!(shards[0].row(1), a.row(7));
    }

    #[test]
    fn behavioral_ratio() {
        let b = behavioral(1000, 42, 5, 6.0, 10, 3);
        assert_eq!(b.positives(), 100);
        assert_eq!(b.dim(), 42);
    }
}
