use serde::{Deserialize, Serialize};

use super::AnalyticsError;

const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-10;

/// Projection of standardized data onto its top two principal directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2Projection {
    /// Two orthonormal directions in the original feature space; dropped
    /// (constant) features have zero weight.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    /// `n` rows of (pc1, pc2).
    pub projected: Vec<[f64; 2]>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn mat_vec(m: &[f64], d: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn orthogonalize(v: &mut [f64], against: &[f64]) {
    let dot: f64 = v.iter().zip(against).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(against).for_each(|(x, a)| *x -= dot * a);
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dominant eigenvector of `m` restricted to the complement of `deflated`.
fn power_iterate(m: &[f64], d: usize, deflated: Option<&[f64]>) -> Vec<f64> {
    let mut v: Vec<f64> = match deflated {
        None => vec![1.0; d],
        Some(_) => (0..d).map(|i| 1.0 + i as f64).collect(),
    };
    if let Some(u) = deflated {
        orthogonalize(&mut v, u);
    }
    normalize(&mut v);
    // |Av| below this is rounding noise: the remaining spectrum is zero
    let floor = 1e-12 * (0..d).map(|i| m[i * d + i].abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut next = vec![0.0; d];
    for _ in 0..MAX_ITER {
        mat_vec(m, d, &v, &mut next);
        if let Some(u) = deflated {
            orthogonalize(&mut next, u);
            orthogonalize(&mut next, u);
        }
        if next.iter().map(|x| x * x).sum::<f64>().sqrt() < floor {
            break;
        }
        normalize(&mut next);
        let change = v.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut next);
        if change < TOL {
            break;
        }
    }
    v
}

/// Two-component PCA of the z-scored `data` (`n` rows of width `d`) via power
/// iteration with deflation on the covariance matrix.
pub fn pca2(data: &[Vec<f64>]) -> Result<Pca2Projection, AnalyticsError> {
    let n = data.len();
    if n < 3 {
        return Err(AnalyticsError::Invalid("PCA needs at least 3 rows".into()));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(AnalyticsError::Invalid("PCA needs at least 2 columns".into()));
    }
    if data.iter().any(|r| r.len() != d) {
        return Err(AnalyticsError::LengthMismatch(d, data.iter().find(|r| r.len() != d).unwrap().len()));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::Invalid("non-finite value".into()));
    }

    let mut means = vec![0.0; d];
    for r in data {
        means.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut stds = vec![0.0; d];
    for r in data {
        for j in 0..d {
            stds[j] += (r[j] - means[j]).powi(2);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / (n - 1) as f64).sqrt());

    let kept: Vec<usize> = (0..d).filter(|&j| stds[j] > 0.0).collect();
    let k = kept.len();
    if k < 2 {
        return Err(AnalyticsError::DegenerateData);
    }
    let z: Vec<Vec<f64>> = data
        .iter()
        .map(|r| kept.iter().map(|&j| (r[j] - means[j]) / stds[j]).collect())
        .collect();

    let mut cov = vec![0.0; k * k];
    for row in &z {
        for a in 0..k {
            for b in a..k {
                cov[a * k + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            cov[a * k + b] /= (n - 1) as f64;
            cov[b * k + a] = cov[a * k + b];
        }
    }

    let mut first = power_iterate(&cov, k, None);
    fix_sign(&mut first);
    let mut second = power_iterate(&cov, k, Some(&first));
    orthogonalize(&mut second, &first);
    normalize(&mut second);
    fix_sign(&mut second);

    let rayleigh = |v: &[f64]| {
        let mut cv = vec![0.0; k];
        mat_vec(&cov, k, v, &mut cv);
        cv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().max(0.0)
    };
    let explained_variance = [rayleigh(&first), rayleigh(&second)];
    let projected = z
        .iter()
        .map(|row| {
            let p = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [p(&first), p(&second)]
        })
        .collect();
    let embed = |v: &[f64]| {
        let mut full = vec![0.0; d];
        for (&j, x) in kept.iter().zip(v) {
            full[j] = *x;
        }
        full
    };
    Ok(Pca2Projection {
        components: [embed(&first), embed(&second)],
        explained_variance,
        projected,
        feature_means: means,
        feature_stds: stds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr_free::standard_normal;

    mod rand_distr_free {
        use rand::Rng;
        // Box-Muller, kept local so the test does not depend on rand_distr
        pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    // Cyclic Jacobi eigensolver for small symmetric matrices.
    #[allow(clippy::needless_range_loop)]
    fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[i][j].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vkp, vkq) = (row[p], row[q]);
                        row[p] = c * vkp - s * vkq;
                        row[q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a[i][i]).collect();
        let vecs = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
        (vals, vecs)
    }

    #[test]
    fn line_data_is_rank_one() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let p = pca2(&data).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((p.components[0][0] - s).abs() < 1e-12);
        assert!((p.components[0][1] - s).abs() < 1e-12);
        assert!(p.explained_variance[1].abs() < 1e-10, "{:?}", p);
        assert!((p.explained_variance[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_eigensolver() {
        let data = vec![
            vec![2.5, 2.4, 0.5],
            vec![0.5, 0.7, 1.9],
            vec![2.2, 2.9, 0.1],
            vec![1.9, 2.2, 0.8],
            vec![3.1, 3.0, -0.4],
            vec![2.3, 2.7, 1.1],
            vec![2.0, 1.6, 0.3],
            vec![1.0, 1.1, 2.2],
            vec![1.5, 1.6, 0.9],
            vec![1.1, 0.9, 1.3],
        ];
        let p = pca2(&data).unwrap();
        // covariance of z-scores, built independently
        let n = data.len() as f64;
        let z: Vec<Vec<f64>> = {
            let cols: Vec<Vec<f64>> = (0..3).map(|j| data.iter().map(|r| r[j]).collect()).collect();
            let stats: Vec<(f64, f64)> = cols
                .iter()
                .map(|c| {
                    let m = c.iter().sum::<f64>() / n;
                    (m, (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
                })
                .collect();
            data.iter().map(|r| (0..3).map(|j| (r[j] - stats[j].0) / stats[j].1).collect()).collect()
        };
        let cov: Vec<Vec<f64>> = (0..3)
            .map(|a| (0..3).map(|b| z.iter().map(|r| r[a] * r[b]).sum::<f64>() / (n - 1.0)).collect())
            .collect();
        let (vals, vecs) = jacobi_eigen(cov);
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for (c, &o) in order.iter().take(2).enumerate() {
            assert!((p.explained_variance[c] - vals[o]).abs() < 1e-8);
            let dot: f64 = p.components[c].iter().zip(&vecs[o]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "component {c} misaligned: {dot}");
            for (i, row) in z.iter().enumerate() {
                let expect: f64 = row.iter().zip(&vecs[o]).map(|(a, b)| a * b).sum::<f64>() * dot.signum();
                assert!((p.projected[i][c] - expect).abs() < 1e-8);
            }
        }
        let ortho: f64 = p.components[0].iter().zip(&p.components[1]).map(|(a, b)| a * b).sum();
        assert!(ortho.abs() < 1e-8);
    }

    #[test]
    fn isotropic_sample_has_balanced_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![standard_normal(&mut rng), standard_normal(&mut rng)])
            .collect();
        let p = pca2(&data).unwrap();
        let ratio = p.explained_variance[0] / p.explained_variance[1];
        assert!((0.8..=1.25).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_columns_dropped() {
        let data: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 7.0, (i * i) as f64]).collect();
        let p = pca2(&data).unwrap();
        assert_eq!(p.components[0][1], 0.0);
        assert_eq!(p.components[1][1], 0.0);
        let only_one: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 7.0]).collect();
        assert_eq!(pca2(&only_one).unwrap_err(), AnalyticsError::DegenerateData);
    }

    #[test]
    fn sign_convention() {
        let data: Vec<Vec<f64>> = (0..6).map(|i| vec![-(i as f64), 0.5 * i as f64 + (i % 2) as f64]).collect();
        let p = pca2(&data).unwrap();
        for c in &p.components {
            let big = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }
}
