use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 with `stddev_undefined` at n = 1.
    pub stddev: f64,
    pub stddev_undefined: bool,
    pub se_mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

// Linear interpolation between order statistics (type 7).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary statistics. Returns `None` for an empty sample.
pub fn describe(samples: &[f64]) -> Option<Description> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let (stddev, stddev_undefined) = if n > 1 {
        let ss: f64 = samples.iter().map(|v| (v - mean).powi(2)).sum();
        ((ss / (n - 1) as f64).sqrt(), false)
    } else {
        (0.0, true)
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Description {
        n,
        mean,
        stddev,
        stddev_undefined,
        se_mean: stddev / (n as f64).sqrt(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let d = describe(&[5.0]).unwrap();
        assert_eq!((d.mean, d.min, d.max, d.median), (5.0, 5.0, 5.0, 5.0));
        assert!(d.stddev_undefined);
        assert_eq!(d.stddev, 0.0);
    }

    #[test]
    fn one_to_four() {
        let d = describe(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.mean, 2.5);
        assert_eq!(d.median, 2.5);
        // sqrt(5/3)
        assert!((d.stddev - 1.290_994_448_735_805_6).abs() < 1e-12);
        assert_eq!(d.q1, 1.75);
        assert_eq!(d.q3, 3.25);
        assert!((d.se_mean - d.stddev / 2.0).abs() < 1e-15);
    }

    #[test]
    fn se_is_sd_over_root_n() {
        // round-2 divergence row: sd 0.02164 over 7 agents gives SE 0.00818
        assert!((0.02164 / 7f64.sqrt() - 0.00818).abs() < 1e-5);
    }

    #[test]
    fn empty() {
        assert!(describe(&[]).is_none());
    }
}
