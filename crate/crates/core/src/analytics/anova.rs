use serde::{Deserialize, Serialize};

use super::special::inc_beta;
use super::AnalyticsError;

/// Full one-way ANOVA table plus fit statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub df_model: usize,
    pub df_error: usize,
    pub df_total: usize,
    pub ss_model: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub ms_model: f64,
    pub ms_error: f64,
    pub f_value: f64,
    pub p_value: f64,
    pub r_square: f64,
    pub root_mse: f64,
    pub grand_mean: f64,
    /// Root MSE as a percentage of the grand mean.
    pub coeff_var: f64,
}

/// Upper tail `P(F > f)` of the F distribution with (`df1`, `df2`) degrees of freedom.
pub fn f_survival(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_nan() || f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    inc_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)).clamp(0.0, 1.0)
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, AnalyticsError> {
    if groups.len() < 2 {
        return Err(AnalyticsError::Invalid("need at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(AnalyticsError::Invalid("every group needs a value".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if n <= k {
        return Err(AnalyticsError::Invalid(format!(
            "{n} observations cannot support {k} groups"
        )));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AnalyticsError::Invalid("non-finite observation".into()));
    }

    let grand_mean = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_model = 0.0;
    let mut ss_error = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_model += g.len() as f64 * (mean - grand_mean).powi(2);
        ss_error += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let ss_total: f64 = groups.iter().flatten().map(|v| (v - grand_mean).powi(2)).sum();
    if ss_error == 0.0 {
        return Err(AnalyticsError::DegenerateVariance);
    }

    let df_model = k - 1;
    let df_error = n - k;
    let ms_model = ss_model / df_model as f64;
    let ms_error = ss_error / df_error as f64;
    let f_value = ms_model / ms_error;
    let root_mse = ms_error.sqrt();
    Ok(AnovaResult {
        df_model,
        df_error,
        df_total: n - 1,
        ss_model,
        ss_error,
        ss_total,
        ms_model,
        ms_error,
        f_value,
        p_value: f_survival(f_value, df_model as f64, df_error as f64),
        r_square: ss_model / ss_total,
        root_mse,
        grand_mean,
        coeff_var: 100.0 * root_mse / grand_mean,
    })
}
