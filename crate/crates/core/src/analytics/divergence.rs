use super::AnalyticsError;

/// `1 - cos(u, v)`, in [0, 2].
pub fn cosine_divergence(u: &[f64], v: &[f64]) -> Result<f64, AnalyticsError> {
    if u.len() != v.len() {
        return Err(AnalyticsError::LengthMismatch(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(AnalyticsError::ZeroVector);
    }
    if u == v {
        return Ok(0.0);
    }
    let cos = (dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}
