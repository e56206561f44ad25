use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    /// `√(1 − SSE/SST)`; `None` when the observations have zero variance.
    pub r: Option<f64>,
    /// Set when SSE exceeded SST and the radicand was clamped to 0.
    pub r_clamped: bool,
}

impl RegressionMetrics {
    pub fn r(&self) -> Result<f64, EvalError> {
        self.r.ok_or(EvalError::ZeroVariance)
    }
}

pub fn regression_metrics(predicted: &[f64], observed: &[f64]) -> Result<RegressionMetrics, EvalError> {
    if predicted.len() != observed.len() {
        return Err(EvalError::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    if observed.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = observed.len() as f64;
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    let mean = observed.iter().sum::<f64>() / n;
    let sst: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    let mse = sse / n;
    let (r, r_clamped) = if sst > 0.0 {
        let radicand = 1.0 - sse / sst;
        (Some(radicand.max(0.0).sqrt()), radicand < 0.0)
    } else {
        (None, false)
    };
    Ok(RegressionMetrics { mse, rmse: mse.sqrt(), r, r_clamped })
}
