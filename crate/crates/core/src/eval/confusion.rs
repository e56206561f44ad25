use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix2 {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix2 {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn tpr(&self) -> Result<f64, EvalError> {
        ratio(self.tp, self.tp + self.fn_, "TPR")
    }

    pub fn fpr(&self) -> Result<f64, EvalError> {
        ratio(self.fp, self.fp + self.tn, "FPR")
    }

    /// `TP / (TP + FP)`.
    pub fn precision_ppv(&self) -> Result<f64, EvalError> {
        ratio(self.tp, self.tp + self.fp, "precision")
    }

    pub fn add(&self, other: &ConfusionMatrix2) -> ConfusionMatrix2 {
        ConfusionMatrix2 {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

fn ratio(num: usize, den: usize, name: &'static str) -> Result<f64, EvalError> {
    if den == 0 {
        Err(EvalError::UndefinedRate(name))
    } else {
        Ok(num as f64 / den as f64)
    }
}

pub fn confusion_binary(predicted: &[bool], truth: &[bool]) -> Result<ConfusionMatrix2, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch { left: predicted.len(), right: truth.len() });
    }
    let mut cm = ConfusionMatrix2::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Rates of one binary problem; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryRates {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    /// `1 − FPR`, the identity the reported precision column satisfies.
    pub precision: Option<f64>,
    pub precision_ppv: Option<f64>,
}

pub fn binary_rates(cm: &ConfusionMatrix2) -> BinaryRates {
    let fpr = cm.fpr().ok();
    BinaryRates { tpr: cm.tpr().ok(), fpr, precision: fpr.map(|f| 1.0 - f), precision_ppv: cm.precision_ppv().ok() }
}
