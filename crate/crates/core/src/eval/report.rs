use super::regression::RegressionMetrics;
use super::roc::{auc, eer_threshold, nearest_operating_point, roc_curve, EerPoint, RocCurve};
use super::{ConfusionMatrix2, EvalError};
use crate::dataset::CrashRisk;

/// Results for one binarized class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: CrashRisk,
    /// Truth instances of this class.
    pub observations: usize,
    pub curve: Option<RocCurve>,
    pub auc: Option<f64>,
    pub eer: Option<EerPoint>,
    /// Counts at the curve point nearest the equal-error condition.
    pub confusion: Option<ConfusionMatrix2>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub precision_ppv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aggregate {
    pub auc: Option<f64>,
    pub fpr: Option<f64>,
    pub precision: Option<f64>,
    pub precision_ppv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<ClassReport>,
    pub micro: Aggregate,
    pub micro_curve: Option<RocCurve>,
    pub macro_avg: Aggregate,
    pub weighted_macro: Aggregate,
    pub regression: Option<RegressionMetrics>,
    pub warnings: Vec<String>,
}

/// Unweighted mean.
pub fn macro_average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean weighted by observation counts.
pub fn weighted_macro_average(values: &[f64], observations: &[usize]) -> Option<f64> {
    let total: usize = observations.iter().sum();
    (total > 0).then(|| values.iter().zip(observations).map(|(v, &n)| v * n as f64).sum::<f64>() / total as f64)
}

/// `ΣTP / (ΣTP + ΣFP)` over pooled binarized problems.
pub fn micro_precision(matrices: &[ConfusionMatrix2]) -> Option<f64> {
    let tp: usize = matrices.iter().map(|m| m.tp).sum();
    let fp: usize = matrices.iter().map(|m| m.fp).sum();
    (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64)
}

/// Binarizes the three-class problem per class and aggregates.
pub fn one_vs_rest_report(scores: &[[f64; 3]], truth: &[CrashRisk]) -> Result<EvalReport, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: truth.len() });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut warnings = Vec::new();
    let mut classes = Vec::new();
    for class in CrashRisk::ALL {
        let k = class.index();
        let column: Vec<f64> = scores.iter().map(|s| s[k]).collect();
        let flags: Vec<bool> = truth.iter().map(|&t| t == class).collect();
        let observations = flags.iter().filter(|&&f| f).count();
        let mut report = ClassReport {
            class,
            observations,
            curve: None,
            auc: None,
            eer: None,
            confusion: None,
            fpr: None,
            precision: None,
            precision_ppv: None,
        };
        match roc_curve(&column, &flags) {
            Ok(curve) => {
                let cm = curve.confusion_at(nearest_operating_point(&curve));
                report.auc = Some(auc(&curve));
                report.eer = Some(eer_threshold(&curve));
                report.fpr = cm.fpr().ok();
                report.precision = report.fpr.map(|f| 1.0 - f);
                report.precision_ppv = cm.precision_ppv().ok();
                report.confusion = Some(cm);
                report.curve = Some(curve);
            }
            Err(EvalError::SingleClass) if observations == 0 => {
                warnings.push(format!("{}; excluded from macro averages", EvalError::MissingClass(class)));
            }
            Err(EvalError::SingleClass) => {
                warnings.push(format!("class {class} has no negatives; excluded from macro averages"));
            }
            Err(e) => return Err(e),
        }
        classes.push(report);
    }

    let evaluated: Vec<&ClassReport> = classes.iter().filter(|c| c.curve.is_some()).collect();
    let pick = |f: fn(&ClassReport) -> Option<f64>| -> (Vec<f64>, Vec<usize>) {
        evaluated.iter().filter_map(|c| f(c).map(|v| (v, c.observations))).unzip()
    };
    let aggregate = |weighted: bool| {
        let one = |f: fn(&ClassReport) -> Option<f64>| {
            let (values, obs) = pick(f);
            if weighted {
                weighted_macro_average(&values, &obs)
            } else {
                macro_average(&values)
            }
        };
        Aggregate { auc: one(|c| c.auc), fpr: one(|c| c.fpr), precision: one(|c| c.precision), precision_ppv: one(|c| c.precision_ppv) }
    };
    let macro_avg = aggregate(false);
    let weighted_macro = aggregate(true);

    let pooled_scores: Vec<f64> = CrashRisk::ALL.iter().flat_map(|c| scores.iter().map(move |s| s[c.index()])).collect();
    let pooled_truth: Vec<bool> = CrashRisk::ALL.iter().flat_map(|&c| truth.iter().map(move |&t| t == c)).collect();
    let micro_curve = roc_curve(&pooled_scores, &pooled_truth).ok();
    let matrices: Vec<ConfusionMatrix2> = evaluated.iter().filter_map(|c| c.confusion).collect();
    let pooled = matrices.iter().fold(ConfusionMatrix2::default(), |acc, m| acc.add(m));
    let micro_fpr = pooled.fpr().ok();
    let micro = Aggregate {
        auc: micro_curve.as_ref().map(auc),
        fpr: micro_fpr,
        precision: micro_fpr.map(|f| 1.0 - f),
        precision_ppv: micro_precision(&matrices),
    };

    Ok(EvalReport { classes, micro, micro_curve, macro_avg, weighted_macro, regression: None, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn macro_of_table_precisions() {
        let m = macro_average(&[0.88, 0.82, 0.95]).unwrap();
        assert!((m - 0.8833).abs() < 1e-4);
        assert!((m - 0.89).abs() <= 0.01);
    }

    #[test]
    fn weighted_single_class_is_that_class() {
        assert!((weighted_macro_average(&[0.7], &[12]).unwrap() - 0.7).abs() < 1e-15);
        assert!((weighted_macro_average(&[0.7, 0.1], &[12, 0]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn macro_equals_weighted_for_equal_frequencies() {
        let v = [0.3, 0.9, 0.6];
        assert!((macro_average(&v).unwrap() - weighted_macro_average(&v, &[5, 5, 5]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn micro_precision_pools_counts() {
        let cms: Vec<ConfusionMatrix2> = [(9, 1), (8, 2), (9, 1)]
            .iter()
            .map(|&(tp, fp)| ConfusionMatrix2 { tp, fp, fn_: 0, tn: 0 })
            .collect();
        assert_eq!(micro_precision(&cms), Some(26.0 / 30.0));
    }

    fn sample() -> (Vec<[f64; 3]>, Vec<CrashRisk>) {
        let truth = vec![
            CrashRisk::None,
            CrashRisk::None,
            CrashRisk::Low,
            CrashRisk::High,
            CrashRisk::High,
            CrashRisk::None,
            CrashRisk::Low,
        ];
        let scores = vec![
            [0.9, 0.1, 0.0],
            [0.7, 0.3, 0.0],
            [0.2, 0.8, 0.0],
            [0.0, 0.4, 0.6],
            [0.0, 0.1, 0.9],
            [0.4, 0.6, 0.0],
            [0.5, 0.5, 0.0],
        ];
        (scores, truth)
    }

    #[test]
    fn report_aggregates_are_consistent() {
        let (scores, truth) = sample();
        let r = one_vs_rest_report(&scores, &truth).unwrap();
        let cms: Vec<ConfusionMatrix2> = r.classes.iter().map(|c| c.confusion.unwrap()).collect();
        let tp: usize = cms.iter().map(|m| m.tp).sum();
        let fp: usize = cms.iter().map(|m| m.fp).sum();
        assert_eq!(r.micro.precision_ppv, Some(tp as f64 / (tp + fp) as f64));
        let aucs: Vec<f64> = r.classes.iter().map(|c| c.auc.unwrap()).collect();
        assert_eq!(r.macro_avg.auc, macro_average(&aucs));
        assert_eq!(r.weighted_macro.auc, weighted_macro_average(&aucs, &[3, 2, 2]));
        for c in &r.classes {
            assert_eq!(c.precision.unwrap(), 1.0 - c.fpr.unwrap());
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn missing_class_is_excluded_with_warning() {
        let truth = vec![CrashRisk::None, CrashRisk::High, CrashRisk::None, CrashRisk::High];
        let scores = vec![[0.9, 0.1, 0.0], [0.0, 0.3, 0.7], [0.6, 0.4, 0.0], [0.1, 0.2, 0.8]];
        let r = one_vs_rest_report(&scores, &truth).unwrap();
        assert_eq!(r.classes[1].auc, None);
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.macro_avg.auc, Some(1.0));
    }
}
