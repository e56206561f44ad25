use super::{ConfusionMatrix2, EvalError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Predictions are positive when `score >= threshold`; the leading
    /// `(0, 0)` point has an infinite threshold.
    pub threshold: f64,
}

/// Operating points from `(0, 0)` to `(1, 1)`, thresholds strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// Counts at the point with index `k`.
    pub fn confusion_at(&self, k: usize) -> ConfusionMatrix2 {
        let p = self.points[k];
        let tp = (p.tpr * self.positives as f64).round() as usize;
        let fp = (p.fpr * self.negatives as f64).round() as usize;
        ConfusionMatrix2 { tp, fp, fn_: self.positives - tp, tn: self.negatives - fp }
    }
}

/// One point per distinct score, swept from the highest score down.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocCurve, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: truth.len() });
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / negatives as f64, tpr: tp as f64 / positives as f64, threshold: s });
    }
    Ok(RocCurve { points, positives, negatives })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Point where sensitivity meets specificity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl EerPoint {
    /// `|TPR − (1 − FPR)|`.
    pub fn gap(&self) -> f64 {
        (self.tpr - (1.0 - self.fpr)).abs()
    }
}

/// Equal-error point, interpolated linearly along the segment where
/// `TPR − (1 − FPR)` changes sign.
pub fn eer_threshold(curve: &RocCurve) -> EerPoint {
    let d = |p: &RocPoint| p.tpr + p.fpr - 1.0;
    let pts = &curve.points;
    let k = pts.iter().position(|p| d(p) >= 0.0).unwrap_or(pts.len() - 1);
    let cur = pts[k];
    if d(&cur) == 0.0 || k == 0 {
        return EerPoint { threshold: cur.threshold, fpr: cur.fpr, tpr: cur.tpr };
    }
    let prev = pts[k - 1];
    let lambda = -d(&prev) / (d(&cur) - d(&prev));
    let lerp = |a: f64, b: f64| a + lambda * (b - a);
    let threshold = if prev.threshold.is_finite() { lerp(prev.threshold, cur.threshold) } else { cur.threshold };
    EerPoint { threshold, fpr: lerp(prev.fpr, cur.fpr), tpr: lerp(prev.tpr, cur.tpr) }
}

/// Index of the actual curve point closest to the equal-error condition;
/// ties go to the higher threshold.
pub fn nearest_operating_point(curve: &RocCurve) -> usize {
    let mut best = 0;
    for (k, p) in curve.points.iter().enumerate() {
        let gap = (p.tpr + p.fpr - 1.0).abs();
        if gap < (curve.points[best].tpr + curve.points[best].fpr - 1.0).abs() {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mann_whitney(scores: &[f64], truth: &[bool]) -> f64 {
        let mut acc = 0.0;
        let mut pairs = 0.0;
        for (i, &ti) in truth.iter().enumerate() {
            if !ti {
                continue;
            }
            for (j, &tj) in truth.iter().enumerate() {
                if tj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    acc += 1.0;
                } else if scores[i] == scores[j] {
                    acc += 0.5;
                }
            }
        }
        acc / pairs
    }

    #[test]
    fn perfect_separation() {
        let curve = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(curve.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auc(&curve), 1.0);
        let eer = eer_threshold(&curve);
        assert_eq!((eer.fpr, eer.tpr), (0.0, 1.0));
        assert_eq!(eer.gap(), 0.0);
    }

    #[test]
    fn identical_scores_give_diagonal() {
        let curve = roc_curve(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(curve.points.len(), 2);
        assert_eq!((curve.points[1].fpr, curve.points[1].tpr), (1.0, 1.0));
        assert_eq!(auc(&curve), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(roc_curve(&[0.1, 0.2], &[true, true]), Err(EvalError::SingleClass));
    }

    #[test]
    fn exact_crossing_returns_that_threshold() {
        // 10 positives, 10 negatives: TPR 0.9 and FPR 0.1 at score 0.9.
        let mut scores = vec![0.9; 10];
        scores.extend(vec![0.1; 10]);
        let mut truth = vec![true; 9];
        truth.push(false);
        truth.push(true);
        truth.extend(vec![false; 9]);
        let curve = roc_curve(&scores, &truth).unwrap();
        let eer = eer_threshold(&curve);
        assert_eq!(eer.threshold, 0.9);
        assert!((eer.tpr - 0.9).abs() < 1e-12 && (eer.fpr - 0.1).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_threshold_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..30).map(|_| (rng.random::<f64>() * 10.0).floor() / 10.0).collect();
        let mut truth: Vec<bool> = (0..30).map(|_| rng.random()).collect();
        truth[0] = true;
        truth[1] = false;
        let curve = roc_curve(&scores, &truth).unwrap();
        let p = truth.iter().filter(|&&t| t).count() as f64;
        let n = 30.0 - p;
        for point in &curve.points[1..] {
            let tp = (0..30).filter(|&i| truth[i] && scores[i] >= point.threshold).count() as f64;
            let fp = (0..30).filter(|&i| !truth[i] && scores[i] >= point.threshold).count() as f64;
            assert_eq!(point.tpr, tp / p);
            assert_eq!(point.fpr, fp / n);
        }
        let last = curve.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            data in prop::collection::vec((0u8..8, any::<bool>()), 2..50)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 7.0).collect();
            let truth: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let curve = roc_curve(&scores, &truth).unwrap();
            prop_assert!((auc(&curve) - mann_whitney(&scores, &truth)).abs() < 1e-9);

            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            let back = auc(&roc_curve(&flipped, &truth).unwrap());
            prop_assert!((back - (1.0 - auc(&curve))).abs() < 1e-9);

            let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3) + 2.0).collect();
            prop_assert!((auc(&roc_curve(&cubed, &truth).unwrap()) - auc(&curve)).abs() < 1e-12);

            for w in curve.points.windows(2) {
                prop_assert!(w[1].tpr >= w[0].tpr && w[1].fpr >= w[0].fpr);
                prop_assert!(w[1].threshold < w[0].threshold);
            }

            let eer = eer_threshold(&curve);
            let best = curve.points.iter().map(|p| (p.tpr - (1.0 - p.fpr)).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(eer.gap() <= best + 1e-12);
        }
    }
}
