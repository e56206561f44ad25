use std::io::Write;

use super::{CorrelationMatrix, ImportanceVector};
use crate::fmt_f64;

/// Outcome of redundancy pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub importance: ImportanceVector,
    /// Indices of surviving features in original order.
    pub kept: Vec<usize>,
}

impl SelectionReport {
    pub fn kept_names(&self) -> Vec<String> {
        self.kept.iter().map(|&i| self.importance.names[i].clone()).collect()
    }
}

/// Drops the less important member of every pair with `|r| > threshold`.
///
/// Pairs are visited in descending `|r|`, ties by lower index. Equal
/// importances keep the lower index. The result does not depend on visiting
/// order: a feature survives exactly when no feature it correlates with
/// strongly outranks it.
pub fn select_features(
    importance: &ImportanceVector,
    corr: &CorrelationMatrix,
    corr_threshold: f64,
) -> SelectionReport {
    let f = importance.values.len();
    let mut pairs = Vec::new();
    for i in 0..f {
        for j in (i + 1)..f {
            if let Some(r) = corr.get(i, j) {
                if r.abs() > corr_threshold {
                    pairs.push((r.abs(), i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut dropped = vec![false; f];
    for (_, i, j) in pairs {
        let loser = if importance.values[j] > importance.values[i] { i } else { j };
        dropped[loser] = true;
    }
    SelectionReport {
        importance: importance.clone(),
        kept: (0..f).filter(|&i| !dropped[i]).collect(),
    }
}

/// `feature,importance,kept` rows.
pub fn write_selection_csv<W: Write>(report: &SelectionReport, mut out: W) -> std::io::Result<W> {
    writeln!(out, "feature,importance,kept")?;
    for (i, (name, v)) in report.importance.names.iter().zip(&report.importance.values).enumerate() {
        writeln!(out, "{name},{},{}", fmt_f64(*v), report.kept.contains(&i))?;
    }
    out.flush()?;
    Ok(out)
}

pub fn write_correlation_csv<W: Write>(corr: &CorrelationMatrix, out: W) -> std::io::Result<W> {
    let mut out = corr.write_csv(out)?;
    out.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::pearson_columns;
    use super::*;
    use proptest::prelude::*;

    fn importance(values: &[f64]) -> ImportanceVector {
        ImportanceVector { names: (0..values.len()).map(|i| format!("x{i}")).collect(), values: values.to_vec() }
    }

    #[test]
    fn lower_importance_member_dropped() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + 0.3 * (i as f64 * 7.1).cos()).collect();
        let corr = pearson_columns(&importance(&[0.0, 0.0]).names, &[a, b]);
        assert!(corr.get(0, 1).unwrap() > 0.5);
        let rep = select_features(&importance(&[0.3, 0.7]), &corr, 0.5);
        assert_eq!(rep.kept, vec![1]);
        let rep = select_features(&importance(&[0.7, 0.3]), &corr, 0.5);
        assert_eq!(rep.kept, vec![0]);
        assert_eq!(rep.kept_names(), vec!["x0".to_string()]);
    }

    #[test]
    fn weak_correlations_keep_everything() {
        let cols: Vec<Vec<f64>> = (0..4).map(|k| (0..40).map(|i| ((i * (k + 3)) % 11) as f64).collect()).collect();
        let corr = pearson_columns(&importance(&[0.25; 4]).names, &cols);
        let rep = select_features(&importance(&[0.25; 4]), &corr, 1.1);
        assert_eq!(rep.kept, vec![0, 1, 2, 3]);
    }

    #[test]
    fn selection_csv_shape() {
        let a = vec![1.0, 2.0, 3.0];
        let corr = pearson_columns(&importance(&[0.5, 0.5]).names, &[a.clone(), a]);
        let rep = select_features(&importance(&[0.5, 0.5]), &corr, 0.5);
        let text = String::from_utf8(write_selection_csv(&rep, Vec::new()).unwrap()).unwrap();
        assert_eq!(text, "feature,importance,kept\nx0,0.5,true\nx1,0.5,false\n");
        let text = String::from_utf8(write_correlation_csv(&corr, Vec::new()).unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "feature,x0,x1");
    }

    proptest! {
        #[test]
        fn survivors_have_no_stronger_partner(
            cols in prop::collection::vec(prop::collection::vec(-10f64..10.0, 8), 2..6),
            seed_imp in prop::collection::vec(0.0f64..1.0, 6),
            threshold in 0.0f64..1.0,
        ) {
            let f = cols.len();
            let imp = importance(&seed_imp[..f]);
            let corr = pearson_columns(&imp.names, &cols);
            let rep = select_features(&imp, &corr, threshold);
            for i in 0..f {
                let beaten = (0..f).any(|j| {
                    j != i
                        && corr.get(i, j).is_some_and(|r| r.abs() > threshold)
                        && (imp.values[j] > imp.values[i] || (imp.values[j] == imp.values[i] && j < i))
                });
                prop_assert_eq!(rep.kept.contains(&i), !beaten);
            }
        }
    }
}
