use std::io::Write;

use crate::dataset::Dataset;
use crate::fmt_f64;

/// Symmetric matrix of Pearson coefficients. `None` marks pairs involving a
/// zero-variance feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    values: Vec<Option<f64>>,
}

impl CorrelationMatrix {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.len() + j]
    }

    pub(crate) fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<W> {
        write!(out, "feature")?;
        for n in &self.names {
            write!(out, ",{n}")?;
        }
        writeln!(out)?;
        for (i, n) in self.names.iter().enumerate() {
            write!(out, "{n}")?;
            for j in 0..self.len() {
                match self.get(i, j) {
                    Some(r) => write!(out, ",{}", fmt_f64(r))?,
                    None => write!(out, ",undefined")?,
                }
            }
            writeln!(out)?;
        }
        Ok(out)
    }
}

/// One row per window: each feature averaged over the timesteps.
pub fn window_means(dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset.windows.iter().map(|w| w.feature_means()).collect()
}

/// Pearson matrix over per-window time-averaged features.
pub fn pearson_matrix(dataset: &Dataset) -> CorrelationMatrix {
    let rows = window_means(dataset);
    let f = dataset.feature_count();
    let columns: Vec<Vec<f64>> = (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    pearson_columns(&dataset.feature_names, &columns)
}

/// Two-pass Pearson coefficients between equally long columns.
pub fn pearson_columns(names: &[String], columns: &[Vec<f64>]) -> CorrelationMatrix {
    let f = columns.len();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let ss: Vec<f64> = centered.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    let mut values = vec![None; f * f];
    for i in 0..f {
        if ss[i] <= 0.0 {
            continue;
        }
        values[i * f + i] = Some(1.0);
        for j in (i + 1)..f {
            if ss[j] <= 0.0 {
                continue;
            }
            let cross: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (cross / (ss[i] * ss[j]).sqrt()).clamp(-1.0, 1.0);
            values[i * f + j] = Some(r);
            values[j * f + i] = Some(r);
        }
    }
    CorrelationMatrix { names: names.to_vec(), values }
}
