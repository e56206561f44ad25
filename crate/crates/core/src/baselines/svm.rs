use rand::seq::SliceRandom;

use super::{check_features, check_width, training_norm, BaselineError};
use crate::dataset::{CrashRisk, Dataset};
use crate::features::NormalizationParams;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::{fmt_f64, rng, TIMESTEPS};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { lambda: 1e-3, epochs: 20, seed: 0 }
    }
}

/// Three one-vs-rest linear classifiers. Each weight vector carries its bias
/// as the last entry, applied to a constant input of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub lambda: f64,
    pub weights: [Vec<f64>; 3],
}

fn dot_with_bias(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[d] + w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

/// Pegasos-style subgradient descent on the regularized hinge loss, one
/// sample at a time with step `1/(λt)`. Samples are visited in a fresh
/// seeded order each epoch. Labels are `±1`.
pub fn train_binary_svm(xs: &[&[f64]], ys: &[f64], lambda: f64, epochs: usize, seed: u64) -> Vec<f64> {
    let d = xs.first().map_or(0, |x| x.len());
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = rng::stream(seed, "svm-order");
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let violated = ys[i] * dot_with_bias(&w, xs[i]) < 1.0;
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if violated {
                let step = eta * ys[i];
                for (v, x) in w.iter_mut().zip(xs[i]) {
                    *v += step * x;
                }
                w[d] += step;
            }
        }
    }
    w
}

pub fn train_svm_ovr(train: &Dataset, config: &SvmConfig) -> Result<SvmModel, BaselineError> {
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(BaselineError::InvalidConfig(format!("lambda {} must be positive", config.lambda)));
    }
    let norm = training_norm(train)?;
    let xs: Vec<&[f64]> = train.windows.iter().map(|w| w.values.as_slice()).collect();
    let weights = CrashRisk::ALL.map(|class| {
        let ys: Vec<f64> = train.windows.iter().map(|w| if w.label == class { 1.0 } else { -1.0 }).collect();
        train_binary_svm(&xs, &ys, config.lambda, config.epochs, config.seed)
    });
    if weights.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFiniteLoss { epoch: config.epochs });
    }
    Ok(SvmModel { feature_names: train.feature_names.clone(), normalization: norm, lambda: config.lambda, weights })
}

impl SvmModel {
    pub fn input_width(&self) -> usize {
        TIMESTEPS * self.feature_names.len()
    }

    /// Signed margins for classes 0, 0.5 and 1.
    pub fn margins(&self, values: &[f64]) -> Result<[f64; 3], BaselineError> {
        check_width(self.input_width(), values, &self.feature_names)?;
        Ok([0, 1, 2].map(|c| dot_with_bias(&self.weights[c], values)))
    }

    /// Argmax margin; ties go to the higher-risk class.
    pub fn classify(margins: &[f64; 3]) -> CrashRisk {
        let mut best = 0;
        for k in 1..3 {
            if margins[k] >= margins[best] {
                best = k;
            }
        }
        CrashRisk::ALL[best]
    }

    /// Class center of the winning margin.
    pub fn score(&self, values: &[f64]) -> Result<f64, BaselineError> {
        Ok(Self::classify(&self.margins(values)?).value())
    }

    pub fn predict_margins(&self, dataset: &Dataset) -> Result<Vec<[f64; 3]>, BaselineError> {
        check_features(&self.feature_names, &dataset.feature_names)?;
        if dataset.normalization.is_none() {
            return Err(BaselineError::NotNormalized);
        }
        dataset.windows.iter().map(|w| self.margins(&w.values)).collect()
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            kind: "svm".into(),
            feature_names: self.feature_names.clone(),
            dims: vec![
                ("timesteps".into(), TIMESTEPS.to_string()),
                ("features".into(), self.feature_names.len().to_string()),
                ("lambda".into(), fmt_f64(self.lambda)),
            ],
            normalization: self.normalization.clone(),
            body: self.weights.iter().map(|w| ModelFile::tensor_line(w)).collect(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<SvmModel, ModelFileError> {
        let timesteps: usize = file.dim("timesteps")?;
        let features: usize = file.dim("features")?;
        let lambda: f64 = file.dim("lambda")?;
        if timesteps != TIMESTEPS || features != file.feature_names.len() || !(lambda > 0.0) {
            return Err(ModelFileError::Format {
                line: 3,
                reason: format!("inconsistent dims timesteps={timesteps} features={features} lambda={lambda}"),
            });
        }
        file.expect_body_len(3)?;
        let len = TIMESTEPS * features + 1;
        let weights = [file.tensor(0, len)?, file.tensor(1, len)?, file.tensor(2, len)?];
        Ok(SvmModel {
            feature_names: file.feature_names.clone(),
            normalization: file.normalization.clone(),
            lambda,
            weights,
        })
    }
}
