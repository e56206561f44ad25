use rand::Rng;

use super::{check_features, check_width, training_norm, BaselineError};
use crate::dataset::Dataset;
use crate::features::NormalizationParams;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::neuralnet::layers::{relu, relu_grad, sigmoid, Dense};
use crate::neuralnet::sgd_momentum_step;
use crate::{rng, TIMESTEPS};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub hidden_width: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { learning_rate: 0.01, momentum: 0.9, epochs: 100, hidden_width: 32, seed: 0 }
    }
}

/// Flattened window → Dense(ReLU) → Dense(sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub hidden: Dense,
    pub output: Dense,
}

impl MlpModel {
    pub fn zeros(feature_names: Vec<String>, normalization: NormalizationParams, hidden_width: usize) -> MlpModel {
        let inputs = TIMESTEPS * feature_names.len();
        MlpModel {
            feature_names,
            normalization,
            hidden: Dense::zeros(inputs, hidden_width),
            output: Dense::zeros(hidden_width, 1),
        }
    }

    /// Weights uniform in `±1/√fan_in` from the `mlp-init` stream.
    pub fn initialize(feature_names: Vec<String>, normalization: NormalizationParams, config: &MlpConfig) -> MlpModel {
        let mut model = MlpModel::zeros(feature_names, normalization, config.hidden_width);
        let mut rng = rng::stream(config.seed, "mlp-init");
        for layer in [&mut model.hidden, &mut model.output] {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..=bound);
            }
        }
        model
    }

    pub fn input_width(&self) -> usize {
        self.hidden.inputs
    }

    /// Parameters in the order hidden weights, hidden bias, output weights,
    /// output bias.
    pub fn params(&self) -> Vec<f64> {
        [&self.hidden.weights, &self.hidden.bias, &self.output.weights, &self.output.bias]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let mut rest = params;
        for part in [&mut self.hidden.weights, &mut self.hidden.bias, &mut self.output.weights, &mut self.output.bias] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        assert!(rest.is_empty());
    }

    pub fn score(&self, values: &[f64]) -> Result<f64, BaselineError> {
        check_width(self.input_width(), values, &self.feature_names)?;
        let hidden: Vec<f64> = self.hidden.forward(values).into_iter().map(relu).collect();
        Ok(sigmoid(self.output.forward(&hidden)[0]))
    }

    /// Mean squared error over a batch and its flat gradient.
    pub fn batch_gradients(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(f64, Vec<f64>), BaselineError> {
        let n = inputs.len() as f64;
        let hw = self.hidden.weights.len();
        let hb = hw + self.hidden.bias.len();
        let ow = hb + self.output.weights.len();
        let mut grads = vec![0.0; ow + 1];
        let mut sse = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            check_width(self.input_width(), x, &self.feature_names)?;
            let pre = self.hidden.forward(x);
            let act: Vec<f64> = pre.iter().map(|&z| relu(z)).collect();
            let y = sigmoid(self.output.forward(&act)[0]);
            let err = y - t;
            sse += err * err;
            let dz = 2.0 * err / n * y * (1.0 - y);
            let (head, out_part) = grads.split_at_mut(hb);
            let (hid_w, hid_b) = head.split_at_mut(hw);
            let (out_w, out_b) = out_part.split_at_mut(ow - hb);
            let d_act = self.output.backward(&act, &[dz], out_w, out_b);
            let d_pre: Vec<f64> = d_act.iter().zip(&pre).map(|(g, &z)| g * relu_grad(z)).collect();
            self.hidden.backward(x, &d_pre, hid_w, hid_b);
        }
        Ok((sse / n, grads))
    }

    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>, BaselineError> {
        check_features(&self.feature_names, &dataset.feature_names)?;
        if dataset.normalization.is_none() {
            return Err(BaselineError::NotNormalized);
        }
        dataset.windows.iter().map(|w| self.score(&w.values)).collect()
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            kind: "mlp".into(),
            feature_names: self.feature_names.clone(),
            dims: vec![
                ("timesteps".into(), TIMESTEPS.to_string()),
                ("features".into(), self.feature_names.len().to_string()),
                ("hidden".into(), self.hidden.outputs.to_string()),
            ],
            normalization: self.normalization.clone(),
            body: [&self.hidden.weights, &self.hidden.bias, &self.output.weights, &self.output.bias]
                .into_iter()
                .map(|t| ModelFile::tensor_line(t))
                .collect(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<MlpModel, ModelFileError> {
        let dim_err = |reason: String| ModelFileError::Format { line: 3, reason };
        let timesteps: usize = file.dim("timesteps")?;
        let features: usize = file.dim("features")?;
        let hidden: usize = file.dim("hidden")?;
        if timesteps != TIMESTEPS || features != file.feature_names.len() || hidden == 0 {
            return Err(dim_err(format!(
                "inconsistent dims timesteps={timesteps} features={features} hidden={hidden} for {} names",
                file.feature_names.len()
            )));
        }
        let mut model = MlpModel::zeros(file.feature_names.clone(), file.normalization.clone(), hidden);
        file.expect_body_len(4)?;
        let sizes = [model.hidden.weights.len(), hidden, hidden, 1];
        let mut params = Vec::new();
        for (k, len) in sizes.into_iter().enumerate() {
            params.extend(file.tensor(k, len)?);
        }
        model.set_params(&params);
        Ok(model)
    }
}

/// Full-batch momentum SGD on MSE.
pub fn train_bp_mlp(train: &Dataset, config: &MlpConfig) -> Result<MlpModel, BaselineError> {
    if !(config.learning_rate > 0.0) || !(0.0..1.0).contains(&config.momentum) || config.hidden_width == 0 {
        return Err(BaselineError::InvalidConfig(format!(
            "learning rate {}, momentum {}, hidden width {}",
            config.learning_rate, config.momentum, config.hidden_width
        )));
    }
    let norm = training_norm(train)?;
    let mut model = MlpModel::initialize(train.feature_names.clone(), norm, config);
    let inputs: Vec<&[f64]> = train.windows.iter().map(|w| w.values.as_slice()).collect();
    let targets = train.targets();
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    for epoch in 1..=config.epochs {
        let (mse, grads) = model.batch_gradients(&inputs, &targets)?;
        if !mse.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
        sgd_momentum_step(&mut params, &grads, &mut velocity, config.learning_rate, config.momentum);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
        model.set_params(&params);
    }
    Ok(model)
}
