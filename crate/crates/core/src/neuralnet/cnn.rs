use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::layers::{maxpool_backward, maxpool_forward, relu, relu_grad, sigmoid, Conv1d, Dense, Matrix, Pooled};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::NetError;
use crate::dataset::{CrashRisk, Dataset, Window};
use crate::features::NormalizationParams;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::{fmt_f64, rng, TIMESTEPS};

#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Batches are the whole training set when it has at most this many rows.
    pub batch_cap: usize,
    pub filter_count: usize,
    pub kernel_width: usize,
    pub pool_width: usize,
    pub dense_width: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            learning_rate: 0.01,
            epochs: 100,
            batch_cap: 10_000,
            filter_count: 64,
            kernel_width: 2,
            pool_width: 2,
            dense_width: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |msg: String| Err(NetError::InvalidConfig(msg));
        if self.filter_count == 0 || self.kernel_width == 0 || self.pool_width == 0 || self.dense_width == 0 {
            return bad("layer sizes must be positive".into());
        }
        if self.batch_cap == 0 {
            return bad("batch_cap must be positive".into());
        }
        if self.kernel_width > TIMESTEPS {
            return bad(format!("kernel width {} exceeds {TIMESTEPS} timesteps", self.kernel_width));
        }
        let conv_len = TIMESTEPS - self.kernel_width + 1;
        if self.pool_width > conv_len {
            return bad(format!("pool width {} exceeds conv output length {conv_len}", self.pool_width));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_epsilon <= 0.0
        {
            return bad("Adam constants out of range".into());
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Conv1D → ReLU → MaxPool → Flatten → Dense(ReLU) → Dense(sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub timesteps: usize,
    pub conv: Conv1d,
    pub pool_width: usize,
    pub hidden: Dense,
    pub output: Dense,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    pub conv_pre: Matrix,
    pub conv_act: Matrix,
    pub pooled: Pooled,
    pub hidden_pre: Vec<f64>,
    pub hidden_act: Vec<f64>,
    pub output_pre: f64,
    pub output: f64,
}

impl ForwardTrace {
    /// ReLU on/off states and pool winners. Finite differences are only
    /// meaningful between points that share this pattern.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.conv_pre.data.iter().map(|&v| usize::from(v > 0.0)).collect();
        p.extend(&self.pooled.argmax);
        p.extend(self.hidden_pre.iter().map(|&v| usize::from(v > 0.0)));
        p
    }
}

/// Flat gradient in parameter order: conv weights, conv biases, hidden
/// weights, hidden biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGradients {
    pub values: Vec<f64>,
    offsets: [usize; 7],
}

impl CnnGradients {
    fn part(&self, k: usize) -> &[f64] {
        &self.values[self.offsets[k]..self.offsets[k + 1]]
    }
    pub fn conv_weights(&self) -> &[f64] {
        self.part(0)
    }
    pub fn conv_bias(&self) -> &[f64] {
        self.part(1)
    }
    pub fn hidden_weights(&self) -> &[f64] {
        self.part(2)
    }
    pub fn hidden_bias(&self) -> &[f64] {
        self.part(3)
    }
    pub fn output_weights(&self) -> &[f64] {
        self.part(4)
    }
    pub fn output_bias(&self) -> f64 {
        self.part(5)[0]
    }
}

impl CnnModel {
    /// An all-zero network for `feature_names`.
    pub fn zeros(
        feature_names: Vec<String>,
        normalization: NormalizationParams,
        config: &CnnConfig,
    ) -> Result<CnnModel, NetError> {
        config.validate()?;
        if normalization.len() != feature_names.len() {
            return Err(NetError::DimensionMismatch(format!(
                "{} normalization ranges for {} features",
                normalization.len(),
                feature_names.len()
            )));
        }
        let f = feature_names.len();
        let conv_len = TIMESTEPS - config.kernel_width + 1;
        let flat = (conv_len / config.pool_width) * config.filter_count;
        Ok(CnnModel {
            feature_names,
            normalization,
            timesteps: TIMESTEPS,
            conv: Conv1d::zeros(config.filter_count, config.kernel_width, f),
            pool_width: config.pool_width,
            hidden: Dense::zeros(flat, config.dense_width),
            output: Dense::zeros(config.dense_width, 1),
        })
    }

    /// Weights uniform in `±1/√fan_in` from the seed's `cnn-init` stream;
    /// biases start at zero.
    pub fn initialize(
        feature_names: Vec<String>,
        normalization: NormalizationParams,
        config: &CnnConfig,
    ) -> Result<CnnModel, NetError> {
        let mut model = CnnModel::zeros(feature_names, normalization, config)?;
        let mut rng = rng::stream(config.seed, "cnn-init");
        let mut fill = |w: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in w {
                *v = rng.random_range(-bound..=bound);
            }
        };
        let conv_fan = model.conv.kernel * model.conv.channels;
        fill(&mut model.conv.weights, conv_fan);
        let hidden_fan = model.hidden.inputs;
        fill(&mut model.hidden.weights, hidden_fan);
        let out_fan = model.output.inputs;
        fill(&mut model.output.weights, out_fan);
        Ok(model)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    fn offsets(&self) -> [usize; 7] {
        let sizes = [
            self.conv.weights.len(),
            self.conv.bias.len(),
            self.hidden.weights.len(),
            self.hidden.bias.len(),
            self.output.weights.len(),
            self.output.bias.len(),
        ];
        let mut out = [0; 7];
        for (k, s) in sizes.iter().enumerate() {
            out[k + 1] = out[k] + s;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.offsets()[6]
    }

    /// All parameters, flattened in gradient order.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for part in self.tensors() {
            p.extend_from_slice(part);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let o = self.offsets();
        self.conv.weights.copy_from_slice(&params[o[0]..o[1]]);
        self.conv.bias.copy_from_slice(&params[o[1]..o[2]]);
        self.hidden.weights.copy_from_slice(&params[o[2]..o[3]]);
        self.hidden.bias.copy_from_slice(&params[o[3]..o[4]]);
        self.output.weights.copy_from_slice(&params[o[4]..o[5]]);
        self.output.bias.copy_from_slice(&params[o[5]..o[6]]);
    }

    fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.conv.weights,
            &self.conv.bias,
            &self.hidden.weights,
            &self.hidden.bias,
            &self.output.weights,
            &self.output.bias,
        ]
    }

    /// Full forward pass over a normalized row-major `timesteps × F` window.
    pub fn trace(&self, values: &[f64]) -> Result<ForwardTrace, NetError> {
        let input = Matrix::new(self.timesteps, self.feature_count(), values.to_vec())?;
        let conv_pre = self.conv.forward(&input)?;
        let conv_act = Matrix { data: conv_pre.data.iter().map(|&v| relu(v)).collect(), ..conv_pre.clone() };
        let pooled = maxpool_forward(&conv_act, self.pool_width)?;
        let hidden_pre = self.hidden.forward(&pooled.output.data);
        let hidden_act: Vec<f64> = hidden_pre.iter().map(|&v| relu(v)).collect();
        let output_pre = self.output.forward(&hidden_act)[0];
        Ok(ForwardTrace {
            input,
            conv_pre,
            conv_act,
            pooled,
            hidden_pre,
            hidden_act,
            output_pre,
            output: sigmoid(output_pre),
        })
    }

    pub fn score(&self, values: &[f64]) -> Result<f64, NetError> {
        Ok(self.trace(values)?.output)
    }

    /// Adds `dL/dθ` to `grads` given `dL/dy` at the output.
    fn accumulate(&self, trace: &ForwardTrace, dl_dy: f64, grads: &mut [f64]) {
        let o = self.offsets();
        let (conv_w, rest) = grads.split_at_mut(o[1]);
        let (conv_b, rest) = rest.split_at_mut(o[2] - o[1]);
        let (hid_w, rest) = rest.split_at_mut(o[3] - o[2]);
        let (hid_b, rest) = rest.split_at_mut(o[4] - o[3]);
        let (out_w, out_b) = rest.split_at_mut(o[5] - o[4]);

        let y = trace.output;
        let dz = dl_dy * y * (1.0 - y);
        let d_hidden_act = self.output.backward(&trace.hidden_act, &[dz], out_w, out_b);
        let d_hidden_pre: Vec<f64> =
            d_hidden_act.iter().zip(&trace.hidden_pre).map(|(g, &z)| g * relu_grad(z)).collect();
        let d_flat = self.hidden.backward(&trace.pooled.output.data, &d_hidden_pre, hid_w, hid_b);
        let d_pooled = Matrix { data: d_flat, ..trace.pooled.output.clone() };
        let mut d_conv = maxpool_backward(&trace.pooled, trace.conv_act.rows, &d_pooled);
        for (g, &z) in d_conv.data.iter_mut().zip(&trace.conv_pre.data) {
            *g *= relu_grad(z);
        }
        self.conv.backward(&trace.input, &d_conv, conv_w, conv_b);
    }

    /// Mean squared error and its gradient over a batch.
    pub fn batch_gradients(&self, inputs: &[&[f64]], targets: &[f64]) -> Result<(f64, CnnGradients), NetError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(NetError::DimensionMismatch(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let n = inputs.len() as f64;
        let mut values = vec![0.0; self.param_count()];
        let mut sse = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            let trace = self.trace(x)?;
            let err = trace.output - t;
            sse += err * err;
            self.accumulate(&trace, 2.0 * err / n, &mut values);
        }
        Ok((sse / n, CnnGradients { values, offsets: self.offsets() }))
    }

    /// Scores every window of an already normalized dataset.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>, NetError> {
        self.check_features(&dataset.feature_names)?;
        if dataset.normalization.is_none() {
            return Err(NetError::NotNormalized);
        }
        dataset.windows.iter().map(|w| self.score(&w.values)).collect()
    }

    pub fn check_features(&self, names: &[String]) -> Result<(), NetError> {
        if names != self.feature_names.as_slice() {
            return Err(NetError::FeatureMismatch {
                expected: self.feature_names.join(" "),
                found: names.join(" "),
            });
        }
        Ok(())
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            kind: "cnn".into(),
            feature_names: self.feature_names.clone(),
            dims: vec![
                ("timesteps".into(), self.timesteps.to_string()),
                ("features".into(), self.feature_count().to_string()),
                ("filters".into(), self.conv.filters.to_string()),
                ("kernel".into(), self.conv.kernel.to_string()),
                ("pool".into(), self.pool_width.to_string()),
                ("dense".into(), self.hidden.outputs.to_string()),
            ],
            normalization: self.normalization.clone(),
            body: self.tensors().iter().map(|t| ModelFile::tensor_line(t)).collect(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<CnnModel, ModelFileError> {
        let dim_err = |reason: String| ModelFileError::Format { line: 3, reason };
        if file.kind != "cnn" {
            return Err(ModelFileError::Format { line: 1, reason: format!("expected a CNN model, found `{}`", file.kind) });
        }
        let timesteps: usize = file.dim("timesteps")?;
        let features: usize = file.dim("features")?;
        if timesteps != TIMESTEPS {
            return Err(dim_err(format!("timesteps={timesteps}, expected {TIMESTEPS}")));
        }
        if features != file.feature_names.len() {
            return Err(dim_err(format!("features={features} but {} names", file.feature_names.len())));
        }
        let config = CnnConfig {
            filter_count: file.dim("filters")?,
            kernel_width: file.dim("kernel")?,
            pool_width: file.dim("pool")?,
            dense_width: file.dim("dense")?,
            ..CnnConfig::default()
        };
        let mut model = CnnModel::zeros(file.feature_names.clone(), file.normalization.clone(), &config)
            .map_err(|e| dim_err(e.to_string()))?;
        file.expect_body_len(6)?;
        let o = model.offsets();
        let mut params = Vec::with_capacity(model.param_count());
        for k in 0..6 {
            params.extend(file.tensor(k, o[k + 1] - o[k])?);
        }
        model.set_params(&params);
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        self.to_model_file().to_text()
    }
}

/// Risk score for a normalized window.
pub fn forward(model: &CnnModel, window: &Window) -> Result<f64, NetError> {
    check_window(model, window)?;
    model.score(&window.values)
}

/// Gradient of the squared error `(y − target)²` for one window.
pub fn backward(model: &CnnModel, window: &Window, target: f64) -> Result<CnnGradients, NetError> {
    check_window(model, window)?;
    Ok(model.batch_gradients(&[&window.values], &[target])?.1)
}

fn check_window(model: &CnnModel, window: &Window) -> Result<(), NetError> {
    if window.values.len() != model.timesteps * model.feature_count() {
        return Err(NetError::FeatureMismatch {
            expected: model.feature_names.join(" "),
            found: format!("{} values per window", window.values.len()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    /// Training MSE of each epoch, measured before that epoch's updates.
    pub epoch_mse: Vec<f64>,
    pub test_mse: Option<f64>,
}

impl TrainingTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<W> {
        writeln!(out, "epoch,train_mse")?;
        for (e, mse) in self.epoch_mse.iter().enumerate() {
            writeln!(out, "{},{}", e + 1, fmt_f64(*mse))?;
        }
        if let Some(test) = self.test_mse {
            writeln!(out, "test,{}", fmt_f64(test))?;
        }
        Ok(out)
    }
}

/// Adam on MSE over a normalized dataset.
pub fn train_cnn(train: &Dataset, config: &CnnConfig) -> Result<(CnnModel, TrainingTrace), NetError> {
    config.validate()?;
    let Some(norm) = train.normalization.clone() else {
        return Err(NetError::NotNormalized);
    };
    if train.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let mut model = CnnModel::initialize(train.feature_names.clone(), norm, config)?;
    let mut params = model.params();
    let mut state = AdamState::new(params.len());
    let adam = config.adam();
    let targets = train.targets();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng::stream(config.seed, "cnn-batches");
    let batch = config.batch_cap.min(train.len());
    let mut trace = TrainingTrace::default();

    for epoch in 1..=config.epochs {
        if batch < train.len() {
            order.shuffle(&mut shuffle_rng);
        }
        let mut sse = 0.0;
        for chunk in order.chunks(batch) {
            let inputs: Vec<&[f64]> = chunk.iter().map(|&i| train.windows[i].values.as_slice()).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (mse, grads) = model.batch_gradients(&inputs, &t)?;
            if !mse.is_finite() || grads.values.iter().any(|g| !g.is_finite()) {
                return Err(NetError::NonFiniteLoss { epoch });
            }
            sse += mse * chunk.len() as f64;
            adam_step(&mut params, &grads.values, &mut state, &adam);
            if params.iter().any(|p| !p.is_finite()) {
                return Err(NetError::NonFiniteLoss { epoch });
            }
            model.set_params(&params);
        }
        trace.epoch_mse.push(sse / train.len() as f64);
    }
    Ok((model, trace))
}

/// Triangular class memberships around the centers 0, 0.5 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub scores: [f64; 3],
    pub class: CrashRisk,
}

/// `s_c = max(0, 1 − |y − c| / 0.5)`; ties go to the higher-risk class.
pub fn class_scores(risk_score: f64) -> ClassScores {
    let mut scores = [0.0; 3];
    for (s, c) in scores.iter_mut().zip(CrashRisk::ALL) {
        *s = (1.0 - (risk_score - c.value()).abs() / 0.5).max(0.0);
    }
    let mut best = 0;
    for k in 1..3 {
        if scores[k] >= scores[best] {
            best = k;
        }
    }
    ClassScores { scores, class: CrashRisk::ALL[best] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn names(f: usize) -> Vec<String> {
        (0..f).map(|i| format!("f{i}")).collect()
    }

    fn unit_norm(f: usize) -> NormalizationParams {
        NormalizationParams { mins: vec![0.0; f], maxs: vec![1.0; f] }
    }

    fn tiny_config(seed: u64) -> CnnConfig {
        CnnConfig { filter_count: 2, dense_width: 3, seed, ..Default::default() }
    }

    fn window(values: Vec<f64>, label: CrashRisk) -> Window {
        Window { sensor_id: "S".into(), end_time: 0, values, label, provenance: Provenance::MatchedNonCrash }
    }

    #[test]
    fn shape_chain() {
        let model = CnnModel::initialize(names(10), unit_norm(10), &CnnConfig::default()).unwrap();
        let t = model.trace(&[0.5; 30]).unwrap();
        assert_eq!((t.conv_pre.rows, t.conv_pre.cols), (2, 64));
        assert_eq!((t.pooled.output.rows, t.pooled.output.cols), (1, 64));
        assert_eq!(t.hidden_pre.len(), 32);
        assert!(t.output > 0.0 && t.output < 1.0);
    }

    #[test]
    fn zero_network_outputs_half() {
        let model = CnnModel::zeros(names(4), unit_norm(4), &tiny_config(0)).unwrap();
        assert_eq!(model.score(&[0.3; 12]).unwrap(), 0.5);
        assert_eq!(model.score(&[0.9; 12]).unwrap(), 0.5);
    }

    #[test]
    fn output_monotone_in_positive_last_weight() {
        let mut model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(1)).unwrap();
        model.output.weights[0] = 0.7;
        let t = model.trace(&[0.4; 12]).unwrap();
        let mut act = t.hidden_act.clone();
        let base = sigmoid(model.output.forward(&act)[0]);
        act[0] += 0.5;
        assert!(sigmoid(model.output.forward(&act)[0]) >= base);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let model = CnnModel::zeros(names(4), unit_norm(4), &tiny_config(0)).unwrap();
        let w = window(vec![0.0; 9], CrashRisk::None);
        assert!(matches!(forward(&model, &w), Err(NetError::FeatureMismatch { .. })));
    }

    fn finite_difference(model: &CnnModel, inputs: &[&[f64]], targets: &[f64], k: usize, h: f64) -> Option<f64> {
        let base: Vec<usize> = inputs.iter().flat_map(|x| model.trace(x).unwrap().activation_pattern()).collect();
        let mut m = model.clone();
        let mut p = model.params();
        let orig = p[k];
        let mut eval = |v: f64| {
            p[k] = v;
            m.set_params(&p);
            let pattern: Vec<usize> = inputs.iter().flat_map(|x| m.trace(x).unwrap().activation_pattern()).collect();
            (m.batch_gradients(inputs, targets).unwrap().0, pattern == base)
        };
        let (plus, same_plus) = eval(orig + h);
        let (minus, same_minus) = eval(orig - h);
        (same_plus && same_minus).then(|| (plus - minus) / (2.0 * h))
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for point in 0..20 {
            let model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(point)).unwrap();
            let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..12).map(|_| rng.random::<f64>()).collect()).collect();
            let inputs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
            let targets = [0.0, 0.5, 1.0];
            let (_, grads) = model.batch_gradients(&inputs, &targets).unwrap();
            for k in 0..model.param_count() {
                let Some(numeric) = finite_difference(&model, &inputs, &targets, k, 1e-4) else { continue };
                let analytic = grads.values[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-4 || (analytic - numeric).abs() < 1e-10, "param {k}: {analytic} vs {numeric}");
                checked += 1;
            }
        }
        assert!(checked > 20 * 30);
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(3)).unwrap();
        let x = vec![0.2; 12];
        let y = model.score(&x).unwrap();
        let g = backward(&model, &window(x, CrashRisk::None), y).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_bias_gradient_is_chain_rule_mean() {
        let model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(4)).unwrap();
        let xs = [vec![0.1; 12], vec![0.7; 12]];
        let targets = [1.0, 0.0];
        let inputs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let (_, g) = model.batch_gradients(&inputs, &targets).unwrap();
        let expected: f64 = xs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let y = model.score(x).unwrap();
                2.0 * (y - t) * y * (1.0 - y)
            })
            .sum::<f64>()
            / 2.0;
        assert!((g.output_bias() - expected).abs() < 1e-15);
    }

    fn planted(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let windows = (0..n)
            .map(|_| {
                let values: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
                let speed = (values[0] + values[10] + values[20]) / 3.0;
                let label = if speed < 0.3 { CrashRisk::High } else { CrashRisk::None };
                window(values, label)
            })
            .collect();
        let mut ds = Dataset::new(names(10), windows);
        ds.normalization = Some(unit_norm(10));
        ds
    }

    #[test]
    fn learns_planted_threshold() {
        let ds = planted(300, 5);
        let (_, trace) = train_cnn(&ds, &CnnConfig { seed: 2, ..Default::default() }).unwrap();
        assert_eq!(trace.epoch_mse.len(), 100);
        let last = *trace.epoch_mse.last().unwrap();
        assert!(last < 0.05, "final mse {last}");
        assert!(last < trace.epoch_mse[0]);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let ds = planted(20, 6);
        let config = CnnConfig { epochs: 0, seed: 8, ..Default::default() };
        let (model, trace) = train_cnn(&ds, &config).unwrap();
        assert!(trace.epoch_mse.is_empty());
        assert_eq!(model, CnnModel::initialize(names(10), unit_norm(10), &config).unwrap());
    }

    #[test]
    fn same_seed_same_bytes() {
        let ds = planted(40, 7);
        let config = CnnConfig { epochs: 5, batch_cap: 16, seed: 3, ..Default::default() };
        let a = train_cnn(&ds, &config).unwrap().0.to_text();
        let b = train_cnn(&ds, &config).unwrap().0.to_text();
        assert_eq!(a, b);
    }

    #[test]
    fn requires_normalized_data() {
        let mut ds = planted(10, 1);
        ds.normalization = None;
        assert!(matches!(train_cnn(&ds, &CnnConfig::default()), Err(NetError::NotNormalized)));
    }

    #[test]
    fn config_validation() {
        assert!(CnnConfig { kernel_width: 4, ..Default::default() }.validate().is_err());
        assert!(CnnConfig { pool_width: 3, ..Default::default() }.validate().is_err());
        assert!(CnnConfig { filter_count: 0, ..Default::default() }.validate().is_err());
        assert!(CnnConfig::default().validate().is_ok());
    }

    #[test]
    fn model_file_round_trip() {
        let model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(9)).unwrap();
        let text = model.to_text();
        assert!(text.starts_with("crashcast-model v1\n"));
        let back = CnnModel::from_model_file(&ModelFile::parse(&text).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn model_file_rejects_short_tensor() {
        let model = CnnModel::initialize(names(4), unit_norm(4), &tiny_config(9)).unwrap();
        let mut file = model.to_model_file();
        file.body[2] = "1 2 3".into();
        let err = CnnModel::from_model_file(&ModelFile::parse(&file.to_text()).unwrap()).unwrap_err();
        assert!(matches!(err, ModelFileError::Format { line: 7, .. }));
    }

    #[test]
    fn class_score_examples() {
        let s = class_scores(1.0);
        assert_eq!((s.scores, s.class), ([0.0, 0.0, 1.0], CrashRisk::High));
        let s = class_scores(0.25);
        assert_eq!((s.scores, s.class), ([0.5, 0.5, 0.0], CrashRisk::Low));
        let s = class_scores(0.6);
        assert!((s.scores[1] - 0.8).abs() < 1e-12 && (s.scores[2] - 0.2).abs() < 1e-12);
        assert_eq!(s.scores[0], 0.0);
        assert_eq!(s.class, CrashRisk::Low);
        assert_eq!(class_scores(0.75).class, CrashRisk::High);
        assert_eq!(class_scores(0.0).class, CrashRisk::None);
    }
}
