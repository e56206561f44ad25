//! One handle over the four model families, used by the file-level commands.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{
    train_bp_mlp, train_decision_tree, train_svm_ovr, MlpConfig, MlpModel, SvmConfig, SvmModel, TreeConfig, TreeModel,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{apply_minmax, fit_minmax, NormalizationParams};
use crate::modelfile::{ModelFile, ModelFileError};
use crate::neuralnet::{class_scores, train_cnn, CnnConfig, CnnModel, TrainingTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Cnn,
    Mlp,
    Svm,
    Tree,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cnn, ModelKind::Mlp, ModelKind::Svm, ModelKind::Tree];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Mlp => "mlp",
            ModelKind::Svm => "svm",
            ModelKind::Tree => "tree",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model `{s}` (expected cnn, mlp, svm or tree)")))
    }
}

/// Hyperparameters for every family; only the selected one is used.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    pub cnn: CnnConfig,
    pub mlp: MlpConfig,
    pub svm: SvmConfig,
    pub tree: TreeConfig,
}

impl TrainOptions {
    /// Points every seeded family at `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.cnn.seed = seed;
        self.mlp.seed = seed;
        self.svm.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Cnn(CnnModel),
    Mlp(MlpModel),
    Svm(SvmModel),
    Tree(TreeModel),
}

/// Scalar risk predictions plus per-class scores for ROC analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub risk: Vec<f64>,
    pub class_scores: Vec<[f64; 3]>,
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Cnn(_) => ModelKind::Cnn,
            AnyModel::Mlp(_) => ModelKind::Mlp,
            AnyModel::Svm(_) => ModelKind::Svm,
            AnyModel::Tree(_) => ModelKind::Tree,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            AnyModel::Cnn(m) => &m.feature_names,
            AnyModel::Mlp(m) => &m.feature_names,
            AnyModel::Svm(m) => &m.feature_names,
            AnyModel::Tree(m) => &m.feature_names,
        }
    }

    pub fn normalization(&self) -> &NormalizationParams {
        match self {
            AnyModel::Cnn(m) => &m.normalization,
            AnyModel::Mlp(m) => &m.normalization,
            AnyModel::Svm(m) => &m.normalization,
            AnyModel::Tree(m) => &m.normalization,
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            AnyModel::Cnn(m) => m.to_model_file(),
            AnyModel::Mlp(m) => m.to_model_file(),
            AnyModel::Svm(m) => m.to_model_file(),
            AnyModel::Tree(m) => m.to_model_file(),
        }
        .to_text()
    }

    pub fn from_text(text: &str) -> Result<AnyModel, ModelFileError> {
        let file = ModelFile::parse(text)?;
        Ok(match file.kind.as_str() {
            "cnn" => AnyModel::Cnn(CnnModel::from_model_file(&file)?),
            "mlp" => AnyModel::Mlp(MlpModel::from_model_file(&file)?),
            "svm" => AnyModel::Svm(SvmModel::from_model_file(&file)?),
            "tree" => AnyModel::Tree(TreeModel::from_model_file(&file)?),
            other => {
                return Err(ModelFileError::Format { line: 1, reason: format!("unknown model kind `{other}`") })
            }
        })
    }

    /// Scores a raw (unscaled) dataset using the model's own training
    /// normalization.
    ///
    /// SVM class scores are the three margins, each min-max scaled over the
    /// evaluated windows; its scalar risk is the winning class center. The
    /// regressors derive class scores from their scalar output.
    pub fn predict_raw(&self, raw: &Dataset) -> Result<Predictions> {
        let dataset = raw.select_features(self.feature_names())?;
        let scaled = apply_minmax(&dataset, self.normalization());
        let risk = match self {
            AnyModel::Cnn(m) => m.predict(&scaled)?,
            AnyModel::Mlp(m) => m.predict(&scaled)?,
            AnyModel::Tree(m) => m.predict(&scaled)?,
            AnyModel::Svm(m) => {
                let margins = m.predict_margins(&scaled)?;
                let risk = margins.iter().map(|g| SvmModel::classify(g).value()).collect();
                return Ok(Predictions { risk, class_scores: rescale_columns(&margins) });
            }
        };
        let class_scores = risk.iter().map(|&y| class_scores(y).scores).collect();
        Ok(Predictions { risk, class_scores })
    }
}

fn rescale_columns(rows: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for r in rows {
        for k in 0..3 {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    rows.iter()
        .map(|r| std::array::from_fn(|k| if hi[k] > lo[k] { (r[k] - lo[k]) / (hi[k] - lo[k]) } else { 0.0 }))
        .collect()
}

/// Fits min-max scaling on `raw_train`, then trains the chosen family.
pub fn train_model(
    kind: ModelKind,
    raw_train: &Dataset,
    options: &TrainOptions,
) -> Result<(AnyModel, Option<TrainingTrace>)> {
    let train = apply_minmax(raw_train, &fit_minmax(raw_train));
    Ok(match kind {
        ModelKind::Cnn => {
            let (model, trace) = train_cnn(&train, &options.cnn)?;
            (AnyModel::Cnn(model), Some(trace))
        }
        ModelKind::Mlp => (AnyModel::Mlp(train_bp_mlp(&train, &options.mlp)?), None),
        ModelKind::Svm => (AnyModel::Svm(train_svm_ovr(&train, &options.svm)?), None),
        ModelKind::Tree => (AnyModel::Tree(train_decision_tree(&train, &options.tree)?), None),
    })
}
