use crate::dataset::Dataset;
use crate::TIMESTEPS;

/// Per-feature `(min, max)` measured on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationParams {
    pub fn len(&self) -> usize {
        self.mins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mins.is_empty()
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.maxs[feature] <= self.mins[feature]
    }

    /// Maps into `[0, 1]`, clamping values outside the fitted range. Constant
    /// features map to 0.
    pub fn scale(&self, feature: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        if hi <= lo {
            0.0
        } else {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn unscale(&self, feature: usize, y: f64) -> f64 {
        let (lo, hi) = (self.mins[feature], self.maxs[feature]);
        lo + y * (hi - lo)
    }

    /// Scales a row-major `TIMESTEPS × F` window in place.
    pub fn scale_window(&self, values: &mut [f64]) {
        let f = self.len();
        for (k, v) in values.iter_mut().enumerate() {
            *v = self.scale(k % f, *v);
        }
    }

    pub(crate) fn select(&self, idx: &[usize]) -> NormalizationParams {
        NormalizationParams {
            mins: idx.iter().map(|&i| self.mins[i]).collect(),
            maxs: idx.iter().map(|&i| self.maxs[i]).collect(),
        }
    }
}

/// Min and max of each feature across every timestep of every window.
pub fn fit_minmax(train: &Dataset) -> NormalizationParams {
    let f = train.feature_count();
    let mut mins = vec![f64::INFINITY; f];
    let mut maxs = vec![f64::NEG_INFINITY; f];
    for w in &train.windows {
        for t in 0..TIMESTEPS {
            for (j, &v) in w.row(t).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
    }
    if train.is_empty() {
        mins.fill(0.0);
        maxs.fill(0.0);
    }
    NormalizationParams { mins, maxs }
}

pub fn apply_minmax(dataset: &Dataset, params: &NormalizationParams) -> Dataset {
    let mut out = dataset.clone();
    for w in &mut out.windows {
        params.scale_window(&mut w.values);
    }
    out.normalization = Some(params.clone());
    out
}
