//! Versioned UTF-8 text container shared by every model type.
//!
//! ```text
//! crashcast-model v1            (CNN; baselines use `crashcast-model <kind> v1`)
//! up_speed down_speed ...       feature names
//! timesteps=3 filters=64 ...    architecture dims
//! 0,123 4,247 ...               normalization (min,max) per feature
//! <body>                        one line per tensor, or per tree node
//! ```

use std::str::FromStr;

use thiserror::Error;

use crate::features::NormalizationParams;
use crate::fmt_f64;

pub const MAGIC: &str = "crashcast-model";
pub const VERSION: &str = "v1";
const HEADER_LINES: usize = 4;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
}

fn format_err(line: usize, reason: impl Into<String>) -> ModelFileError {
    ModelFileError::Format { line, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    /// `cnn`, `mlp`, `svm` or `tree`.
    pub kind: String,
    pub feature_names: Vec<String>,
    pub dims: Vec<(String, String)>,
    pub normalization: NormalizationParams,
    pub body: Vec<String>,
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.kind == "cnn" {
            out.push_str(&format!("{MAGIC} {VERSION}\n"));
        } else {
            out.push_str(&format!("{MAGIC} {} {VERSION}\n", self.kind));
        }
        out.push_str(&self.feature_names.join(" "));
        out.push('\n');
        let dims: Vec<String> = self.dims.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&dims.join(" "));
        out.push('\n');
        let norm: Vec<String> = self
            .normalization
            .mins
            .iter()
            .zip(&self.normalization.maxs)
            .map(|(lo, hi)| format!("{},{}", fmt_f64(*lo), fmt_f64(*hi)))
            .collect();
        out.push_str(&norm.join(" "));
        out.push('\n');
        for line in &self.body {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<ModelFile, ModelFileError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < HEADER_LINES {
            return Err(format_err(lines.len() + 1, "truncated header"));
        }
        let magic: Vec<&str> = lines[0].split_whitespace().collect();
        let kind = match magic.as_slice() {
            [m, v] if *m == MAGIC && *v == VERSION => "cnn".to_string(),
            [m, k, v] if *m == MAGIC && *v == VERSION && *k != "cnn" => k.to_string(),
            [m, ..] if *m == MAGIC => return Err(format_err(1, format!("unsupported version in `{}`", lines[0]))),
            _ => return Err(format_err(1, "not a crashcast model file")),
        };
        let feature_names: Vec<String> = lines[1].split_whitespace().map(str::to_string).collect();
        if feature_names.is_empty() {
            return Err(format_err(2, "no feature names"));
        }
        let dims = lines[2]
            .split_whitespace()
            .map(|tok| {
                tok.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| format_err(3, format!("expected key=value, got `{tok}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut mins = Vec::new();
        let mut maxs = Vec::new();
        for tok in lines[3].split_whitespace() {
            let (lo, hi) = tok
                .split_once(',')
                .ok_or_else(|| format_err(4, format!("expected min,max, got `{tok}`")))?;
            let lo: f64 = lo.parse().map_err(|_| format_err(4, format!("bad min `{lo}`")))?;
            let hi: f64 = hi.parse().map_err(|_| format_err(4, format!("bad max `{hi}`")))?;
            if !(lo.is_finite() && hi.is_finite()) || hi < lo {
                return Err(format_err(4, format!("invalid range `{tok}`")));
            }
            mins.push(lo);
            maxs.push(hi);
        }
        if mins.len() != feature_names.len() {
            return Err(format_err(
                4,
                format!("{} normalization ranges for {} features", mins.len(), feature_names.len()),
            ));
        }
        Ok(ModelFile {
            kind,
            feature_names,
            dims,
            normalization: NormalizationParams { mins, maxs },
            body: lines[HEADER_LINES..].iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn dim<T: FromStr>(&self, key: &str) -> Result<T, ModelFileError> {
        let (_, v) = self
            .dims
            .iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| format_err(3, format!("missing dimension `{key}`")))?;
        v.parse().map_err(|_| format_err(3, format!("bad value for `{key}`: `{v}`")))
    }

    /// Line number (1-based) of body line `index`.
    pub fn body_line_number(index: usize) -> usize {
        HEADER_LINES + 1 + index
    }

    pub fn body_error(index: usize, reason: impl Into<String>) -> ModelFileError {
        format_err(Self::body_line_number(index), reason)
    }

    /// Parses body line `index` as exactly `len` finite numbers.
    pub fn tensor(&self, index: usize, len: usize) -> Result<Vec<f64>, ModelFileError> {
        let line = self
            .body
            .get(index)
            .ok_or_else(|| Self::body_error(index, "missing parameter tensor"))?;
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Self::body_error(index, format!("bad number `{t}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != len {
            return Err(Self::body_error(index, format!("expected {len} values, found {}", values.len())));
        }
        Ok(values)
    }

    pub fn expect_body_len(&self, len: usize) -> Result<(), ModelFileError> {
        if self.body.len() != len {
            return Err(Self::body_error(
                self.body.len().min(len),
                format!("expected {len} body lines, found {}", self.body.len()),
            ));
        }
        Ok(())
    }

    pub fn tensor_line(values: &[f64]) -> String {
        values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: &str) -> ModelFile {
        ModelFile {
            kind: kind.to_string(),
            feature_names: vec!["a".into(), "b".into()],
            dims: vec![("timesteps".into(), "3".into())],
            normalization: NormalizationParams { mins: vec![0.0, -1.5], maxs: vec![10.0, 2.0] },
            body: vec![ModelFile::tensor_line(&[0.1, -2.0, 3.0])],
        }
    }

    #[test]
    fn cnn_header_and_round_trip() {
        let text = sample("cnn").to_text();
        assert_eq!(text, "crashcast-model v1\na b\ntimesteps=3\n0,10 -1.5,2\n0.1 -2 3\n");
        assert_eq!(ModelFile::parse(&text).unwrap(), sample("cnn"));
    }

    #[test]
    fn baseline_tags() {
        let text = sample("tree").to_text();
        assert!(text.starts_with("crashcast-model tree v1\n"));
        assert_eq!(ModelFile::parse(&text).unwrap().kind, "tree");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ModelFile::parse("crashcast-model v2\na\nx=1\n0,1\n").unwrap_err();
        assert!(matches!(err, ModelFileError::Format { line: 1, .. }));
        let err = ModelFile::parse("crashcast-model v1\na b\nx=1\n0,1\n").unwrap_err();
        assert!(matches!(err, ModelFileError::Format { line: 4, .. }));
        let file = ModelFile::parse(&sample("cnn").to_text()).unwrap();
        assert!(matches!(file.tensor(0, 4), Err(ModelFileError::Format { line: 5, .. })));
        assert!(matches!(file.dim::<usize>("filters"), Err(ModelFileError::Format { line: 3, .. })));
        assert_eq!(file.dim::<usize>("timesteps").unwrap(), 3);
    }
}
