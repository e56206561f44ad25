//! Layer primitives shared by the CNN and the MLP baseline.

use super::NetError;

/// Dense row-major matrix; rows are timesteps for sequence data.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NetError> {
        if data.len() != rows * cols {
            return Err(NetError::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Logistic function, kept inside the open interval `(0, 1)`.
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Cross-correlation over time with full feature depth.
/// Weights are laid out `[filter][dt][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub filters: usize,
    pub kernel: usize,
    pub channels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn zeros(filters: usize, kernel: usize, channels: usize) -> Self {
        Conv1d { filters, kernel, channels, weights: vec![0.0; filters * kernel * channels], bias: vec![0.0; filters] }
    }

    fn w(&self, j: usize, dt: usize, c: usize) -> f64 {
        self.weights[(j * self.kernel + dt) * self.channels + c]
    }

    /// `out[t][j] = bias[j] + Σ_{dt<k, c<C} input[t+dt][c] · w[j][dt][c]`.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix, NetError> {
        if input.cols != self.channels {
            return Err(NetError::DimensionMismatch(format!(
                "conv expects {} channels, got {}",
                self.channels, input.cols
            )));
        }
        if input.rows < self.kernel {
            return Err(NetError::DimensionMismatch(format!(
                "input length {} shorter than kernel {}",
                input.rows, self.kernel
            )));
        }
        let len = input.rows - self.kernel + 1;
        let mut out = Matrix::zeros(len, self.filters);
        for t in 0..len {
            for j in 0..self.filters {
                let mut acc = self.bias[j];
                let base = j * self.kernel * self.channels;
                let span = &self.weights[base..base + self.kernel * self.channels];
                let window = &input.data[t * self.channels..(t + self.kernel) * self.channels];
                for (w, x) in span.iter().zip(window) {
                    acc += w * x;
                }
                out.data[t * self.filters + j] = acc;
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, input: &Matrix, grad_out: &Matrix, grad_w: &mut [f64], grad_b: &mut [f64]) -> Matrix {
        let mut grad_in = Matrix::zeros(input.rows, input.cols);
        for t in 0..grad_out.rows {
            for j in 0..self.filters {
                let g = grad_out.get(t, j);
                if g == 0.0 {
                    continue;
                }
                grad_b[j] += g;
                for dt in 0..self.kernel {
                    for c in 0..self.channels {
                        grad_w[(j * self.kernel + dt) * self.channels + c] += g * input.get(t + dt, c);
                        grad_in.data[(t + dt) * self.channels + c] += g * self.w(j, dt, c);
                    }
                }
            }
        }
        grad_in
    }
}

/// Free-function form of [`Conv1d::forward`] over raw weight slices.
pub fn conv1d_forward(input: &Matrix, weights: &[f64], biases: &[f64], kernel: usize) -> Result<Matrix, NetError> {
    let filters = biases.len();
    if kernel == 0 || weights.len() != filters * kernel * input.cols {
        return Err(NetError::DimensionMismatch(format!(
            "{} weights for {filters} filters of width {kernel} over {} channels",
            weights.len(),
            input.cols
        )));
    }
    let layer = Conv1d {
        filters,
        kernel,
        channels: input.cols,
        weights: weights.to_vec(),
        bias: biases.to_vec(),
    };
    layer.forward(input)
}

/// Max-pooled output plus the winning input row of each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Matrix,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling along rows; a trailing remainder is dropped and
/// ties go to the earliest row.
pub fn maxpool_forward(input: &Matrix, pool_width: usize) -> Result<Pooled, NetError> {
    let len = input.rows.checked_div(pool_width).unwrap_or(0);
    if len == 0 {
        return Err(NetError::EmptyAfterPool { len: input.rows, width: pool_width });
    }
    let mut output = Matrix::zeros(len, input.cols);
    let mut argmax = vec![0; len * input.cols];
    for o in 0..len {
        for c in 0..input.cols {
            let mut best_row = o * pool_width;
            let mut best = input.get(best_row, c);
            for r in (o * pool_width + 1)..((o + 1) * pool_width) {
                let v = input.get(r, c);
                if v > best {
                    best = v;
                    best_row = r;
                }
            }
            output.data[o * input.cols + c] = best;
            argmax[o * input.cols + c] = best_row;
        }
    }
    Ok(Pooled { output, argmax })
}

/// Routes pooled gradients back to the winning rows.
pub fn maxpool_backward(pooled: &Pooled, input_rows: usize, grad_out: &Matrix) -> Matrix {
    let cols = grad_out.cols;
    let mut grad_in = Matrix::zeros(input_rows, cols);
    for (cell, &row) in pooled.argmax.iter().enumerate() {
        let c = cell % cols;
        grad_in.data[row * cols + c] += grad_out.data[cell];
    }
    grad_in
}

/// Fully connected layer, weights `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad_w: &mut [f64], grad_b: &mut [f64]) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.inputs];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad_b[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grad_w[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }
}
