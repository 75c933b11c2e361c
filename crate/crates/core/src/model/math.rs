//! Dense math primitives for the predictor: a row-major matrix, affine maps
//! and the activation/normalization kernels with their exact derivatives.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = W x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect()
    }

    /// dx += W^T dy
    pub fn add_t_matvec(&self, dy: &[f64], dx: &mut [f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(dx.len(), self.cols);
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (d, w) in dx.iter_mut().zip(self.row(r)) {
                *d += g * w;
            }
        }
    }

    /// W += dy (outer) x
    pub fn add_outer(&mut self, dy: &[f64], x: &[f64]) {
        debug_assert_eq!(dy.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (w, &xv) in self.row_mut(r).iter_mut().zip(x) {
                *w += g * xv;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_scaled(acc: &mut [f64], v: &[f64], scale: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += scale * x;
    }
}

/// Affine map y = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            w: Mat::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.b) {
            *v += b;
        }
        y
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_COEF: f64 = 0.044715;

/// tanh-form GELU.
#[inline]
pub fn gelu(z: f64) -> f64 {
    let u = (2.0 / std::f64::consts::PI).sqrt() * (z + GELU_COEF * z * z * z);
    0.5 * z * (1.0 + u.tanh())
}

/// Exact derivative of the tanh-form GELU above.
#[inline]
pub fn gelu_grad(z: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (z + GELU_COEF * z * z * z);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * c * (1.0 + 3.0 * GELU_COEF * z * z)
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// ds = p (.) (dp - <p, dp>), the softmax Jacobian product.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64], dscores: &mut [f64]) {
    let inner = dot(probs, dprobs);
    for ((ds, &p), &dp) in dscores.iter_mut().zip(probs).zip(dprobs) {
        *ds = p * (dp - inner);
    }
}

/// Variance floor keeping LN(0) well defined.
pub const LN_EPS: f64 = 1e-5;

/// Layer norm over one vector; returns (normalized pre-gain `u`, mean, rstd).
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LN_EPS).sqrt();
    let u: Vec<f64> = x.iter().map(|v| (v - mean) * rstd).collect();
    let out = u
        .iter()
        .zip(gain)
        .zip(bias)
        .map(|((uv, g), b)| uv * g + b)
        .collect();
    (out, u, mean, rstd)
}

/// Backward through layer norm. `u` and `rstd` come from the forward pass;
/// accumulates gain/bias gradients and returns dx.
pub fn layer_norm_backward(
    dout: &[f64],
    u: &[f64],
    rstd: f64,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let n = u.len() as f64;
    let mut du = vec![0.0; u.len()];
    for i in 0..u.len() {
        dgain[i] += dout[i] * u[i];
        dbias[i] += dout[i];
        du[i] = dout[i] * gain[i];
    }
    let mean_du = du.iter().sum::<f64>() / n;
    let mean_du_u = du.iter().zip(u).map(|(d, uv)| d * uv).sum::<f64>() / n;
    (0..u.len())
        .map(|i| rstd * (du[i] - mean_du - u[i] * mean_du_u))
        .collect()
}
