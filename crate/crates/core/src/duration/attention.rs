//! Scaled dot-product attention with an additive local Gaussian bias.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// `M[j][k] = -(j - k)^2 / sigma^2`, favouring nearby positions.
pub fn gaussian_bias(len: usize, sigma: f64) -> Array2<f64> {
    let inv = 1.0 / (sigma * sigma);
    Array2::from_shape_fn((len, len), |(j, k)| {
        let offset = j as f64 - k as f64;
        -offset * offset * inv
    })
}

/// Row-wise softmax of `scores + bias` over the first `valid` columns.
///
/// Columns at or past `valid` get exactly zero weight.
pub(crate) fn masked_softmax(scores: &mut Array2<f64>, valid: usize) {
    for mut row in scores.rows_mut() {
        let max = row
            .iter()
            .take(valid)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if j < valid {
                *v = (*v - max).exp();
                sum += *v;
            } else {
                *v = 0.0;
            }
        }
        row.mapv_inplace(|v| v / sum);
    }
}

/// Attention weights `softmax(q k^T / sqrt(d_h) + bias)` for all keys.
pub fn attention_weights(
    q: ArrayView2<'_, f64>,
    k: ArrayView2<'_, f64>,
    bias: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let t = q.nrows();
    if k.nrows() != t || q.ncols() != k.ncols() || bias.dim() != (t, t) {
        return Err(Error::Config(format!(
            "attention shapes q {:?} k {:?} bias {:?}",
            q.dim(),
            k.dim(),
            bias.dim()
        )));
    }
    if q.iter().chain(k.iter()).chain(bias.iter()).any(|v| v.is_nan()) {
        return Err(Error::Config("NaN in attention input".into()));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut scores = q.dot(&k.t()) * scale + bias;
    masked_softmax(&mut scores, t);
    Ok(scores)
}

/// `softmax(q k^T / sqrt(d_h) + bias) v` for one head.
pub fn attention(
    q: ArrayView2<'_, f64>,
    k: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
    bias: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if v.nrows() != k.nrows() {
        return Err(Error::LengthMismatch {
            left: v.nrows(),
            right: k.nrows(),
        });
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Config("NaN in attention input".into()));
    }
    Ok(attention_weights(q, k, bias)?.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bias_examples() {
        let m = gaussian_bias(5, 1.0);
        assert_eq!(m[[2, 2]], 0.0);
        assert_eq!(m[[1, 2]], -1.0);
        let m = gaussian_bias(5, 2.0);
        assert_eq!(m[[0, 3]], -2.25);
        assert_eq!(m, m.t());
    }

    #[test]
    fn single_position_returns_value() {
        let q = array![[0.3, -1.0]];
        let v = array![[4.0, 5.0]];
        let out = attention(q.view(), q.view(), v.view(), array![[0.0]].view()).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn zero_queries_average_values() {
        let z = Array2::<f64>::zeros((2, 2));
        let v = array![[1.0, 2.0], [3.0, 6.0]];
        let out = attention(z.view(), z.view(), v.view(), Array2::zeros((2, 2)).view()).unwrap();
        assert_eq!(out, array![[2.0, 4.0], [2.0, 4.0]]);
    }

    #[test]
    fn saturated_bias_selects_position() {
        let q = array![[0.5, 0.1], [0.2, 0.3]];
        let v = array![[1.0, -1.0], [7.0, 9.0]];
        let bias = array![[0.0, -1000.0], [0.0, 0.0]];
        let out = attention(q.view(), q.view(), v.view(), bias.view()).unwrap();
        assert!((out[[0, 0]] - 1.0).abs() < 1e-6);
        assert!((out[[0, 1]] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn rows_sum_to_one_with_large_bias() {
        let q = array![[3.0, -2.0], [1.0, 1.0], [0.0, 5.0]];
        let w = attention_weights(q.view(), q.view(), (gaussian_bias(3, 0.01)).view()).unwrap();
        for row in w.rows() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn wide_sigma_matches_unbiased() {
        let q = array![[0.4, -0.2], [1.0, 0.3], [-0.7, 0.9], [0.1, 0.1]];
        let v = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 0.0]];
        let wide = attention(q.view(), q.view(), v.view(), gaussian_bias(4, 1e8).view()).unwrap();
        let plain = attention(q.view(), q.view(), v.view(), Array2::zeros((4, 4)).view()).unwrap();
        for (a, b) in wide.iter().zip(&plain) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn nan_rejected() {
        let q = array![[f64::NAN]];
        assert!(attention(q.view(), q.view(), q.view(), array![[0.0]].view()).is_err());
    }
}
