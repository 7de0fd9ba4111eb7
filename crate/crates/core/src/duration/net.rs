//! Forward pass and hand-written reverse-mode gradients of the duration network.
//!
//! Pipeline per sequence of length `T` (rows are tokens):
//!
//! ```text
//! x0 = E[phone] + norm(speed) * w_speed + PE          (dropout)
//! per block:
//!   a  = MultiHead(x) Wo, head h uses bias M(sigma_h)   (dropout)
//!   h1 = LN1(x + a)
//!   f  = relu(h1 W1 + b1) W2 + b2                      (dropout)
//!   x  = LN2(h1 + f)
//! y = x w_out + b_out
//! ```
//!
//! Padded positions (index >= `valid`) are masked out of every attention
//! softmax, so the outputs of real tokens do not depend on padding.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::attention::{gaussian_bias, masked_softmax};
use super::config::DurationNetConfig;
use super::params::DurationNetParams;
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Forward-pass mode; dropout is active only while training.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Sinusoidal position encoding, `T x d`.
pub fn positional_encoding(len: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, dim), |(t, i)| {
        let pair = (i / 2) as f64;
        let angle = t as f64 / 10_000f64.powf(2.0 * pair / dim as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, gain: &Array2<f64>, bias: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let n = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / n;
        *r = 1.0 / (var + LN_EPS).sqrt();
        let scale = *r;
        row.mapv_inplace(|v| v * scale);
    }
    let y = &xhat * gain + bias;
    (y, LnCache { xhat, rstd })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gain: &Array2<f64>,
    dgain: &mut Array2<f64>,
    dbias: &mut Array2<f64>,
) -> Array2<f64> {
    *dgain += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *dbias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * gain;
    let n = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for t in 0..dy.nrows() {
        let g = dxhat.row(t);
        let xh = cache.xhat.row(t);
        let mean_g = g.sum() / n;
        let mean_gx = g.dot(&xh) / n;
        let r = cache.rstd[t];
        for i in 0..dy.ncols() {
            dx[[t, i]] = r * (g[i] - mean_g - xh[i] * mean_gx);
        }
    }
    dx
}

fn dropout_mask(shape: (usize, usize), rate: f64, mode: &mut Mode<'_>) -> Option<Array2<f64>> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            Some(Array2::from_shape_simple_fn(shape, || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            }))
        }
        _ => None,
    }
}

fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

struct BlockCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    biases: Vec<Array2<f64>>,
    probs: Vec<Array2<f64>>,
    heads_out: Array2<f64>,
    mask_attn: Option<Array2<f64>>,
    ln1: LnCache,
    h1: Array2<f64>,
    pre_relu: Array2<f64>,
    relu: Array2<f64>,
    mask_ffn: Option<Array2<f64>>,
    ln2: LnCache,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    phones: Vec<usize>,
    speed_feature: f64,
    valid: usize,
    mask_input: Option<Array2<f64>>,
    blocks: Vec<BlockCache>,
    hidden: Array2<f64>,
}

pub(crate) fn check_sequence(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    phones: &[usize],
) -> Result<()> {
    if phones.is_empty() {
        return Err(Error::Empty("phone sequence"));
    }
    if phones.len() > cfg.max_seq_len {
        return Err(Error::SequenceTooLong {
            len: phones.len(),
            max: cfg.max_seq_len,
        });
    }
    let size = params.num_phones();
    if let Some(&bad) = phones.iter().find(|&&p| p >= size) {
        return Err(Error::PhoneIndex { index: bad, size });
    }
    Ok(())
}

/// Forward pass over a possibly padded sequence; positions `>= valid` are
/// padding. Returns one prediction per position (padding included).
pub fn forward_masked(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    phones: &[usize],
    valid: usize,
    speed: f64,
    mut mode: Mode<'_>,
) -> Result<(Array1<f64>, ForwardCache)> {
    check_sequence(params, cfg, phones)?;
    if valid == 0 || valid > phones.len() {
        return Err(Error::Config(format!(
            "valid length {valid} for sequence of {}",
            phones.len()
        )));
    }
    let t_len = phones.len();
    let d = cfg.embed_dim;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let speed_feature = params.speed_norm.apply(speed);

    let mut x = Array2::zeros((t_len, d));
    for (t, &p) in phones.iter().enumerate() {
        x.row_mut(t).assign(&params.phone_embeddings.row(p));
    }
    x.scaled_add(speed_feature, &params.speed_projection);
    x += &positional_encoding(t_len, d);
    let mask_input = dropout_mask((t_len, d), cfg.dropout_rate, &mut mode);
    let mut x = apply_mask(x, &mask_input);

    let mut blocks = Vec::with_capacity(params.blocks.len());
    for bp in &params.blocks {
        let q = x.dot(&bp.wq);
        let k = x.dot(&bp.wk);
        let v = x.dot(&bp.wv);
        let mut heads_out = Array2::zeros((t_len, d));
        let mut biases = Vec::with_capacity(cfg.num_heads);
        let mut probs = Vec::with_capacity(cfg.num_heads);
        for h in 0..cfg.num_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let bias = gaussian_bias(t_len, bp.log_sigma[[0, h]].exp());
            let mut p = q.slice(cols).dot(&k.slice(cols).t()) * scale + &bias;
            masked_softmax(&mut p, valid);
            heads_out.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
            biases.push(bias);
            probs.push(p);
        }
        let attn = heads_out.dot(&bp.wo);
        let mask_attn = dropout_mask((t_len, d), cfg.dropout_rate, &mut mode);
        let attn = apply_mask(attn, &mask_attn);
        let (h1, ln1) = layer_norm(&(&x + &attn), &bp.ln1_gain, &bp.ln1_bias);

        let pre_relu = h1.dot(&bp.w1) + &bp.b1;
        let relu = pre_relu.mapv(|v| v.max(0.0));
        let ffn = relu.dot(&bp.w2) + &bp.b2;
        let mask_ffn = dropout_mask((t_len, d), cfg.dropout_rate, &mut mode);
        let ffn = apply_mask(ffn, &mask_ffn);
        let (out, ln2) = layer_norm(&(&h1 + &ffn), &bp.ln2_gain, &bp.ln2_bias);

        blocks.push(BlockCache {
            x_in: x,
            q,
            k,
            v,
            biases,
            probs,
            heads_out,
            mask_attn,
            ln1,
            h1,
            pre_relu,
            relu,
            mask_ffn,
            ln2,
        });
        x = out;
    }
    let y = x.dot(&params.output_weight).column(0).to_owned() + params.output_bias[[0, 0]];
    Ok((
        y,
        ForwardCache {
            phones: phones.to_vec(),
            speed_feature,
            valid,
            mask_input,
            blocks,
            hidden: x,
        },
    ))
}

/// Predicted duration (frames) for every phone of an unpadded sequence.
pub fn forward(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    phones: &[usize],
    speed: f64,
    mode: Mode<'_>,
) -> Result<Vec<f64>> {
    let (y, _) = forward_masked(params, cfg, phones, phones.len(), speed, mode)?;
    Ok(y.to_vec())
}

/// Gradients of `sum_t dpred[t] * y[t]` with respect to every parameter.
pub fn backward_from_cache(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    cache: &ForwardCache,
    dpred: &Array1<f64>,
) -> DurationNetParams {
    let mut grads = params.zeros_like();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let valid = cache.valid;

    grads.output_weight = cache.hidden.t().dot(&dpred.view().insert_axis(Axis(1)));
    grads.output_bias[[0, 0]] = dpred.sum();
    let mut dx = dpred
        .view()
        .insert_axis(Axis(1))
        .dot(&params.output_weight.t());

    for (b, (bp, bc)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        let gb = &mut grads.blocks[b];

        // x = LN2(h1 + ffn)
        let dr2 = layer_norm_backward(&dx, &bc.ln2, &bp.ln2_gain, &mut gb.ln2_gain, &mut gb.ln2_bias);
        let mut dh1 = dr2.clone();
        let dffn = apply_mask(dr2, &bc.mask_ffn);
        gb.w2 = bc.relu.t().dot(&dffn);
        gb.b2 = dffn.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dpre = dffn.dot(&bp.w2.t());
        dpre.zip_mut_with(&bc.pre_relu, |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        gb.w1 = bc.h1.t().dot(&dpre);
        gb.b1 = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
        dh1 += &dpre.dot(&bp.w1.t());

        // h1 = LN1(x_in + attn)
        let dr1 = layer_norm_backward(&dh1, &bc.ln1, &bp.ln1_gain, &mut gb.ln1_gain, &mut gb.ln1_bias);
        let mut dx_in = dr1.clone();
        let dattn = apply_mask(dr1, &bc.mask_attn);
        gb.wo = bc.heads_out.t().dot(&dattn);
        let dheads = dattn.dot(&bp.wo.t());

        let mut dq = Array2::zeros(bc.q.raw_dim());
        let mut dk = Array2::zeros(bc.k.raw_dim());
        let mut dv = Array2::zeros(bc.v.raw_dim());
        for h in 0..cfg.num_heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let p = &bc.probs[h];
            let dout = dheads.slice(cols);
            dv.slice_mut(cols).assign(&p.t().dot(&dout));
            let dp = dout.dot(&bc.v.slice(cols).t());
            // softmax backward: ds = p * (dp - sum_k p dp)
            let mut ds = Array2::zeros(p.raw_dim());
            for j in 0..p.nrows() {
                let inner: f64 = (0..valid).map(|k| p[[j, k]] * dp[[j, k]]).sum();
                for k in 0..valid {
                    ds[[j, k]] = p[[j, k]] * (dp[[j, k]] - inner);
                }
            }
            // dM/dlog_sigma = -2 M
            let dsigma: f64 = ds
                .iter()
                .zip(bc.biases[h].iter())
                .map(|(g, m)| -2.0 * g * m)
                .sum();
            gb.log_sigma[[0, h]] = dsigma;
            dq.slice_mut(cols).assign(&(ds.dot(&bc.k.slice(cols)) * scale));
            dk.slice_mut(cols).assign(&(ds.t().dot(&bc.q.slice(cols)) * scale));
        }
        gb.wq = bc.x_in.t().dot(&dq);
        gb.wk = bc.x_in.t().dot(&dk);
        gb.wv = bc.x_in.t().dot(&dv);
        dx_in += &dq.dot(&bp.wq.t());
        dx_in += &dk.dot(&bp.wk.t());
        dx_in += &dv.dot(&bp.wv.t());
        dx = dx_in;
    }

    let dx0 = apply_mask(dx, &cache.mask_input);
    for (t, &p) in cache.phones.iter().enumerate() {
        let mut row = grads.phone_embeddings.row_mut(p);
        row += &dx0.row(t);
    }
    grads.speed_projection = dx0.sum_axis(Axis(0)).insert_axis(Axis(0)) * cache.speed_feature;
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn setup() -> (DurationNetConfig, DurationNetParams) {
        let cfg = DurationNetConfig::tiny();
        let params = DurationNetParams::init(&cfg, 6, &mut ChaCha8Rng::seed_from_u64(3));
        (cfg, params)
    }

    #[test]
    fn output_length_matches_input() {
        let (mut cfg, params) = setup();
        cfg.max_seq_len = 100;
        for len in [1, 7, 100] {
            let phones: Vec<usize> = (0..len).map(|i| i % 6).collect();
            let y = forward(&params, &cfg, &phones, 4.0, Mode::Eval).unwrap();
            assert_eq!(y.len(), len);
        }
    }

    #[test]
    fn eval_is_deterministic_and_train_is_not() {
        let (cfg, params) = setup();
        let phones = [0, 1, 2, 3, 4];
        let a = forward(&params, &cfg, &phones, 3.0, Mode::Eval).unwrap();
        let b = forward(&params, &cfg, &phones, 3.0, Mode::Eval).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = forward(&params, &cfg, &phones, 3.0, Mode::Train(&mut rng)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_head_predicts_bias() {
        let (cfg, mut params) = setup();
        params.output_weight.fill(0.0);
        params.output_bias[[0, 0]] = 3.25;
        let y = forward(&params, &cfg, &[1, 2, 3], 5.0, Mode::Eval).unwrap();
        assert!(y.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn padding_does_not_change_real_tokens() {
        let (cfg, params) = setup();
        let phones = [2, 0, 5, 1];
        let plain = forward(&params, &cfg, &phones, 2.5, Mode::Eval).unwrap();
        let padded = [2, 0, 5, 1, 0, 0, 3];
        let (y, _) = forward_masked(&params, &cfg, &padded, 4, 2.5, Mode::Eval).unwrap();
        for (a, b) in plain.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_long_and_invalid_sequences() {
        let (cfg, params) = setup();
        let long = vec![0; cfg.max_seq_len + 1];
        assert!(matches!(
            forward(&params, &cfg, &long, 1.0, Mode::Eval),
            Err(Error::SequenceTooLong { .. })
        ));
        assert!(matches!(
            forward(&params, &cfg, &[9], 1.0, Mode::Eval),
            Err(Error::PhoneIndex { .. })
        ));
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x = Array2::from_shape_fn((3, 8), |(i, j)| (i * 8 + j) as f64 * 0.37 - 2.0);
        let (y, _) = layer_norm(&x, &Array2::ones((1, 8)), &Array2::zeros((1, 8)));
        for row in y.rows() {
            assert!(row.sum().abs() < 1e-9);
            assert!((row.iter().map(|v| v * v).sum::<f64>() / 8.0 - 1.0).abs() < 1e-3);
        }
    }
}
