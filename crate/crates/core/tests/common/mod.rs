//! Helpers shared by the integration tests.

#![allow(dead_code)]

use cagop::duration::{
    backward, forward, l1_loss, DurationNetConfig, DurationNetParams, DurationSample, Mode,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const DROPOUT_SEED: u64 = 11;

pub fn loss(params: &DurationNetParams, cfg: &DurationNetConfig, sample: &DurationSample) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
    let pred = forward(params, cfg, &sample.phones, sample.speed, Mode::Train(&mut rng)).unwrap();
    l1_loss(&pred, &sample.durations).unwrap()
}

/// Largest element-wise relative error per tensor; denominators are floored
/// at 1e-6 so exactly-zero gradients compare on absolute error.
pub fn check(cfg: &DurationNetConfig, seed: u64) -> Vec<(String, f64)> {
    let params = DurationNetParams::init(cfg, 6, &mut ChaCha8Rng::seed_from_u64(seed));
    let sample = DurationSample::new(vec![1, 4, 0, 4, 2], vec![3.0, 1.5, 6.0, 2.0, 4.5]).unwrap();
    let (_, grads) = backward(
        &params,
        cfg,
        &sample,
        &mut ChaCha8Rng::seed_from_u64(DROPOUT_SEED),
    )
    .unwrap();

    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads
        .tensors()
        .into_iter()
        .map(|(_, t)| t.iter().copied().collect())
        .collect();

    let mut out = Vec::new();
    for (ti, (name, values)) in names.iter().zip(&analytic).enumerate() {
        let mut worst: f64 = 0.0;
        for (ei, &a) in values.iter().enumerate() {
            let mut plus = params.clone();
            *plus.tensors_mut()[ti].iter_mut().nth(ei).unwrap() += STEP;
            let mut minus = params.clone();
            *minus.tensors_mut()[ti].iter_mut().nth(ei).unwrap() -= STEP;
            let numeric = (loss(&plus, cfg, &sample) - loss(&minus, cfg, &sample)) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        out.push((name.clone(), worst));
    }
    out
}
