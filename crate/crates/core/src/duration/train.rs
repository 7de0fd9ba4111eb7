//! L1 training of the duration network under a Noam-scheduled Adam optimizer.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::DurationNetConfig;
use super::net::{backward_from_cache, check_sequence, forward, forward_masked, Mode};
use super::params::{DurationNetParams, SpeedNorm};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.98;
pub const ADAM_EPS: f64 = 1e-9;

/// A phone sequence with its reference durations.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationSample {
    pub phones: Vec<usize>,
    /// Durations in frames, one per phone.
    pub durations: Vec<f64>,
    /// Mean phone duration of the utterance, in frames.
    pub speed: f64,
}

impl DurationSample {
    pub fn new(phones: Vec<usize>, durations: Vec<f64>) -> Result<Self> {
        if phones.is_empty() {
            return Err(Error::Empty("duration sample"));
        }
        if phones.len() != durations.len() {
            return Err(Error::LengthMismatch {
                left: phones.len(),
                right: durations.len(),
            });
        }
        if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!("duration {d} must be positive")));
        }
        let speed = durations.iter().sum::<f64>() / durations.len() as f64;
        Ok(Self {
            phones,
            durations,
            speed,
        })
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }
}

/// Mean absolute difference.
pub fn l1_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("loss input"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Summed absolute error over the real tokens of a padded sequence and the
/// gradient of that sum.
fn sample_gradient(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    phones: &[usize],
    targets: &[f64],
    speed: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, DurationNetParams)> {
    let valid = targets.len();
    let (y, cache) = forward_masked(params, cfg, phones, valid, speed, Mode::Train(rng))?;
    let mut dpred = Array1::zeros(phones.len());
    let mut loss = 0.0;
    for t in 0..valid {
        let diff = y[t] - targets[t];
        loss += diff.abs();
        dpred[t] = sign(diff);
    }
    Ok((loss, backward_from_cache(params, cfg, &cache, &dpred)))
}

/// Loss and exact gradients of `l1_loss(forward(sample), durations)` in
/// training mode; `rng` drives dropout.
pub fn backward(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    sample: &DurationSample,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, DurationNetParams)> {
    check_sequence(params, cfg, &sample.phones)?;
    let (sum, mut grads) = sample_gradient(
        params,
        cfg,
        &sample.phones,
        &sample.durations,
        sample.speed,
        rng,
    )?;
    let n = sample.len() as f64;
    for t in grads.tensors_mut() {
        t.mapv_inplace(|g| g / n);
    }
    Ok((sum / n, grads))
}

/// `lr_scale * d^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
pub fn noam_lr(step: usize, cfg: &DurationNetConfig) -> Result<f64> {
    if step == 0 {
        return Err(Error::Config("noam schedule starts at step 1".into()));
    }
    let step = step as f64;
    let warmup = cfg.warmup_steps as f64;
    let d = cfg.embed_dim as f64;
    Ok(cfg.lr_scale * d.powf(-0.5) * f64::min(step.powf(-0.5), step * warmup.powf(-1.5)))
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    first: DurationNetParams,
    second: DurationNetParams,
    step: usize,
}

impl Adam {
    pub fn new(params: &DurationNetParams) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// One bias-corrected Adam update with learning rate `lr`.
    pub fn update(&mut self, params: &mut DurationNetParams, grads: &DurationNetParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut());
        for (((p, (_, g)), m), v) in tensors {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean absolute error per token over the epoch's mini-batches (frames).
    pub train_loss: f64,
    /// Mean absolute error per token on the validation set (frames).
    pub validation_mae: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub steps: usize,
}

impl TrainingLog {
    /// One tab-separated `epoch, train loss, validation MAE` line per epoch.
    pub fn to_tsv(&self) -> String {
        self.epochs
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.epoch, e.train_loss, e.validation_mae))
            .collect()
    }

    pub fn best_validation_mae(&self) -> Option<f64> {
        self.epochs
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .map(|e| e.validation_mae)
    }
}

/// Mean absolute error per token, in frames, of eval-mode predictions.
pub fn evaluate_mae(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    samples: &[DurationSample],
) -> Result<f64> {
    let per_sample: Vec<Result<(f64, usize)>> = samples
        .par_iter()
        .map(|s| {
            let pred = forward(params, cfg, &s.phones, s.speed, Mode::Eval)?;
            let err: f64 = pred.iter().zip(&s.durations).map(|(p, t)| (p - t).abs()).sum();
            Ok((err, s.len()))
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0;
    for r in per_sample {
        let (e, n) = r?;
        total += e;
        count += n;
    }
    if count == 0 {
        return Err(Error::Empty("evaluation samples"));
    }
    Ok(total / count as f64)
}

fn mix_seed(seed: u64, step: u64, index: u64) -> u64 {
    // splitmix64 over the three inputs
    let mut z = seed
        .wrapping_add(step.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn speed_norm(samples: &[DurationSample]) -> SpeedNorm {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.speed).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.speed - mean).powi(2)).sum::<f64>() / n;
    SpeedNorm {
        mean,
        scale: var.sqrt().max(1e-3),
    }
}

/// Trains from Glorot-uniform initialization and returns the parameters with
/// the lowest validation MAE (training MAE when `validation` is empty).
///
/// Mini-batches are padded to their longest sequence; padded positions are
/// masked from attention and loss. Per-sample gradients are computed in
/// parallel and reduced in batch order, so results depend only on the seed.
pub fn train(
    dataset: &[DurationSample],
    validation: &[DurationSample],
    cfg: &DurationNetConfig,
    num_phones: usize,
) -> Result<(DurationNetParams, TrainingLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = DurationNetParams::init(cfg, num_phones, &mut rng);
    for s in dataset.iter().chain(validation) {
        check_sequence(&params, cfg, &s.phones)?;
        if s.durations.len() != s.phones.len() {
            return Err(Error::LengthMismatch {
                left: s.phones.len(),
                right: s.durations.len(),
            });
        }
    }
    params.speed_norm = speed_norm(dataset);
    let tokens: usize = dataset.iter().map(DurationSample::len).sum();
    params.output_bias[[0, 0]] =
        dataset.iter().flat_map(|s| &s.durations).sum::<f64>() / tokens as f64;

    let selection = if validation.is_empty() { dataset } else { validation };
    let mut adam = Adam::new(&params);
    let mut best = params.clone();
    let mut best_mae = f64::INFINITY;
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let step = adam.step() + 1;
            let width = batch.iter().map(|&i| dataset[i].len()).max().unwrap_or(0);
            let results: Vec<Result<(f64, DurationNetParams)>> = batch
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let s = &dataset[i];
                    let mut phones = s.phones.clone();
                    phones.resize(width, 0);
                    let mut sample_rng =
                        ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, step as u64, slot as u64));
                    sample_gradient(&params, cfg, &phones, &s.durations, s.speed, &mut sample_rng)
                })
                .collect();
            let batch_tokens: usize = batch.iter().map(|&i| dataset[i].len()).sum();
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                grads.add_scaled(&g, 1.0 / batch_tokens as f64);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: batch_loss,
                });
            }
            adam.update(&mut params, &grads, noam_lr(step, cfg)?);
            if !params.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: f64::NAN,
                });
            }
            epoch_loss += batch_loss;
            epoch_tokens += batch_tokens;
        }
        let validation_mae = evaluate_mae(&params, cfg, selection)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: epoch_loss / epoch_tokens as f64,
            validation_mae,
        });
        if validation_mae < best_mae {
            best_mae = validation_mae;
            best = params.clone();
            log.best_epoch = epoch;
        }
    }
    log.steps = adam.step();
    Ok((best, log))
}

/// Eval-mode predictions clamped to at least one frame.
pub fn predict_durations(
    params: &DurationNetParams,
    cfg: &DurationNetConfig,
    phones: &[usize],
    speed: f64,
) -> Result<Vec<f64>> {
    let raw = forward(params, cfg, phones, speed, Mode::Eval)?;
    Ok(raw.into_iter().map(clamp_duration).collect())
}

pub(crate) fn clamp_duration(raw: f64) -> f64 {
    raw.max(1.0)
}
