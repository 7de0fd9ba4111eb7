//! Phone- and speed-dependent duration tolerances and the duration mismatch.
//!
//! The tolerance for a phone at a given sentence speed is the mean plus 1.5
//! population standard deviations of the absolute duration-prediction error
//! observed for that (phone, speed bucket) cell. Sparse cells back off to a
//! per-phone value and then to a global value.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Number of standard deviations added to the mean absolute error.
pub const STD_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceConfig {
    /// Width of a speed bucket in frames.
    pub bucket_width: f64,
    pub bucket_min: i64,
    pub bucket_max: i64,
    /// Minimum observations for a (phone, bucket) cell to get its own entry.
    pub min_count: usize,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            bucket_width: 1.0,
            bucket_min: 2,
            bucket_max: 20,
            min_count: 5,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bucket_width.is_finite() && self.bucket_width > 0.0) {
            return Err(Error::Config(format!("bucket width {}", self.bucket_width)));
        }
        if self.bucket_min > self.bucket_max {
            return Err(Error::Config(format!(
                "bucket range [{}, {}]",
                self.bucket_min, self.bucket_max
            )));
        }
        Ok(())
    }

    /// Speed bucket index: `round(speed / width)` clamped to the range.
    pub fn bucket(&self, speed: f64) -> i64 {
        let raw = (speed / self.bucket_width).round();
        if raw.is_nan() {
            return self.bucket_min;
        }
        (raw as i64).clamp(self.bucket_min, self.bucket_max)
    }
}

/// One utterance of the fitting corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationRecord {
    pub phones: Vec<usize>,
    /// Force-aligned durations in frames.
    pub aligned: Vec<f64>,
    /// Reference-model predictions in frames.
    pub predicted: Vec<f64>,
    /// Sentence speed: mean aligned phone duration.
    pub speed: f64,
}

impl DurationRecord {
    /// Builds a record whose speed is the mean aligned duration.
    pub fn new(phones: Vec<usize>, aligned: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if aligned.is_empty() {
            return Err(Error::Empty("aligned durations"));
        }
        let speed = aligned.iter().sum::<f64>() / aligned.len() as f64;
        Ok(Self {
            phones,
            aligned,
            predicted,
            speed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTable {
    pub config: BalanceConfig,
    pub entries: BTreeMap<(usize, i64), f64>,
    pub phone_backoff: BTreeMap<usize, f64>,
    pub global_backoff: f64,
}

/// Mean plus [`STD_MULTIPLIER`] population standard deviations.
///
/// Values are sorted first so the result does not depend on input order.
pub fn tolerance(errors: &mut [f64]) -> f64 {
    errors.sort_by(f64::total_cmp);
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    mean + STD_MULTIPLIER * var.sqrt()
}

pub fn fit_balance_table(corpus: &[DurationRecord], config: BalanceConfig) -> Result<BalanceTable> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("duration corpus"));
    }
    let mut cells: BTreeMap<(usize, i64), Vec<f64>> = BTreeMap::new();
    let mut per_phone: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::new();
    for (i, rec) in corpus.iter().enumerate() {
        if rec.phones.len() != rec.aligned.len() || rec.phones.len() != rec.predicted.len() {
            return Err(Error::LengthMismatch {
                left: rec.aligned.len(),
                right: rec.predicted.len(),
            });
        }
        if rec.phones.is_empty() {
            return Err(Error::Config(format!("record {i} has no phones")));
        }
        let bucket = config.bucket(rec.speed);
        for ((&phone, &aligned), &predicted) in
            rec.phones.iter().zip(&rec.aligned).zip(&rec.predicted)
        {
            let err = (aligned - predicted).abs();
            if !err.is_finite() {
                return Err(Error::Config(format!("record {i}: non-finite duration")));
            }
            cells.entry((phone, bucket)).or_default().push(err);
            per_phone.entry(phone).or_default().push(err);
            all.push(err);
        }
    }
    let entries = cells
        .into_iter()
        .filter(|(_, errs)| errs.len() >= config.min_count)
        .map(|(key, mut errs)| (key, tolerance(&mut errs)))
        .collect();
    let phone_backoff = per_phone
        .into_iter()
        .map(|(phone, mut errs)| (phone, tolerance(&mut errs)))
        .collect();
    Ok(BalanceTable {
        config,
        entries,
        phone_backoff,
        global_backoff: tolerance(&mut all),
    })
}

impl BalanceTable {
    /// Tolerance for `phone` at sentence `speed`: cell, then phone, then global.
    pub fn lookup(&self, phone: usize, speed: f64) -> f64 {
        let bucket = self.config.bucket(speed);
        self.entries
            .get(&(phone, bucket))
            .or_else(|| self.phone_backoff.get(&phone))
            .copied()
            .unwrap_or(self.global_backoff)
    }
}

pub fn lookup_t(table: &BalanceTable, phone: usize, speed: f64) -> f64 {
    table.lookup(phone, speed)
}

/// Duration mismatch `|aligned - predicted| - tolerance`; negative when the
/// duration is within tolerance.
pub fn delta(aligned: f64, predicted: f64, tolerance: f64) -> f64 {
    (aligned - predicted).abs() - tolerance
}
