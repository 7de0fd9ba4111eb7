//! Glue between the stages: aligned durations as training data, duration
//! predictions for an alignment, balance-table records, and detection
//! bookkeeping over labelled corpora.

use crate::balance::DurationRecord;
use crate::detector::{detect, LabeledScore, ThresholdTable};
use crate::duration::{predict_durations, DurationNetConfig, DurationNetParams, DurationSample};
use crate::error::{Error, Result};
use crate::metrics::ConfusionCounts;
use crate::model::{Alignment, ScoreReport};

/// A trained duration network together with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel {
    pub params: DurationNetParams,
    pub config: DurationNetConfig,
}

impl DurationModel {
    pub fn new(params: DurationNetParams, config: DurationNetConfig) -> Self {
        Self { params, config }
    }

    /// Predicted frames for each phone at the given speed.
    pub fn predict(&self, phones: &[usize], speed: f64) -> Result<Vec<f64>> {
        predict_durations(&self.params, &self.config, phones, speed)
    }

    /// Predictions for the non-silence segments of an alignment, conditioned
    /// on the alignment's own speed.
    pub fn predict_for(&self, alignment: &Alignment, silence: Option<usize>) -> Result<Vec<f64>> {
        let phones = alignment.phone_sequence(silence);
        let speed = alignment
            .speed(silence)
            .ok_or(Error::Empty("aligned phones"))?;
        self.predict(&phones, speed)
    }
}

fn aligned_lengths(alignment: &Alignment, silence: Option<usize>) -> (Vec<usize>, Vec<f64>) {
    alignment
        .phone_segments(silence)
        .map(|s| (s.phone, s.length as f64))
        .unzip()
}

/// Training sample from the non-silence segments of an alignment.
pub fn duration_sample(alignment: &Alignment, silence: Option<usize>) -> Result<DurationSample> {
    let (phones, durations) = aligned_lengths(alignment, silence);
    DurationSample::new(phones, durations)
}

/// Balance-table record pairing aligned and predicted durations.
pub fn duration_record(
    alignment: &Alignment,
    predicted: Vec<f64>,
    silence: Option<usize>,
) -> Result<DurationRecord> {
    let (phones, aligned) = aligned_lengths(alignment, silence);
    if predicted.len() != phones.len() {
        return Err(Error::LengthMismatch {
            left: phones.len(),
            right: predicted.len(),
        });
    }
    DurationRecord::new(phones, aligned, predicted)
}

/// Pairs each scored phone with its label.
pub fn labeled_scores(report: &ScoreReport, labels: &[bool]) -> Result<Vec<LabeledScore>> {
    if report.per_phone.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: report.per_phone.len(),
            right: labels.len(),
        });
    }
    Ok(report
        .per_phone
        .iter()
        .zip(labels)
        .map(|(p, &mispronounced)| LabeledScore {
            phone: p.phone,
            score: p.score,
            mispronounced,
        })
        .collect())
}

/// Detection outcome counts of `reports` against phone labels.
pub fn detection_counts(
    reports: &[ScoreReport],
    labels: &[Vec<bool>],
    thresholds: &ThresholdTable,
) -> Result<ConfusionCounts> {
    if reports.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: reports.len(),
            right: labels.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    for (report, truth) in reports.iter().zip(labels) {
        let mut flagged = report.clone();
        detect(&mut flagged, thresholds);
        let predicted: Vec<bool> = flagged
            .per_phone
            .iter()
            .map(|p| p.mispronounced.unwrap_or(false))
            .collect();
        counts += ConfusionCounts::from_pairs(&predicted, truth)?;
    }
    Ok(counts)
}
