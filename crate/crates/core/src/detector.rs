//! Score fusion, scoring variants, threshold calibration and detection.

use std::collections::BTreeMap;

use crate::balance::{delta, BalanceTable};
use crate::error::{Error, Result};
use crate::gop::{center_gop, gop, tascore};
use crate::metrics::ConfusionCounts;
use crate::model::{Alignment, PhoneScore, Posteriorgram, ScoreReport, Variant};

pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub beta: f64,
    pub variant: Variant,
    /// Replace negative mismatches by zero before fusion.
    pub clamp_delta_at_zero: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            variant: Variant::Cagop,
            clamp_delta_at_zero: false,
        }
    }
}

impl DetectorConfig {
    pub fn new(variant: Variant, beta: f64) -> Result<Self> {
        let cfg = Self {
            beta,
            variant,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }

    fn fuse(&self, base: f64, delta: f64) -> f64 {
        let delta = if self.clamp_delta_at_zero {
            delta.max(0.0)
        } else {
            delta
        };
        cagop(base, delta, self.beta)
    }
}

/// `(1 - beta * delta) * ta_score`.
pub fn cagop(ta_score: f64, delta: f64, beta: f64) -> f64 {
    (1.0 - beta * delta) * ta_score
}

/// Duration information for one utterance.
#[derive(Debug, Clone, Copy)]
pub struct DurationContext<'a> {
    /// Predicted duration in frames for each reference phone, in order.
    pub predicted: &'a [f64],
    pub balance: &'a BalanceTable,
}

/// Inputs needed to score one aligned utterance.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInputs<'a> {
    pub utterance: &'a str,
    pub posteriorgram: &'a Posteriorgram,
    pub alignment: &'a Alignment,
    pub silence: Option<usize>,
    pub durations: Option<DurationContext<'a>>,
}

/// Scores every non-silence segment and selects the variant's field.
///
/// Duration variants need a [`DurationContext`] unless `beta` is zero, in
/// which case the fused score equals its base score exactly.
pub fn score_variant(inputs: &ScoringInputs<'_>, cfg: &DetectorConfig) -> Result<ScoreReport> {
    cfg.validate()?;
    let pg = inputs.posteriorgram;
    let segments: Vec<_> = inputs.alignment.phone_segments(inputs.silence).copied().collect();
    if segments.is_empty() {
        return Err(Error::Empty("aligned phones"));
    }
    if cfg.variant.uses_duration() && inputs.durations.is_none() && cfg.beta != 0.0 {
        return Err(Error::MissingDuration(
            "duration predictions and balance table are required for this variant",
        ));
    }
    let speed = inputs
        .alignment
        .speed(inputs.silence)
        .expect("non-empty segments");
    if let Some(d) = &inputs.durations {
        if d.predicted.len() != segments.len() {
            return Err(Error::LengthMismatch {
                left: d.predicted.len(),
                right: segments.len(),
            });
        }
    }

    let mut per_phone = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        let g = gop(pg, seg)?;
        let c = center_gop(pg, seg)?;
        let (ta, _) = tascore(pg, seg)?;
        let mismatch = inputs.durations.map(|d| {
            let tol = d.balance.lookup(seg.phone, speed);
            delta(seg.length as f64, d.predicted[i], tol)
        });
        let fused = mismatch.map(|m| cfg.fuse(ta, m));
        let score = match cfg.variant {
            Variant::Gop => g,
            Variant::CenterGop => c,
            Variant::CagopMinusDur => ta,
            Variant::Cagop => fused.unwrap_or(ta),
            Variant::CagopMinusTa => mismatch.map_or(g, |m| cfg.fuse(g, m)),
        };
        per_phone.push(PhoneScore {
            phone: seg.phone,
            segment: *seg,
            gop: g,
            center_gop: c,
            tascore: ta,
            delta: mismatch,
            cagop: fused,
            score,
            mispronounced: None,
        });
    }
    let sentence_score = sentence_score(&per_phone)?;
    Ok(ScoreReport {
        utterance: inputs.utterance.to_string(),
        variant: cfg.variant,
        per_phone,
        sentence_score,
    })
}

/// Arithmetic mean of the per-phone variant scores.
pub fn sentence_score(per_phone: &[PhoneScore]) -> Result<f64> {
    if per_phone.is_empty() {
        return Err(Error::Empty("scored phones"));
    }
    Ok(per_phone.iter().map(|p| p.score).sum::<f64>() / per_phone.len() as f64)
}

/// Phone-dependent decision thresholds with a pooled fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub per_phone: BTreeMap<usize, f64>,
    pub global: f64,
}

impl ThresholdTable {
    pub fn threshold(&self, phone: usize) -> f64 {
        self.per_phone.get(&phone).copied().unwrap_or(self.global)
    }

    /// `score < threshold` means mispronounced.
    pub fn is_mispronounced(&self, phone: usize, score: f64) -> bool {
        score < self.threshold(phone)
    }
}

/// One development-set observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub phone: usize,
    pub score: f64,
    pub mispronounced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationConfig {
    pub min_count: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { min_count: 10 }
    }
}

/// Threshold maximizing F1 of `score < threshold` over `items`.
///
/// Candidates are midpoints between consecutive distinct sorted scores plus
/// one point above the maximum (flag everything). Ties go to the higher
/// threshold. Requires at least one positive.
pub fn best_threshold(items: &[(f64, bool)]) -> Result<(f64, f64)> {
    let positives = items.iter().filter(|(_, y)| *y).count() as u64;
    if positives == 0 {
        return Err(Error::Undefined("no mispronounced examples".into()));
    }
    let mut sorted: Vec<(f64, bool)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut counts = ConfusionCounts {
        tp: 0,
        fp: 0,
        fn_: positives,
        tn: sorted.len() as u64 - positives,
    };
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < sorted.len() {
        // flag the whole run of equal scores starting at i
        let value = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == value {
            if sorted[i].1 {
                counts.tp += 1;
                counts.fn_ -= 1;
            } else {
                counts.fp += 1;
                counts.tn -= 1;
            }
            i += 1;
        }
        let threshold = match sorted.get(i) {
            Some(&(next, _)) => value + (next - value) / 2.0,
            None => value + 1.0,
        };
        let score = counts.f1()?;
        if best.is_none_or(|(_, f)| score >= f) {
            best = Some((threshold, score));
        }
    }
    Ok(best.expect("non-empty input"))
}

pub fn calibrate_thresholds(dev: &[LabeledScore], cfg: CalibrationConfig) -> Result<ThresholdTable> {
    if dev.is_empty() {
        return Err(Error::Empty("development set"));
    }
    let positives = dev.iter().filter(|d| d.mispronounced).count();
    if positives == 0 || positives == dev.len() {
        return Err(Error::Undefined(
            "development set needs both correct and mispronounced phones".into(),
        ));
    }
    let pooled: Vec<(f64, bool)> = dev.iter().map(|d| (d.score, d.mispronounced)).collect();
    let (global, _) = best_threshold(&pooled)?;

    let mut by_phone: BTreeMap<usize, Vec<(f64, bool)>> = BTreeMap::new();
    for d in dev {
        by_phone
            .entry(d.phone)
            .or_default()
            .push((d.score, d.mispronounced));
    }
    let mut per_phone = BTreeMap::new();
    for (phone, items) in by_phone {
        let pos = items.iter().filter(|(_, y)| *y).count();
        if items.len() >= cfg.min_count && pos > 0 && pos < items.len() {
            per_phone.insert(phone, best_threshold(&items)?.0);
        }
    }
    Ok(ThresholdTable { per_phone, global })
}

/// Applies thresholds to every phone of the report.
pub fn detect(report: &mut ScoreReport, thresholds: &ThresholdTable) {
    for p in &mut report.per_phone {
        p.mispronounced = Some(thresholds.is_mispronounced(p.phone, p.score));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::BalanceConfig;
    use crate::model::PhoneSegment;

    #[test]
    fn fusion_examples() {
        assert_eq!(cagop(-0.7, 0.0, 0.1), -0.7);
        assert!((cagop(-1.0, 2.0, 0.1) - (-0.8)).abs() < 1e-15);
        assert_eq!(cagop(-0.3, 5.0, 0.0), -0.3);
        let clamped = DetectorConfig {
            clamp_delta_at_zero: true,
            ..DetectorConfig::default()
        };
        assert_eq!(clamped.fuse(-0.4, -2.0), -0.4);
    }

    fn fixture() -> (Posteriorgram, Alignment, BalanceTable) {
        let pg = Posteriorgram::from_rows(&[vec![0.9, 0.1], vec![0.6, 0.4]], 30.0).unwrap();
        let al = Alignment::new(vec![PhoneSegment::new(0, 0, 2)]).unwrap();
        let table = BalanceTable {
            config: BalanceConfig::default(),
            entries: Default::default(),
            phone_backoff: Default::default(),
            global_backoff: 1.5,
        };
        (pg, al, table)
    }

    #[test]
    fn pipeline_fixture_composes() {
        let (pg, al, table) = fixture();
        let predicted = [2.0];
        let inputs = ScoringInputs {
            utterance: "u",
            posteriorgram: &pg,
            alignment: &al,
            silence: None,
            durations: Some(DurationContext {
                predicted: &predicted,
                balance: &table,
            }),
        };
        let report = score_variant(&inputs, &DetectorConfig::default()).unwrap();
        let p = &report.per_phone[0];
        assert_eq!(p.delta, Some(-1.5));
        // independent scalar oracle: 1.15 * tascore of the two-frame fixture
        assert!((p.score - (-0.273035234584)).abs() < 1e-9);
        assert_eq!(report.sentence_score, p.score);
    }

    #[test]
    fn variant_collapse_at_zero_beta() {
        let (pg, al, table) = fixture();
        let predicted = [7.0];
        let inputs = ScoringInputs {
            utterance: "u",
            posteriorgram: &pg,
            alignment: &al,
            silence: None,
            durations: Some(DurationContext {
                predicted: &predicted,
                balance: &table,
            }),
        };
        let run = |variant, beta| {
            score_variant(&inputs, &DetectorConfig::new(variant, beta).unwrap())
                .unwrap()
                .per_phone[0]
                .score
        };
        assert_eq!(run(Variant::Cagop, 0.0), run(Variant::CagopMinusDur, 0.0));
        assert_eq!(run(Variant::CagopMinusTa, 0.0), run(Variant::Gop, 0.0));
        assert_ne!(run(Variant::Cagop, 0.1), run(Variant::CagopMinusDur, 0.1));
    }

    #[test]
    fn duration_variant_needs_model() {
        let (pg, al, _) = fixture();
        let inputs = ScoringInputs {
            utterance: "u",
            posteriorgram: &pg,
            alignment: &al,
            silence: None,
            durations: None,
        };
        let err = score_variant(&inputs, &DetectorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingDuration(_)));
        let zero = DetectorConfig::new(Variant::Cagop, 0.0).unwrap();
        assert!(score_variant(&inputs, &zero).is_ok());
        assert!(DetectorConfig::new(Variant::Gop, -0.1).is_err());
    }

    fn labeled(phone: usize, correct: &[f64], wrong: &[f64]) -> Vec<LabeledScore> {
        correct
            .iter()
            .map(|&score| LabeledScore {
                phone,
                score,
                mispronounced: false,
            })
            .chain(wrong.iter().map(|&score| LabeledScore {
                phone,
                score,
                mispronounced: true,
            }))
            .collect()
    }

    #[test]
    fn calibration_midpoint() {
        let dev = labeled(0, &[-0.1, -0.2], &[-0.9, -1.0]);
        let table = calibrate_thresholds(&dev, CalibrationConfig { min_count: 1 }).unwrap();
        assert!((table.threshold(0) - (-0.55)).abs() < 1e-12);
        assert!((table.global - (-0.55)).abs() < 1e-12);
    }

    #[test]
    fn single_class_phone_uses_global() {
        let mut dev = labeled(0, &[-0.1, -0.2], &[-0.9, -1.0]);
        dev.extend(labeled(1, &[-0.3, -0.4, -0.5], &[]));
        let table = calibrate_thresholds(&dev, CalibrationConfig { min_count: 1 }).unwrap();
        assert!(!table.per_phone.contains_key(&1));
        assert_eq!(table.threshold(1), table.global);
        assert_eq!(table.threshold(42), table.global);
    }

    #[test]
    fn single_split_and_errors() {
        let (t, f) = best_threshold(&[(-1.0, true), (0.0, false)]).unwrap();
        assert_eq!((t, f), (-0.5, 1.0));
        let dev = labeled(0, &[-0.1, -0.2], &[]);
        assert!(calibrate_thresholds(&dev, CalibrationConfig::default()).is_err());
    }

    #[test]
    fn strict_less_than() {
        let table = ThresholdTable {
            per_phone: BTreeMap::from([(0, -0.5)]),
            global: -1.0,
        };
        assert!(table.is_mispronounced(0, -0.6));
        assert!(!table.is_mispronounced(0, -0.5));
        assert!(!table.is_mispronounced(3, -0.9));
        assert!(table.is_mispronounced(3, -1.1));
    }

    #[test]
    fn sentence_mean() {
        let (pg, al, _) = fixture();
        let inputs = ScoringInputs {
            utterance: "u",
            posteriorgram: &pg,
            alignment: &al,
            silence: None,
            durations: None,
        };
        let mut report = score_variant(&inputs, &DetectorConfig::new(Variant::Gop, 0.1).unwrap()).unwrap();
        report.per_phone.push(report.per_phone[0].clone());
        report.per_phone[0].score = -1.0;
        report.per_phone[1].score = -3.0;
        assert_eq!(sentence_score(&report.per_phone).unwrap(), -2.0);
        assert!(sentence_score(&[]).is_err());
    }
}
