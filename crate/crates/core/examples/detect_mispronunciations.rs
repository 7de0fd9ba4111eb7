//! Full detection pipeline on synthetic speech: align native speech, train
//! the duration model, fit tolerances, score learner speech with every
//! variant, calibrate thresholds on one half and report F1 on the other.

use cagop::align::{align, AlignConfig};
use cagop::balance::{fit_balance_table, BalanceConfig};
use cagop::detector::{calibrate_thresholds, score_variant, CalibrationConfig, DetectorConfig, DurationContext, ScoringInputs};
use cagop::duration::{train, DurationNetConfig};
use cagop::model::{Alignment, ScoreReport, Variant};
use cagop::pipeline::{detection_counts, duration_record, duration_sample, labeled_scores, DurationModel};
use cagop::synth::{generate, SynthConfig, SynthInventory};

fn main() -> cagop::Result<()> {
    let inv = SynthInventory::new();
    let silence = Some(inv.silence());
    let acfg = AlignConfig::for_phone_set(&inv.phone_set);
    let align_all = |c: &cagop::synth::SynthCorpus| -> cagop::Result<Vec<Alignment>> {
        c.utterances.iter().map(|u| align(&u.posteriorgram, &u.reference, &acfg)).collect()
    };

    let native = generate(&inv, &SynthConfig::native(200, 1));
    let native_al = align_all(&native)?;
    let samples = native_al.iter().map(|a| duration_sample(a, silence)).collect::<cagop::Result<Vec<_>>>()?;
    let split = samples.len() * 9 / 10;
    let cfg = DurationNetConfig::desk();
    let (params, _) = train(&samples[..split], &samples[split..], &cfg, inv.phone_set.len())?;
    let model = DurationModel::new(params, cfg);
    let records = native_al
        .iter()
        .map(|a| duration_record(a, model.predict_for(a, silence)?, silence))
        .collect::<cagop::Result<Vec<_>>>()?;
    let table = fit_balance_table(&records, BalanceConfig::default())?;

    let learner = generate(&inv, &SynthConfig::learner(200, 2));
    let learner_al = align_all(&learner)?;
    let predicted = learner_al.iter().map(|a| model.predict_for(a, silence)).collect::<cagop::Result<Vec<_>>>()?;
    let labels: Vec<Vec<bool>> = learner.utterances.iter().map(|u| u.labels.clone()).collect();
    let half = learner.utterances.len() / 2;

    for variant in Variant::ALL {
        let dcfg = DetectorConfig::new(variant, cagop::detector::DEFAULT_BETA)?;
        let reports = learner
            .utterances
            .iter()
            .zip(&learner_al)
            .zip(&predicted)
            .map(|((u, a), p)| {
                score_variant(
                    &ScoringInputs {
                        utterance: &u.id,
                        posteriorgram: &u.posteriorgram,
                        alignment: a,
                        silence,
                        durations: Some(DurationContext { predicted: p, balance: &table }),
                    },
                    &dcfg,
                )
            })
            .collect::<cagop::Result<Vec<ScoreReport>>>()?;
        let mut dev = Vec::new();
        for (r, l) in reports[..half].iter().zip(&labels) {
            dev.extend(labeled_scores(r, l)?);
        }
        let thresholds = calibrate_thresholds(&dev, CalibrationConfig::default())?;
        let counts = detection_counts(&reports[half..], &labels[half..], &thresholds)?;
        println!("{:<16} accuracy {:.4}  F1 {:.4}", variant.name(), counts.accuracy()?, counts.f1()?);
    }
    Ok(())
}
