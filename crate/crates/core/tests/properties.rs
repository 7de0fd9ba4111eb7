//! Property-based invariants of scoring, alignment and the file formats.

use cagop::align::{align, alignment_log_score, AlignConfig};
use cagop::balance::{fit_balance_table, BalanceConfig, DurationRecord};
use cagop::detector::{score_variant, DetectorConfig, ScoringInputs};
use cagop::gop::{entropy_profile, gop, tascore};
use cagop::io;
use cagop::metrics::{pearson, spearman};
use cagop::model::{Alignment, PhoneSegment, PhoneSet, Posteriorgram, Variant};
use proptest::prelude::*;

fn distribution(size: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, size).prop_map(|mut row| {
        if row.iter().all(|&p| p == 0.0) {
            row[0] = 1.0;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
        row
    })
}

fn posteriorgram(max_frames: usize, max_phones: usize) -> impl Strategy<Value = Posteriorgram> {
    (1..=max_frames, 2..=max_phones).prop_flat_map(|(frames, phones)| {
        prop::collection::vec(distribution(phones), frames)
            .prop_map(|rows| Posteriorgram::from_rows(&rows, 30.0).unwrap())
    })
}

fn alignment(phones: usize) -> impl Strategy<Value = Alignment> {
    prop::collection::vec((0..phones, 1usize..6), 1..8).prop_map(|parts| {
        let mut start = 0;
        let segments = parts
            .into_iter()
            .map(|(phone, length)| {
                let seg = PhoneSegment::new(phone, start, length);
                start += length;
                seg
            })
            .collect();
        Alignment::new(segments).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tascore_is_a_convex_combination(pg in posteriorgram(20, 10), a in 0usize..10, s in 0usize..20, l in 1usize..20) {
        let phone = a % pg.num_phones();
        let start = s % pg.num_frames();
        let length = 1 + (l - 1) % (pg.num_frames() - start);
        let seg = PhoneSegment::new(phone, start, length);
        let (ta, frames) = tascore(&pg, &seg).unwrap();
        let weight_sum: f64 = frames.weights.iter().sum();
        prop_assert!((weight_sum - 1.0).abs() < 1e-12);
        prop_assert!(frames.weights.iter().all(|&w| w >= 0.0));
        let lo = frames.log_posteriors.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = frames.log_posteriors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(ta >= lo - 1e-12 && ta <= hi + 1e-12);
        let g = gop(&pg, &seg).unwrap();
        prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
    }

    #[test]
    fn entropy_profile_is_bounded(pg in posteriorgram(30, 50)) {
        let bound = (pg.num_phones() as f64).ln() + 1e-12;
        for e in entropy_profile(&pg) {
            prop_assert!((0.0..=bound).contains(&e));
        }
    }

    #[test]
    fn alignment_covers_all_frames_in_order(pg in posteriorgram(25, 6), phones in prop::collection::vec(1usize..6, 1..5), silence in any::<bool>()) {
        let phones: Vec<usize> = phones.into_iter().map(|p| 1 + (p - 1) % (pg.num_phones() - 1)).collect();
        let cfg = AlignConfig {
            allow_optional_silence: silence,
            silence_phone: silence.then_some(0),
            ..AlignConfig::default()
        };
        match align(&pg, &phones, &cfg) {
            Ok(al) => {
                prop_assert_eq!(al.segments[0].start, 0);
                prop_assert_eq!(al.segments.last().unwrap().end(), pg.num_frames());
                prop_assert!(al.segments.windows(2).all(|w| w[0].end() == w[1].start));
                prop_assert_eq!(al.phone_sequence(silence.then_some(0)), phones);
                prop_assert!(alignment_log_score(&pg, &al).unwrap().is_finite());
            }
            Err(_) => prop_assert!(pg.num_frames() < phones.len()),
        }
    }

    #[test]
    fn sentence_score_is_mean_of_selected_scores(pg in posteriorgram(30, 6), al in alignment(6), v in 0usize..3) {
        prop_assume!(al.segments.last().unwrap().end() <= pg.num_frames());
        prop_assume!(al.segments.iter().all(|s| s.phone < pg.num_phones()));
        let variant = [Variant::Gop, Variant::CenterGop, Variant::CagopMinusDur][v];
        let report = score_variant(
            &ScoringInputs {
                utterance: "u",
                posteriorgram: &pg,
                alignment: &al,
                silence: None,
                durations: None,
            },
            &DetectorConfig::new(variant, 0.1).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(report.per_phone.len(), al.segments.len());
        let mean = report.scores().sum::<f64>() / report.per_phone.len() as f64;
        prop_assert!((report.sentence_score - mean).abs() <= 1e-12);
    }

    #[test]
    fn balance_lookup_never_below_zero(errs in prop::collection::vec((0usize..4, 1.0f64..12.0, 0.0f64..12.0), 1..60)) {
        let records: Vec<DurationRecord> = errs
            .chunks(3)
            .map(|c| {
                DurationRecord::new(
                    c.iter().map(|e| e.0).collect(),
                    c.iter().map(|e| e.1).collect(),
                    c.iter().map(|e| e.2).collect(),
                )
                .unwrap()
            })
            .collect();
        let table = fit_balance_table(&records, BalanceConfig { min_count: 2, ..BalanceConfig::default() }).unwrap();
        for phone in 0..6 {
            for speed in [0.5, 3.0, 7.5, 40.0] {
                prop_assert!(table.lookup(phone, speed) >= 0.0);
            }
        }
    }

    #[test]
    fn correlations_are_bounded(x in prop::collection::vec(-50.0f64..50.0, 3..30), y in prop::collection::vec(-50.0f64..50.0, 3..30)) {
        let n = x.len().min(y.len());
        for r in [pearson(&x[..n], &y[..n]), spearman(&x[..n], &y[..n])].into_iter().flatten() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn posteriorgram_text_round_trip(pg in posteriorgram(20, 12)) {
        let mut buf = Vec::new();
        io::write_posteriorgram_text(&mut buf, &pg).unwrap();
        let back = io::read_posteriorgram_text(&String::from_utf8(buf).unwrap(), "t").unwrap();
        prop_assert_eq!(back.probs().dim(), pg.probs().dim());
        for (a, b) in pg.probs().iter().zip(back.probs().iter()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn posteriorgram_binary_round_trip(pg in posteriorgram(20, 12)) {
        let mut buf = Vec::new();
        io::write_posteriorgram_binary(&mut buf, &pg).unwrap();
        let back = io::read_posteriorgram_binary(&mut buf.as_slice(), "b").unwrap();
        prop_assert_eq!(back.probs().dim(), pg.probs().dim());
        for (a, b) in pg.probs().iter().zip(back.probs().iter()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn alignment_file_round_trip(als in prop::collection::vec(alignment(5), 1..5)) {
        let set = PhoneSet::from_labels(&["SIL", "AA", "B", "K", "S"], Some("SIL")).unwrap();
        let utts: Vec<io::UtteranceAlignment> = als
            .into_iter()
            .enumerate()
            .map(|(i, alignment)| io::UtteranceAlignment { utterance: format!("u{i}"), alignment })
            .collect();
        let text = io::render_alignments(&utts, &set).unwrap();
        prop_assert_eq!(io::parse_alignments(&text, &set, "a").unwrap(), utts);
    }

    #[test]
    fn entropy_csv_round_trip(values in prop::collection::vec(0.0f64..10.0, 1..50)) {
        prop_assert_eq!(io::parse_entropy_csv(&io::render_entropy_csv(&values), "e").unwrap(), values);
    }
}
