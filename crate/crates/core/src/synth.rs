//! Seeded synthetic speech material for desk-scale experiments.
//!
//! Durations follow a rule-based model: a per-phone base length, context
//! effects from the neighbouring phones, an utterance-wide speaking-rate
//! multiplier and a little Gaussian noise. Posteriorgrams are rendered from a
//! frame-level segmentation with diffuse, high-entropy phone transitions at
//! segment edges, skewed toward the end of each segment, plus occasional
//! high-entropy bursts inside a segment. Per-utterance clarity sets how
//! confidently the spoken phone is recognized. Non-native
//! utterances get phone substitutions and lengthened phones, both labelled as
//! mispronunciations.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::duration::DurationSample;
use crate::model::{Alignment, PhoneSegment, PhoneSet, Posteriorgram, DEFAULT_FRAME_SHIFT_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhoneClass {
    LongVowel,
    ShortVowel,
    VoicedStop,
    VoicelessStop,
    VoicedFricative,
    VoicelessFricative,
    Nasal,
    Liquid,
    Silence,
}

impl PhoneClass {
    fn base_frames(self) -> f64 {
        match self {
            PhoneClass::LongVowel => 4.8,
            PhoneClass::ShortVowel => 3.6,
            PhoneClass::VoicedStop => 2.5,
            PhoneClass::VoicelessStop => 3.0,
            PhoneClass::VoicedFricative => 3.0,
            PhoneClass::VoicelessFricative => 3.8,
            PhoneClass::Nasal => 3.1,
            PhoneClass::Liquid => 2.7,
            PhoneClass::Silence => 3.0,
        }
    }

    fn is_vowel(self) -> bool {
        matches!(self, PhoneClass::LongVowel | PhoneClass::ShortVowel)
    }

    fn is_voiced_consonant(self) -> bool {
        matches!(
            self,
            PhoneClass::VoicedStop
                | PhoneClass::VoicedFricative
                | PhoneClass::Nasal
                | PhoneClass::Liquid
        )
    }
}

const PHONES: &[(&str, PhoneClass)] = &[
    ("SIL", PhoneClass::Silence),
    ("AA", PhoneClass::LongVowel),
    ("IY", PhoneClass::LongVowel),
    ("UW", PhoneClass::LongVowel),
    ("OW", PhoneClass::LongVowel),
    ("AE", PhoneClass::ShortVowel),
    ("AH", PhoneClass::ShortVowel),
    ("EH", PhoneClass::ShortVowel),
    ("IH", PhoneClass::ShortVowel),
    ("B", PhoneClass::VoicedStop),
    ("D", PhoneClass::VoicedStop),
    ("G", PhoneClass::VoicedStop),
    ("P", PhoneClass::VoicelessStop),
    ("T", PhoneClass::VoicelessStop),
    ("K", PhoneClass::VoicelessStop),
    ("V", PhoneClass::VoicedFricative),
    ("Z", PhoneClass::VoicedFricative),
    ("F", PhoneClass::VoicelessFricative),
    ("S", PhoneClass::VoicelessFricative),
    ("M", PhoneClass::Nasal),
    ("N", PhoneClass::Nasal),
    ("L", PhoneClass::Liquid),
    ("R", PhoneClass::Liquid),
];

/// Typical learner confusions; substitutions draw from these.
const CONFUSIONS: &[(&str, &str)] = &[
    ("IY", "IH"),
    ("AE", "EH"),
    ("AA", "AH"),
    ("UW", "OW"),
    ("B", "P"),
    ("D", "T"),
    ("G", "K"),
    ("V", "F"),
    ("Z", "S"),
    ("M", "N"),
    ("L", "R"),
    ("EH", "IH"),
    ("AH", "OW"),
    ("V", "B"),
];

/// Range of posterior mass a substituted phone leaves on the reference phone.
const LEAK_LO: f64 = 0.05;
const LEAK_HI: f64 = 0.4;

/// Cap on the transition mass of a frame.
const MAX_TRANSITION_MASS: f64 = 0.85;

/// Probability that a frame carries a burst of diffuse posterior mass.
const BURST_RATE: f64 = 0.1;

/// Share of transition mass that goes to the neighbouring phone; the rest is
/// spread over the whole inventory.
const NEIGHBOUR_SHARE: f64 = 0.35;

const WORDS: &[(&str, &str)] = &[
    ("BAD", "B AE D"),
    ("BED", "B EH D"),
    ("BEST", "B EH S T"),
    ("BIG", "B IH G"),
    ("BLUE", "B L UW"),
    ("BOAT", "B OW T"),
    ("BUS", "B AH S"),
    ("CAT", "K AE T"),
    ("DESK", "D EH S K"),
    ("DOG", "D AA G"),
    ("DRESS", "D R EH S"),
    ("FEET", "F IY T"),
    ("FOOD", "F UW D"),
    ("FROG", "F R AA G"),
    ("FUN", "F AH N"),
    ("GIFT", "G IH F T"),
    ("GIVE", "G IH V"),
    ("GO", "G OW"),
    ("GREEN", "G R IY N"),
    ("KEEP", "K IY P"),
    ("LAMP", "L AE M P"),
    ("LEAF", "L IY F"),
    ("LEG", "L EH G"),
    ("LIVE", "L IH V"),
    ("MAP", "M AE P"),
    ("MEN", "M EH N"),
    ("MILK", "M IH L K"),
    ("MOON", "M UW N"),
    ("NO", "N OW"),
    ("NOSE", "N OW Z"),
    ("NOT", "N AA T"),
    ("PIN", "P IH N"),
    ("PLAN", "P L AE N"),
    ("RED", "R EH D"),
    ("ROAD", "R OW D"),
    ("SEAT", "S IY T"),
    ("SEE", "S IY"),
    ("SIT", "S IH T"),
    ("SOUP", "S UW P"),
    ("STOP", "S T AA P"),
    ("SUN", "S AH N"),
    ("TAP", "T AE P"),
    ("TEAM", "T IY M"),
    ("TOO", "T UW"),
    ("TOP", "T AA P"),
    ("TREE", "T R IY"),
    ("VAN", "V AE N"),
    ("ZOO", "Z UW"),
];

/// Phone inventory, classes and pronunciation lexicon of the synthetic language.
#[derive(Debug, Clone)]
pub struct SynthInventory {
    pub phone_set: PhoneSet,
    pub classes: Vec<PhoneClass>,
    /// Word to phone indices, uppercase keys.
    pub lexicon: BTreeMap<String, Vec<usize>>,
    confusions: Vec<Vec<usize>>,
}

impl Default for SynthInventory {
    fn default() -> Self {
        Self::new()
    }
}

impl SynthInventory {
    pub fn new() -> Self {
        let labels: Vec<&str> = PHONES.iter().map(|(l, _)| *l).collect();
        let phone_set = PhoneSet::from_labels(&labels, Some("SIL")).expect("static inventory");
        let classes = PHONES.iter().map(|(_, c)| *c).collect();
        let idx = |l: &str| phone_set.index_of(l).expect("static label");
        let lexicon = WORDS
            .iter()
            .map(|(w, pron)| (w.to_string(), pron.split(' ').map(idx).collect()))
            .collect();
        let mut confusions = vec![Vec::new(); labels.len()];
        for (a, b) in CONFUSIONS {
            confusions[idx(a)].push(idx(b));
            confusions[idx(b)].push(idx(a));
        }
        Self {
            phone_set,
            classes,
            lexicon,
            confusions,
        }
    }

    pub fn silence(&self) -> usize {
        self.phone_set.silence().expect("inventory has silence")
    }

    fn words(&self) -> Vec<&String> {
        self.lexicon.keys().collect()
    }

    /// Native duration (frames, real-valued) of every phone in the sequence.
    pub fn rule_durations<R: Rng + ?Sized>(&self, phones: &[usize], rate: f64, rng: &mut R) -> Vec<f64> {
        let noise = Normal::new(0.0, 0.2).expect("valid normal");
        (0..phones.len())
            .map(|i| {
                let class = self.classes[phones[i]];
                let mut frames = class.base_frames();
                let next = phones.get(i + 1).map(|&p| self.classes[p]);
                let prev = i.checked_sub(1).map(|j| self.classes[phones[j]]);
                if class.is_vowel() && next.is_some_and(PhoneClass::is_voiced_consonant) {
                    frames += 1.0;
                }
                if !class.is_vowel() && prev.is_some_and(|p| !p.is_vowel()) {
                    frames -= 0.5;
                }
                if i + 1 == phones.len() {
                    frames += 1.5;
                }
                (rate * frames + noise.sample(rng)).max(0.6)
            })
            .collect()
    }

    /// Random sentence of `3..=7` words and its phone sequence.
    pub fn sentence<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<String>, Vec<usize>) {
        let words = self.words();
        let n = rng.random_range(3..=7);
        let chosen: Vec<String> = (0..n)
            .map(|_| (*words.choose(rng).expect("non-empty lexicon")).clone())
            .collect();
        let phones = chosen
            .iter()
            .flat_map(|w| self.lexicon[w].iter().copied())
            .collect();
        (chosen, phones)
    }
}

fn speaking_rate<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.7..1.5)
}

/// Real-valued native duration corpus for training and evaluating the
/// duration model.
pub fn duration_corpus(inv: &SynthInventory, count: usize, seed: u64) -> Vec<DurationSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (_, phones) = inv.sentence(&mut rng);
            let rate = speaking_rate(&mut rng);
            let durations = inv.rule_durations(&phones, rate, &mut rng);
            DurationSample::new(phones, durations).expect("positive durations")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub utterances: usize,
    /// Probability that a phone is replaced by a confusable one.
    pub substitution_rate: f64,
    /// Probability that a phone is held 2-3x too long.
    pub lengthening_rate: f64,
    pub raters: usize,
    /// Range of the per-utterance posterior confidence of spoken phones.
    pub clarity: (f64, f64),
    pub frame_shift_ms: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Native speech: no injected errors.
    pub fn native(utterances: usize, seed: u64) -> Self {
        Self {
            utterances,
            substitution_rate: 0.0,
            lengthening_rate: 0.0,
            raters: 0,
            clarity: (0.93, 0.99),
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
            seed,
        }
    }

    /// Learner speech with substitutions and lengthenings.
    pub fn learner(utterances: usize, seed: u64) -> Self {
        Self {
            utterances,
            substitution_rate: 0.12,
            lengthening_rate: 0.08,
            raters: 5,
            clarity: (0.8, 0.97),
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub words: Vec<String>,
    pub reference: Vec<usize>,
    /// Phone actually rendered for each reference phone.
    pub spoken: Vec<usize>,
    /// `true` where the reference phone is mispronounced.
    pub labels: Vec<bool>,
    pub posteriorgram: Posteriorgram,
    /// Generating segmentation, labelled with reference phones and silences.
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub inventory_size: usize,
    pub utterances: Vec<SynthUtterance>,
    /// `rater_scores[r][u]`: sentence score of rater `r` for utterance `u`, in `[0, 10]`.
    pub rater_scores: Vec<Vec<f64>>,
}

struct Rendered {
    phone: usize,
    length: usize,
    /// Reference phone (or silence) whose segment this is.
    reference: usize,
    /// Extra posterior mass kept on the reference phone when substituted.
    leak: f64,
}

fn dirichlet_like<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(0.3, 1.0).expect("valid gamma");
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng) + 1e-12).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / sum).collect()
}

fn diffuse<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / sum).collect()
}

/// Transition mass at a frame `onset` frames after the segment start and
/// `offset` frames before its end. Offsets decay slower than onsets.
fn transition_mass(onset: Option<(usize, f64)>, offset: Option<(usize, f64)>) -> (f64, f64) {
    let on = onset.map_or(0.0, |(d, a)| a * (-(d as f64) / 0.4).exp());
    let off = offset.map_or(0.0, |(d, a)| a * (-(d as f64) / 0.8).exp());
    let total = on + off;
    if total > MAX_TRANSITION_MASS {
        let k = MAX_TRANSITION_MASS / total;
        (on * k, off * k)
    } else {
        (on, off)
    }
}

fn render(
    segments: &[Rendered],
    num_phones: usize,
    clarity: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let frames: usize = segments.iter().map(|s| s.length).sum();
    let mut probs = Array2::zeros((frames, num_phones));
    let mut t = 0;
    for (i, seg) in segments.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| segments[j].phone);
        let next = segments.get(i + 1).map(|s| s.phone);
        let onset_peak = rng.random_range(0.25..0.5);
        let offset_peak = rng.random_range(0.35..0.7);
        for k in 0..seg.length {
            let (on, off) = transition_mass(
                prev.map(|_| (k, onset_peak)),
                next.map(|_| (seg.length - 1 - k, offset_peak)),
            );
            // occasional high-entropy frame away from the edges
            let burst = if rng.random_bool(BURST_RATE) {
                rng.random_range(0.4..0.8) * (1.0 - on - off)
            } else {
                0.0
            };
            let core = 1.0 - on - off - burst;
            let confidence = (clarity + rng.random_range(-0.03..0.03)).clamp(0.5, 0.995);
            let leak = if seg.leak > 0.0 {
                (seg.leak * rng.random_range(0.6..1.4)).min(confidence - 0.05)
            } else {
                0.0
            };
            let residual = dirichlet_like(num_phones, rng);
            let spread = diffuse(num_phones, rng);
            let mut row = probs.row_mut(t);
            for a in 0..num_phones {
                row[a] = core * (1.0 - confidence) * residual[a]
                    + ((on + off) * (1.0 - NEIGHBOUR_SHARE) + burst) * spread[a];
            }
            row[seg.phone] += core * (confidence - leak);
            row[seg.reference] += core * leak;
            if let Some(p) = prev {
                row[p] += on * NEIGHBOUR_SHARE;
            }
            if let Some(n) = next {
                row[n] += off * NEIGHBOUR_SHARE;
            }
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
            t += 1;
        }
    }
    probs
}

fn frames_of(d: f64) -> usize {
    d.round().max(1.0) as usize
}

/// Generates a corpus of utterances with posteriorgrams, labels and rater
/// scores. Identical configurations give identical corpora.
pub fn generate(inv: &SynthInventory, cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sil = inv.silence();
    let mut utterances = Vec::with_capacity(cfg.utterances);
    let mut error_rates = Vec::with_capacity(cfg.utterances);
    for u in 0..cfg.utterances {
        let (words, reference) = inv.sentence(&mut rng);
        let rate = speaking_rate(&mut rng);
        let native = inv.rule_durations(&reference, rate, &mut rng);

        let mut spoken = reference.clone();
        let mut labels = vec![false; reference.len()];
        let mut lengths: Vec<usize> = native.iter().map(|&d| frames_of(d)).collect();
        let mut leaks = vec![0.0; reference.len()];
        for i in 0..reference.len() {
            let options = &inv.confusions[reference[i]];
            if !options.is_empty() && rng.random_bool(cfg.substitution_rate) {
                spoken[i] = *options.choose(&mut rng).expect("non-empty");
                leaks[i] = rng.random_range(LEAK_LO..LEAK_HI);
                labels[i] = true;
            } else if rng.random_bool(cfg.lengthening_rate) {
                lengths[i] = frames_of(native[i] * rng.random_range(2.0..3.0)).max(lengths[i] + 2);
                labels[i] = true;
            }
        }

        // word boundaries, for optional pauses
        let mut word_end = vec![false; reference.len()];
        let mut pos = 0;
        for w in &words {
            pos += inv.lexicon[w].len();
            word_end[pos - 1] = true;
        }

        let mut segments = vec![Rendered {
            phone: sil,
            length: rng.random_range(2..=4),
            reference: sil,
            leak: 0.0,
        }];
        for i in 0..reference.len() {
            segments.push(Rendered {
                phone: spoken[i],
                length: lengths[i],
                reference: reference[i],
                leak: leaks[i],
            });
            let last = i + 1 == reference.len();
            if last || (word_end[i] && rng.random_bool(0.15)) {
                segments.push(Rendered {
                    phone: sil,
                    length: rng.random_range(2..=4),
                    reference: sil,
                    leak: 0.0,
                });
            }
        }

        let clarity = rng.random_range(cfg.clarity.0..=cfg.clarity.1);
        let probs = render(&segments, inv.phone_set.len(), clarity, &mut rng);
        let posteriorgram =
            Posteriorgram::new(probs, cfg.frame_shift_ms).expect("rendered rows are normalized");
        let mut start = 0;
        let alignment = Alignment::new(
            segments
                .iter()
                .map(|s| {
                    let seg = PhoneSegment::new(s.reference, start, s.length);
                    start += s.length;
                    seg
                })
                .collect(),
        )
        .expect("contiguous segments");

        error_rates.push(labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64);
        utterances.push(SynthUtterance {
            id: format!("utt{u:05}"),
            words,
            reference,
            spoken,
            labels,
            posteriorgram,
            alignment,
        });
    }

    let rater_noise = Normal::new(0.0, 0.9).expect("valid normal");
    let rater_scores = (0..cfg.raters)
        .map(|_| {
            let bias = rng.random_range(-0.7..0.7);
            error_rates
                .iter()
                .map(|e| (9.0 - 22.0 * e + bias + rater_noise.sample(&mut rng)).clamp(0.0, 10.0))
                .collect()
        })
        .collect();

    SynthCorpus {
        inventory_size: inv.phone_set.len(),
        utterances,
        rater_scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_is_consistent() {
        let inv = SynthInventory::new();
        assert_eq!(inv.phone_set.len(), inv.classes.len());
        assert_eq!(inv.classes[inv.silence()], PhoneClass::Silence);
        for phones in inv.lexicon.values() {
            assert!(phones.iter().all(|&p| p != inv.silence()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let inv = SynthInventory::new();
        let a = generate(&inv, &SynthConfig::learner(5, 7));
        let b = generate(&inv, &SynthConfig::learner(5, 7));
        assert_eq!(a, b);
        let c = generate(&inv, &SynthConfig::learner(5, 8));
        assert_ne!(a, c);
    }

    #[test]
    fn alignment_matches_reference() {
        let inv = SynthInventory::new();
        let corpus = generate(&inv, &SynthConfig::learner(10, 1));
        for u in &corpus.utterances {
            assert_eq!(u.alignment.phone_sequence(Some(inv.silence())), u.reference);
            let frames: usize = u.alignment.segments.iter().map(|s| s.length).sum();
            assert_eq!(frames, u.posteriorgram.num_frames());
            assert_eq!(u.labels.len(), u.reference.len());
        }
        assert_eq!(corpus.rater_scores.len(), 5);
        assert!(corpus.rater_scores.iter().flatten().all(|s| (0.0..=10.0).contains(s)));
    }

    #[test]
    fn native_corpus_has_no_errors() {
        let inv = SynthInventory::new();
        let corpus = generate(&inv, &SynthConfig::native(10, 3));
        assert!(corpus.utterances.iter().all(|u| u.labels.iter().all(|l| !l)));
        assert!(corpus.utterances.iter().all(|u| u.spoken == u.reference));
    }

    #[test]
    fn duration_corpus_speed_matches_mean() {
        let inv = SynthInventory::new();
        for s in duration_corpus(&inv, 20, 4) {
            let mean = s.durations.iter().sum::<f64>() / s.len() as f64;
            assert!((s.speed - mean).abs() < 1e-9);
            assert!(s.len() <= 100);
        }
    }
}
