//! Viterbi forced alignment of a phone sequence directly on frame posteriors.
//!
//! Each mandatory phone occupies at least `min_segment_frames` contiguous
//! frames; optional silence segments may be inserted before, between and after
//! the phones. The objective is the sum of floored log posteriors along the
//! path, plus `silence_self_loop_penalty` for every silence frame after the
//! first of its segment.

use crate::error::{Error, Result};
use crate::gop::floored_ln;
use crate::model::{Alignment, PhoneSegment, PhoneSet, Posteriorgram};

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub allow_optional_silence: bool,
    pub min_segment_frames: usize,
    /// Added to the path score for each silence self-loop.
    pub silence_self_loop_penalty: f64,
    /// Phone index emitted for optional silence segments.
    pub silence_phone: Option<usize>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            allow_optional_silence: false,
            min_segment_frames: 1,
            silence_self_loop_penalty: 0.0,
            silence_phone: None,
        }
    }
}

impl AlignConfig {
    /// Optional silences enabled when the phone set declares a silence phone.
    pub fn for_phone_set(phone_set: &PhoneSet) -> Self {
        Self {
            allow_optional_silence: phone_set.silence().is_some(),
            silence_phone: phone_set.silence(),
            ..Self::default()
        }
    }

    fn silence(&self) -> Result<Option<usize>> {
        if self.min_segment_frames == 0 {
            return Err(Error::Config("min_segment_frames must be >= 1".into()));
        }
        if !self.allow_optional_silence {
            return Ok(None);
        }
        self.silence_phone
            .map(Some)
            .ok_or_else(|| Error::Config("optional silence requested without a silence phone".into()))
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    phone: usize,
    first_state: usize,
    num_states: usize,
    optional: bool,
}

impl Unit {
    fn last_state(&self) -> usize {
        self.first_state + self.num_states - 1
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    unit: usize,
    phone: usize,
    self_loop: bool,
    silence: bool,
}

const NONE: usize = usize::MAX;

/// Left-to-right state graph for one phone sequence.
struct Graph {
    units: Vec<Unit>,
    states: Vec<State>,
}

impl Graph {
    fn build(phones: &[usize], cfg: &AlignConfig, silence: Option<usize>) -> Self {
        let mut units = Vec::new();
        let mut states = Vec::new();
        let mut push_unit = |phone: usize, n: usize, optional: bool| {
            let unit = units.len();
            units.push(Unit {
                phone,
                first_state: states.len(),
                num_states: n,
                optional,
            });
            for i in 0..n {
                states.push(State {
                    unit,
                    phone,
                    self_loop: i + 1 == n,
                    silence: optional,
                });
            }
        };
        for &phone in phones {
            if let Some(sil) = silence {
                push_unit(sil, 1, true);
            }
            push_unit(phone, cfg.min_segment_frames, false);
        }
        if let Some(sil) = silence {
            push_unit(sil, 1, true);
        }
        Self { units, states }
    }

    /// Exit states of the units that can immediately precede `unit`.
    fn entry_predecessors(&self, unit: usize) -> impl Iterator<Item = usize> + '_ {
        let direct = unit.checked_sub(1);
        let skip = direct
            .filter(|&u| self.units[u].optional)
            .and_then(|u| u.checked_sub(1));
        direct
            .into_iter()
            .chain(skip)
            .map(move |u| self.units[u].last_state())
    }

    fn initial_states(&self) -> Vec<usize> {
        let mut out = vec![self.units[0].first_state];
        if self.units[0].optional {
            out.push(self.units[1].first_state);
        }
        out
    }

    fn final_states(&self) -> Vec<usize> {
        let n = self.units.len();
        let mut out = vec![self.units[n - 1].last_state()];
        if self.units[n - 1].optional {
            out.insert(0, self.units[n - 2].last_state());
        }
        out
    }
}

/// Best monotone segmentation of `pg` into `phones`.
///
/// Ties are resolved toward earlier boundaries: a state that can be reached
/// both by staying and by entering keeps the stay, so segments start as early
/// as the optimum allows when traced back from the last frame.
pub fn align(pg: &Posteriorgram, phones: &[usize], cfg: &AlignConfig) -> Result<Alignment> {
    if phones.is_empty() {
        return Err(Error::Empty("phone sequence"));
    }
    let silence = cfg.silence()?;
    for &p in phones.iter().chain(silence.iter()) {
        if p >= pg.num_phones() {
            return Err(Error::PhoneIndex {
                index: p,
                size: pg.num_phones(),
            });
        }
    }
    let frames = pg.num_frames();
    let needed = phones.len() * cfg.min_segment_frames;
    if frames < needed {
        return Err(Error::Infeasible(format!(
            "{} phones need at least {needed} frames, posteriorgram has {frames}",
            phones.len()
        )));
    }

    let graph = Graph::build(phones, cfg, silence);
    let num_states = graph.states.len();
    let emit = |t: usize, s: usize| floored_ln(pg.prob(t, graph.states[s].phone));

    let mut score = vec![f64::NEG_INFINITY; num_states];
    let mut back = vec![NONE; frames * num_states];
    for s in graph.initial_states() {
        score[s] = emit(0, s);
    }
    let mut next = vec![f64::NEG_INFINITY; num_states];
    for t in 1..frames {
        for (s, state) in graph.states.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut arg = NONE;
            let mut consider = |prev: usize, bonus: f64| {
                let cand = score[prev] + bonus;
                if cand > best {
                    best = cand;
                    arg = prev;
                }
            };
            if state.self_loop {
                let bonus = if state.silence {
                    cfg.silence_self_loop_penalty
                } else {
                    0.0
                };
                consider(s, bonus);
            }
            let unit = &graph.units[state.unit];
            if s > unit.first_state {
                consider(s - 1, 0.0);
            } else {
                for prev in graph.entry_predecessors(state.unit) {
                    consider(prev, 0.0);
                }
            }
            next[s] = if arg == NONE {
                f64::NEG_INFINITY
            } else {
                best + emit(t, s)
            };
            back[t * num_states + s] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut best = f64::NEG_INFINITY;
    let mut end = NONE;
    for s in graph.final_states() {
        if score[s] > best {
            best = score[s];
            end = s;
        }
    }
    if end == NONE {
        return Err(Error::Infeasible("no complete path".into()));
    }

    let mut path = vec![0usize; frames];
    let mut s = end;
    for t in (0..frames).rev() {
        path[t] = s;
        if t > 0 {
            s = back[t * num_states + s];
        }
    }

    let mut segments: Vec<PhoneSegment> = Vec::new();
    let mut current_unit = NONE;
    for (t, &s) in path.iter().enumerate() {
        let unit = graph.states[s].unit;
        if unit == current_unit {
            if let Some(last) = segments.last_mut() {
                last.length += 1;
            }
        } else {
            current_unit = unit;
            segments.push(PhoneSegment::new(graph.units[unit].phone, t, 1));
        }
    }
    Alignment::new(segments)
}

/// Sum of floored log posteriors of each segment's phone over its frames.
pub fn alignment_log_score(pg: &Posteriorgram, al: &Alignment) -> Result<f64> {
    let mut total = 0.0;
    for seg in &al.segments {
        seg.check_bounds(pg.num_frames())?;
        if seg.phone >= pg.num_phones() {
            return Err(Error::PhoneIndex {
                index: seg.phone,
                size: pg.num_phones(),
            });
        }
        total += (seg.start..seg.end())
            .map(|t| floored_ln(pg.prob(t, seg.phone)))
            .sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pg(rows: &[Vec<f64>]) -> Posteriorgram {
        Posteriorgram::from_rows(rows, 30.0).unwrap()
    }

    #[test]
    fn two_phone_split() {
        let p = pg(&[
            vec![0.9, 0.1],
            vec![0.9, 0.1],
            vec![0.1, 0.9],
            vec![0.1, 0.9],
        ]);
        let al = align(&p, &[0, 1], &AlignConfig::default()).unwrap();
        assert_eq!(
            al.segments,
            vec![PhoneSegment::new(0, 0, 2), PhoneSegment::new(1, 2, 2)]
        );
    }

    #[test]
    fn single_phone_covers_everything() {
        let p = pg(&[vec![0.3, 0.7], vec![0.8, 0.2], vec![0.5, 0.5]]);
        let al = align(&p, &[1], &AlignConfig::default()).unwrap();
        assert_eq!(al.segments, vec![PhoneSegment::new(1, 0, 3)]);
    }

    #[test]
    fn infeasible_when_too_few_frames() {
        let p = pg(&[vec![0.5, 0.5]]);
        assert!(matches!(
            align(&p, &[0, 1], &AlignConfig::default()),
            Err(Error::Infeasible(_))
        ));
        let cfg = AlignConfig {
            min_segment_frames: 3,
            ..AlignConfig::default()
        };
        let p = pg(&vec![vec![0.5, 0.5]; 5]);
        assert!(align(&p, &[0, 1], &cfg).is_err());
    }

    #[test]
    fn ties_prefer_leftmost_boundary() {
        let p = pg(&vec![vec![0.5, 0.5]; 4]);
        let al = align(&p, &[0, 1], &AlignConfig::default()).unwrap();
        assert_eq!(al.segments[1].start, 1);
    }

    #[test]
    fn min_segment_frames_respected() {
        let p = pg(&[
            vec![0.9, 0.1],
            vec![0.1, 0.9],
            vec![0.1, 0.9],
            vec![0.1, 0.9],
            vec![0.1, 0.9],
        ]);
        let cfg = AlignConfig {
            min_segment_frames: 2,
            ..AlignConfig::default()
        };
        let al = align(&p, &[0, 1], &cfg).unwrap();
        assert!(al.segments.iter().all(|s| s.length >= 2));
    }

    #[test]
    fn optional_silence_is_inserted_where_it_fits() {
        // phones: 0 = SIL, 1 = A, 2 = B
        let p = pg(&[
            vec![0.9, 0.05, 0.05],
            vec![0.05, 0.9, 0.05],
            vec![0.9, 0.05, 0.05],
            vec![0.05, 0.05, 0.9],
        ]);
        let cfg = AlignConfig {
            allow_optional_silence: true,
            silence_phone: Some(0),
            ..AlignConfig::default()
        };
        let al = align(&p, &[1, 2], &cfg).unwrap();
        assert_eq!(
            al.segments,
            vec![
                PhoneSegment::new(0, 0, 1),
                PhoneSegment::new(1, 1, 1),
                PhoneSegment::new(0, 2, 1),
                PhoneSegment::new(2, 3, 1),
            ]
        );
        assert_eq!(al.phone_sequence(Some(0)), vec![1, 2]);
    }

    #[test]
    fn silence_requires_silence_phone() {
        let p = pg(&[vec![0.5, 0.5]]);
        let cfg = AlignConfig {
            allow_optional_silence: true,
            ..AlignConfig::default()
        };
        assert!(matches!(align(&p, &[0], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn log_score_examples() {
        let certain = pg(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let al = Alignment::new(vec![PhoneSegment::new(0, 0, 1), PhoneSegment::new(1, 1, 1)]).unwrap();
        assert_eq!(alignment_log_score(&certain, &al).unwrap(), 0.0);

        let half = pg(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let al = Alignment::new(vec![PhoneSegment::new(0, 0, 2)]).unwrap();
        assert!((alignment_log_score(&half, &al).unwrap() - (-1.386294)).abs() < 1e-6);

        let al = Alignment::new(vec![PhoneSegment::new(1, 0, 1)]).unwrap();
        let zero = pg(&[vec![1.0, 0.0]]);
        assert!((alignment_log_score(&zero, &al).unwrap() - (-23.02585)).abs() < 1e-5);

        let al = Alignment::new(vec![PhoneSegment::new(0, 1, 2)]).unwrap();
        assert!(alignment_log_score(&zero, &al).is_err());
    }
}
