//! Human annotations.
//!
//! Phone lines `utt_id<TAB>position<TAB>0|1` give the label of the phone at a
//! 0-based position of the reference sequence (1 = mispronounced). Sentence
//! lines `utt_id<TAB>rater_id<TAB>score` give a rater's score in `[0, 10]`.
//! The two are told apart by the second field: a position is an unsigned
//! integer, so rater ids must not be purely numeric.

use std::collections::BTreeMap;

use super::{content_lines, fields, parse_num};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotations {
    /// Per utterance, the label of every reference phone in order.
    pub phone_labels: BTreeMap<String, Vec<bool>>,
    /// Per utterance, `(rater_id, score)` in file order.
    pub sentence_scores: BTreeMap<String, Vec<(String, f64)>>,
}

impl Annotations {
    /// Rater ids in sorted order.
    pub fn raters(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sentence_scores
            .values()
            .flatten()
            .map(|(r, _)| r.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Score of `rater` for `utterance`, if given.
    pub fn score(&self, utterance: &str, rater: &str) -> Option<f64> {
        self.sentence_scores
            .get(utterance)?
            .iter()
            .find(|(r, _)| r == rater)
            .map(|(_, s)| *s)
    }
}

pub fn parse_annotations(text: &str, source: &str) -> Result<Annotations> {
    let mut positions: BTreeMap<String, BTreeMap<usize, (bool, usize)>> = BTreeMap::new();
    let mut ann = Annotations::default();
    for (lineno, line) in content_lines(text) {
        let f = fields(line, 3, source, lineno)?;
        if f[0].is_empty() || f[1].is_empty() {
            return Err(Error::parse(source, lineno, "empty field"));
        }
        if f[1].bytes().all(|b| b.is_ascii_digit()) {
            let position: usize = parse_num(f[1], "position", source, lineno)?;
            let label = match f[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(source, lineno, format!("label must be 0 or 1, found '{other}'")))
                }
            };
            let slots = positions.entry(f[0].to_string()).or_default();
            if slots.insert(position, (label, lineno)).is_some() {
                return Err(Error::parse(source, lineno, format!("duplicate position {position}")));
            }
        } else {
            let score: f64 = parse_num(f[2], "score", source, lineno)?;
            if !(0.0..=10.0).contains(&score) {
                return Err(Error::parse(source, lineno, format!("score {score} outside [0, 10]")));
            }
            let scores = ann.sentence_scores.entry(f[0].to_string()).or_default();
            if scores.iter().any(|(r, _)| r == f[1]) {
                return Err(Error::parse(source, lineno, format!("duplicate rater '{}'", f[1])));
            }
            scores.push((f[1].to_string(), score));
        }
    }
    for (utt, slots) in positions {
        let mut labels = Vec::with_capacity(slots.len());
        for (expected, (position, (label, lineno))) in slots.into_iter().enumerate() {
            if position != expected {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("utterance '{utt}' has no label for position {expected}"),
                ));
            }
            labels.push(label);
        }
        ann.phone_labels.insert(utt, labels);
    }
    Ok(ann)
}

pub fn render_annotations(ann: &Annotations) -> String {
    let mut out = String::new();
    for (utt, labels) in &ann.phone_labels {
        for (i, &l) in labels.iter().enumerate() {
            out.push_str(&format!("{utt}\t{i}\t{}\n", u8::from(l)));
        }
    }
    for (utt, scores) in &ann.sentence_scores {
        for (rater, score) in scores {
            out.push_str(&format!("{utt}\t{rater}\t{score}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_line_kinds() {
        let text = "u1\t1\t1\nu1\t0\t0\nu1\tr1\t7.5\nu1\tr2\t6\nu2\t0\t0\n";
        let ann = parse_annotations(text, "a").unwrap();
        assert_eq!(ann.phone_labels["u1"], vec![false, true]);
        assert_eq!(ann.score("u1", "r2"), Some(6.0));
        assert_eq!(ann.raters(), ["r1", "r2"]);
        assert_eq!(parse_annotations(&render_annotations(&ann), "a").unwrap(), ann);
    }

    #[test]
    fn rejects_invalid_lines() {
        assert!(parse_annotations("u1\t0\t2\n", "a").is_err());
        assert!(parse_annotations("u1\tr1\t11\n", "a").is_err());
        assert!(parse_annotations("u1\t1\t1\n", "a").is_err());
        assert!(parse_annotations("u1\t0\t1\nu1\t0\t0\n", "a").is_err());
        assert!(parse_annotations("u1\tr1\t5\nu1\tr1\t6\n", "a").is_err());
    }
}
