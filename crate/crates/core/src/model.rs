//! Domain types shared by the aligner, the scorers and the file formats.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of a posteriorgram before it is rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Frame shift of the sub-sampled acoustic model, in milliseconds.
pub const DEFAULT_FRAME_SHIFT_MS: f64 = 30.0;

/// Ordered phone inventory. Indices are positions in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneSet {
    phones: Vec<String>,
    silence: Option<usize>,
    index: HashMap<String, usize>,
}

impl PhoneSet {
    pub fn new(phones: Vec<String>, silence: Option<usize>) -> Result<Self> {
        if phones.is_empty() {
            return Err(Error::PhoneSet("no phones".into()));
        }
        let mut index = HashMap::with_capacity(phones.len());
        for (i, label) in phones.iter().enumerate() {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::PhoneSet(format!("bad label {label:?} at index {i}")));
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::PhoneSet(format!("duplicate label {label}")));
            }
        }
        if let Some(sil) = silence {
            if sil >= phones.len() {
                return Err(Error::PhoneSet(format!(
                    "silence index {sil} out of range for {} phones",
                    phones.len()
                )));
            }
        }
        Ok(Self {
            phones,
            silence,
            index,
        })
    }

    /// Convenience constructor from string slices; the silence phone is named by label.
    pub fn from_labels(labels: &[&str], silence: Option<&str>) -> Result<Self> {
        let phones: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let silence = match silence {
            Some(label) => Some(
                phones
                    .iter()
                    .position(|p| p == label)
                    .ok_or_else(|| Error::PhoneSet(format!("silence label {label} not in set")))?,
            ),
            None => None,
        };
        Self::new(phones, silence)
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.phones
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.phones.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn silence(&self) -> Option<usize> {
        self.silence
    }

    pub fn is_silence(&self, index: usize) -> bool {
        self.silence == Some(index)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.phones.len() {
            Ok(())
        } else {
            Err(Error::PhoneIndex {
                index,
                size: self.phones.len(),
            })
        }
    }
}

/// Frame-level phone posteriors `p(a'|o_t)`, one row per frame.
///
/// Every constructed value satisfies: at least one frame, entries in `[0, 1]`,
/// rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriorgram {
    probs: Array2<f64>,
    frame_shift_ms: f64,
}

impl Posteriorgram {
    /// Validates and renormalizes `probs`.
    ///
    /// Rows whose sum is within [`ROW_SUM_TOLERANCE`] of one are divided by
    /// their sum; anything further off is rejected.
    pub fn new(mut probs: Array2<f64>, frame_shift_ms: f64) -> Result<Self> {
        if probs.nrows() == 0 {
            return Err(Error::EmptyPosteriorgram);
        }
        if probs.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !(frame_shift_ms.is_finite() && frame_shift_ms > 0.0) {
            return Err(Error::Config(format!("frame shift {frame_shift_ms} ms")));
        }
        for (frame, mut row) in probs.rows_mut().into_iter().enumerate() {
            for (phone, &value) in row.iter().enumerate() {
                if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidProbability {
                        frame,
                        phone,
                        value,
                    });
                }
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSum { frame, sum });
            }
            if sum != 1.0 {
                row.mapv_inplace(|p| p / sum);
            }
        }
        Ok(Self {
            probs,
            frame_shift_ms,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_shift_ms: f64) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let probs = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::new(probs, frame_shift_ms)
    }

    pub fn num_frames(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_phones(&self) -> usize {
        self.probs.ncols()
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    pub fn row(&self, frame: usize) -> ArrayView1<'_, f64> {
        self.probs.row(frame)
    }

    pub fn prob(&self, frame: usize, phone: usize) -> f64 {
        self.probs[[frame, phone]]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.probs
    }

    /// Rows `start..start + length` of the segment.
    pub fn slice_segment(&self, seg: &PhoneSegment) -> Result<ArrayView2<'_, f64>> {
        seg.check_bounds(self.num_frames())?;
        Ok(self.probs.slice(s![seg.start..seg.end(), ..]))
    }
}

/// Checks `pg` against the phone inventory it is meant to be scored with.
pub fn validate_posteriorgram(pg: Posteriorgram, phone_set: &PhoneSet) -> Result<Posteriorgram> {
    if pg.num_phones() != phone_set.len() {
        return Err(Error::DimensionMismatch {
            expected: phone_set.len(),
            found: pg.num_phones(),
        });
    }
    Ok(pg)
}

/// A run of frames assigned to one phone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneSegment {
    pub phone: usize,
    pub start: usize,
    pub length: usize,
}

impl PhoneSegment {
    pub fn new(phone: usize, start: usize, length: usize) -> Self {
        Self {
            phone,
            start,
            length,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn check_bounds(&self, frames: usize) -> Result<()> {
        if self.length == 0 || self.start + self.length > frames {
            return Err(Error::SegmentOutOfBounds {
                start: self.start,
                length: self.length,
                frames,
            });
        }
        Ok(())
    }
}

/// Ordered, non-overlapping phone segments, possibly including silences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    pub segments: Vec<PhoneSegment>,
}

impl Alignment {
    pub fn new(segments: Vec<PhoneSegment>) -> Result<Self> {
        let al = Self { segments };
        al.check_order()?;
        Ok(al)
    }

    fn check_order(&self) -> Result<()> {
        let mut cursor = 0usize;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.length == 0 {
                return Err(Error::InvalidAlignment(format!("segment {i} is empty")));
            }
            if seg.start < cursor {
                return Err(Error::InvalidAlignment(format!(
                    "segment {i} starts at {} before previous end {cursor}",
                    seg.start
                )));
            }
            cursor = seg.end();
        }
        Ok(())
    }

    /// Full validation against a posteriorgram length and phone inventory.
    pub fn validate(&self, frames: usize, phone_set: &PhoneSet) -> Result<()> {
        self.check_order()?;
        for seg in &self.segments {
            seg.check_bounds(frames)?;
            phone_set.check_index(seg.phone)?;
        }
        Ok(())
    }

    /// Segments that are not silence, in order.
    pub fn phone_segments<'a>(
        &'a self,
        silence: Option<usize>,
    ) -> impl Iterator<Item = &'a PhoneSegment> + 'a {
        self.segments
            .iter()
            .filter(move |seg| Some(seg.phone) != silence)
    }

    /// Phone sequence with silences dropped.
    pub fn phone_sequence(&self, silence: Option<usize>) -> Vec<usize> {
        self.phone_segments(silence).map(|seg| seg.phone).collect()
    }

    /// Mean non-silence segment length in frames, the utterance speed.
    pub fn speed(&self, silence: Option<usize>) -> Option<f64> {
        let lengths: Vec<usize> = self.phone_segments(silence).map(|s| s.length).collect();
        if lengths.is_empty() {
            None
        } else {
            Some(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
        }
    }
}

/// One utterance to be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub reference_phones: Vec<usize>,
    pub posteriorgram: Posteriorgram,
    pub alignment: Option<Alignment>,
}

impl Utterance {
    pub fn new(
        id: impl Into<String>,
        reference_phones: Vec<usize>,
        posteriorgram: Posteriorgram,
        alignment: Option<Alignment>,
        phone_set: &PhoneSet,
    ) -> Result<Self> {
        let id = id.into();
        if reference_phones.is_empty() {
            return Err(Error::Empty("reference phones"));
        }
        for &p in &reference_phones {
            phone_set.check_index(p)?;
            if phone_set.is_silence(p) {
                return Err(Error::Config(format!(
                    "utterance {id}: silence in reference phones"
                )));
            }
        }
        let posteriorgram = validate_posteriorgram(posteriorgram, phone_set)?;
        if let Some(al) = &alignment {
            al.validate(posteriorgram.num_frames(), phone_set)?;
            if al.phone_sequence(phone_set.silence()) != reference_phones {
                return Err(Error::InvalidAlignment(format!(
                    "utterance {id}: aligned phones differ from reference"
                )));
            }
        }
        Ok(Self {
            id,
            reference_phones,
            posteriorgram,
            alignment,
        })
    }
}

/// Scoring variants compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Duration-normalized log posterior over the segment.
    Gop,
    /// Log posterior of the center frame only.
    CenterGop,
    /// Entropy-weighted score fused with the duration factor.
    Cagop,
    /// Entropy-weighted score alone (duration factor removed).
    CagopMinusDur,
    /// Plain GOP fused with the duration factor (transition factor removed).
    CagopMinusTa,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Gop,
        Variant::CenterGop,
        Variant::Cagop,
        Variant::CagopMinusDur,
        Variant::CagopMinusTa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gop => "gop",
            Variant::CenterGop => "center_gop",
            Variant::Cagop => "cagop",
            Variant::CagopMinusDur => "cagop_minus_dur",
            Variant::CagopMinusTa => "cagop_minus_ta",
        }
    }

    pub fn uses_duration(self) -> bool {
        matches!(self, Variant::Cagop | Variant::CagopMinusTa)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

/// Per-phone scores for one reference phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneScore {
    pub phone: usize,
    pub segment: PhoneSegment,
    pub gop: f64,
    pub center_gop: f64,
    pub tascore: f64,
    /// Duration mismatch; absent when no duration model was supplied.
    pub delta: Option<f64>,
    /// Entropy-weighted score fused with the duration factor.
    pub cagop: Option<f64>,
    /// The value selected by the report's variant.
    pub score: f64,
    /// Detection flag; absent until thresholds are applied.
    pub mispronounced: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub utterance: String,
    pub variant: Variant,
    pub per_phone: Vec<PhoneScore>,
    pub sentence_score: f64,
}

impl ScoreReport {
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_phone.iter().map(|p| p.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accepts_valid_rows() {
        let pg = Posteriorgram::new(array![[0.5, 0.5], [1.0, 0.0]], 30.0).unwrap();
        assert_eq!(pg.num_frames(), 2);
        let set = PhoneSet::from_labels(&["A", "B"], None).unwrap();
        assert!(validate_posteriorgram(pg, &set).is_ok());
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = Posteriorgram::new(array![[0.7, 0.7]], 30.0).unwrap_err();
        match err {
            Error::RowSum { frame, sum } => {
                assert_eq!(frame, 0);
                assert!((sum - 1.4).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn renormalizes_near_unit_rows() {
        let pg = Posteriorgram::new(array![[0.5000004, 0.4999996 + 1e-7]], 30.0).unwrap();
        let row = pg.row(0);
        assert!((row.sum() - 1.0).abs() <= 1e-15);
        let raw = 0.5000004 + 0.4999996 + 1e-7;
        assert!((row[0] - 0.5000004 / raw).abs() < 1e-16);
    }

    #[test]
    fn rejects_negative_nan_and_dimension_mismatch() {
        assert!(matches!(
            Posteriorgram::new(array![[1.1, -0.1]], 30.0),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(matches!(
            Posteriorgram::new(array![[f64::NAN, 1.0]], 30.0),
            Err(Error::InvalidProbability { .. })
        ));
        let pg = Posteriorgram::new(array![[0.5, 0.5]], 30.0).unwrap();
        let set = PhoneSet::from_labels(&["A", "B", "C"], None).unwrap();
        assert!(matches!(
            validate_posteriorgram(pg, &set),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    fn five_frames() -> Posteriorgram {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|t| {
                let p = 0.1 + 0.15 * t as f64;
                vec![p, 1.0 - p]
            })
            .collect();
        Posteriorgram::from_rows(&rows, 30.0).unwrap()
    }

    #[test]
    fn slice_segment_rows() {
        let pg = five_frames();
        let view = pg.slice_segment(&PhoneSegment::new(0, 1, 2)).unwrap();
        assert_eq!(view.nrows(), 2);
        assert_eq!(view.row(0), pg.row(1));
        assert_eq!(view.row(1), pg.row(2));

        assert!(matches!(
            pg.slice_segment(&PhoneSegment::new(0, 4, 2)),
            Err(Error::SegmentOutOfBounds { .. })
        ));

        let whole = pg.slice_segment(&PhoneSegment::new(0, 0, 5)).unwrap();
        assert_eq!(whole, pg.probs());
    }

    #[test]
    fn phone_set_invariants() {
        assert!(PhoneSet::from_labels(&["A", "A"], None).is_err());
        assert!(PhoneSet::from_labels(&[""], None).is_err());
        assert!(PhoneSet::new(vec!["A".into()], Some(3)).is_err());
        let set = PhoneSet::from_labels(&["SIL", "A"], Some("SIL")).unwrap();
        assert_eq!(set.silence(), Some(0));
        assert_eq!(set.index_of("A"), Some(1));
    }

    #[test]
    fn alignment_order_and_sequence() {
        let al = Alignment::new(vec![
            PhoneSegment::new(0, 0, 2),
            PhoneSegment::new(1, 2, 3),
            PhoneSegment::new(2, 5, 1),
        ])
        .unwrap();
        assert_eq!(al.phone_sequence(Some(0)), vec![1, 2]);
        assert_eq!(al.speed(Some(0)), Some(2.0));
        assert!(Alignment::new(vec![PhoneSegment::new(0, 2, 2), PhoneSegment::new(1, 3, 1)]).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }
}
