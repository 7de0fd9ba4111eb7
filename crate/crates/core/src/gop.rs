//! Segment scores computed from frame posteriors: GOP, center-frame GOP,
//! per-frame posterior entropy and the entropy-weighted transition-aware score.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::model::{PhoneSegment, Posteriorgram};

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-10;

/// Floor applied to entropies before taking reciprocals.
pub const ENTROPY_FLOOR: f64 = 1e-8;

pub(crate) fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Per-frame quantities behind a transition-aware score.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub log_posteriors: Vec<f64>,
    /// Posterior entropy per frame, in nats.
    pub entropies: Vec<f64>,
    /// Normalized reciprocal-entropy weights; they sum to one.
    pub weights: Vec<f64>,
}

fn check(pg: &Posteriorgram, seg: &PhoneSegment) -> Result<()> {
    seg.check_bounds(pg.num_frames())?;
    if seg.phone >= pg.num_phones() {
        return Err(Error::PhoneIndex {
            index: seg.phone,
            size: pg.num_phones(),
        });
    }
    Ok(())
}

/// Mean log posterior of the segment phone over the segment's frames.
pub fn gop(pg: &Posteriorgram, seg: &PhoneSegment) -> Result<f64> {
    check(pg, seg)?;
    let sum: f64 = (seg.start..seg.end())
        .map(|t| floored_ln(pg.prob(t, seg.phone)))
        .sum();
    Ok(sum / seg.length as f64)
}

/// Log posterior of the center frame, `start + length / 2`.
pub fn center_gop(pg: &Posteriorgram, seg: &PhoneSegment) -> Result<f64> {
    check(pg, seg)?;
    let center = seg.start + seg.length / 2;
    Ok(floored_ln(pg.prob(center, seg.phone)))
}

/// Shannon entropy of a probability row in nats, with `0 ln 0 = 0`.
pub fn frame_entropy(row: ArrayView1<'_, f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut entropy = 0.0;
    for &p in row {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!("entry {p}")));
        }
        sum += p;
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    if row.is_empty() || (sum - 1.0).abs() > crate::model::ROW_SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("row sums to {sum}")));
    }
    // Rounding can leave a one-hot row at -0.0 or a tiny negative.
    Ok(entropy.max(0.0))
}

/// Entropy of every frame of the posteriorgram.
pub fn entropy_profile(pg: &Posteriorgram) -> Vec<f64> {
    pg.probs()
        .rows()
        .into_iter()
        .map(|row| frame_entropy(row).expect("posteriorgram rows are valid distributions"))
        .collect()
}

/// Frame-wise log posteriors weighted by normalized reciprocal entropy.
pub fn tascore(pg: &Posteriorgram, seg: &PhoneSegment) -> Result<(f64, FrameScores)> {
    check(pg, seg)?;
    let mut log_posteriors = Vec::with_capacity(seg.length);
    let mut entropies = Vec::with_capacity(seg.length);
    for t in seg.start..seg.end() {
        log_posteriors.push(floored_ln(pg.prob(t, seg.phone)));
        entropies.push(frame_entropy(pg.row(t))?);
    }
    let inverse: Vec<f64> = entropies
        .iter()
        .map(|&e| 1.0 / e.max(ENTROPY_FLOOR))
        .collect();
    let total: f64 = inverse.iter().sum();
    let weights: Vec<f64> = inverse.iter().map(|w| w / total).collect();
    let score = weights
        .iter()
        .zip(&log_posteriors)
        .map(|(w, lp)| w * lp)
        .sum();
    Ok((
        score,
        FrameScores {
            log_posteriors,
            entropies,
            weights,
        },
    ))
}
