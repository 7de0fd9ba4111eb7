//! Evaluation metrics: duration MAE, detection accuracy/F1 and
//! sentence-level correlation against human raters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts with "mispronounced" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(predicted: &[bool], truth: &[bool]) -> Result<Self> {
        check_lengths(predicted.len(), truth.len())?;
        let mut c = Self::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(self)
    }

    pub fn f1(&self) -> Result<f64> {
        f1(self)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
    }
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Mean absolute error of frame counts, reported in milliseconds.
pub fn mae(pred: &[f64], truth: &[f64], frame_shift_ms: f64) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("mae input"));
    }
    let frames = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64;
    Ok(frames * frame_shift_ms)
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Undefined("accuracy of zero samples".into()));
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

pub fn f1(c: &ConfusionCounts) -> Result<f64> {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return Err(Error::Undefined("f1 with no positives predicted or present".into()));
    }
    Ok(2.0 * c.tp as f64 / denom as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based fractional ranks; tied values share their average rank.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x.len(), y.len())?;
    pearson(&fractional_ranks(x), &fractional_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pcc,
    Scc,
}

/// Mean over raters of the correlation between machine and rater scores.
pub fn mean_rater_correlation(
    scores: &[f64],
    raters: &[Vec<f64>],
    kind: CorrelationKind,
) -> Result<f64> {
    if raters.is_empty() {
        return Err(Error::Empty("raters"));
    }
    let mut total = 0.0;
    for rater in raters {
        total += match kind {
            CorrelationKind::Pcc => pearson(scores, rater)?,
            CorrelationKind::Scc => spearman(scores, rater)?,
        };
    }
    Ok(total / raters.len() as f64)
}
